//! Mixing measures and the monotone additive statistics they define,
//! `Φ(X) = Σ w_i K_{a_i}(X)`.

use serde::{Deserialize, Serialize};

use crate::cgf::{k_a, ExtReal};
use crate::dist::FiniteDist;
use crate::error::{Error, Result};

/// Tolerance on the total weight accepted by [`MixingMeasure::new`].
pub const WEIGHT_TOL: f64 = 1e-9;
/// Slack allowed in the tail-integral inequalities of [`MixingMeasure::compare`].
pub const COMPARE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub a: ExtReal,
    pub w: f64,
}

/// A finite atomic probability measure on the extended reals.
///
/// Atoms are sorted by location, merged when equal, and carry positive
/// weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct MixingMeasure {
    atoms: Vec<Atom>,
}

/// Wire format `{"atoms": [{"a": 1.0, "w": 0.5}, {"a": "-inf", "w": 0.5}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureJson {
    pub atoms: Vec<Atom>,
}

impl TryFrom<MeasureJson> for MixingMeasure {
    type Error = Error;

    fn try_from(value: MeasureJson) -> Result<Self> {
        MixingMeasure::new(value.atoms.into_iter().map(|t| (t.a, t.w)).collect())
    }
}

impl From<MixingMeasure> for MeasureJson {
    fn from(m: MixingMeasure) -> Self {
        MeasureJson { atoms: m.atoms }
    }
}

/// Risk attitude of the statistic defined by a measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskClass {
    Neutral,
    Averse,
    Seeking,
    Mixed,
}

/// Outcome of [`MixingMeasure::compare`]. `Le` means the first statistic is
/// at most the second on every distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Comparison {
    Le,
    Ge,
    Eq,
    /// `b` is a grid point where the `Le` condition fails.
    Incomparable { b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetMode {
    Max,
    Min,
}

/// Result of [`extend_integer_approx`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegerExtension {
    /// Number of i.i.d. copies actually used.
    pub n: usize,
    /// `Φ(⌊X^{*n}⌋) / n`.
    pub lower: f64,
    /// `Φ(⌊X^{*n}⌋ + 1) / n`.
    pub upper: f64,
    /// Midpoint of `[lower, upper]`.
    pub estimate: f64,
    pub width: f64,
}

fn same_location(x: ExtReal, y: ExtReal) -> bool {
    match (x, y) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= 1e-12 * a.abs().max(1.0),
        _ => x == y,
    }
}

impl MixingMeasure {
    /// Validates, sorts and merges `(location, weight)` pairs. Zero weights
    /// are dropped.
    pub fn new(atoms: Vec<(ExtReal, f64)>) -> Result<Self> {
        let mut sum = 0.0;
        for &(a, w) in &atoms {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::BadMeasure(format!("weight {w} at a = {a}")));
            }
            if let ExtReal::Finite(x) = a {
                if !x.is_finite() {
                    return Err(Error::BadMeasure(format!("location {x}")));
                }
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::BadMeasure(format!("weights sum to {sum}, expected 1")));
        }
        let mut sorted: Vec<(ExtReal, f64)> = atoms.into_iter().filter(|&(_, w)| w > 0.0).collect();
        sorted.sort_by_key(|x| x.0);
        let mut merged: Vec<Atom> = Vec::with_capacity(sorted.len());
        for (a, w) in sorted {
            match merged.last_mut() {
                Some(last) if same_location(last.a, a) => last.w += w,
                _ => merged.push(Atom { a, w }),
            }
        }
        if merged.is_empty() {
            return Err(Error::BadMeasure("no atom with positive weight".into()));
        }
        let total: f64 = merged.iter().map(|t| t.w).sum();
        for t in &mut merged {
            t.w /= total;
        }
        Ok(MixingMeasure { atoms: merged })
    }

    /// Point mass `δ_a`.
    pub fn point(a: impl Into<ExtReal>) -> Self {
        MixingMeasure {
            atoms: vec![Atom { a: a.into(), w: 1.0 }],
        }
    }

    /// Shorthand for finite locations.
    pub fn finite(atoms: &[(f64, f64)]) -> Result<Self> {
        MixingMeasure::new(atoms.iter().map(|&(a, w)| (ExtReal::from_f64(a), w)).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `Φ(X) = Σ w K_a(X)`.
    pub fn phi(&self, d: &FiniteDist) -> f64 {
        let v: f64 = self.atoms.iter().map(|t| t.w * k_a(d, t.a)).sum();
        v.clamp(d.min(), d.max())
    }

    /// `Φ` of a Gaussian with the given mean and variance: `m + c v / 2`
    /// where `c` is the mean of the measure.
    pub fn phi_gaussian(&self, mean: f64, variance: f64) -> Result<f64> {
        if variance < 0.0 || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::BadParams(format!(
                "Gaussian needs finite mean and nonnegative variance (got {mean}, {variance})"
            )));
        }
        let mut c = 0.0;
        for t in &self.atoms {
            match t.a {
                ExtReal::Finite(a) => c += t.w * a,
                other => return Err(Error::InfiniteAtom(other)),
            }
        }
        Ok(mean + c * variance / 2.0)
    }

    pub fn classify_risk(&self) -> RiskClass {
        let zero = ExtReal::Finite(0.0);
        if self.atoms.len() == 1 && self.atoms[0].a == zero {
            RiskClass::Neutral
        } else if self.atoms.iter().all(|t| t.a <= zero) {
            RiskClass::Averse
        } else if self.atoms.iter().all(|t| t.a >= zero) {
            RiskClass::Seeking
        } else {
            RiskClass::Mixed
        }
    }

    /// `∫_{[b, ∞]} (a - b)/a dμ(a)` for `b > 0`; the atom at `+∞` contributes
    /// its full weight.
    pub fn upper_tail_integral(&self, b: f64) -> f64 {
        self.atoms
            .iter()
            .map(|t| match t.a {
                ExtReal::PosInf => t.w,
                ExtReal::Finite(a) if a >= b => t.w * (a - b) / a,
                _ => 0.0,
            })
            .sum()
    }

    /// `∫_{[-∞, b]} (a - b)/a dμ(a)` for `b < 0`; the atom at `-∞`
    /// contributes its full weight.
    pub fn lower_tail_integral(&self, b: f64) -> f64 {
        self.atoms
            .iter()
            .map(|t| match t.a {
                ExtReal::NegInf => t.w,
                ExtReal::Finite(a) if a <= b => t.w * (a - b) / a,
                _ => 0.0,
            })
            .sum()
    }

    fn le_holds_at(&self, other: &MixingMeasure, b: f64) -> bool {
        if b > 0.0 {
            self.upper_tail_integral(b) <= other.upper_tail_integral(b) + COMPARE_TOL
        } else {
            self.lower_tail_integral(b) >= other.lower_tail_integral(b) - COMPARE_TOL
        }
    }

    /// Decides whether `Φ_self <= Φ_other` on all distributions (`Le`), the
    /// reverse, both, or neither, by checking the tail-integral conditions on
    /// `b_grid` (or [`default_b_grid`] when `None`).
    pub fn compare(&self, other: &MixingMeasure, b_grid: Option<&[f64]>) -> Result<Comparison> {
        let owned;
        let grid = match b_grid {
            Some(g) => g,
            None => {
                owned = default_b_grid(self, other);
                &owned
            }
        };
        let grid: Vec<f64> = grid.iter().copied().filter(|&b| b != 0.0 && b.is_finite()).collect();
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let le_fail = grid.iter().copied().find(|&b| !self.le_holds_at(other, b));
        let ge_fail = grid.iter().copied().find(|&b| !other.le_holds_at(self, b));
        Ok(match (le_fail, ge_fail) {
            (None, None) => Comparison::Eq,
            (None, Some(_)) => Comparison::Le,
            (Some(_), None) => Comparison::Ge,
            (Some(b), Some(_)) => Comparison::Incomparable { b },
        })
    }
}

/// Grid on which the tail integrals of two atomic measures are compared.
///
/// Both integrals are continuous and piecewise linear in `b` with kinks at
/// finite atoms, so the atoms, the midpoints between them, points next to
/// zero and one point beyond each extreme cover every linear piece.
pub fn default_b_grid(mu1: &MixingMeasure, mu2: &MixingMeasure) -> Vec<f64> {
    let mut locs: Vec<f64> = mu1
        .atoms
        .iter()
        .chain(&mu2.atoms)
        .filter_map(|t| t.a.finite())
        .filter(|&a| a != 0.0)
        .collect();
    locs.sort_by(f64::total_cmp);
    locs.dedup();
    let mut grid = vec![-1e-6, 1e-6];
    for side in [1.0, -1.0] {
        let mut pts: Vec<f64> = locs.iter().copied().filter(|&a| a * side > 0.0).collect();
        pts.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        let mut prev = 0.0;
        for &a in &pts {
            grid.push((prev + a) / 2.0);
            grid.push(a);
            prev = a;
        }
        grid.push(if prev == 0.0 { side } else { 2.0 * prev });
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// `Ψ(X) = min[X] + Φ(X - min[X])` for a statistic known only on
/// nonnegative distributions.
pub fn extend_from_nonneg(phi_nonneg: impl Fn(&FiniteDist) -> f64, d: &FiniteDist) -> f64 {
    let m = d.min();
    m + phi_nonneg(&d.shift(-m))
}

/// Brackets the extension of a statistic known only on nonnegative integer
/// distributions, `lim (1/n) Φ(⌊X^{*n}⌋)`.
///
/// Starts at `n_max` copies and halves `n` while the support cap is hit.
/// Because `Φ(⌊X^{*n}⌋ + 1) = Φ(⌊X^{*n}⌋) + 1`, the bracket has width `1/n`.
pub fn extend_integer_approx(
    phi_int: impl Fn(&FiniteDist) -> f64,
    d: &FiniteDist,
    n_max: usize,
) -> Result<IntegerExtension> {
    if d.min() < 0.0 {
        return Err(Error::NegativeSupport(d.min()));
    }
    if n_max == 0 {
        return Err(Error::BadParams("n_max must be positive".into()));
    }
    let mut n = n_max;
    let power = loop {
        match d.iid_power(n) {
            Ok(p) => break p,
            Err(Error::SupportBlowup { cap }) => {
                if n == 1 {
                    return Err(Error::SupportBlowup { cap });
                }
                n /= 2;
            }
            Err(e) => return Err(e),
        }
    };
    let floor = power.floor();
    let nf = n as f64;
    let lower = phi_int(&floor) / nf;
    let upper = phi_int(&floor.shift(1.0)) / nf;
    Ok(IntegerExtension {
        n,
        lower,
        upper,
        estimate: 0.5 * (lower + upper),
        width: upper - lower,
    })
}

/// `max` (sub-additive) or `min` (super-additive) of `Φ_μ(X)` over a family.
pub fn phi_set(family: &[MixingMeasure], mode: SetMode, d: &FiniteDist) -> Result<f64> {
    let values = family.iter().map(|mu| mu.phi(d));
    let v = match mode {
        SetMode::Max => values.fold(f64::NEG_INFINITY, f64::max),
        SetMode::Min => values.fold(f64::INFINITY, f64::min),
    };
    if family.is_empty() {
        Err(Error::EmptyFamily)
    } else {
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgf::k_finite;
    use approx::assert_abs_diff_eq;

    fn d(support: &[f64], probs: &[f64]) -> FiniteDist {
        FiniteDist::new(support.to_vec(), probs.to_vec()).unwrap()
    }

    fn m(atoms: &[(f64, f64)]) -> MixingMeasure {
        MixingMeasure::finite(atoms).unwrap()
    }

    #[test]
    fn measure_canonicalizes() {
        let mu = m(&[(1.0, 0.25), (-1.0, 0.5), (1.0, 0.25), (3.0, 0.0)]);
        assert_eq!(
            mu.atoms(),
            &[Atom { a: ExtReal::Finite(-1.0), w: 0.5 }, Atom { a: ExtReal::Finite(1.0), w: 0.5 }]
        );
        assert!(MixingMeasure::finite(&[(1.0, 0.5)]).is_err());
        assert!(MixingMeasure::finite(&[(1.0, 1.5), (2.0, -0.5)]).is_err());
    }

    #[test]
    fn measure_json() {
        let mu = MixingMeasure::new(vec![(ExtReal::NegInf, 0.5), (ExtReal::Finite(2.0), 0.5)]).unwrap();
        let s = serde_json::to_string(&mu).unwrap();
        assert_eq!(s, r#"{"atoms":[{"a":"-inf","w":0.5},{"a":2.0,"w":0.5}]}"#);
        let back: MixingMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, mu);
        let bad: std::result::Result<MixingMeasure, _> =
            serde_json::from_str(r#"{"atoms":[{"a":"inf","w":0.4}]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn phi_examples() {
        let x = d(&[-1.0, 0.5, 2.0], &[0.2, 0.3, 0.5]);
        assert_abs_diff_eq!(MixingMeasure::point(0.0).phi(&x), x.mean(), epsilon = 1e-15);
        let minmax = MixingMeasure::new(vec![(ExtReal::NegInf, 0.5), (ExtReal::PosInf, 0.5)]).unwrap();
        assert_eq!(minmax.phi(&d(&[0.0, 1.0], &[0.5, 0.5])), 0.5);
        let sym = m(&[(1.0, 0.5), (-1.0, 0.5)]);
        assert_abs_diff_eq!(sym.phi(&d(&[-1.0, 1.0], &[0.5, 0.5])), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_closed_form() {
        assert_eq!(MixingMeasure::point(0.0).phi_gaussian(1.5, 2.0).unwrap(), 1.5);
        assert_eq!(MixingMeasure::point(1.0).phi_gaussian(0.0, 1.0).unwrap(), 0.5);
        let with_inf = MixingMeasure::new(vec![(ExtReal::PosInf, 1.0)]).unwrap();
        assert!(matches!(with_inf.phi_gaussian(0.0, 1.0), Err(Error::InfiniteAtom(_))));

        let z = FiniteDist::discretize_trunc_gaussian(1.0, 8.0, 0.01).unwrap();
        let mu = m(&[(-2.0, 0.3), (0.5, 0.3), (2.0, 0.4)]);
        assert_abs_diff_eq!(mu.phi(&z), mu.phi_gaussian(0.0, 1.0).unwrap(), epsilon = 0.02);
    }

    #[test]
    fn risk_classes() {
        assert_eq!(MixingMeasure::point(-2.0).classify_risk(), RiskClass::Averse);
        assert_eq!(m(&[(1.0, 0.5), (-1.0, 0.5)]).classify_risk(), RiskClass::Mixed);
        assert_eq!(MixingMeasure::point(0.0).classify_risk(), RiskClass::Neutral);
        assert_eq!(m(&[(0.0, 0.5), (3.0, 0.5)]).classify_risk(), RiskClass::Seeking);
        assert_eq!(MixingMeasure::point(ExtReal::NegInf).classify_risk(), RiskClass::Averse);
    }

    #[test]
    fn compare_examples() {
        let mu1 = MixingMeasure::point(2.0);
        let mu2 = m(&[(1.0, 0.25), (3.0, 0.75)]);
        assert_eq!(mu1.compare(&mu2, None).unwrap(), Comparison::Le);
        assert_eq!(mu2.compare(&mu1, None).unwrap(), Comparison::Ge);
        assert_eq!(
            MixingMeasure::point(-1.0).compare(&MixingMeasure::point(1.0), None).unwrap(),
            Comparison::Le
        );
        assert_eq!(mu2.compare(&mu2, None).unwrap(), Comparison::Eq);
        assert!(matches!(mu1.compare(&mu2, Some(&[0.0])), Err(Error::EmptyGrid)));

        // a mean-preserving spread of the index in both directions
        let wide = m(&[(-2.0, 0.5), (2.0, 0.5)]);
        let narrow = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        assert!(matches!(wide.compare(&narrow, None).unwrap(), Comparison::Incomparable { .. }));
    }

    #[test]
    fn tail_integral_example() {
        let mu1 = MixingMeasure::point(2.0);
        let mu2 = m(&[(1.0, 0.25), (3.0, 0.75)]);
        for b in [0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0] {
            let pos = |x: f64| x.max(0.0);
            assert_abs_diff_eq!(mu1.upper_tail_integral(b), 0.5 * pos(2.0 - b), epsilon = 1e-15);
            assert_abs_diff_eq!(
                mu2.upper_tail_integral(b),
                0.25 * pos(1.0 - b) + 0.25 * pos(3.0 - b),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn extensions() {
        let mu = m(&[(-1.5, 0.4), (0.7, 0.6)]);
        let x = d(&[-2.0, 0.5, 3.0], &[0.3, 0.3, 0.4]);
        assert_abs_diff_eq!(extend_from_nonneg(|y| mu.phi(y), &x), mu.phi(&x), epsilon = 1e-12);
        assert_eq!(extend_from_nonneg(|y| mu.phi(y), &FiniteDist::point(-3.0)), -3.0);
        let nonneg = d(&[0.0, 2.0], &[0.5, 0.5]);
        assert_eq!(extend_from_nonneg(|y| mu.phi(y), &nonneg), mu.phi(&nonneg));
    }

    #[test]
    fn integer_extension() {
        let mean = |y: &FiniteDist| y.mean();
        let int = d(&[0.0, 2.0], &[0.5, 0.5]);
        let e = extend_integer_approx(mean, &int, 1).unwrap();
        assert_eq!(e.lower, 1.0);
        assert_abs_diff_eq!(e.estimate, 1.0, epsilon = 1.0);

        let half = FiniteDist::point(0.5);
        for n in [1, 7, 64, 1001] {
            let e = extend_integer_approx(mean, &half, n).unwrap();
            assert!(e.lower <= 0.5 && 0.5 < e.upper);
            assert_abs_diff_eq!(e.width, 1.0 / n as f64, epsilon = 1e-12);
            assert!((e.estimate - 0.5).abs() <= 1.0 / n as f64);
        }

        let third = extend_integer_approx(mean, &FiniteDist::point(1.0 / 3.0), 3).unwrap();
        assert_eq!(third.lower, 1.0 / 3.0);
        assert_abs_diff_eq!(third.width, 1.0 / 3.0, epsilon = 1e-15);

        assert!(matches!(
            extend_integer_approx(mean, &d(&[-1.0, 1.0], &[0.5, 0.5]), 4),
            Err(Error::NegativeSupport(_))
        ));
    }

    #[test]
    fn set_valued() {
        let x = d(&[-1.0, 1.0], &[0.5, 0.5]);
        let ends = [MixingMeasure::point(ExtReal::NegInf), MixingMeasure::point(ExtReal::PosInf)];
        assert_eq!(phi_set(&ends, SetMode::Max, &x).unwrap(), 1.0);
        assert_eq!(phi_set(&ends, SetMode::Min, &x).unwrap(), -1.0);
        let mu = m(&[(-2.0, 0.5), (1.0, 0.5)]);
        assert_eq!(phi_set(std::slice::from_ref(&mu), SetMode::Max, &x).unwrap(), mu.phi(&x));
        let fam = [mu.clone(), MixingMeasure::point(0.0)];
        let first = 0.5 * k_finite(&x, -2.0) + 0.5 * k_finite(&x, 1.0);
        assert!(first < 0.0);
        assert_eq!(phi_set(&fam, SetMode::Max, &x).unwrap(), 0.0);
        assert!(matches!(phi_set(&[], SetMode::Max, &x), Err(Error::EmptyFamily)));
    }
}
