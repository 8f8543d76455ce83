//! The normalized cumulant generating function `K_a(X) = (1/a) ln E e^{aX}`
//! and its profile over the extended real line.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{log_sum_exp, FiniteDist};

/// Default number of finite grid points in a [`KProfile`].
pub const DEFAULT_N_GRID: usize = 201;
/// Gaps below `-DOMINANCE_TOL` count as failures in [`k_dominates`].
pub const DOMINANCE_TOL: f64 = 1e-12;

/// Below this value of `|a| * (max - min)` the second-order expansion is used.
const SMALL_A: f64 = 1e-6;

/// A point of `ℝ ∪ {-∞, +∞}`.
#[derive(Debug, Clone, Copy)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    /// Maps `±inf` to the matching endpoint.
    ///
    /// # Panics
    /// On NaN.
    pub fn from_f64(x: f64) -> Self {
        assert!(!x.is_nan(), "ExtReal cannot hold NaN");
        if x == f64::INFINITY {
            ExtReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    /// The value as an `f64`, with the endpoints mapped to `±inf`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x)
    }
}

impl PartialEq for ExtReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtReal {}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            // -0.0 and 0.0 are the same index
            (Finite(x), Finite(y)) => x.partial_cmp(y).unwrap_or_else(|| x.total_cmp(y)),
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => f.write_str("+inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseExtRealError(String);

impl fmt::Display for ParseExtRealError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse {:?} as an extended real", self.0)
    }
}

impl std::error::Error for ParseExtRealError {}

impl FromStr for ExtReal {
    type Err = ParseExtRealError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "+inf" | "Infinity" | "+Infinity" => Ok(ExtReal::PosInf),
            "-inf" | "-Infinity" => Ok(ExtReal::NegInf),
            t => match t.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(ExtReal::Finite(x)),
                _ => Err(ParseExtRealError(s.to_string())),
            },
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::NegInf => serializer.serialize_str("-inf"),
            ExtReal::Finite(x) => serializer.serialize_f64(*x),
            ExtReal::PosInf => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(x) if x.is_finite() => Ok(ExtReal::Finite(x)),
            Repr::Num(x) => Err(serde::de::Error::custom(format!("non-finite number {x}"))),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `ln E e^{aX}` for finite `a`. Overflows to `inf` only when the true value
/// does not fit in an `f64`.
pub fn ln_mgf(d: &FiniteDist, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let c = if a > 0.0 { d.max() } else { d.min() };
    let v: Vec<f64> = d
        .support()
        .iter()
        .zip(d.ln_probs())
        .map(|(&x, &lp)| lp + a * (x - c))
        .collect();
    a * c + log_sum_exp(&v)
}

/// `K_a(X)`: the mean at `a = 0`, the maximum at `+inf`, the minimum at `-inf`.
pub fn k_a(d: &FiniteDist, a: ExtReal) -> f64 {
    match a {
        ExtReal::NegInf => d.min(),
        ExtReal::PosInf => d.max(),
        ExtReal::Finite(a) => k_finite(d, a),
    }
}

/// [`k_a`] at a finite index.
pub fn k_finite(d: &FiniteDist, a: f64) -> f64 {
    if d.is_point() {
        return d.min();
    }
    let (lo, hi) = (d.min(), d.max());
    let range = hi - lo;
    let t = a.abs() * range;
    let k = if a == 0.0 {
        d.mean()
    } else if t < SMALL_A {
        d.mean() + a * d.variance() / 2.0
    } else if t <= 1.0 {
        // ln E e^{a(X-m)} = ln(1 + E[expm1(a(X-m))]) keeps full relative
        // precision when the exponent stays small
        let m = d.mean();
        let s: f64 = d.atoms().map(|(x, p)| p * (a * (x - m)).exp_m1()).sum();
        m + s.ln_1p() / a
    } else if !t.is_finite() {
        if a > 0.0 {
            hi
        } else {
            lo
        }
    } else {
        let c = if a > 0.0 { hi } else { lo };
        let v: Vec<f64> = d
            .support()
            .iter()
            .zip(d.ln_probs())
            .map(|(&x, &lp)| lp + a * (x - c))
            .collect();
        c + log_sum_exp(&v) / a
    };
    k.clamp(lo, hi)
}

/// The sampled function `a ↦ K_a(X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KProfile {
    pub grid: Vec<ExtReal>,
    pub values: Vec<f64>,
}

/// `-inf`, `tan(πt/2)` for `n_grid` equispaced `t` in `(-1, 1)` (plus `t = 0`
/// if the spacing misses it), then `+inf`.
pub fn profile_grid(n_grid: usize) -> Vec<ExtReal> {
    let n = n_grid.max(3);
    let mut grid = Vec::with_capacity(n + 3);
    grid.push(ExtReal::NegInf);
    let mut ts: Vec<f64> = (1..=n)
        .map(|k| 2.0 * k as f64 / (n as f64 + 1.0) - 1.0)
        .collect();
    if n.is_multiple_of(2) {
        ts.push(0.0);
        ts.sort_by(f64::total_cmp);
    } else {
        // the middle point is 0 up to rounding
        ts[n / 2] = 0.0;
    }
    grid.extend(
        ts.into_iter()
            .map(|t| ExtReal::Finite((std::f64::consts::FRAC_PI_2 * t).tan())),
    );
    grid.push(ExtReal::PosInf);
    grid
}

pub fn k_profile(d: &FiniteDist, n_grid: usize) -> KProfile {
    let grid = profile_grid(n_grid);
    let values = grid.iter().map(|&a| k_a(d, a)).collect();
    KProfile { grid, values }
}

/// Verdict of [`k_dominates`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum KDominance {
    Strict,
    Weak,
    Fails { a: ExtReal, gap: f64 },
}

/// Compares `K_a(X)` and `K_a(Y)` on [`profile_grid`]`(n_grid)`.
///
/// `Fails` is exact: the returned `a` is a real obstruction. `Strict` only
/// certifies the grid points.
pub fn k_dominates(dx: &FiniteDist, dy: &FiniteDist, n_grid: usize, margin: f64) -> KDominance {
    k_dominates_on(dx, dy, &profile_grid(n_grid), margin)
}

/// [`k_dominates`] on a caller-supplied grid.
pub fn k_dominates_on(dx: &FiniteDist, dy: &FiniteDist, grid: &[ExtReal], margin: f64) -> KDominance {
    let mut strict = true;
    for &a in grid {
        let gap = k_a(dx, a) - k_a(dy, a);
        if gap < -DOMINANCE_TOL {
            return KDominance::Fails { a, gap };
        }
        if gap <= margin {
            strict = false;
        }
    }
    if strict {
        KDominance::Strict
    } else {
        KDominance::Weak
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(support: &[f64], probs: &[f64]) -> FiniteDist {
        FiniteDist::new(support.to_vec(), probs.to_vec()).unwrap()
    }

    fn coin_and_uniform() -> (FiniteDist, FiniteDist) {
        (
            d(&[0.0, 1.0], &[2.0 / 3.0, 1.0 / 3.0]),
            FiniteDist::discretize_uniform(-0.6, 0.4, 1e-3).unwrap(),
        )
    }

    #[test]
    fn k_a_examples() {
        let w = d(&[-1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(k_a(&w, ExtReal::Finite(0.0)), 0.0);
        let x = d(&[0.0, 1.0], &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(k_a(&x, ExtReal::PosInf), 1.0);
        assert_eq!(k_a(&x, ExtReal::NegInf), 0.0);
        assert_abs_diff_eq!(k_finite(&w, 1.0), 0.4337808304830272, epsilon = 1e-12);
        assert_abs_diff_eq!(k_finite(&w, -1.0), -0.4337808304830272, epsilon = 1e-12);
    }

    #[test]
    fn small_a_branches_agree() {
        let x = d(&[-0.3, 0.2, 1.7], &[0.2, 0.5, 0.3]);
        let range = 2.0;
        for a in [0.9e-6 / range, 1.1e-6 / range, -1.1e-6 / range, 1e-4, 0.49, 0.51] {
            let exact = ln_mgf(&x, a) / a;
            assert_abs_diff_eq!(k_finite(&x, a), exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn extreme_indices_stay_bounded() {
        let x = d(&[0.0, 1.0], &[0.999, 0.001]);
        assert_abs_diff_eq!(k_finite(&x, 1e6), 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(k_finite(&x, -1e6), 0.0, epsilon = 1e-5);
        assert_eq!(k_finite(&x, 1e308), 1.0);
        let big = FiniteDist::xnb(4096, 1.0).unwrap();
        assert_abs_diff_eq!(k_finite(&big, 2.0), 2048.0, epsilon = 1e-9);
    }

    #[test]
    fn profile_shape() {
        let p = k_profile(&FiniteDist::point(2.5), 11);
        assert!(p.values.iter().all(|&v| v == 2.5));
        let x = d(&[-1.0, 0.5, 2.0], &[0.2, 0.3, 0.5]);
        for n in [3, 4, 201] {
            let p = k_profile(&x, n);
            assert_eq!(p.values[0], -1.0);
            assert_eq!(*p.values.last().unwrap(), 2.0);
            assert!(p.grid.contains(&ExtReal::Finite(0.0)));
            assert!(p.grid.windows(2).all(|w| w[0] < w[1]));
            assert!(p.values.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        }
    }

    #[test]
    fn sign_identity() {
        let w = d(&[-1.0, 1.0], &[0.5, 0.5]);
        assert_abs_diff_eq!(k_finite(&w, -1.0), -k_finite(&w.negate(), 1.0), epsilon = 1e-15);
    }

    #[test]
    fn dominance_examples() {
        let y = d(&[-1.0, 0.5, 2.0], &[0.2, 0.3, 0.5]);
        let x = y.shift(1.0);
        assert_eq!(k_dominates(&x, &y, 201, 0.999), KDominance::Strict);
        assert_eq!(k_dominates(&y, &y, 201, 0.0), KDominance::Weak);
        assert!(matches!(k_dominates(&y, &x, 201, 0.0), KDominance::Fails { .. }));

        let (fx, fy) = coin_and_uniform();
        assert_eq!(k_dominates(&fx, &fy, 201, 0.0), KDominance::Strict);
    }

    #[test]
    fn ext_real_order_and_json() {
        let mut v = vec![
            ExtReal::PosInf,
            ExtReal::Finite(1.0),
            ExtReal::NegInf,
            ExtReal::Finite(-3.0),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                ExtReal::NegInf,
                ExtReal::Finite(-3.0),
                ExtReal::Finite(1.0),
                ExtReal::PosInf
            ]
        );
        assert_eq!(ExtReal::Finite(0.0), ExtReal::Finite(-0.0));
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["-inf",-3.0,1.0,"inf"]"#);
        let back: Vec<ExtReal> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!("+inf".parse::<ExtReal>().unwrap(), ExtReal::PosInf);
        assert!("nan".parse::<ExtReal>().is_err());
        assert_eq!(ExtReal::from_f64(f64::NEG_INFINITY), ExtReal::NegInf);
    }
}
