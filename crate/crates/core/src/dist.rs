//! Finite-support probability distributions on the real line.
//!
//! A [`FiniteDist`] is kept in canonical form: support strictly increasing,
//! points closer than [`SNAP_TOL`] merged, every atom carrying positive mass,
//! and total mass renormalized to one. Masses are stored as natural logs next
//! to their linear values so that atoms far below `f64::MIN_POSITIVE` (the
//! `e^{-bn}` atom of [`FiniteDist::xnb`] for large `n`, say) survive and keep
//! contributing to exponential moments.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Support points closer than this are merged.
pub const SNAP_TOL: f64 = 1e-9;
/// Tolerance on the total mass accepted by [`FiniteDist::new`].
pub const MASS_TOL: f64 = 1e-9;
/// Default cap on the number of atoms produced by convolution.
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 20;

/// Largest `|ln w|` for which `exp` of a relative Gaussian weight is nonzero.
const EXP_UNDERFLOW: f64 = 745.0;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistJson", into = "DistJson")]
pub struct FiniteDist {
    support: Vec<f64>,
    probs: Vec<f64>,
    ln_probs: Vec<f64>,
}

/// Wire format `{"support": [...], "probs": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistJson {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl TryFrom<DistJson> for FiniteDist {
    type Error = Error;

    fn try_from(value: DistJson) -> Result<Self> {
        FiniteDist::new(value.support, value.probs)
    }
}

impl From<FiniteDist> for DistJson {
    fn from(d: FiniteDist) -> Self {
        DistJson {
            support: d.support,
            probs: d.probs,
        }
    }
}

impl fmt::Debug for FiniteDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FiniteDist{")?;
        for (i, (x, p)) in self.atoms().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}↦{p}")?;
        }
        f.write_str("}")
    }
}

/// Mean, variance and the extreme points of a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

/// Builds canonical atoms from a stream sorted by support point.
struct Accumulator {
    support: Vec<f64>,
    ln_probs: Vec<f64>,
    anchor: f64,
    cluster_max: f64,
    cluster_sum: f64,
    open: bool,
    cap: usize,
}

impl Accumulator {
    fn new(cap: usize) -> Self {
        Accumulator {
            support: Vec::new(),
            ln_probs: Vec::new(),
            anchor: 0.0,
            cluster_max: f64::NEG_INFINITY,
            cluster_sum: 0.0,
            open: false,
            cap,
        }
    }

    fn push(&mut self, x: f64, lp: f64) -> Result<()> {
        if lp == f64::NEG_INFINITY {
            return Ok(());
        }
        if self.open && x - self.anchor <= SNAP_TOL {
            // streaming log-sum-exp
            if lp <= self.cluster_max {
                self.cluster_sum += (lp - self.cluster_max).exp();
            } else {
                self.cluster_sum = self.cluster_sum * (self.cluster_max - lp).exp() + 1.0;
                self.cluster_max = lp;
            }
            return Ok(());
        }
        self.flush()?;
        self.anchor = x;
        self.cluster_max = lp;
        self.cluster_sum = 1.0;
        self.open = true;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if self.open {
            if self.support.len() >= self.cap {
                return Err(Error::SupportBlowup { cap: self.cap });
            }
            self.support.push(self.anchor);
            self.ln_probs.push(self.cluster_max + self.cluster_sum.ln());
            self.open = false;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<FiniteDist> {
        self.flush()?;
        if self.support.is_empty() {
            return Err(Error::LengthMismatch {
                support: 0,
                probs: 0,
            });
        }
        let total = log_sum_exp(&self.ln_probs);
        let ln_probs: Vec<f64> = self.ln_probs.iter().map(|lp| lp - total).collect();
        let probs = ln_probs.iter().map(|lp| lp.exp()).collect();
        Ok(FiniteDist {
            support: self.support,
            probs,
            ln_probs,
        })
    }
}

/// `ln Σ e^{v_i}`, shifted by the maximum.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn canonicalize(mut atoms: Vec<(f64, f64)>, cap: usize) -> Result<FiniteDist> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = Accumulator::new(cap);
    for (x, lp) in atoms {
        acc.push(x, lp)?;
    }
    acc.finish()
}

#[derive(PartialEq)]
struct HeapEntry {
    x: f64,
    row: usize,
    col: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.row.cmp(&other.row))
            .then(self.col.cmp(&other.col))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FiniteDist {
    /// Validates and canonicalizes a distribution given as parallel lists.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() || support.is_empty() {
            return Err(Error::LengthMismatch {
                support: support.len(),
                probs: probs.len(),
            });
        }
        for (index, (&x, &p)) in support.iter().zip(&probs).enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { index, value: x });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite { index, value: p });
            }
            if p < 0.0 {
                return Err(Error::NegativeProb { index, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::MassNotOne { sum });
        }
        let atoms = support
            .into_iter()
            .zip(probs)
            .map(|(x, p)| (x, p.ln()))
            .collect();
        canonicalize(atoms, usize::MAX)
    }

    /// Builds a distribution from unnormalized log-weights.
    ///
    /// Weights equal to `-inf` drop their atom; the rest are normalized to
    /// total mass one.
    pub fn from_ln_weights(support: Vec<f64>, ln_weights: Vec<f64>) -> Result<Self> {
        if support.len() != ln_weights.len() || support.is_empty() {
            return Err(Error::LengthMismatch {
                support: support.len(),
                probs: ln_weights.len(),
            });
        }
        for (index, (&x, &w)) in support.iter().zip(&ln_weights).enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { index, value: x });
            }
            if w.is_nan() || w == f64::INFINITY {
                return Err(Error::NonFinite { index, value: w });
            }
        }
        canonicalize(support.into_iter().zip(ln_weights).collect(), usize::MAX)
    }

    /// Point mass at `c`.
    pub fn point(c: f64) -> Self {
        assert!(c.is_finite(), "point mass needs a finite location");
        FiniteDist {
            support: vec![c],
            probs: vec![1.0],
            ln_probs: vec![0.0],
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Natural logs of the atom masses; finite even when `probs()` underflows.
    pub fn ln_probs(&self) -> &[f64] {
        &self.ln_probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn is_point(&self) -> bool {
        self.support.len() == 1
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        self.support[self.support.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms().map(|(x, p)| p * (x - m) * (x - m)).sum()
    }

    pub fn moments(&self) -> Moments {
        Moments {
            mean: self.mean(),
            variance: self.variance(),
            min: self.min(),
            max: self.max(),
        }
    }

    /// Right-continuous cdf, `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= x);
        if k == self.support.len() {
            return 1.0;
        }
        self.probs[..k].iter().sum::<f64>().min(1.0)
    }

    /// Distribution of `X + c`.
    pub fn shift(&self, c: f64) -> Self {
        if c == 0.0 {
            return self.clone();
        }
        let atoms = self
            .support
            .iter()
            .zip(&self.ln_probs)
            .map(|(&x, &lp)| (x + c, lp))
            .collect();
        canonicalize(atoms, usize::MAX).expect("shift keeps a nonempty support")
    }

    /// Distribution of `-X`.
    pub fn negate(&self) -> Self {
        FiniteDist {
            support: self.support.iter().rev().map(|x| -x).collect(),
            probs: self.probs.iter().rev().copied().collect(),
            ln_probs: self.ln_probs.iter().rev().copied().collect(),
        }
    }

    /// Distribution of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &FiniteDist) -> Result<Self> {
        self.convolve_capped(other, DEFAULT_SUPPORT_CAP)
    }

    pub fn convolve_capped(&self, other: &FiniteDist, cap: usize) -> Result<Self> {
        if other.is_point() {
            return Ok(self.shift(other.support[0]));
        }
        if self.is_point() {
            return Ok(other.shift(self.support[0]));
        }
        let (rows, cols) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        // k-way merge of the row-shifted copies of `cols`, each already sorted
        let mut heap = BinaryHeap::with_capacity(rows.len());
        for (row, &x) in rows.support.iter().enumerate() {
            heap.push(Reverse(HeapEntry {
                x: x + cols.support[0],
                row,
                col: 0,
            }));
        }
        let mut acc = Accumulator::new(cap);
        while let Some(Reverse(HeapEntry { x, row, col })) = heap.pop() {
            acc.push(x, rows.ln_probs[row] + cols.ln_probs[col])?;
            if col + 1 < cols.len() {
                heap.push(Reverse(HeapEntry {
                    x: rows.support[row] + cols.support[col + 1],
                    row,
                    col: col + 1,
                }));
            }
        }
        acc.finish()
    }

    /// Distribution of the sum of `n` i.i.d. copies, by binary powering.
    pub fn iid_power(&self, n: usize) -> Result<Self> {
        self.iid_power_capped(n, DEFAULT_SUPPORT_CAP)
    }

    pub fn iid_power_capped(&self, n: usize, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParams("iid_power needs n >= 1".into()));
        }
        let mut result: Option<FiniteDist> = None;
        let mut base = self.clone();
        let mut k = n;
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.convolve_capped(&base, cap)?,
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.convolve_capped(&base, cap)?;
        }
        Ok(result.expect("n >= 1"))
    }

    /// `X_λY`: equal to `d1` with probability `lambda`, else `d2`.
    pub fn mixture(d1: &FiniteDist, d2: &FiniteDist, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::LambdaOutOfRange(lambda));
        }
        let l1 = lambda.ln();
        let l2 = (-lambda).ln_1p();
        let atoms = d1
            .support
            .iter()
            .zip(&d1.ln_probs)
            .map(|(&x, &lp)| (x, lp + l1))
            .chain(
                d2.support
                    .iter()
                    .zip(&d2.ln_probs)
                    .map(|(&x, &lp)| (x, lp + l2)),
            )
            .collect();
        canonicalize(atoms, usize::MAX)
    }

    /// Midpoint discretization of the uniform distribution on `[a, b]`.
    ///
    /// The interval is cut into the fewest equal cells of width at most
    /// `step`; each cell's mass sits at its midpoint, so the mean is exact.
    pub fn discretize_uniform(a: f64, b: f64, step: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b && step > 0.0 && step.is_finite()) {
            return Err(Error::BadInterval { a, b, step });
        }
        let cells = cell_count((b - a) / step);
        if cells > DEFAULT_SUPPORT_CAP {
            return Err(Error::SupportBlowup {
                cap: DEFAULT_SUPPORT_CAP,
            });
        }
        let width = (b - a) / cells as f64;
        let ln_p = -(cells as f64).ln();
        let atoms = (0..cells)
            .map(|i| (a + (i as f64 + 0.5) * width, ln_p))
            .collect();
        canonicalize(atoms, usize::MAX)
    }

    /// Symmetric midpoint discretization of the Gaussian density
    /// `e^{-x²/2V}` truncated to `[-T, T]`.
    ///
    /// The interval is split into an odd number of equal cells of width at
    /// most `step`, so zero is always an atom and the atoms are exactly
    /// `k * width` for `|k| <= K`. Cells whose relative weight underflows are
    /// absent.
    pub fn discretize_trunc_gaussian(variance: f64, t: f64, step: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && t > 0.0 && t.is_finite()) {
            return Err(Error::BadParams(format!(
                "truncated Gaussian needs V > 0 and T > 0 (V = {variance}, T = {t})"
            )));
        }
        if !(step > 0.0 && step <= t / 4.0) {
            return Err(Error::BadParams(format!(
                "truncated Gaussian needs 0 < step <= T/4 (step = {step}, T = {t})"
            )));
        }
        let mut cells = cell_count(2.0 * t / step);
        if cells.is_multiple_of(2) {
            cells += 1;
        }
        let half = cells / 2;
        let width = 2.0 * t / cells as f64;
        let reach = ((2.0 * variance * EXP_UNDERFLOW).sqrt() / width).floor();
        let k_max = if reach < half as f64 {
            reach as usize
        } else {
            half
        };
        if 2 * k_max + 1 > DEFAULT_SUPPORT_CAP {
            return Err(Error::SupportBlowup {
                cap: DEFAULT_SUPPORT_CAP,
            });
        }
        let mut support = Vec::with_capacity(2 * k_max + 1);
        let mut ln_w = Vec::with_capacity(2 * k_max + 1);
        for k in -(k_max as i64)..=(k_max as i64) {
            let x = k as f64 * width;
            let kk = (k.unsigned_abs()) as f64 * width;
            support.push(x);
            ln_w.push(-kk * kk / (2.0 * variance));
        }
        let total = log_sum_exp(&ln_w);
        let ln_probs: Vec<f64> = ln_w.iter().map(|w| w - total).collect();
        let probs = ln_probs.iter().map(|lp| lp.exp()).collect();
        Ok(FiniteDist {
            support,
            probs,
            ln_probs,
        })
    }

    /// Two-point family `P(X = n) = e^{-bn}`, `P(X = 0) = 1 - e^{-bn}`.
    pub fn xnb(n: u32, b: f64) -> Result<Self> {
        if n == 0 || !(b > 0.0 && b.is_finite()) {
            return Err(Error::BadParams(format!(
                "xnb needs n >= 1 and b > 0 (n = {n}, b = {b})"
            )));
        }
        let bn = b * n as f64;
        let ln_top = -bn;
        let ln_zero = (-(-bn).exp_m1()).ln();
        FiniteDist::from_ln_weights(vec![0.0, n as f64], vec![ln_zero, ln_top])
    }

    /// Distribution of `⌊X⌋`, treating points within [`SNAP_TOL`] below an
    /// integer as that integer.
    pub fn floor(&self) -> Self {
        let atoms = self
            .support
            .iter()
            .zip(&self.ln_probs)
            .map(|(&x, &lp)| ((x + SNAP_TOL).floor(), lp))
            .collect();
        canonicalize(atoms, usize::MAX).expect("floor keeps a nonempty support")
    }

    /// Total variation distance `½ Σ |p - q|` over the merged support.
    pub fn total_variation(&self, other: &FiniteDist) -> f64 {
        let mut sum = 0.0;
        merge_walk(self, other, |_, p, q| sum += (p - q).abs());
        0.5 * sum
    }
}

/// Walks the merged support of two distributions in increasing order,
/// calling `f(x, p_first, p_second)` with the masses each puts on `x`.
/// Points within [`SNAP_TOL`] of each other count as the same point.
pub(crate) fn merge_walk(d1: &FiniteDist, d2: &FiniteDist, mut f: impl FnMut(f64, f64, f64)) {
    let (s1, p1) = (d1.support(), d1.probs());
    let (s2, p2) = (d2.support(), d2.probs());
    let (mut i, mut j) = (0, 0);
    while i < s1.len() || j < s2.len() {
        if j == s2.len() || (i < s1.len() && s1[i] < s2[j] - SNAP_TOL) {
            f(s1[i], p1[i], 0.0);
            i += 1;
        } else if i == s1.len() || s2[j] < s1[i] - SNAP_TOL {
            f(s2[j], 0.0, p2[j]);
            j += 1;
        } else {
            f(s1[i].min(s2[j]), p1[i], p2[j]);
            i += 1;
            j += 1;
        }
    }
}

fn cell_count(ratio: f64) -> usize {
    // tolerate ratios like 1000.0000000000001 from decimal steps
    let n = (ratio - 1e-9).ceil();
    if n < 1.0 {
        1
    } else {
        n as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(support: &[f64], probs: &[f64]) -> FiniteDist {
        FiniteDist::new(support.to_vec(), probs.to_vec()).unwrap()
    }

    fn assert_dist_eq(a: &FiniteDist, b: &FiniteDist, tol: f64) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for ((x, p), (y, q)) in a.atoms().zip(b.atoms()) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
            assert_abs_diff_eq!(p, q, epsilon = tol);
        }
    }

    #[test]
    fn make_canonicalizes() {
        let x = d(&[0.0, 1.0], &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(x.support(), &[0.0, 1.0]);
        assert_abs_diff_eq!(x.probs()[0], 2.0 / 3.0, epsilon = 1e-15);

        let p = d(&[5.0], &[1.0]);
        assert!(p.is_point());
        assert_eq!(p.min(), 5.0);

        let s = d(&[1.0, 0.0], &[0.5, 0.5]);
        assert_eq!(s.support(), &[0.0, 1.0]);
    }

    #[test]
    fn make_drops_zero_mass_and_snaps() {
        let x = d(&[0.0, 1.0, 1.0 + 1e-12, 2.0], &[0.5, 0.25, 0.25, 0.0]);
        assert_eq!(x.support(), &[0.0, 1.0]);
        assert_abs_diff_eq!(x.probs()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn make_errors() {
        assert!(matches!(
            FiniteDist::new(vec![0.0, 1.0], vec![1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            FiniteDist::new(vec![], vec![]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            FiniteDist::new(vec![0.0, 1.0], vec![1.5, -0.5]),
            Err(Error::NegativeProb { index: 1, .. })
        ));
        assert!(matches!(
            FiniteDist::new(vec![0.0, 1.0], vec![0.5, 0.4]),
            Err(Error::MassNotOne { .. })
        ));
        assert!(matches!(
            FiniteDist::new(vec![f64::NAN], vec![1.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn convolve_examples() {
        let coin = d(&[0.0, 1.0], &[0.5, 0.5]);
        let two = coin.convolve(&coin).unwrap();
        assert_dist_eq(&two, &d(&[0.0, 1.0, 2.0], &[0.25, 0.5, 0.25]), 1e-15);

        let shifted = coin.convolve(&FiniteDist::point(3.0)).unwrap();
        assert_dist_eq(&shifted, &coin.shift(3.0), 0.0);
        assert_eq!(coin.convolve(&FiniteDist::point(0.0)).unwrap(), coin);
    }

    #[test]
    fn convolve_sign_walk_matches_enumeration() {
        let w = d(&[-1.0, 1.0], &[0.5, 0.5]);
        let w3 = w.convolve(&w).unwrap().convolve(&w).unwrap();
        // enumerate the 8 sign sequences
        let mut mass = std::collections::BTreeMap::new();
        for bits in 0..8u32 {
            let s: i32 = (0..3).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).sum();
            *mass.entry(s).or_insert(0.0) += 0.125;
        }
        let expected = d(
            &mass.keys().map(|&k| k as f64).collect::<Vec<_>>(),
            &mass.values().copied().collect::<Vec<_>>(),
        );
        assert_dist_eq(&w3, &expected, 1e-15);
        assert_dist_eq(
            &w3,
            &d(&[-3.0, -1.0, 1.0, 3.0], &[0.125, 0.375, 0.375, 0.125]),
            1e-15,
        );
    }

    #[test]
    fn convolve_respects_cap() {
        let a = FiniteDist::new((0..100).map(|i| i as f64).collect(), vec![0.01; 100]).unwrap();
        let b = FiniteDist::new((0..100).map(|i| i as f64 * 0.001).collect(), vec![0.01; 100])
            .unwrap();
        assert!(matches!(
            a.convolve_capped(&b, 500),
            Err(Error::SupportBlowup { cap: 500 })
        ));
    }

    #[test]
    fn iid_power_examples() {
        let coin = d(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(coin.iid_power(1).unwrap(), coin);
        let b4 = coin.iid_power(4).unwrap();
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 16.0);
        assert_dist_eq(&b4, &d(&[0.0, 1.0, 2.0, 3.0, 4.0], &binom), 1e-15);

        let p = FiniteDist::point(2.5).iid_power(7).unwrap();
        assert_eq!(p.support(), &[17.5]);
        assert!(matches!(coin.iid_power(0), Err(Error::BadParams(_))));
    }

    #[test]
    fn mixture_examples() {
        let x = d(&[-1.0, 0.5, 2.0], &[0.2, 0.3, 0.5]);
        assert_dist_eq(&FiniteDist::mixture(&x, &x, 0.3).unwrap(), &x, 1e-15);

        let m = FiniteDist::mixture(&FiniteDist::point(1.0), &FiniteDist::point(0.0), 0.25).unwrap();
        assert_dist_eq(&m, &d(&[0.0, 1.0], &[0.75, 0.25]), 1e-15);

        let m = FiniteDist::mixture(
            &FiniteDist::point(0.0),
            &d(&[0.0, 2.0], &[0.5, 0.5]),
            0.5,
        )
        .unwrap();
        assert_dist_eq(&m, &d(&[0.0, 2.0], &[0.75, 0.25]), 1e-15);

        let edge = FiniteDist::mixture(&FiniteDist::point(1.0), &FiniteDist::point(0.0), 1.0).unwrap();
        assert_eq!(edge.support(), &[1.0]);
        assert!(matches!(
            FiniteDist::mixture(&x, &x, 1.5),
            Err(Error::LambdaOutOfRange(_))
        ));
    }

    #[test]
    fn shift_and_negate() {
        let coin = d(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(coin.shift(2.0), d(&[2.0, 3.0], &[0.5, 0.5]));
        let x = d(&[-1.0, 2.0], &[0.3, 0.7]);
        let n = x.negate();
        assert_eq!(n.support(), &[-2.0, 1.0]);
        assert_abs_diff_eq!(n.probs()[0], 0.7, epsilon = 1e-15);
        assert_eq!(n.shift(0.0), n);
    }

    #[test]
    fn cdf_and_moments() {
        let x = d(&[0.0, 1.0], &[2.0 / 3.0, 1.0 / 3.0]);
        assert_abs_diff_eq!(x.cdf(0.5), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.cdf(0.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(x.cdf(-0.1), 0.0);
        assert_eq!(x.cdf(1.0), 1.0);

        let w = d(&[-1.0, 1.0], &[0.5, 0.5]);
        let m = w.moments();
        assert_eq!((m.mean, m.variance, m.min, m.max), (0.0, 1.0, -1.0, 1.0));
    }

    #[test]
    fn uniform_discretization() {
        let y = FiniteDist::discretize_uniform(-0.6, 0.4, 0.5).unwrap();
        assert_dist_eq(&y, &d(&[-0.35, 0.15], &[0.5, 0.5]), 1e-15);
        let one = FiniteDist::discretize_uniform(0.0, 1.0, 1.0).unwrap();
        assert_dist_eq(&one, &FiniteDist::point(0.5), 0.0);
        let fine = FiniteDist::discretize_uniform(-0.6, 0.4, 1e-3).unwrap();
        assert_eq!(fine.len(), 1000);
        assert_abs_diff_eq!(fine.mean(), -0.1, epsilon = 1e-12);
        assert!(matches!(
            FiniteDist::discretize_uniform(1.0, 0.0, 0.1),
            Err(Error::BadInterval { .. })
        ));
    }

    #[test]
    fn gaussian_discretization_is_symmetric() {
        let z = FiniteDist::discretize_trunc_gaussian(1.0, 4.0, 0.5).unwrap();
        assert_eq!(z.negate(), z);
        assert_abs_diff_eq!(z.mean(), 0.0, epsilon = 1e-12);
        assert!(z.min() >= -4.0 && z.max() <= 4.0);
        assert!(matches!(
            FiniteDist::discretize_trunc_gaussian(1.0, 1.0, 0.5),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn gaussian_discretization_skips_underflowed_cells() {
        let z = FiniteDist::discretize_trunc_gaussian(1.0, 1e6, 0.5).unwrap();
        assert!(z.len() < 200);
        assert!(z.probs().iter().all(|&p| p >= 0.0));
        assert!(z.ln_probs().iter().all(|lp| lp.is_finite()));
    }

    #[test]
    fn xnb_family() {
        let x = FiniteDist::xnb(1, std::f64::consts::LN_2).unwrap();
        assert_dist_eq(&x, &d(&[0.0, 1.0], &[0.5, 0.5]), 1e-15);
        let x = FiniteDist::xnb(2, std::f64::consts::LN_2).unwrap();
        assert_dist_eq(&x, &d(&[0.0, 2.0], &[0.75, 0.25]), 1e-15);
        let big = FiniteDist::xnb(4096, 1.0).unwrap();
        assert_eq!(big.max(), 4096.0);
        assert_abs_diff_eq!(big.ln_probs()[1], -4096.0, epsilon = 1e-9);
        assert!(FiniteDist::xnb(1, 0.0).is_err());
    }

    #[test]
    fn floor_snaps_near_integers() {
        let x = d(&[0.3, 0.9999999999999, 2.5], &[0.2, 0.3, 0.5]);
        let f = x.floor();
        assert_eq!(f.support(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn json_round_trip() {
        let x = d(&[-0.35, 0.15, 1.0 / 3.0], &[0.25, 0.5, 0.25]);
        let s = serde_json::to_string(&x).unwrap();
        let back: FiniteDist = serde_json::from_str(&s).unwrap();
        assert_eq!(back.support(), x.support());
        for (p, q) in back.probs().iter().zip(x.probs()) {
            assert!((p - q).abs() <= 1e-15);
        }
        let bad: std::result::Result<FiniteDist, _> =
            serde_json::from_str(r#"{"support":[0,1],"probs":[0.5,0.6]}"#);
        assert!(bad.is_err());
    }
}
