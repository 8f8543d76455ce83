//! Stochastic dominance tests and catalyst construction.
//!
//! `X` catalytically dominates `Y` when some independent `Z` makes
//! `X + Z` first-order dominate `Y + Z`. This holds whenever
//! `K_a(X) > K_a(Y)` for every `a` in the extended reals, and the witness can
//! be a truncated Gaussian whose variance is large relative to the supports.
//! [`find_catalyst_first`] builds a discretized version of that `Z` and checks
//! the result exactly on the breakpoints of the convolved cdfs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::cgf::{k_a, k_dominates, profile_grid, ExtReal, KDominance, DEFAULT_N_GRID};
use crate::dist::{merge_walk, FiniteDist, SNAP_TOL};
use crate::error::{Error, Result};

/// Tolerance used when verifying certificates.
pub const VERIFY_TOL: f64 = 1e-12;

/// Gaussian weights below `e^{-745}` of the peak underflow to zero.
const GAUSS_REACH: f64 = 2.0 * 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FirstOrder {
    StrictlyDominates,
    Dominates,
    /// `gap = F_2(witness) - F_1(witness) < -tol`, the most negative one.
    No { witness: f64, gap: f64 },
}

impl FirstOrder {
    pub fn holds(&self) -> bool {
        !matches!(self, FirstOrder::No { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SecondOrder {
    Dominates,
    /// `integral = ∫_{-∞}^{witness} (F_2 - F_1) < -tol`, the most negative one.
    No { witness: f64, integral: f64 },
}

impl SecondOrder {
    pub fn holds(&self) -> bool {
        matches!(self, SecondOrder::Dominates)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(PartialEq)]
struct Entry {
    y: f64,
    row: usize,
    col: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.y
            .total_cmp(&other.y)
            .then(self.row.cmp(&other.row))
            .then(self.col.cmp(&other.col))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Walks the breakpoints of `σ = F_{d2+Z} - F_{d1+Z}` in increasing order,
/// calling `f(y, σ(y))`. Breakpoints closer than [`SNAP_TOL`] are merged.
///
/// Never materializes the convolutions: the signed measure `P_{d2} - P_{d1}`
/// is merged against the shifted copies of `Z` on the fly.
fn gap_walk(d1: &FiniteDist, d2: &FiniteDist, z: &FiniteDist, mut f: impl FnMut(f64, f64)) {
    let mut nu: Vec<(f64, f64)> = Vec::with_capacity(d1.len() + d2.len());
    merge_walk(d1, d2, |x, p1, p2| {
        if p1 != p2 {
            nu.push((x, p2 - p1));
        }
    });
    if nu.is_empty() {
        return;
    }
    let (zs, zp) = (z.support(), z.probs());
    let mut heap = BinaryHeap::with_capacity(nu.len());
    for (row, &(x, _)) in nu.iter().enumerate() {
        heap.push(Reverse(Entry {
            y: x + zs[0],
            row,
            col: 0,
        }));
    }
    let mut sigma = Compensated::default();
    let mut anchor = f64::NAN;
    while let Some(Reverse(Entry { y, row, col })) = heap.pop() {
        if anchor.is_nan() || y - anchor > SNAP_TOL {
            if !anchor.is_nan() {
                f(anchor, sigma.value());
            }
            anchor = y;
        }
        sigma.add(nu[row].1 * zp[col]);
        if col + 1 < zs.len() {
            heap.push(Reverse(Entry {
                y: nu[row].0 + zs[col + 1],
                row,
                col: col + 1,
            }));
        }
    }
    f(anchor, sigma.value());
}

/// `(min σ, argmin, max σ)` for `σ = F_{d2+Z} - F_{d1+Z}`; zeros when the
/// distributions coincide.
pub fn cdf_gap_range(d1: &FiniteDist, d2: &FiniteDist, z: &FiniteDist) -> (f64, f64, f64) {
    let (mut lo, mut arg, mut hi) = (0.0, d1.min(), 0.0);
    gap_walk(d1, d2, z, |y, s| {
        if s < lo {
            lo = s;
            arg = y;
        }
        hi = f64::max(hi, s);
    });
    (lo, arg, hi)
}

/// `(min, argmin)` of `∫_{-∞}^{y} (F_{d2+Z} - F_{d1+Z})` over breakpoints.
pub fn integrated_gap_min(d1: &FiniteDist, d2: &FiniteDist, z: &FiniteDist) -> (f64, f64) {
    let (mut lo, mut arg) = (0.0, d1.min());
    let mut integral = Compensated::default();
    let mut prev: Option<(f64, f64)> = None;
    gap_walk(d1, d2, z, |y, s| {
        if let Some((py, ps)) = prev {
            integral.add(ps * (y - py));
            let v = integral.value();
            if v < lo {
                lo = v;
                arg = y;
            }
        }
        prev = Some((y, s));
    });
    (lo, arg)
}

/// First-order stochastic dominance of `d1` over `d2`.
pub fn fosd(d1: &FiniteDist, d2: &FiniteDist, tol: f64) -> FirstOrder {
    let (lo, arg, hi) = cdf_gap_range(d1, d2, &FiniteDist::point(0.0));
    first_order_verdict(lo, arg, hi, tol)
}

fn first_order_verdict(lo: f64, arg: f64, hi: f64, tol: f64) -> FirstOrder {
    if lo < -tol {
        FirstOrder::No { witness: arg, gap: lo }
    } else if hi > tol {
        FirstOrder::StrictlyDominates
    } else {
        FirstOrder::Dominates
    }
}

/// Second-order stochastic dominance of `d1` over `d2`.
pub fn sosd(d1: &FiniteDist, d2: &FiniteDist, tol: f64) -> SecondOrder {
    let (lo, arg) = integrated_gap_min(d1, d2, &FiniteDist::point(0.0));
    if lo < -tol {
        SecondOrder::No {
            witness: arg,
            integral: lo,
        }
    } else {
        SecondOrder::Dominates
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    First,
    Second,
}

/// Constants of the construction, in the translated frame where
/// `min[Y] = -n` and `max[X] = n` (first order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalystParams {
    pub n: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Exponent bound `A = (4/ε) ln(8N/(εδ))`.
    pub a_bound: f64,
    pub variance: f64,
    pub truncation: f64,
    pub step: f64,
    /// Constant added to both variables to reach the translated frame.
    pub shift: f64,
    /// Log of the variance the worst-case bound asks for; `None` when the
    /// bound is vacuous or `M_σ` is not positive on the sampled grid.
    pub ln_v_analytic: Option<f64>,
    /// Upper end of the interval `[-A, γ]` (second order only).
    pub gamma: Option<f64>,
    /// Lower bound of `M_σ` on `[-A, γ]` (second order only).
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalystCertificate {
    pub catalyst: FiniteDist,
    pub order: Order,
    /// `None` for the trivial catalyst `Z = 0`.
    pub params: Option<CatalystParams>,
    pub verified: bool,
    /// Most negative value of the dominance functional over the breakpoints.
    pub worst_gap: f64,
}

impl CatalystCertificate {
    /// Re-runs the dominance check on `X + Z` and `Y + Z`.
    pub fn reverify(&self, dx: &FiniteDist, dy: &FiniteDist) -> f64 {
        match self.order {
            Order::First => cdf_gap_range(dx, dy, &self.catalyst).0,
            Order::Second => integrated_gap_min(dx, dy, &self.catalyst).0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalystOptions {
    /// Required K-gap on every grid point.
    pub margin: f64,
    pub n_grid: usize,
    /// Cap on the variance doublings.
    pub max_doublings: u32,
    /// Cap on the number of catalyst atoms.
    pub max_atoms: usize,
}

impl Default for CatalystOptions {
    fn default() -> Self {
        CatalystOptions {
            margin: 1e-6,
            n_grid: DEFAULT_N_GRID,
            max_doublings: 40,
            max_atoms: 1 << 14,
        }
    }
}

/// Grid point with the smallest K-gap, if that gap is at most `margin`.
fn weakest_k(dx: &FiniteDist, dy: &FiniteDist, grid: &[ExtReal], margin: f64) -> Option<(ExtReal, f64)> {
    let mut worst: Option<(ExtReal, f64)> = None;
    for &a in grid {
        let gap = k_a(dx, a) - k_a(dy, a);
        if worst.is_none_or(|(_, g)| gap < g) {
            worst = Some((a, gap));
        }
    }
    worst.filter(|&(_, g)| g <= margin)
}

/// `σ = G - F` in the original frame.
fn sigma_at(dx: &FiniteDist, dy: &FiniteDist, x: f64) -> f64 {
    dy.cdf(x) - dx.cdf(x)
}

/// Minimum of the step function `σ` over the closed interval `[lo, hi]`.
fn sigma_min_on(dx: &FiniteDist, dy: &FiniteDist, lo: f64, hi: f64) -> f64 {
    let mut m = sigma_at(dx, dy, lo);
    for &s in dx.support().iter().chain(dy.support()) {
        if s > lo && s <= hi {
            m = m.min(sigma_at(dx, dy, s));
        }
    }
    m
}

/// `ln M_σ(a)` with `M_σ(a) = (E e^{aX} - E e^{aY}) / a` and `M_σ(0) = E X - E Y`,
/// for variables in a frame where both supports lie in `[-n, n]`.
/// `None` when the value is not positive.
fn ln_m_sigma(dx: &FiniteDist, dy: &FiniteDist, n: f64, a: f64) -> Option<f64> {
    let v = if (a * n).abs() < 1e-6 {
        let second = |d: &FiniteDist| d.atoms().map(|(x, p)| p * x * x).sum::<f64>();
        (dx.mean() - dy.mean()) + a * (second(dx) - second(dy)) / 2.0
    } else {
        let c = a.signum() * n;
        let scaled = |d: &FiniteDist| d.atoms().map(|(x, p)| p * (a * (x - c)).exp()).sum::<f64>();
        (scaled(dx) - scaled(dy)) / a
    };
    if v > 0.0 {
        let lift = if (a * n).abs() < 1e-6 { 0.0 } else { a.abs() * n };
        Some(lift + v.ln())
    } else {
        None
    }
}

/// `ln min M_σ` over `points` equispaced points of `[lo, hi]` (and 0 if inside).
fn ln_m_sigma_min(dx: &FiniteDist, dy: &FiniteDist, n: f64, lo: f64, hi: f64, points: usize) -> Option<f64> {
    let mut best = f64::INFINITY;
    let mut grid: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    if lo < 0.0 && hi > 0.0 {
        grid.push(0.0);
    }
    for a in grid {
        best = best.min(ln_m_sigma(dx, dy, n, a)?);
    }
    Some(best)
}

/// Smallest `ln V` with `2N e^{AN} (1 - e^{-N²/2V}) <= m/2`, `m = e^{ln_m}`.
fn ln_v_bound(n: f64, a_bound: f64, ln_m: f64) -> Option<f64> {
    let ln_q = ln_m - (4.0 * n).ln() - a_bound * n;
    if ln_q >= 0.0 {
        return None;
    }
    // 1 - e^{-N²/2V} <= q  <=>  V >= N² / (-2 ln(1 - q))
    let neg_ln_1mq = if ln_q < -30.0 {
        ln_q.exp()
    } else {
        -(-ln_q.exp()).ln_1p()
    };
    let ln_denom = if ln_q < -30.0 { ln_q } else { neg_ln_1mq.ln() };
    Some(2.0 * n.ln() - 2f64.ln() - ln_denom)
}

/// Common lattice spacing of the points, if one exists that is not absurdly
/// fine relative to their range.
fn lattice_spacing(points: &[f64]) -> Option<f64> {
    let range = points.last()? - points.first()?;
    if range <= 0.0 {
        return None;
    }
    let tol = 1e-9 * range.max(1.0);
    let mut g = 0.0f64;
    for w in points.windows(2) {
        let mut a = w[1] - w[0];
        if a <= tol {
            continue;
        }
        let mut b = g;
        while b > tol {
            let r = a - b * (a / b).floor();
            // floor can land one short when a/b is a hair below an integer
            let r = if b - r <= tol { 0.0 } else { r };
            a = b;
            b = r;
        }
        g = a;
    }
    (g > range / (1u64 << 20) as f64).then_some(g)
}

struct Attempt {
    z: FiniteDist,
    variance: f64,
    truncation: f64,
    step: f64,
    gap: f64,
}

/// Symmetric truncated Gaussian catalyst whose atoms sit exactly on
/// multiples of `step`.
fn gaussian_on_steps(variance: f64, t_min: f64, step: f64) -> Result<(FiniteDist, f64)> {
    let k = ((t_min / step - 0.5).max(0.0)).ceil().max(4.0);
    let t = (k + 0.5) * step;
    Ok((FiniteDist::discretize_trunc_gaussian(variance, t, step)?, t))
}

/// Candidate steps for one variance: the lattice of the inputs if any, then
/// a step tied to the band width and the Gaussian scale, then halvings, all
/// bounded below by the atom cap.
fn candidate_steps(variance: f64, truncation: f64, epsilon: f64, lattice: Option<f64>, max_atoms: usize) -> Vec<f64> {
    let reach = truncation.min((GAUSS_REACH * variance).sqrt());
    let floor = 2.0 * reach / (max_atoms.saturating_sub(2).max(2)) as f64;
    let mut steps = Vec::new();
    let base = (epsilon / 8.0).min(variance.sqrt() / 4.0);
    for s in [base, base / 2.0, base / 4.0] {
        let s = s.max(floor);
        let s = match lattice {
            Some(g) => g * (s / g - 1e-9).ceil().max(1.0),
            None => s,
        };
        if !steps.iter().any(|&t: &f64| (t - s).abs() <= 1e-12 * s) {
            steps.push(s);
        }
    }
    steps
}

/// Builds `Z` with `X + Z` first-order dominating `Y + Z`.
///
/// Errors with [`Error::NoKDominance`] when some grid index has K-gap at
/// most `opts.margin`, and with [`Error::BudgetExhausted`] when no variance
/// up to `2^max_doublings` times the initial one verifies.
pub fn find_catalyst_first(dx: &FiniteDist, dy: &FiniteDist, opts: &CatalystOptions) -> Result<CatalystCertificate> {
    let grid = profile_grid(opts.n_grid);
    if let Some((a, gap)) = weakest_k(dx, dy, &grid, opts.margin) {
        return Err(Error::NoKDominance { a, gap });
    }
    let zero = FiniteDist::point(0.0);
    let (lo, _, _) = cdf_gap_range(dx, dy, &zero);
    if lo >= -VERIFY_TOL {
        return Ok(CatalystCertificate {
            catalyst: zero,
            order: Order::First,
            params: None,
            verified: true,
            worst_gap: lo,
        });
    }
    let min_gap = dx.min() - dy.min();
    let max_gap = dx.max() - dy.max();
    if min_gap <= 0.0 || max_gap <= 0.0 {
        return Err(Error::DegenerateGap { min_gap, max_gap });
    }

    let shift = -(dy.min() + dx.max()) / 2.0;
    let n = (dx.max() - dy.min()) / 2.0;
    let (tx, ty) = (dx.shift(shift), dy.shift(shift));
    let epsilon = min_gap.min(max_gap);
    let delta = sigma_min_on(&tx, &ty, -n + epsilon / 4.0, -n + epsilon / 2.0)
        .min(sigma_min_on(&tx, &ty, n - epsilon / 2.0, n - epsilon / 4.0));
    let a_bound = (4.0 / epsilon) * (8.0 * n / (epsilon * delta)).ln();
    let ln_v_analytic = ln_m_sigma_min(&tx, &ty, n, -a_bound, a_bound, 1001)
        .and_then(|ln_m| ln_v_bound(n, a_bound, ln_m));

    let mut points: Vec<f64> = tx.support().iter().chain(ty.support()).copied().collect();
    points.sort_by(f64::total_cmp);
    let lattice = lattice_spacing(&points);

    let check = |z: &FiniteDist| cdf_gap_range(dx, dy, z).0;
    let best = escalate(epsilon, a_bound, n, lattice, opts, check)?;
    let verified = best.gap >= -VERIFY_TOL;
    if !verified {
        return Err(Error::BudgetExhausted {
            variance: best.variance,
            worst_gap: best.gap,
        });
    }
    let variance = best.variance;
    Ok(CatalystCertificate {
        catalyst: best.z,
        order: Order::First,
        params: Some(CatalystParams {
            n,
            epsilon,
            delta,
            a_bound,
            variance,
            truncation: best.truncation,
            step: best.step,
            shift,
            ln_v_analytic,
            gamma: None,
            eta: None,
        }),
        verified,
        worst_gap: best.gap,
    })
}

/// Doubles the variance from `(ε/4)²` until `check` reports a gap of at
/// least `-VERIFY_TOL`; returns the first success or the best failure.
fn escalate(
    epsilon: f64,
    a_bound: f64,
    n: f64,
    lattice: Option<f64>,
    opts: &CatalystOptions,
    check: impl Fn(&FiniteDist) -> f64,
) -> Result<Attempt> {
    let mut variance = (epsilon / 4.0).powi(2);
    let mut best: Option<Attempt> = None;
    for _ in 0..=opts.max_doublings {
        let t_min = a_bound * variance + n;
        for step in candidate_steps(variance, t_min, epsilon, lattice, opts.max_atoms) {
            let (z, truncation) = match gaussian_on_steps(variance, t_min, step) {
                Ok(v) => v,
                Err(Error::SupportBlowup { .. }) => continue,
                Err(e) => return Err(e),
            };
            if z.len() > opts.max_atoms {
                continue;
            }
            let gap = check(&z);
            let attempt = Attempt {
                z,
                variance,
                truncation,
                step,
                gap,
            };
            if gap >= -VERIFY_TOL {
                return Ok(attempt);
            }
            if best.as_ref().is_none_or(|b| gap > b.gap) {
                best = Some(attempt);
            }
        }
        variance *= 2.0;
    }
    best.ok_or(Error::BudgetExhausted {
        variance,
        worst_gap: f64::NEG_INFINITY,
    })
}

/// Builds `Z` with `X + Z` second-order dominating `Y + Z`, assuming
/// `K_a(X) > K_a(Y)` for every `a <= 0`.
pub fn find_catalyst_second(dx: &FiniteDist, dy: &FiniteDist, opts: &CatalystOptions) -> Result<CatalystCertificate> {
    let grid: Vec<ExtReal> = profile_grid(opts.n_grid)
        .into_iter()
        .filter(|&a| a <= ExtReal::Finite(0.0))
        .collect();
    if let Some((a, gap)) = weakest_k(dx, dy, &grid, opts.margin) {
        return Err(Error::NoKDominanceOnNegatives { a, gap });
    }
    let zero = FiniteDist::point(0.0);
    let (lo, _) = integrated_gap_min(dx, dy, &zero);
    if lo >= -VERIFY_TOL {
        return Ok(CatalystCertificate {
            catalyst: zero,
            order: Order::Second,
            params: None,
            verified: true,
            worst_gap: lo,
        });
    }
    let min_gap = dx.min() - dy.min();
    let shift = -(dy.min() + dx.max().max(dy.max())) / 2.0;
    let n = (dx.max().max(dy.max()) - dy.min()) / 2.0;
    let (tx, ty) = (dx.shift(shift), dy.shift(shift));
    let epsilon = min_gap.min(n);
    let delta = sigma_min_on(&tx, &ty, -n + epsilon / 4.0, -n + epsilon / 2.0);
    let a_bound = (4.0 / epsilon) * (8.0 * n / (epsilon * delta)).ln();

    // largest γ from a halving ladder with M_σ > 0 on [-A, γ]
    let mut gamma = None;
    let mut g = 1.0;
    for _ in 0..30 {
        if let Some(ln_eta) = ln_m_sigma_min(&tx, &ty, n, -a_bound, g, 1001) {
            gamma = Some((g, ln_eta));
            break;
        }
        g /= 2.0;
    }
    let ln_v_analytic = gamma.and_then(|(_, ln_eta)| ln_v_bound(n, a_bound, ln_eta));

    let mut points: Vec<f64> = tx.support().iter().chain(ty.support()).copied().collect();
    points.sort_by(f64::total_cmp);
    let lattice = lattice_spacing(&points);

    let check = |z: &FiniteDist| integrated_gap_min(dx, dy, z).0;
    let best = escalate(epsilon, a_bound, n, lattice, opts, check)?;
    let verified = best.gap >= -VERIFY_TOL;
    if !verified {
        return Err(Error::BudgetExhausted {
            variance: best.variance,
            worst_gap: best.gap,
        });
    }
    let variance = best.variance;
    Ok(CatalystCertificate {
        catalyst: best.z,
        order: Order::Second,
        params: Some(CatalystParams {
            n,
            epsilon,
            delta,
            a_bound,
            variance,
            truncation: best.truncation,
            step: best.step,
            shift,
            ln_v_analytic,
            gamma: gamma.map(|(g, _)| g),
            eta: gamma.map(|(_, ln_eta)| ln_eta.exp()),
        }),
        verified,
        worst_gap: best.gap,
    })
}

/// Smallest `n <= n_max` with `X^{*n}` first-order dominating `Y^{*n}`.
///
/// A K-gap below zero at any `a` scales with `n`, so it rules out every `n`.
/// The cdf test alone would miss it: the violating mass shrinks like `p^n`
/// and drops under [`VERIFY_TOL`].
pub fn large_numbers_n(dx: &FiniteDist, dy: &FiniteDist, n_max: usize) -> Result<Option<usize>> {
    if n_max == 0 {
        return Err(Error::BadParams("n_max must be positive".into()));
    }
    if let KDominance::Fails { .. } = k_dominates(dx, dy, DEFAULT_N_GRID, 0.0) {
        return Ok(None);
    }
    let (mut px, mut py) = (dx.clone(), dy.clone());
    for n in 1..=n_max {
        if fosd(&px, &py, VERIFY_TOL).holds() {
            return Ok(Some(n));
        }
        if n < n_max {
            px = px.convolve(dx)?;
            py = py.convolve(dy)?;
        }
    }
    Ok(None)
}
