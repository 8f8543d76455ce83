//! Preferences built on monotone additive statistics: time lotteries,
//! aggregation of exponential discounters, risk-invariant evaluation,
//! betweenness, and a search for narrow-framing violations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cgf::{ln_mgf, ExtReal};
use crate::dist::FiniteDist;
use crate::dominance::{fosd, FirstOrder};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mas::MixingMeasure;

/// Strict preference needs a gap above this.
pub const STRICT_TOL: f64 = 1e-12;

/// Increasing utility on the positive reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    Identity,
    Power { gamma: f64 },
    /// `ln(1 + x)`, positive on the positive reals.
    Log,
    /// Linear interpolation through `(x, u)` points.
    Table { points: Vec<(f64, f64)> },
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            UtilitySpec::Power { gamma } if !(*gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::BadUtility(format!("power exponent must be positive, got {gamma}")))
            }
            UtilitySpec::Table { points } => {
                if points.len() < 2 {
                    return Err(Error::BadUtility("table needs at least two points".into()));
                }
                if points.iter().any(|&(x, u)| !(x > 0.0 && u > 0.0 && x.is_finite() && u.is_finite())) {
                    return Err(Error::BadUtility("table points must be positive".into()));
                }
                if points.windows(2).any(|w| !(w[0].0 < w[1].0 && w[0].1 < w[1].1)) {
                    return Err(Error::BadUtility("table must be strictly increasing".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `u(x)` for `x > 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::NonpositivePrize(x));
        }
        self.validate()?;
        Ok(match self {
            UtilitySpec::Identity => x,
            UtilitySpec::Power { gamma } => x.powf(*gamma),
            UtilitySpec::Log => x.ln_1p(),
            UtilitySpec::Table { points } => {
                let k = points.partition_point(|&(px, _)| px <= x);
                if k == 0 || (k == points.len() && x > points[k - 1].0) {
                    return Err(Error::UtilityOutOfRange(x));
                }
                if k == points.len() {
                    return Ok(points[k - 1].1);
                }
                let ((x0, u0), (x1, u1)) = (points[k - 1], points[k]);
                u0 + (u1 - u0) * (x - x0) / (x1 - x0)
            }
        })
    }
}

fn check_time(t: &FiniteDist) -> Result<()> {
    if t.min() < 0.0 {
        Err(Error::NegativeTime(t.min()))
    } else {
        Ok(())
    }
}

fn check_rate(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::NonpositiveRate(r))
    }
}

/// `V(x, T) = u(x) e^{-r Φ(T)}`.
pub fn time_value(x: f64, t: &FiniteDist, u: &UtilitySpec, r: f64, mu: &MixingMeasure) -> Result<f64> {
    check_time(t)?;
    check_rate(r)?;
    Ok(u.eval(x)? * (-r * mu.phi(t)).exp())
}

/// Exponential discounters sharing one utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub rates: Vec<f64>,
    pub utility: UtilitySpec,
}

impl AgentProfile {
    pub fn new(rates: Vec<f64>, utility: UtilitySpec) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::BadParams("profile needs at least one agent".into()));
        }
        for &r in &rates {
            check_rate(r)?;
        }
        utility.validate()?;
        Ok(AgentProfile { rates, utility })
    }

    /// `ln(u(x) E e^{-r_i T})` for every agent.
    fn ln_values(&self, x: f64, t: &FiniteDist) -> Result<Vec<f64>> {
        check_time(t)?;
        let lu = self.utility.eval(x)?.ln();
        Ok(self.rates.iter().map(|&r| lu + ln_mgf(t, -r)).collect())
    }
}

/// The social preference induced by Pareto weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialPreference {
    pub weights: Vec<f64>,
    /// `Σ λ_i δ_{-r_i}`.
    pub statistic: MixingMeasure,
    /// Harmonic rate, `1/r = Σ λ_i / r_i`.
    pub rate: f64,
}

/// Social statistic and discount rate for Pareto weights `weights`.
pub fn aggregate(profile: &AgentProfile, weights: &[f64]) -> Result<SocialPreference> {
    if weights.len() != profile.rates.len() {
        return Err(Error::WeightMismatch(format!(
            "{} weights for {} agents",
            weights.len(),
            profile.rates.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::WeightMismatch(format!("weight {w} is not a nonnegative number")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightMismatch(format!("weights sum to {sum}, expected 1")));
    }
    let statistic = MixingMeasure::new(
        profile
            .rates
            .iter()
            .zip(weights)
            .map(|(&r, &w)| (ExtReal::Finite(-r), w))
            .collect(),
    )?;
    let inv: f64 = profile.rates.iter().zip(weights).map(|(r, w)| w / r).sum();
    Ok(SocialPreference {
        weights: weights.to_vec(),
        statistic,
        rate: 1.0 / inv,
    })
}

/// A prize `x` paid at random time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeLottery {
    pub x: f64,
    pub t: FiniteDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ParetoVerdict {
    Pass,
    Violation { index: usize },
}

/// Checks that whenever every agent weakly prefers the first lottery of a
/// pair, so does the social preference. Comparisons are made on log values.
pub fn pareto_check(
    profile: &AgentProfile,
    social: &SocialPreference,
    pairs: &[(TimeLottery, TimeLottery)],
) -> Result<ParetoVerdict> {
    check_rate(social.rate)?;
    for (index, (first, second)) in pairs.iter().enumerate() {
        let a = profile.ln_values(first.x, &first.t)?;
        let b = profile.ln_values(second.x, &second.t)?;
        let unanimous = a.iter().zip(&b).all(|(va, vb)| *va >= *vb - STRICT_TOL);
        if !unanimous {
            continue;
        }
        let ln_social = |l: &TimeLottery| -> Result<f64> {
            Ok(profile.utility.eval(l.x)?.ln() - social.rate * social.statistic.phi(&l.t))
        };
        if ln_social(first)? < ln_social(second)? - 1e-9 {
            return Ok(ParetoVerdict::Violation { index });
        }
    }
    Ok(ParetoVerdict::Pass)
}

/// Two time lotteries every agent ranks in the same ratio `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndifferencePair {
    pub t: FiniteDist,
    pub s: FiniteDist,
    pub c: f64,
    pub eta: f64,
    pub d_coeffs: Vec<f64>,
}

/// Builds `T`, `S` on `{1, …, n+1}` with `E e^{-r_i T} = c E e^{-r_i S}` for
/// every rate.
///
/// Solves `M d = e_{n+1}` with `M_{ij} = e^{-r_i j}` and a last row of ones;
/// `c` must lie in `(1 - η, 1)` where `1/η = Σ max(d_k, 0)`. The slack
/// `1 - Σ max((1-c) d_k, 0)` goes to the earliest date.
pub fn indifference_pair(rates: &[f64], c: f64) -> Result<IndifferencePair> {
    if rates.is_empty() {
        return Err(Error::BadParams("need at least one rate".into()));
    }
    for &r in rates {
        check_rate(r)?;
    }
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        if (w[1] - w[0]) <= 1e-8 * w[1] {
            return Err(Error::DuplicateRates(w[0], w[1]));
        }
    }
    let n = rates.len();
    let mut m: Vec<Vec<f64>> = rates
        .iter()
        .map(|&r| (1..=n + 1).map(|j| (-r * j as f64).exp()).collect())
        .collect();
    m.push(vec![1.0; n + 1]);
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let (d, res) = linalg::solve(&m, &rhs)?;
    if res.is_nan() || res > 1e-8 {
        return Err(Error::IllConditioned(res));
    }
    let eta = 1.0 / d.iter().map(|&v| v.max(0.0)).sum::<f64>();
    if !(c > 1.0 - eta && c < 1.0) {
        return Err(Error::InfeasibleC { c, eta });
    }
    let mut a: Vec<f64> = d.iter().map(|&v| ((1.0 - c) * v).max(0.0)).collect();
    let slack = 1.0 - a.iter().sum::<f64>();
    a[0] += slack.max(0.0);
    let b: Vec<f64> = a
        .iter()
        .zip(&d)
        .map(|(&ak, &dk)| ((ak - (1.0 - c) * dk) / c).max(0.0))
        .collect();
    let dates: Vec<f64> = (1..=n + 1).map(|j| j as f64).collect();
    let normalize = |p: Vec<f64>| {
        let s: f64 = p.iter().sum();
        p.into_iter().map(|v| v / s).collect::<Vec<_>>()
    };
    Ok(IndifferencePair {
        t: FiniteDist::new(dates.clone(), normalize(a))?,
        s: FiniteDist::new(dates, normalize(b))?,
        c,
        eta,
        d_coeffs: d,
    })
}

/// `V(X) = v(E X) + Φ(X)` for a measure on `[-∞, 0)`.
pub fn risk_invariant_value(v: impl Fn(f64) -> f64, mu_neg: &MixingMeasure, d: &FiniteDist) -> Result<f64> {
    if let Some(bad) = mu_neg.atoms().iter().find(|t| t.a >= ExtReal::Finite(0.0)) {
        return Err(Error::BadSupport(bad.a));
    }
    Ok(v(d.mean()) + mu_neg.phi(d))
}

/// `β δ_{-aβ} + (1-β) δ_{a(1-β)}`.
pub fn betweenness_form(beta: f64, a: f64) -> Result<MixingMeasure> {
    if !(beta > 0.0 && beta < 1.0 && a > 0.0 && a.is_finite()) {
        return Err(Error::BadParams(format!(
            "betweenness form needs 0 < beta < 1 and a > 0 (beta = {beta}, a = {a})"
        )));
    }
    MixingMeasure::new(vec![
        (ExtReal::Finite(-a * beta), beta),
        (ExtReal::Finite(a * (1.0 - beta)), 1.0 - beta),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Betweenness {
    /// `K_a` for finite `a`: expected utility.
    PointMass { a: f64 },
    /// [`betweenness_form`]`(beta, a)`.
    BalancedPair { beta: f64, a: f64 },
    /// `β min + (1-β) max`; fails betweenness.
    MinMaxPair { beta: f64 },
    NotBetweenness { reason: String },
}

impl Betweenness {
    pub fn satisfies(&self) -> bool {
        matches!(self, Betweenness::PointMass { .. } | Betweenness::BalancedPair { .. })
    }
}

pub fn classify_betweenness(mu: &MixingMeasure) -> Betweenness {
    let atoms = mu.atoms();
    match atoms {
        [only] => match only.a {
            ExtReal::Finite(a) => Betweenness::PointMass { a },
            ExtReal::NegInf => Betweenness::MinMaxPair { beta: 1.0 },
            ExtReal::PosInf => Betweenness::MinMaxPair { beta: 0.0 },
        },
        [lo, hi] => match (lo.a, hi.a) {
            (ExtReal::NegInf, ExtReal::PosInf) => Betweenness::MinMaxPair { beta: lo.w },
            (ExtReal::Finite(a1), ExtReal::Finite(a2)) if a1 < 0.0 && a2 > 0.0 => {
                let a = a2 - a1;
                let beta = -a1 / a;
                if (lo.w - beta).abs() <= 1e-10 {
                    Betweenness::BalancedPair { beta, a }
                } else {
                    Betweenness::NotBetweenness {
                        reason: format!("weight {} at {a1} should be {beta}", lo.w),
                    }
                }
            }
            (a1, a2) => Betweenness::NotBetweenness {
                reason: format!("atoms {a1} and {a2} are not a finite pair straddling 0"),
            },
        },
        _ => Betweenness::NotBetweenness {
            reason: format!("{} atoms", atoms.len()),
        },
    }
}

/// `ln E e^{a(1-β)X} - ln E e^{a(1-β)Y} - (ln E e^{-aβX} - ln E e^{-aβY})`,
/// which equals `a (Φ(X) - Φ(Y))` for the balanced pair `(β, a)`.
pub fn balanced_ratio_gap(beta: f64, a: f64, x: &FiniteDist, y: &FiniteDist) -> f64 {
    let (up, down) = (a * (1.0 - beta), -a * beta);
    (ln_mgf(x, up) - ln_mgf(y, up)) - (ln_mgf(x, down) - ln_mgf(y, down))
}

/// Indifferent `X ~ Y` whose mixture is not indifferent to `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetweennessWitness {
    pub x: FiniteDist,
    pub y: FiniteDist,
    pub lambda: f64,
    /// `Φ(X_λY) - Φ(Y)`.
    pub gap: f64,
}

/// Searches two-point `X` on `support` with probabilities `probs`, paired
/// with the constant `Y = Φ(X)`, for a mixture weight in `lambdas` that
/// moves `Φ` by more than `min_gap`.
pub fn find_betweenness_witness(
    mu: &MixingMeasure,
    support: &[f64],
    probs: &[f64],
    lambdas: &[f64],
    min_gap: f64,
) -> Option<BetweennessWitness> {
    for (i, &lo) in support.iter().enumerate() {
        for &hi in &support[i + 1..] {
            for &p in probs {
                let Ok(x) = FiniteDist::new(vec![lo, hi], vec![p, 1.0 - p]) else {
                    continue;
                };
                let y = FiniteDist::point(mu.phi(&x));
                for &lambda in lambdas {
                    let Ok(mix) = FiniteDist::mixture(&x, &y, lambda) else {
                        continue;
                    };
                    let gap = mu.phi(&mix) - mu.phi(&y);
                    if gap.abs() > min_gap {
                        return Some(BetweennessWitness { x, y, lambda, gap });
                    }
                }
            }
        }
    }
    None
}

/// Named preferences over gambles, as certainty equivalents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrefSpec {
    Mean,
    /// Lower median.
    Median,
    /// `E X - k Var X`.
    MeanVariance { k: f64 },
    Mas { measure: MixingMeasure },
}

impl PrefSpec {
    pub fn eval(&self, d: &FiniteDist) -> f64 {
        match self {
            PrefSpec::Mean => d.mean(),
            PrefSpec::Median => {
                let mut acc = 0.0;
                for (x, p) in d.atoms() {
                    acc += p;
                    if acc >= 0.5 - 1e-12 {
                        return x;
                    }
                }
                d.max()
            }
            PrefSpec::MeanVariance { k } => d.mean() - k * d.variance(),
            PrefSpec::Mas { measure } => measure.phi(d),
        }
    }
}

/// Choices `X ≻₁ X'` and `Y ≻₂ Y'` whose rejected options sum to a
/// first-order improvement, `X' + Y'` strictly dominating `X + Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingViolation {
    pub x: FiniteDist,
    pub x_rejected: FiniteDist,
    pub y: FiniteDist,
    pub y_rejected: FiniteDist,
}

/// Gambles with at most two atoms in `support`, masses in `probs`: point
/// masses first, then pairs in lexicographic order.
pub fn gamble_grid(support: &[f64], probs: &[f64]) -> Vec<FiniteDist> {
    let mut grid: Vec<FiniteDist> = support.iter().map(|&x| FiniteDist::point(x)).collect();
    for (i, &lo) in support.iter().enumerate() {
        for &hi in &support[i + 1..] {
            for &p in probs {
                if let Ok(d) = FiniteDist::new(vec![lo, hi], vec![p, 1.0 - p]) {
                    grid.push(d);
                }
            }
        }
    }
    grid
}

/// The default search grid: support `{-1, 0, 1, 2}`, masses in quarters
/// (22 gambles).
pub fn default_gamble_grid() -> Vec<FiniteDist> {
    gamble_grid(&[-1.0, 0.0, 1.0, 2.0], &[0.25, 0.5, 0.75])
}

/// Outcome of [`find_framing_violation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingSearch {
    pub violation: Option<FramingViolation>,
    /// Candidate quadruples examined.
    pub examined: u64,
    /// Whether every candidate of the grid was examined.
    pub exhaustive: bool,
}

/// Scans quadruples of `grid` in canonical order, stopping at the first
/// violation or after `budget` candidates. A candidate is a choice pair
/// `(X, X')` strictly ranked by `pref1` combined with a pair `(Y, Y')`
/// strictly ranked by `pref2`.
pub fn find_framing_violation(
    pref1: impl Fn(&FiniteDist) -> f64,
    pref2: impl Fn(&FiniteDist) -> f64,
    grid: &[FiniteDist],
    budget: u64,
) -> Result<FramingSearch> {
    let v1: Vec<f64> = grid.iter().map(&pref1).collect();
    let v2: Vec<f64> = grid.iter().map(&pref2).collect();
    let strict_pairs = |v: &[f64]| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..v.len() {
            for k in 0..v.len() {
                if v[i] > v[k] + STRICT_TOL {
                    out.push((i, k));
                }
            }
        }
        out
    };
    let (p1, p2) = (strict_pairs(&v1), strict_pairs(&v2));
    let total = p1.len() as u64 * p2.len() as u64;
    let mut sums: HashMap<(usize, usize), FiniteDist> = HashMap::new();
    let mut sum = |i: usize, j: usize| -> Result<FiniteDist> {
        let key = (i.min(j), i.max(j));
        if let Some(d) = sums.get(&key) {
            return Ok(d.clone());
        }
        let d = grid[key.0].convolve(&grid[key.1])?;
        sums.insert(key, d.clone());
        Ok(d)
    };
    let mut examined = 0u64;
    for &(i, k) in &p1 {
        for &(j, l) in &p2 {
            if examined >= budget {
                return Ok(FramingSearch {
                    violation: None,
                    examined,
                    exhaustive: false,
                });
            }
            examined += 1;
            let chosen = sum(i, j)?;
            let rejected = sum(k, l)?;
            if fosd(&rejected, &chosen, STRICT_TOL) == FirstOrder::StrictlyDominates {
                return Ok(FramingSearch {
                    violation: Some(FramingViolation {
                        x: grid[i].clone(),
                        x_rejected: grid[k].clone(),
                        y: grid[j].clone(),
                        y_rejected: grid[l].clone(),
                    }),
                    examined,
                    exhaustive: examined == total,
                });
            }
        }
    }
    Ok(FramingSearch {
        violation: None,
        examined,
        exhaustive: true,
    })
}
