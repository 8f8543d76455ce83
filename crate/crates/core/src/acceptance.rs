//! Desk-scale acceptance suite. Each criterion is seeded and returns one
//! [`CriterionResult`]; [`run_all`] runs the twelve in order.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cgf::{k_a, k_dominates, ln_mgf, ExtReal, KDominance, DEFAULT_N_GRID};
use crate::dist::FiniteDist;
use crate::dominance::{find_catalyst_first, fosd, large_numbers_n, sosd, CatalystOptions, FirstOrder};
use crate::error::{Error, Result};
use crate::mas::{Comparison, MixingMeasure};
use crate::pref::{
    aggregate, balanced_ratio_gap, betweenness_form, default_gamble_grid, find_betweenness_witness,
    find_framing_violation, indifference_pair, pareto_check, risk_invariant_value, AgentProfile,
    ParetoVerdict, PrefSpec, TimeLottery, UtilitySpec,
};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} {:>8.3}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<(bool, String)>;

const CRITERIA: [(u32, &str, f64, Check); 12] = [
    (1, "coin against uniform", 1.0, coin_against_uniform),
    (2, "catalyst constructor", 60.0, catalyst_constructor),
    (3, "obstruction soundness", 60.0, obstruction_soundness),
    (4, "additivity", 5.0, additivity),
    (5, "risk attitude bounds", 10.0, risk_attitude_bounds),
    (6, "measure comparison", f64::INFINITY, measure_comparison),
    (7, "integer limit", f64::INFINITY, integer_limit),
    (8, "aggregation pipeline", f64::INFINITY, aggregation_pipeline),
    (9, "multiple indifferences", f64::INFINITY, multiple_indifferences),
    (10, "risk invariance", f64::INFINITY, risk_invariance),
    (11, "betweenness", f64::INFINITY, betweenness),
    (12, "combined choices", f64::INFINITY, combined_choices),
];

/// Number of criteria.
pub const COUNT: u32 = CRITERIA.len() as u32;

/// Runs criterion `id` (1-based) with an RNG seeded from `seed` and `id`.
/// Runtime bounds count toward the verdict.
pub fn run(id: u32, seed: u64) -> CriterionResult {
    let (id, name, limit, check) = CRITERIA[(id - 1) as usize];
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(id as u64));
    let start = Instant::now();
    let outcome = check(&mut rng);
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if seconds > limit {
        passed = false;
        detail = format!("{detail}; over the {:?} budget", Duration::from_secs_f64(limit));
    }
    CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds,
    }
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    (1..=COUNT).map(|id| run(id, seed)).collect()
}

fn d(support: &[f64], probs: &[f64]) -> FiniteDist {
    FiniteDist::new(support.to_vec(), probs.to_vec()).expect("valid fixture")
}

/// 2 to 5 atoms drawn from `[lo, hi)` with weights bounded away from zero.
fn random_dist(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> FiniteDist {
    let k = rng.gen_range(2..=5);
    let support: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..hi)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    FiniteDist::new(support, w.iter().map(|v| v / s).collect()).expect("random dist")
}

fn mean_zero(rng: &mut ChaCha8Rng) -> FiniteDist {
    let z = random_dist(rng, -1.0, 1.0);
    z.shift(-z.mean())
}

/// Finite atoms in `[lo, hi)`, plus `±∞` with probability `p_inf`.
fn random_measure(rng: &mut ChaCha8Rng, lo: f64, hi: f64, p_inf: f64) -> MixingMeasure {
    let k = rng.gen_range(1..=4);
    let mut atoms: Vec<(ExtReal, f64)> = (0..k)
        .map(|_| (ExtReal::Finite(rng.gen_range(lo..hi)), rng.gen_range(0.05..1.0)))
        .collect();
    if rng.gen_bool(p_inf) {
        let inf = if hi <= 0.0 {
            ExtReal::NegInf
        } else if lo >= 0.0 {
            ExtReal::PosInf
        } else if rng.gen_bool(0.5) {
            ExtReal::NegInf
        } else {
            ExtReal::PosInf
        };
        atoms.push((inf, rng.gen_range(0.05..1.0)));
    }
    let s: f64 = atoms.iter().map(|a| a.1).sum();
    MixingMeasure::new(atoms.into_iter().map(|(a, w)| (a, w / s)).collect()).expect("random measure")
}

fn coin_against_uniform(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let x = d(&[0.0, 1.0], &[2.0 / 3.0, 1.0 / 3.0]);
    let y = FiniteDist::discretize_uniform(-0.6, 0.4, 1e-3)?;
    let z = d(&[-0.2, 0.2], &[0.5, 0.5]);
    let plain = fosd(&x, &y, 1e-12);
    let with_z = fosd(&x.convolve(&z)?, &y.convolve(&z)?, 5e-3);
    let ok = matches!(plain, FirstOrder::No { .. }) && with_z.holds();
    Ok((ok, format!("fosd(X,Y) = {plain:?}; fosd(X+Z,Y+Z) = {with_z:?}")))
}

fn catalyst_constructor(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let opts = CatalystOptions {
        margin: 1e-3,
        ..Default::default()
    };
    let (mut done, mut trivial, mut failures, mut worst, mut max_atoms) = (0, 0, 0, f64::INFINITY, 0);
    let mut first_failure = None;
    while done < 200 {
        let y = random_dist(rng, -1.0, 0.7);
        let x = random_dist(rng, -0.7, 1.0);
        if k_dominates(&x, &y, DEFAULT_N_GRID, 1e-3) != KDominance::Strict {
            continue;
        }
        if fosd(&x, &y, 1e-12).holds() {
            trivial += 1;
            continue;
        }
        done += 1;
        match find_catalyst_first(&x, &y, &opts) {
            Ok(cert) if cert.verified && cert.worst_gap >= -1e-12 => {
                worst = worst.min(cert.worst_gap);
                max_atoms = max_atoms.max(cert.catalyst.len());
            }
            Ok(cert) => {
                failures += 1;
                first_failure.get_or_insert(format!("unverified, worst gap {}", cert.worst_gap));
            }
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert(e.to_string());
            }
        }
    }
    let mut detail = format!(
        "{done} non-trivial pairs ({trivial} already ordered skipped), {failures} failures, \
         min worst gap {worst:.3e}, largest catalyst {max_atoms} atoms"
    );
    if let Some(f) = first_failure {
        detail.push_str(&format!("; first failure: {f}"));
    }
    Ok((failures == 0, detail))
}

fn obstruction_soundness(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (mut done, mut bad) = (0, Vec::new());
    while done < 200 {
        let y = random_dist(rng, -1.0, 0.7);
        let x = random_dist(rng, -0.7, 1.0);
        let KDominance::Fails { a, .. } = k_dominates(&x, &y, DEFAULT_N_GRID, 1e-3) else {
            continue;
        };
        done += 1;
        if let Some(n) = large_numbers_n(&x, &y, 32)? {
            bad.push(format!("pair {done}: large numbers at n = {n}"));
            continue;
        }
        for n in [2, 8] {
            let gap = k_a(&x.iid_power(n)?, a) - k_a(&y.iid_power(n)?, a);
            if gap >= 0.0 {
                bad.push(format!("pair {done}: K-gap {gap} at a = {a} for {n} copies"));
            }
        }
        for _ in 0..5 {
            let z = random_dist(rng, -2.0, 2.0);
            let (xz, yz) = (x.convolve(&z)?, y.convolve(&z)?);
            let gap = k_a(&xz, a) - k_a(&yz, a);
            if gap >= 0.0 || fosd(&xz, &yz, 1e-12).holds() {
                bad.push(format!("pair {done}: catalyst leaves K-gap {gap} at a = {a}"));
            }
        }
    }
    let detail = format!("{done} failing pairs, 5 random catalysts and 2 iid sums each, {} violations", bad.len());
    Ok((bad.is_empty(), bad.first().map_or(detail.clone(), |b| format!("{detail}; {b}"))))
}

fn additivity(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (mut worst_add, mut worst_norm) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let mu = random_measure(rng, -5.0, 5.0, 0.2);
        let x = random_dist(rng, -3.0, 3.0);
        let y = random_dist(rng, -3.0, 3.0);
        let c = rng.gen_range(-10.0..10.0);
        let sum = mu.phi(&x.convolve(&y)?);
        worst_add = worst_add.max((sum - mu.phi(&x) - mu.phi(&y)).abs());
        worst_norm = worst_norm.max((mu.phi(&FiniteDist::point(c)) - c).abs());
    }
    Ok((
        worst_add <= 1e-9 && worst_norm <= 1e-9,
        format!("max additivity error {worst_add:.2e}, max constant error {worst_norm:.2e}"),
    ))
}

fn risk_attitude_bounds(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let averse = random_measure(rng, -5.0, 0.0, 0.2);
        let seeking = random_measure(rng, 0.0, 5.0, 0.2);
        for _ in 0..1000 {
            let g = random_dist(rng, -3.0, 3.0);
            let m = g.mean();
            worst = worst.max(averse.phi(&g) - m).max(m - seeking.phi(&g));
        }
    }
    Ok((worst <= 1e-10, format!("largest violation of phi vs mean {worst:.2e}")))
}

fn measure_comparison(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let lo = MixingMeasure::point(2.0);
    let hi = MixingMeasure::finite(&[(1.0, 0.25), (3.0, 0.75)])?;
    let verdict = lo.compare(&hi, None)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let g = random_dist(rng, -3.0, 3.0);
        worst = worst.max(lo.phi(&g) - hi.phi(&g));
    }
    Ok((
        verdict == Comparison::Le && worst <= 1e-10,
        format!("compare = {verdict:?}; max phi difference {worst:.2e}"),
    ))
}

fn integer_limit(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mu = MixingMeasure::finite(&[(0.5, 0.5), (2.0, 0.5)])?;
    let n = 4096;
    let value = mu.phi(&FiniteDist::xnb(n, 1.0)?) / n as f64;
    let err = (value - 0.25).abs();
    Ok((err <= 0.02, format!("phi(X_n)/n = {value:.6} at n = {n}, limit 0.25")))
}

fn aggregation_pipeline(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let profile = AgentProfile::new(vec![1.0, 3.0], UtilitySpec::Power { gamma: 0.5 })?;
    let social = aggregate(&profile, &[0.5, 0.5])?;
    let rate_ok = social.rate == 1.5;

    let mut pairs = Vec::with_capacity(10_000);
    while pairs.len() < 10_000 {
        let first = TimeLottery {
            x: rng.gen_range(0.5..4.0),
            t: random_dist(rng, 0.0, 3.0),
        };
        let second = TimeLottery {
            x: rng.gen_range(0.5..4.0),
            t: random_dist(rng, 0.0, 3.0),
        };
        let lu = |l: &TimeLottery, r: f64| 0.5 * l.x.ln() + ln_mgf(&l.t, -r);
        let unanimous = profile.rates.iter().all(|&r| lu(&first, r) >= lu(&second, r));
        if unanimous {
            pairs.push((first, second));
        }
    }
    let verdict = pareto_check(&profile, &social, &pairs)?;

    let c = 0.99;
    let pair = indifference_pair(&profile.rates, c)?;
    let x: f64 = 4.0;
    let y = (c * x.sqrt()).powi(2);
    let social_ln = |prize: f64, t: &FiniteDist| 0.5 * prize.ln() - social.rate * social.statistic.phi(t);
    let indiff = (social_ln(x, &pair.t) - social_ln(y, &pair.s)).abs();
    let ok = rate_ok && verdict == ParetoVerdict::Pass && indiff <= 1e-8;
    Ok((
        ok,
        format!(
            "social rate {}; pareto on {} unanimous pairs: {verdict:?}; indifference error {indiff:.2e}",
            social.rate,
            pairs.len()
        ),
    ))
}

fn multiple_indifferences(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let rates = [0.5, 1.0, 2.0];
    let pair = indifference_pair(&rates, 0.99)?;
    let worst = rates
        .iter()
        .map(|&r| ((ln_mgf(&pair.t, -r) - ln_mgf(&pair.s, -r)).exp() - 0.99).abs())
        .fold(0.0f64, f64::max);
    let c_bad = 0.5 * (1.0 - pair.eta);
    let rejected = matches!(indifference_pair(&rates, c_bad), Err(Error::InfeasibleC { .. }));
    Ok((
        worst <= 1e-10 && rejected,
        format!(
            "eta = {:.6}; max ratio error {worst:.2e}; c = {c_bad:.6} rejected: {rejected}",
            pair.eta
        ),
    ))
}

fn risk_invariance(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let v = |m: f64| m.tanh() + 0.5 * m;
    let (mut worst_inv, mut worst_sosd, mut sosd_pairs) = (0.0f64, f64::NEG_INFINITY, 0);
    for _ in 0..1000 {
        let mu = random_measure(rng, -4.0, -1e-3, 0.2);
        let x1 = random_dist(rng, -2.0, 2.0);
        let x2 = random_dist(rng, -2.0, 2.0);
        let z = mean_zero(rng);
        let lhs = risk_invariant_value(v, &mu, &x1.convolve(&z)?)? - risk_invariant_value(v, &mu, &x1)?;
        let rhs = risk_invariant_value(v, &mu, &x2.convolve(&z)?)? - risk_invariant_value(v, &mu, &x2)?;
        worst_inv = worst_inv.max((lhs - rhs).abs());

        // a mean-preserving spread of x1, then a nonnegative shift of x1
        let spread = x1.convolve(&z)?;
        let better = x1.shift(rng.gen_range(0.0..0.5));
        if sosd(&better, &spread, 1e-12).holds() {
            sosd_pairs += 1;
            let gap = risk_invariant_value(v, &mu, &spread)? - risk_invariant_value(v, &mu, &better)?;
            worst_sosd = worst_sosd.max(gap);
        }
    }
    Ok((
        worst_inv <= 1e-10 && worst_sosd <= 1e-10 && sosd_pairs == 1000,
        format!(
            "max invariance error {worst_inv:.2e}; {sosd_pairs} dominated pairs, max monotonicity violation {worst_sosd:.2e}"
        ),
    ))
}

fn betweenness(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (beta, a) = (0.5, 2.0);
    let mu = betweenness_form(beta, a)?;
    let (mut worst_phi, mut worst_ratio) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let x = random_dist(rng, -2.0, 2.0);
        let y0 = random_dist(rng, -2.0, 2.0);
        let y = y0.shift(mu.phi(&x) - mu.phi(&y0));
        let lambda = rng.gen_range(0.0..1.0);
        let mix = FiniteDist::mixture(&x, &y, lambda)?;
        worst_phi = worst_phi.max((mu.phi(&mix) - mu.phi(&y)).abs());
        worst_ratio = worst_ratio
            .max(balanced_ratio_gap(beta, a, &x, &y).abs())
            .max(balanced_ratio_gap(beta, a, &mix, &y).abs());
    }
    let off = MixingMeasure::finite(&[(-1.0, 0.25), (2.0, 0.75)])?;
    let witness = find_betweenness_witness(
        &off,
        &[-2.0, -1.0, 0.0, 1.0, 2.0],
        &[0.25, 0.5, 0.75],
        &[0.25, 0.5, 0.75],
        1e-3,
    );
    let witness_ok = witness
        .as_ref()
        .is_some_and(|w| (off.phi(&w.x) - off.phi(&w.y)).abs() < 1e-12 && w.gap.abs() > 1e-3);
    let found = match &witness {
        Some(w) => format!("witness at lambda = {} with gap {:.4}", w.lambda, w.gap),
        None => "no witness".into(),
    };
    Ok((
        worst_phi <= 1e-10 && worst_ratio <= 1e-10 && witness_ok,
        format!("max mixture drift {worst_phi:.2e}, max ratio gap {worst_ratio:.2e}; {found}"),
    ))
}

fn combined_choices(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid = default_gamble_grid();
    let budget = 100_000;
    let median = |g: &FiniteDist| PrefSpec::Median.eval(g);
    let found = find_framing_violation(median, median, &grid, budget)?;
    let mu = MixingMeasure::finite(&[(-1.0, 0.5), (1.0, 0.5)])?;
    let phi = |g: &FiniteDist| mu.phi(g);
    let clean = find_framing_violation(phi, phi, &grid, budget)?;
    Ok((
        found.violation.is_some() && clean.violation.is_none() && clean.exhaustive,
        format!(
            "{} gambles; median violation after {} candidates; statistic scanned {} candidates without one",
            grid.len(),
            found.examined,
            clean.examined
        ),
    ))
}
