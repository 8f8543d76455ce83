//! The `mas` command line: JSON in, JSON (or CSV) out.
//!
//! Exit codes: 0 success or positive verdict, 1 negative verdict, 2 input
//! error, 3 budget or size cap exhausted.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use additive_stats::acceptance;
use additive_stats::cgf::{k_dominates, k_profile, KDominance};
use additive_stats::dist::FiniteDist;
use additive_stats::dominance::{
    find_catalyst_first, find_catalyst_second, fosd, large_numbers_n, sosd, CatalystOptions,
};
use additive_stats::error::Error;
use additive_stats::mas::{Comparison, MixingMeasure};
use additive_stats::pref::{
    aggregate, classify_betweenness, default_gamble_grid, find_framing_violation, gamble_grid,
    indifference_pair, time_value, AgentProfile, PrefSpec, UtilitySpec,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Negative = 1,
    InputError = 2,
    Budget = 3,
}

#[derive(Debug, Parser)]
#[command(name = "mas", version, about = "Monotone additive statistics and stochastic dominance")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized runs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance on cdf gaps for dominance verdicts.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub fosd_tol: f64,
    /// Required K-gap for strict K-dominance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub k_margin: f64,
    /// Points in the K profile grid, excluding the two infinities.
    #[arg(long, global = true, default_value_t = 201)]
    pub n_grid: usize,
    /// Cell width for `{"uniform": [a, b]}` inputs.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    #[value(name = "1")]
    First,
    #[value(name = "2")]
    Second,
    /// K-dominance on the profile grid.
    #[value(name = "k")]
    K,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a statistic on a distribution.
    Phi {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        dist: PathBuf,
    },
    /// K_a over the profile grid.
    Kprofile { dist: PathBuf },
    /// Risk attitude and betweenness class of a measure.
    Classify {
        measure: PathBuf,
        /// Exit 1 unless the statistic satisfies betweenness.
        #[arg(long)]
        betweenness: bool,
    },
    /// Decide whether one statistic lies below another everywhere.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        b_grid: Option<Vec<f64>>,
    },
    /// Stochastic dominance of X over Y.
    Dominance {
        #[arg(long, value_enum, default_value = "1")]
        order: OrderArg,
        x: PathBuf,
        y: PathBuf,
    },
    /// Construct and verify a catalyst making X + Z dominate Y + Z.
    Catalyst {
        #[arg(long, value_enum, default_value = "1")]
        order: OrderArg,
        #[arg(long, default_value_t = 40)]
        max_doublings: u32,
        #[arg(long, default_value_t = 1 << 14)]
        max_atoms: usize,
        x: PathBuf,
        y: PathBuf,
    },
    /// Smallest n with X^{*n} dominating Y^{*n}.
    LargeN {
        #[arg(long, default_value_t = 32)]
        n_max: usize,
        x: PathBuf,
        y: PathBuf,
    },
    /// Social statistic from `{"rates", "weights"}`.
    Aggregate { input: PathBuf },
    /// Two time lotteries every agent ranks in ratio c.
    IndiffPair {
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        #[arg(long)]
        c: f64,
    },
    /// Value of a prize paid at a random time.
    TimeValue {
        #[arg(long)]
        prize: f64,
        #[arg(long)]
        time: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        measure: PathBuf,
        /// Utility as JSON, e.g. `{"kind":"power","gamma":0.5}`.
        #[arg(long, default_value = r#"{"kind":"identity"}"#)]
        utility: String,
    },
    /// Search a gamble grid for combined choices that are first-order dominated.
    ViolationSearch {
        /// mean, median, mean-variance(k) or mas(path).
        #[arg(long)]
        pref1: String,
        #[arg(long)]
        pref2: String,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        support: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        probs: Option<Vec<f64>>,
    },
    /// Breakpoint rows `x,F,G` of the cdfs of X (+ Z) and Y (+ Z).
    CdfCsv {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        catalyst: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Run a single criterion.
        #[arg(long)]
        only: Option<u32>,
    },
}

/// Failure with its exit status.
#[derive(Debug)]
struct Failure {
    status: Status,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            status: Status::InputError,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::BudgetExhausted { .. } | Error::SupportBlowup { .. } => Status::Budget,
            _ => Status::InputError,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

struct Output {
    body: String,
    status: Status,
}

impl Output {
    fn json<T: Serialize>(value: &T, status: Status) -> Self {
        let mut body = serde_json::to_string_pretty(value).expect("serializable");
        body.push('\n');
        Output { body, status }
    }
}

/// Parses `argv` (including the program name) and runs the command,
/// writing results to `stdout` or `--out` and diagnostics to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                Status::InputError as i32
            } else {
                let _ = write!(stdout, "{e}");
                Status::Ok as i32
            };
            return code;
        }
    };
    match execute(&config, stderr) {
        Ok(out) => {
            let written = match &config.out {
                Some(path) => std::fs::write(path, &out.body).map_err(|e| format!("{}: {e}", path.display())),
                None => stdout.write_all(out.body.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => out.status as i32,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    Status::InputError as i32
                }
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.status as i32
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "top level".to_string() } else { format!("field `{field}`") };
        Failure::input(format!("{origin}: {field}: {}", e.inner()))
    })
}

#[derive(Deserialize)]
struct UniformInput {
    uniform: [f64; 2],
}

/// A distribution file holds `{"support", "probs"}` or `{"uniform": [a, b]}`.
fn read_dist(path: &Path, step: f64) -> Result<FiniteDist, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let origin = path.display().to_string();
    let value: serde_json::Value = parse_json(&text, &origin)?;
    if value.get("uniform").is_some() {
        let u: UniformInput = parse_json(&text, &origin)?;
        FiniteDist::discretize_uniform(u.uniform[0], u.uniform[1], step)
            .map_err(|e| Failure::input(format!("{origin}: {e}")))
    } else {
        parse_json(&text, &origin)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregateInput {
    rates: Vec<f64>,
    weights: Vec<f64>,
    #[serde(default = "identity")]
    utility: UtilitySpec,
}

fn identity() -> UtilitySpec {
    UtilitySpec::Identity
}

/// `mean`, `median`, `mean-variance(k)` or `mas(path)`.
fn parse_pref(spec: &str) -> Result<PrefSpec, Failure> {
    let spec = spec.trim();
    let inner = |prefix: &str| {
        spec.strip_prefix(prefix)
            .and_then(|rest| rest.strip_suffix(')'))
            .map(str::trim)
    };
    match spec {
        "mean" => return Ok(PrefSpec::Mean),
        "median" => return Ok(PrefSpec::Median),
        _ => {}
    }
    if let Some(k) = inner("mean-variance(") {
        let k: f64 = k
            .parse()
            .map_err(|_| Failure::input(format!("bad variance weight in `{spec}`")))?;
        return Ok(PrefSpec::MeanVariance { k });
    }
    if let Some(path) = inner("mas(") {
        return Ok(PrefSpec::Mas {
            measure: read_json(Path::new(path))?,
        });
    }
    Err(Failure::input(format!(
        "unknown preference `{spec}`; expected mean, median, mean-variance(k) or mas(path)"
    )))
}

#[derive(Serialize)]
struct Classification {
    risk: additive_stats::mas::RiskClass,
    betweenness: additive_stats::pref::Betweenness,
}

#[derive(Serialize)]
struct Obstruction {
    verdict: &'static str,
    a: additive_stats::cgf::ExtReal,
    gap: f64,
}

#[derive(Serialize)]
struct SelftestLine {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn verdict(ok: bool) -> Status {
    if ok {
        Status::Ok
    } else {
        Status::Negative
    }
}

fn execute(cfg: &RunConfig, stderr: &mut dyn Write) -> Result<Output, Failure> {
    for (name, v) in [("fosd-tol", cfg.fosd_tol), ("k-margin", cfg.k_margin), ("step", cfg.step)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Failure::input(format!("--{name} must be positive, got {v}")));
        }
    }
    if cfg.n_grid == 0 {
        return Err(Failure::input("--n-grid must be positive"));
    }
    let dist = |p: &Path| read_dist(p, cfg.step);
    Ok(match &cfg.command {
        Command::Phi { measure, dist: d } => {
            let mu: MixingMeasure = read_json(measure)?;
            Output::json(&serde_json::json!({ "phi": mu.phi(&dist(d)?) }), Status::Ok)
        }
        Command::Kprofile { dist: d } => Output::json(&k_profile(&dist(d)?, cfg.n_grid), Status::Ok),
        Command::Classify { measure, betweenness } => {
            let mu: MixingMeasure = read_json(measure)?;
            let c = Classification {
                risk: mu.classify_risk(),
                betweenness: classify_betweenness(&mu),
            };
            let status = verdict(!betweenness || c.betweenness.satisfies());
            Output::json(&c, status)
        }
        Command::Compare { first, second, b_grid } => {
            let m1: MixingMeasure = read_json(first)?;
            let m2: MixingMeasure = read_json(second)?;
            let c = m1.compare(&m2, b_grid.as_deref())?;
            Output::json(&c, verdict(!matches!(c, Comparison::Incomparable { .. })))
        }
        Command::Dominance { order, x, y } => {
            let (dx, dy) = (dist(x)?, dist(y)?);
            match order {
                OrderArg::First => {
                    let v = fosd(&dx, &dy, cfg.fosd_tol);
                    Output::json(&v, verdict(v.holds()))
                }
                OrderArg::Second => {
                    let v = sosd(&dx, &dy, cfg.fosd_tol);
                    Output::json(&v, verdict(v.holds()))
                }
                OrderArg::K => {
                    let v = k_dominates(&dx, &dy, cfg.n_grid, cfg.k_margin);
                    Output::json(&v, verdict(!matches!(v, KDominance::Fails { .. })))
                }
            }
        }
        Command::Catalyst {
            order,
            max_doublings,
            max_atoms,
            x,
            y,
        } => {
            let (dx, dy) = (dist(x)?, dist(y)?);
            let opts = CatalystOptions {
                margin: cfg.k_margin,
                n_grid: cfg.n_grid,
                max_doublings: *max_doublings,
                max_atoms: *max_atoms,
            };
            let found = match order {
                OrderArg::First => find_catalyst_first(&dx, &dy, &opts),
                OrderArg::Second => find_catalyst_second(&dx, &dy, &opts),
                OrderArg::K => return Err(Failure::input("catalyst --order takes 1 or 2")),
            };
            match found {
                Ok(cert) => {
                    let status = verdict(cert.verified);
                    Output::json(&cert, status)
                }
                Err(Error::NoKDominance { a, gap }) => Output::json(
                    &Obstruction {
                        verdict: "no_k_dominance",
                        a,
                        gap,
                    },
                    Status::Negative,
                ),
                Err(Error::NoKDominanceOnNegatives { a, gap }) => Output::json(
                    &Obstruction {
                        verdict: "no_k_dominance_on_negatives",
                        a,
                        gap,
                    },
                    Status::Negative,
                ),
                Err(e) => return Err(e.into()),
            }
        }
        Command::LargeN { n_max, x, y } => {
            let n = large_numbers_n(&dist(x)?, &dist(y)?, *n_max)?;
            Output::json(&serde_json::json!({ "n": n, "n_max": n_max }), verdict(n.is_some()))
        }
        Command::Aggregate { input } => {
            let a: AggregateInput = read_json(input)?;
            let profile = AgentProfile::new(a.rates, a.utility)?;
            Output::json(&aggregate(&profile, &a.weights)?, Status::Ok)
        }
        Command::IndiffPair { rates, c } => Output::json(&indifference_pair(rates, *c)?, Status::Ok),
        Command::TimeValue {
            prize,
            time,
            rate,
            measure,
            utility,
        } => {
            let u: UtilitySpec = parse_json(utility, "--utility")?;
            let mu: MixingMeasure = read_json(measure)?;
            let v = time_value(*prize, &dist(time)?, &u, *rate, &mu)?;
            Output::json(&serde_json::json!({ "value": v }), Status::Ok)
        }
        Command::ViolationSearch {
            pref1,
            pref2,
            budget,
            support,
            probs,
        } => {
            let (p1, p2) = (parse_pref(pref1)?, parse_pref(pref2)?);
            let grid = match (support, probs) {
                (None, None) => default_gamble_grid(),
                (s, p) => gamble_grid(
                    s.as_deref().unwrap_or(&[-1.0, 0.0, 1.0, 2.0]),
                    p.as_deref().unwrap_or(&[0.25, 0.5, 0.75]),
                ),
            };
            let found = find_framing_violation(|d| p1.eval(d), |d| p2.eval(d), &grid, *budget)?;
            let status = match (&found.violation, found.exhaustive) {
                (Some(_), _) => Status::Ok,
                (None, true) => Status::Negative,
                (None, false) => Status::Budget,
            };
            Output::json(&found, status)
        }
        Command::CdfCsv { x, y, catalyst } => {
            let (mut dx, mut dy) = (dist(x)?, dist(y)?);
            if let Some(z) = catalyst {
                let z = dist(z)?;
                dx = dx.convolve(&z)?;
                dy = dy.convolve(&z)?;
            }
            Output {
                body: cdf_rows(&dx, &dy),
                status: Status::Ok,
            }
        }
        Command::Selftest { only } => {
            let results = match only {
                Some(id) if (1..=acceptance::COUNT).contains(id) => vec![acceptance::run(*id, cfg.seed)],
                Some(id) => return Err(Failure::input(format!("no criterion {id}"))),
                None => acceptance::run_all(cfg.seed),
            };
            for r in &results {
                let _ = writeln!(stderr, "{r}");
            }
            let all = results.iter().all(|r| r.passed);
            let lines: Vec<SelftestLine> = results
                .into_iter()
                .map(|r| SelftestLine {
                    id: r.id,
                    name: r.name,
                    passed: r.passed,
                    detail: r.detail,
                })
                .collect();
            Output::json(&lines, verdict(all))
        }
    })
}

/// One row per support point of either distribution.
fn cdf_rows(dx: &FiniteDist, dy: &FiniteDist) -> String {
    let mut out = String::from("x,F,G\n");
    let (xs, ys) = (dx.support(), dy.support());
    let (px, py) = (dx.probs(), dy.probs());
    let (mut i, mut j, mut f, mut g) = (0, 0, 0.0, 0.0);
    while i < xs.len() || j < ys.len() {
        let t = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] == t {
            f += px[i];
            i += 1;
        }
        while j < ys.len() && ys[j] == t {
            g += py[j];
            j += 1;
        }
        let _ = writeln!(out, "{t},{},{}", f.min(1.0), g.min(1.0));
    }
    out
}
