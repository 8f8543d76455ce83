use crate::cgf::ExtReal;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("support and probability lists differ in length ({support} vs {probs}) or are empty")]
    LengthMismatch { support: usize, probs: usize },
    #[error("negative probability {value} at index {index}")]
    NegativeProb { index: usize, value: f64 },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    MassNotOne { sum: f64 },
    #[error("result support has more than {cap} atoms")]
    SupportBlowup { cap: usize },
    #[error("mixture weight {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("bad interval [{a}, {b}] with step {step}")]
    BadInterval { a: f64, b: f64, step: f64 },
    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("mixing measure: {0}")]
    BadMeasure(String),
    #[error("measure has an atom at {0}, closed forms need finite atoms")]
    InfiniteAtom(ExtReal),
    #[error("comparison grid is empty")]
    EmptyGrid,
    #[error("family of measures is empty")]
    EmptyFamily,
    #[error("distribution has negative support point {0}")]
    NegativeSupport(f64),

    #[error("K-dominance fails at a = {a} (gap {gap})")]
    NoKDominance { a: ExtReal, gap: f64 },
    #[error("K-dominance on [-inf, 0] fails at a = {a} (gap {gap})")]
    NoKDominanceOnNegatives { a: ExtReal, gap: f64 },
    #[error("extreme points not separated: min gap {min_gap}, max gap {max_gap}")]
    DegenerateGap { min_gap: f64, max_gap: f64 },
    #[error("catalyst search exhausted after variance {variance}, worst gap {worst_gap}")]
    BudgetExhausted { variance: f64, worst_gap: f64 },

    #[error("time lottery has negative support point {0}")]
    NegativeTime(f64),
    #[error("prize must be positive, got {0}")]
    NonpositivePrize(f64),
    #[error("utility table does not cover x = {0}")]
    UtilityOutOfRange(f64),
    #[error("bad utility: {0}")]
    BadUtility(String),
    #[error("weights: {0}")]
    WeightMismatch(String),
    #[error("discount rates must be positive, got {0}")]
    NonpositiveRate(f64),
    #[error("discount rates {0} and {1} are not distinct")]
    DuplicateRates(f64, f64),
    #[error("c = {c} is outside the feasible interval ({lo}, 1); eta = {eta}", lo = 1.0 - eta)]
    InfeasibleC { c: f64, eta: f64 },
    #[error("linear system is ill-conditioned (residual {0})")]
    IllConditioned(f64),
    #[error("measure has mass at a = {0}, risk-invariant form needs atoms in [-inf, 0)")]
    BadSupport(ExtReal),
}
