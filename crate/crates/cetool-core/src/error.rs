//! Error types shared across the crate.

use thiserror::Error;

/// A violation of one of the metric axioms, naming the offending indices.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricViolation {
    /// Input matrix is not square: row `row` has `len` entries, expected `n`.
    NotSquare { row: usize, len: usize, n: usize },
    /// `dist[i][i]` is not zero.
    NonzeroDiagonal { i: usize, value: f64 },
    /// `dist[i][j]` is negative or not finite.
    BadEntry { i: usize, j: usize, value: f64 },
    /// `dist[i][j] != dist[j][i]`.
    Asymmetric { i: usize, j: usize },
    /// `dist[i][k] > dist[i][j] + dist[j][k]` beyond tolerance.
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        excess: f64,
    },
}

impl std::fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricViolation::NotSquare { row, len, n } => {
                write!(f, "row {row} has {len} entries, expected {n}")
            }
            MetricViolation::NonzeroDiagonal { i, value } => {
                write!(f, "dist[{i}][{i}] = {value}, expected 0")
            }
            MetricViolation::BadEntry { i, j, value } => {
                write!(f, "dist[{i}][{j}] = {value} is negative or non-finite")
            }
            MetricViolation::Asymmetric { i, j } => {
                write!(f, "dist[{i}][{j}] != dist[{j}][{i}]")
            }
            MetricViolation::Triangle { i, j, k, excess } => {
                write!(
                    f,
                    "triangle inequality fails for ({i},{j},{k}) by {excess:e}"
                )
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid metric: {}", format_violations(.0))]
    InvalidMetric(Vec<MetricViolation>),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid abstraction: {0}")]
    InvalidAbstraction(String),

    #[error("invalid modulus: {0}")]
    InvalidModulus(String),

    #[error("unreachable history {0}: conditioning event has zero probability")]
    UnreachableHistory(String),

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("policy undefined on reachable history {0}")]
    PolicyUndefined(String),

    #[error("estimator undefined on reachable history {0}")]
    EstimatorUndefined(String),

    #[error(
        "enumeration budget exceeded: history tree needs {}{required} nodes, budget is {budget}",
        if *.truncated { "at least " } else { "" }
    )]
    BudgetExceeded {
        budget: usize,
        required: usize,
        truncated: bool,
    },

    #[error(
        "bound violated at t={t}, history {history}: gap {gap:e} > 2·alpha {bound:e} (excess {:e})",
        gap - bound
    )]
    BoundViolation {
        t: usize,
        history: String,
        gap: f64,
        bound: f64,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("infeasible scenario parameters: {0}")]
    InfeasibleSpec(String),
}

fn format_violations(vs: &[MetricViolation]) -> String {
    let shown: Vec<String> = vs.iter().take(4).map(|v| v.to_string()).collect();
    let mut s = shown.join("; ");
    if vs.len() > 4 {
        s.push_str(&format!("; … ({} total)", vs.len()));
    }
    s
}

pub type Result<T> = std::result::Result<T, Error>;
