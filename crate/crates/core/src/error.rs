use thiserror::Error;

/// Errors surfaced by model construction, data handling and solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    Network(String),

    #[error("network is disconnected: bus {0} cannot be reached from the slack bus")]
    Disconnected(u32),

    #[error("reduced susceptance matrix is singular")]
    SingularSusceptance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("transport budget {rho} is below the minimum transport budget {rho_min}")]
    BudgetBelowMinimum { rho: f64, rho_min: f64 },

    #[error("no Beta distribution with mean {mean} and standard deviation {sigma}: need sigma^2 < mean(1-mean)")]
    BetaFit { mean: f64, sigma: f64 },

    #[error("ill-formed linear program: {0}")]
    InvalidModel(String),

    #[error("linear program is infeasible{}", describe_rows(.violated))]
    Infeasible { violated: Vec<String> },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("re-dispatch problem has no solution for scenario {scenario}: {reason}")]
    Redispatch { scenario: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn describe_rows(rows: &[String]) -> String {
    if rows.is_empty() {
        String::new()
    } else {
        format!(" (violated rows: {})", rows.join(", "))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
