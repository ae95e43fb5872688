use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("case parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("closed branches form a cycle through branch {branch}")]
    NotRadial { branch: String },

    #[error("bus {bus} is not connected to the supply point")]
    Disconnected { bus: u32 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergent { iterations: usize, residual: f64 },

    #[error("voltage collapse at bus {bus} in iteration {iteration} (|V| = {magnitude})")]
    Diverged { bus: u32, iteration: usize, magnitude: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("linear system is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("non-positive reciprocal-voltage variable at bus {bus}")]
    DegenerateVoltage { bus: u32 },

    #[error("no switchable branch and no compensator: nothing to optimize")]
    NothingToOptimize,

    #[error("{candidates} candidate topologies exceed the enumeration cap {cap}")]
    TooLarge { candidates: u128, cap: u128 },

    #[error("search budget exhausted after {nodes} nodes without a feasible configuration")]
    Incomplete { nodes: usize },

    #[error("QP subproblem failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}
