use thiserror::Error;

/// Errors produced by solvers, reductions, parsers and the bench harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field failed validation before any work started.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A solver iterate left the finite range (norm guard or non-finite
    /// objective). Carries the last finite checkpoint for post-mortem.
    #[error("solver diverged at fqc {fqc}: {reason} (last finite objective {last_objective:.6e} at fqc {last_fqc})")]
    Diverged {
        fqc: u64,
        reason: String,
        last_fqc: u64,
        last_objective: f64,
    },

    /// An inner-solver failure inside a reduction, tagged with the stage.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    /// The requested contraction cannot be met within the iteration cap.
    #[error("contraction target {target} unattainable: needs {required} iterations, cap is {cap}")]
    UnattainableContraction {
        target: f64,
        required: f64,
        cap: u64,
    },

    /// Dataset text that does not conform to the LIBSVM line format.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An operation that needs analytic gradients was called on a problem
    /// that only exposes value oracles.
    #[error("white-box gradients unavailable for this problem")]
    NoWhitebox,

    /// Moreau envelope called with lambda outside the smoothness range.
    #[error("moreau: lambda {lambda} must be < 1/sigma = {limit}")]
    LambdaTooLarge { lambda: f64, limit: f64 },

    /// A reference/prox subproblem solve stopped before reaching tolerance.
    #[error("subproblem did not converge: residual {residual:.3e} > tol {tol:.3e} after {iters} iterations")]
    SubproblemStalled {
        residual: f64,
        tol: f64,
        iters: u64,
    },

    /// Trace directories that cannot be compared against each other.
    #[error("trace mismatch: {0}")]
    TraceMismatch(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an inner-solver error with the reduction stage it occurred in.
    pub fn at_stage(self, stage: usize) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
