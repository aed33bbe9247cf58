use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmoError {
    #[error("agent {agent}: {detail}")]
    AgentDimension { agent: usize, detail: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("communication graph is not connected ({components} components)")]
    Disconnected { components: usize },

    #[error("supply weights sum to {sum}, expected 1")]
    SupplyWeights { sum: f64 },

    #[error("supplies do not add up to d0 (max deviation {deviation:e})")]
    SupplySum { deviation: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("point lies outside the constraint set (distance {distance:e})")]
    NotInSet { distance: f64 },

    #[error("non-finite {field}[{index}] at step {step}")]
    NonFinite {
        step: usize,
        field: &'static str,
        index: usize,
    },

    #[error("centralized oracle did not converge after {iterations} iterations (best residual {best_residual:e})")]
    OracleDiverged {
        iterations: usize,
        best_residual: f64,
    },

    #[error("centralized oracle cannot handle agent {agent}: {reason}")]
    OracleUnsupported { agent: usize, reason: String },

    #[error("Laplacian system residual {residual:e} exceeds tolerance")]
    EquilibriumResidual { residual: f64 },

    #[error("equilibrium carries no auxiliary point y*")]
    MissingAuxiliary,

    #[error("config: {0}")]
    Config(String),

    #[error("fixture: {0}")]
    Fixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EmoError>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(EmoError::Dimension {
            context,
            expected,
            got,
        })
    }
}
