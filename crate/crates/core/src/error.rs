use thiserror::Error;

/// Errors raised by the design engine. Arm indices in messages are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("arm index {arm} out of range (scenario has {arms} arms)")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("covariate point {point:?} lies outside the support")]
    OutsideSupport { point: Vec<f64> },

    #[error("arms {first} and {second} are identical; their crossing set is not finite")]
    IdenticalArms { first: usize, second: usize },

    #[error("arm {arm} is starved (allocation mass {nu:.3e} below 1e-6)")]
    StarvedArm { arm: usize, nu: f64 },

    #[error("moment matrix of arm {arm} is singular")]
    SingularMoments { arm: usize },

    #[error("tangential crossing at x = {theta}: slope gap {gap:.3e} below 1e-8")]
    TangentialCrossing { theta: f64, gap: f64 },

    #[error("reconstruction inapplicable: {0}")]
    ReconstructionInapplicable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),
}

impl DesignError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            DesignError::Config(_) => 2,
            DesignError::StarvedArm { .. }
            | DesignError::SingularMoments { .. }
            | DesignError::TangentialCrossing { .. } => 3,
            DesignError::Unsupported(_) | DesignError::ReconstructionInapplicable(_) => 4,
            DesignError::ArmOutOfRange { .. }
            | DesignError::OutsideSupport { .. }
            | DesignError::IdenticalArms { .. }
            | DesignError::InvalidInput(_) => 2,
        }
    }
}

pub type Result<T, E = DesignError> = std::result::Result<T, E>;
