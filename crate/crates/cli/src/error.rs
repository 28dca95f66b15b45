use coarse_switch::Error as CoreError;
use thiserror::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_)
                | CoreError::UnknownStrategy { .. }
                | CoreError::IncompatibleHorizon { .. } => EXIT_USAGE,
                CoreError::Domain(_)
                | CoreError::NoSaddle { .. }
                | CoreError::MarginalStability { .. }
                | CoreError::UnsupportedDimension { .. } => EXIT_DOMAIN,
                CoreError::StepUnderflow { .. } | CoreError::TooManySteps { .. } => EXIT_NUMERICAL,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_classes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(CoreError::NoSaddle { found: 1 }).exit_code(), 3);
        assert_eq!(
            CliError::from(CoreError::UnsupportedDimension { expected: 2, found: 1 }).exit_code(),
            3
        );
        assert_eq!(
            CliError::from(CoreError::IncompatibleHorizon {
                horizon: 5.0,
                interval: 0.3
            })
            .exit_code(),
            2
        );
        assert_eq!(CliError::from(CoreError::TooManySteps { t: 1.0, max_steps: 3 }).exit_code(), 4);
    }
}
