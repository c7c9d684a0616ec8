use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Syntax { path: PathBuf, message: String },

    /// A key with a bad value; `expected` names the unit or form accepted.
    #[error("key `{key}`: {message} (expected {expected})")]
    Key {
        key: String,
        expected: &'static str,
        message: String,
    },

    #[error(transparent)]
    Scenario(#[from] covert_uav_core::Error),

    #[error("{0}")]
    Mismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn key(key: impl Into<String>, expected: &'static str, message: impl Into<String>) -> Self {
        Error::Key {
            key: key.into(),
            expected,
            message: message.into(),
        }
    }

    /// True for problems with the scenario itself (reachability, covertness),
    /// as opposed to IO or parsing.
    pub fn is_infeasible_scenario(&self) -> bool {
        matches!(
            self,
            Error::Scenario(
                covert_uav_core::Error::Unreachable { .. }
                    | covert_uav_core::Error::CovertnessInfeasible { .. }
                    | covert_uav_core::Error::InfeasibleExpansionPoint { .. }
            )
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
