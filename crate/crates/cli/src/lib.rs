//! Experiment driver behind the `transfold` binary: configuration, method
//! dispatch and result records.

pub mod config;
pub mod record;
pub mod run;

use thiserror::Error;

pub use config::{Command, Format, Method, RunConfig, KEYS};
pub use record::{RecordSink, ResultRecord, CSV_HEADER};
pub use run::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    /// The request lies outside what an oracle can answer.
    #[error("oracle domain violation: {0}")]
    Domain(String),

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: transfold::Error,
    },

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn numerical(context: impl Into<String>) -> impl FnOnce(transfold::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Numerical { context, source }
    }

    /// 2 configuration, 3 numerical non-convergence, 4 light-cone or oracle
    /// domain violation.
    pub fn exit_code(&self) -> i32 {
        use transfold::Error as E;
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Domain(_) => 4,
            CliError::Numerical { source, .. } => match source {
                E::LightCone(_) => 4,
                E::InvalidParameter(_) => 2,
                _ => 3,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
