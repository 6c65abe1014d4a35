use ropasum_core::corpus::CorpusError;
use ropasum_core::diagnostics::DiagnosticsError;
use ropasum_core::experiments::{ExperimentError, LedgerError};
use ropasum_core::gold::GoldError;
use ropasum_core::llm::{CacheError, LlmError, ProviderError};
use ropasum_core::prompting::PromptError;
use ropasum_core::stats::StatsError;

pub const INVALID: u8 = 1;
pub const RUNTIME: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T = ()> = Result<T, Failure>;

pub fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: INVALID,
        error: e.into(),
    }
}

pub fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: RUNTIME,
        error: e.into(),
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                invalid(e)
            }
        }
    )*};
}

invalid_from!(CorpusError, GoldError, PromptError, StatsError, DiagnosticsError, serde_json::Error);

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                runtime(e)
            }
        }
    )*};
}

runtime_from!(LlmError, ProviderError, CacheError, std::io::Error, csv::Error);

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Io { .. } => runtime(e),
            _ => invalid(e),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Llm(_) | ExperimentError::Interrupted { .. } => runtime(e),
            ExperimentError::Ledger(l) => l.into(),
            _ => invalid(e),
        }
    }
}
