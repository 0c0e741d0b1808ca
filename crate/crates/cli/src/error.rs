use rtmsim_core::cohort::CohortError;
use thiserror::Error;

/// Failure of one command. Each variant has its own exit code:
///
/// | code | category       |
/// |------|----------------|
/// | 0    | success        |
/// | 2    | usage          |
/// | 3    | config         |
/// | 4    | invalid_spec   |
/// | 5    | mesh           |
/// | 6    | simulation     |
/// | 7    | data           |
/// | 8    | evaluation     |
/// | 9    | io             |
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Mesh(String),
    #[error("{0}")]
    Simulation(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Evaluation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::InvalidSpec(_) => "invalid_spec",
            CliError::Mesh(_) => "mesh",
            CliError::Simulation(_) => "simulation",
            CliError::Data(_) => "data",
            CliError::Evaluation(_) => "evaluation",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::InvalidSpec(_) => 4,
            CliError::Mesh(_) => 5,
            CliError::Simulation(_) => 6,
            CliError::Data(_) => 7,
            CliError::Evaluation(_) => 8,
            CliError::Io(_) => 9,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CohortError> for CliError {
    fn from(e: CohortError) -> Self {
        let msg = e.to_string();
        match e {
            CohortError::Phantom { .. } => CliError::InvalidSpec(msg),
            CohortError::Mesh { .. } => CliError::Mesh(msg),
            CohortError::Simulation { .. } => CliError::Simulation(msg),
            CohortError::InvalidConfig(_) => CliError::Config(msg),
            CohortError::Io(_) => CliError::Io(msg),
            CohortError::SchemaMismatch(_)
            | CohortError::Validation { .. }
            | CohortError::DuplicateId(_)
            | CohortError::EmptyDataset(_)
            | CohortError::GroupUndefined(_) => CliError::Data(msg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_and_nonzero() {
        let all = [
            CliError::Usage(String::new()),
            CliError::Config(String::new()),
            CliError::InvalidSpec(String::new()),
            CliError::Mesh(String::new()),
            CliError::Simulation(String::new()),
            CliError::Data(String::new()),
            CliError::Evaluation(String::new()),
            CliError::Io(String::new()),
        ];
        let mut codes: Vec<i32> = all.iter().map(CliError::exit_code).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), all.len());
        assert!(codes.iter().all(|&c| c > 1));
    }
}
