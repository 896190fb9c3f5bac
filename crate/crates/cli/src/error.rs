use std::fmt;
use std::path::Path;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("I/O error on {}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<mobwds::Error> for CliError {
    fn from(e: mobwds::Error) -> Self {
        use mobwds::Error as E;
        let text = e.to_string().replace('\n', " ");
        if e.is_numerical() {
            return CliError::Numerical(text);
        }
        match e {
            E::InvalidParams(_) | E::Config(_) => CliError::Usage(text),
            E::Parse { .. } | E::EmptyDataset | E::DegenerateData(_) | E::Io(_) | E::Json(_) => CliError::Data(text),
            _ => CliError::Numerical(text),
        }
    }
}
