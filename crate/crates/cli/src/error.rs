use std::fmt;

pub const EXIT_OK: i32 = 0;
/// Bad flags, configuration files, or architecture strings.
pub const EXIT_CONFIG: i32 = 1;
/// Missing, corrupt, or mismatched data and model files.
pub const EXIT_DATA: i32 = 2;
/// A non-finite loss or activation aborted the run, or a check failed.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { code: EXIT_DATA, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERIC, message: message.into() }
    }

    /// The message flattened onto a single line.
    pub fn one_line(&self) -> String {
        self.message.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<intff::Error> for CliError {
    fn from(e: intff::Error) -> Self {
        use intff::Error as E;
        let code = match &e {
            E::NonFinite { .. } => EXIT_NUMERIC,
            E::Data { .. } | E::ModelLoad { .. } | E::Io { .. } => EXIT_DATA,
            E::Shape { .. } | E::Domain(_) | E::ArchParse { .. } | E::Arch(_) | E::Config(_) => EXIT_CONFIG,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;
