use std::fmt;

use hamflow::Error;

/// A reason to stop, carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const CHECK: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NUMERICAL: u8 = 3;

    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: Self::CONFIG, message: msg.into() }
    }

    pub fn check(msg: impl Into<String>) -> Self {
        Self { code: Self::CHECK, message: msg.into() }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::config(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_)
            | Error::InvalidRect { .. }
            | Error::EmptyWindow
            | Error::Json(_)
            | Error::Io(_) => Self::CONFIG,
            _ => Self::NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}
