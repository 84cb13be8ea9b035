use std::fmt;
use std::path::Path;

use labelsift::Error;

/// Failure categories with their process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags, config file or parameter values: exit 1.
    Config,
    /// Unreadable or unwritable files: exit 2.
    Io,
    /// Input that could not be parsed or holds no events: exit 2.
    Input,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 1,
            Kind::Io | Kind::Input => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Config => "config",
            Kind::Io => "io",
            Kind::Input => "input",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError {
            kind: Kind::Io,
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind.name(),
                "exit_code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Config(_) | Error::UnknownActivity(_) | Error::Perturbation(_) => Kind::Config,
            Error::Io { .. } => Kind::Io,
            Error::Row { .. } | Error::Xml { .. } | Error::Csv(_) | Error::Json(_) | Error::EmptyLog | Error::Emd(_) => {
                Kind::Input
            }
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}
