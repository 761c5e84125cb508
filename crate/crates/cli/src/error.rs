use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(andersonspec::Error),
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<andersonspec::Error> for CliError {
    fn from(e: andersonspec::Error) -> Self {
        use andersonspec::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidModel(_) | E::UnsupportedDimension(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Verification(_) => "verification",
            CliError::Io { .. } => "io",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        let mut body = json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        });
        if let CliError::Verification(checks) = self {
            body["error"]["failed_checks"] = json!(checks);
        }
        body.to_string()
    }
}

pub fn io_error(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
