use maglab_core::LabError;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Lab(LabError),
    Tolerance { what: String, measured: f64, tol: f64 },
    Check { failed: Vec<String> },
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Lab(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Lab(e) => e.kind(),
            CliError::Tolerance { .. } => "tolerance_violation",
            CliError::Check { .. } => "check_failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) => m.clone(),
            CliError::Lab(e) => e.to_string(),
            CliError::Tolerance { what, measured, tol } => format!("{what}: measured {measured:e} exceeds tolerance {tol:e}"),
            CliError::Check { failed } => format!("failed checks: {}", failed.join(", ")),
        }
    }

    pub fn to_json(&self, subcommand: &str) -> serde_json::Value {
        let mut detail = json!({ "kind": self.kind(), "message": self.message() });
        match self {
            CliError::Lab(e) => detail["detail"] = serde_json::to_value(e).unwrap_or_default(),
            CliError::Tolerance { what, measured, tol } => {
                detail["detail"] = json!({ "what": what, "measured": measured, "tol": tol });
            }
            CliError::Check { failed } => detail["detail"] = json!({ "failed": failed }),
            _ => {}
        }
        json!({ "status": "error", "subcommand": subcommand, "error": detail })
    }
}
