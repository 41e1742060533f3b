use serde::Serialize;

/// Error classes. `Domain` maps to exit code 1, everything else to 2.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("numerical failure: {message} (partial value {partial:e}, estimated error {error:e})")]
    Numerical {
        message: String,
        partial: f64,
        error: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Resource(_) => "resource",
            Error::Numerical { .. } => "numerical",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 1,
            Error::Resource(_) | Error::Numerical { .. } => 2,
        }
    }

    /// Machine-readable form used by the CLI.
    pub fn to_report(&self) -> ErrorReport {
        let (partial, estimated_error) = match self {
            Error::Numerical { partial, error, .. } => (Some(*partial), Some(*error)),
            _ => (None, None),
        };
        ErrorReport {
            kind: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
            partial,
            estimated_error,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimated_error: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::domain("x").exit_code(), 1);
        assert_eq!(Error::resource("x").exit_code(), 2);
        let e = Error::Numerical { message: "m".into(), partial: 1.0, error: 0.5 };
        assert_eq!(e.exit_code(), 2);
        let json = serde_json::to_string(&e.to_report()).unwrap();
        assert!(json.contains("\"kind\":\"numerical\""));
    }
}
