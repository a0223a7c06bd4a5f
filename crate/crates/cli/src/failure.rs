//! Errors reported as one machine-parsable JSON line on stderr.

use std::fmt;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Invalid or unknown configuration; exit code 2.
    Config,
    /// A referenced input is missing or unreadable; exit code 2.
    Input,
    /// Failure while doing the work; exit code 1.
    Runtime,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub message: String,
}

impl Failure {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Config,
            key: (!key.is_empty()).then(|| key.to_string()),
            path: None,
            message: message.into(),
        }
    }

    pub fn input(path: &Path, message: impl Into<String>) -> Self {
        Self { kind: Kind::Input, key: None, path: Some(path.display().to_string()), message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { kind: Kind::Runtime, key: None, path: None, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Config | Kind::Input => 2,
            Kind::Runtime => 1,
        }
    }

    /// The single-line JSON form printed on failure.
    pub fn to_line(&self) -> String {
        let body = serde_json::to_string(self).expect("failure serializes");
        format!("{{\"error\":{body}}}")
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<doanet::Error> for Failure {
    fn from(e: doanet::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_is_single_json_object() {
        let f = Failure::config("eval.bogus", "unknown field `bogus`\nexpected one of ...");
        let line = f.to_line();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"]["kind"], "config");
        assert_eq!(v["error"]["key"], "eval.bogus");
        assert_eq!(f.exit_code(), 2);
        assert_eq!(Failure::runtime("x").exit_code(), 1);
    }
}
