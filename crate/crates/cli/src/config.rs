//! JSON run configuration; every key mirrors a flag and flags win.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::output::Failure;
use crate::Format;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub jz_tau: Option<f64>,
    pub jperp_tau: Option<f64>,
    pub bath_b_tau: Option<f64>,
    pub bath_seed: Option<u64>,
    pub shape: Option<String>,
    pub sequence: Option<String>,
    pub k_max: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Usage(format!("config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_mirror_flags() {
        let c = RunConfig::parse(r#"{"model": "xxz", "jz_tau": 0.5, "k_max": 4, "format": "csv"}"#).unwrap();
        assert_eq!(c.model.as_deref(), Some("xxz"));
        assert_eq!(c.format, Some(Format::Csv));
        assert!(RunConfig::parse(r#"{"jz": 1}"#).is_err());
    }
}
