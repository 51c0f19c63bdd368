//! `benchfold.toml`: defaults shared by all subcommands.
//!
//! ```toml
//! resources = "sd/XMLResources"
//! registries = ["my-backends.toml"]
//! metadata = "sd/meta.ttl"
//! verbosity = "info"
//!
//! [limits]
//! time = 600      # seconds
//! memory = 4096   # MB
//! grace = 5       # seconds
//! ```
//!
//! Paths are taken relative to the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::failure::Failure;

pub const CONFIG_FILE: &str = "benchfold.toml";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub resources: Option<PathBuf>,
    #[serde(default)]
    pub registries: Vec<PathBuf>,
    pub metadata: Option<PathBuf>,
    #[serde(default)]
    pub limits: LimitDefaults,
    pub verbosity: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitDefaults {
    pub time: Option<f64>,
    pub memory: Option<u64>,
    pub grace: Option<f64>,
}

impl CliConfig {
    /// `explicit` must exist; otherwise `benchfold.toml` in the working
    /// directory is used when present.
    pub fn load(explicit: Option<&Path>) -> Result<Self, Failure> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let p = PathBuf::from(CONFIG_FILE);
                if !p.is_file() {
                    return Ok(CliConfig::default());
                }
                p
            }
        };
        let text = fs::read_to_string(&path).map_err(|e| Failure::input("config", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::input("config", format!("{}: {}", path.display(), e.message())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let c: CliConfig = toml::from_str(
            "resources = \"r\"\nregistries = [\"a.toml\"]\n[limits]\ntime = 1.5\nmemory = 100\n",
        )
        .unwrap();
        assert_eq!(c.resources, Some(PathBuf::from("r")));
        assert_eq!(c.limits.time, Some(1.5));
        assert_eq!(c.limits.memory, Some(100));
        assert!(toml::from_str::<CliConfig>("resource = \"r\"").is_err());
    }

    #[test]
    fn explicit_missing_file_fails() {
        let err = CliConfig::load(Some(Path::new("/nonexistent/benchfold.toml"))).unwrap_err();
        assert_eq!(err.code, 2);
    }
}
