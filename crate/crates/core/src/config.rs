//! Run configuration, read from TOML and echoed into every run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eftypes::OracleConfig;
use crate::error::{Error, Result};

/// Environment variable naming the composition table cache directory.
pub const CACHE_DIR_VAR: &str = "FVK_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fo_cap: usize,
    pub mso_cap: usize,
    pub mso_max_rank: u32,
    /// Largest |A| for 2^|A| subset enumeration.
    pub enum_budget: usize,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let o = OracleConfig::default();
        RunConfig {
            fo_cap: o.fo_cap,
            mso_cap: o.mso_cap,
            mso_max_rank: o.mso_max_rank,
            enum_budget: crate::preservation::DEFAULT_SUBSET_BUDGET,
            cache_dir: None,
            seed: 0,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let c: RunConfig =
            toml::from_str(text).map_err(|e| Error::domain(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fo_cap == 0 || self.mso_cap == 0 || self.enum_budget == 0 || self.jobs == 0 {
            return Err(Error::domain(
                "config: caps, enum_budget and jobs must be positive",
            ));
        }
        Ok(())
    }

    pub fn oracle(&self) -> OracleConfig {
        OracleConfig {
            fo_cap: self.fo_cap,
            mso_cap: self.mso_cap,
            mso_max_rank: self.mso_max_rank,
        }
    }

    /// The configured cache directory, else `$FVK_CACHE_DIR`.
    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        self.cache_dir.clone().or_else(|| {
            std::env::var_os(CACHE_DIR_VAR)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
