// SPDX-License-Identifier: MIT OR Apache-2.0

//! TOML run configuration.

use std::path::{Path, PathBuf};

use kvnorm::pipeline::{FamilyChoice, GridSpec, PreprocConfig};
use kvnorm::{FitConfig, KernelSpec, ScoreMethod};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Option<ScoreMethod>,
    pub alpha: Option<f64>,
    pub normal_class: Option<String>,
    pub family: Option<FamilyChoice>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub fit: FitConfig,
    /// Absent means the fit sees the raw series.
    pub preprocessing: Option<PreprocConfig>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub paths: Paths,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Syntax errors are parse errors; schema errors are config errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        let cfg: RunConfig = RunConfig::deserialize(table).map_err(|e| {
            let msg = e.message().to_string();
            CliError::Config {
                key: offending_key(&msg).unwrap_or_else(|| "-".to_string()),
                msg,
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(a) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(CliError::config("alpha", "must be finite and non-negative"));
            }
        }
        if let Some(k) = &self.kernel {
            k.validate().map_err(|e| CliError::config("kernel", e.to_string()))?;
        }
        if let Some(p) = &self.preprocessing {
            p.validate().map_err(|e| CliError::config("preprocessing", e.to_string()))?;
        }
        if !(self.fit.threshold >= 0.0 && self.fit.threshold.is_finite()) {
            return Err(CliError::config("fit.threshold", "must be finite and non-negative"));
        }
        self.grid.validate().map_err(|e| CliError::config("grid", e.to_string()))
    }
}

fn line_of(text: &str, offset: usize) -> u64 {
    1 + text.as_bytes()[..offset.min(text.len())].iter().filter(|&&b| b == b'\n').count() as u64
}

fn offending_key(msg: &str) -> Option<String> {
    let rest = msg.split_once("unknown field `")?.1;
    Some(rest.split_once('`')?.0.to_string())
}
