// SPDX-License-Identifier: MIT OR Apache-2.0

//! Model files: a single JSON document with a format tag and version.
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so a reloaded model reproduces scores bit for bit. The prepared corpus
//! and any randomized kernel parameters are rebuilt from the stored spec
//! and seed on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FitConfig, VarianceModel};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::pipeline::Preprocessor;
use crate::series::TimeSeries;

pub const MODEL_FORMAT: &str = "kvnorm-model";
pub const MODEL_VERSION: u32 = 1;

/// A fitted model together with the preprocessing it was fitted after.
#[derive(Clone, Debug)]
pub struct ModelFile {
    pub model: VarianceModel,
    pub preprocessing: Option<Preprocessor>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    format: String,
    version: u32,
    kernel: KernelSpec,
    fit: FitConfig,
    preprocessing: Option<Preprocessor>,
    corpus: Vec<TimeSeries>,
    gram_diag: Vec<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<f64>,
    retained: usize,
    coords: Vec<f64>,
    coord_means: Vec<f64>,
}

impl ModelFile {
    pub fn new(model: VarianceModel, preprocessing: Option<Preprocessor>) -> Self {
        Self { model, preprocessing }
    }

    pub fn to_json(&self) -> String {
        let m = &self.model;
        let record = Record {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            kernel: m.spec.clone(),
            fit: m.fit,
            preprocessing: self.preprocessing.clone(),
            corpus: m.corpus.clone(),
            gram_diag: m.gram_diag.clone(),
            row_means: m.row_means.clone(),
            grand_mean: m.grand_mean,
            eigenvalues: m.eigenvalues.clone(),
            eigenvectors: m.raw_eigenvectors().to_vec(),
            retained: m.retained,
            coords: m.raw_coords().to_vec(),
            coord_means: m.coord_means.clone(),
        };
        serde_json::to_string(&record).expect("model record is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: Header =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if header.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unexpected format tag {:?}", header.format)));
        }
        if header.version != MODEL_VERSION {
            return Err(Error::ModelVersionMismatch {
                found: header.version,
                expected: MODEL_VERSION,
            });
        }
        let r: Record = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let model = VarianceModel::from_parts(
            r.kernel,
            r.fit,
            r.corpus,
            r.gram_diag,
            r.row_means,
            r.grand_mean,
            r.eigenvalues,
            r.eigenvectors,
            r.retained,
            r.coords,
            r.coord_means,
        )?;
        Ok(Self {
            model,
            preprocessing: r.preprocessing,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
