// SPDX-License-Identifier: MIT OR Apache-2.0

//! Long-format CSV data sets.
//!
//! Header `series_id,label,t,c0,…,c{d−1}`. One row per time step; the rows
//! of a series are contiguous, `t` counts `0, 1, 2, …` without gaps, and the
//! label is the same on every row of a series.

use std::path::{Path, PathBuf};

use kvnorm::pipeline::LabeledSet;
use kvnorm::TimeSeries;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub series: Vec<TimeSeries>,
    pub dim: usize,
}

impl Dataset {
    pub fn into_labeled(self) -> LabeledSet {
        LabeledSet::new(self.series, self.labels).expect("one label per series")
    }
}

struct Builder {
    id: String,
    label: String,
    len: usize,
    values: Vec<f64>,
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(file, path)
}

pub fn parse_dataset<R: std::io::Read>(reader: R, path: &Path) -> Result<Dataset, CliError> {
    let err = |line: Option<u64>, msg: String| CliError::Parse {
        path: PathBuf::from(path),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(err(None, "empty file".into())),
        Some(r) => r.map_err(|e| err(e.position().map(|p| p.line()), e.to_string()))?,
    };
    if header.len() < 4 || &header[0] != "series_id" || &header[1] != "label" || &header[2] != "t" {
        return Err(err(Some(1), "header must start with series_id,label,t followed by c0,c1,...".into()));
    }
    let dim = header.len() - 3;
    for (k, name) in header.iter().skip(3).enumerate() {
        if name != format!("c{k}") {
            return Err(err(Some(1), format!("expected column c{k}, found {name:?}")));
        }
    }

    let mut ids: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut series = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut current: Option<Builder> = None;
    let finish = |b: Builder, series: &mut Vec<TimeSeries>, ids: &mut Vec<String>, labels: &mut Vec<String>| {
        series.push(TimeSeries::new(b.len, dim, b.values).expect("validated values"));
        ids.push(b.id);
        labels.push(b.label);
    };
    for rec in records {
        let rec = rec.map_err(|e| err(e.position().map(|p| p.line()), e.to_string()))?;
        let line = rec.position().map(|p| p.line());
        if rec.len() != dim + 3 {
            return Err(err(line, format!("expected {} fields, found {}", dim + 3, rec.len())));
        }
        let id = &rec[0];
        let label = &rec[1];
        let t: usize = rec[2]
            .parse()
            .map_err(|_| err(line, format!("t must be a non-negative integer, found {:?}", &rec[2])))?;
        let mut row = Vec::with_capacity(dim);
        for k in 0..dim {
            let v: f64 = rec[k + 3]
                .parse()
                .map_err(|_| err(line, format!("c{k}: not a number: {:?}", &rec[k + 3])))?;
            if !v.is_finite() {
                return Err(err(line, format!("c{k}: value must be finite")));
            }
            row.push(v);
        }
        let continuing = current.as_ref().is_some_and(|b| b.id == id);
        if !continuing {
            if let Some(b) = current.take() {
                finish(b, &mut series, &mut ids, &mut labels);
            }
            if !seen.insert(id.to_string()) {
                return Err(err(line, format!("rows of series {id:?} are not contiguous")));
            }
            current = Some(Builder {
                id: id.to_string(),
                label: label.to_string(),
                len: 0,
                values: Vec::new(),
            });
        }
        let b = current.as_mut().expect("just set");
        if b.label != label {
            return Err(err(line, format!("series {id:?} changes label from {:?} to {label:?}", b.label)));
        }
        if t != b.len {
            return Err(err(line, format!("series {id:?}: expected t = {}, found {t}", b.len)));
        }
        b.values.extend(row);
        b.len += 1;
    }
    match current.take() {
        Some(b) => finish(b, &mut series, &mut ids, &mut labels),
        None => return Err(err(None, "no data rows".into())),
    }
    Ok(Dataset {
        ids,
        labels,
        series,
        dim,
    })
}
