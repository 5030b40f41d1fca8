//! CSV data files with JSON sidecars.
//!
//! A data file has header `x0,...,x{d-1}` and one row per point. Its sidecar
//! lives next to it with `.json` appended to the file name.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryStrategy, CorruptedSet};
use crate::error::{invalid, Error, Result};
use crate::synth::{DistributionSpec, SampleSet};

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

pub fn write_matrix_csv(path: &Path, data: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record((0..data.ncols()).map(|j| format!("x{j}"))).map_err(|e| io_err(path, e))?;
    for row in data.rows() {
        w.write_record(row.iter().map(|x| format!("{x:e}"))).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let d = r.headers().map_err(|e| io_err(path, e))?.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        for field in rec.iter() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|e| io_err(path, format!("row {}: `{field}`: {e}", i + 1)))?;
            values.push(x);
        }
        n += 1;
    }
    if n == 0 || d == 0 {
        return Err(io_err(path, "no data rows"));
    }
    Array2::from_shape_vec((n, d), values).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| io_err(path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path, e)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub spec: Option<DistributionSpec>,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub true_mean: Vec<f64>,
    pub empirical_mean: Vec<f64>,
}

pub fn write_sample(path: &Path, set: &SampleSet) -> Result<()> {
    write_matrix_csv(path, &set.data)?;
    let meta = SampleMeta {
        spec: set.spec.clone(),
        seed: set.seed,
        n: set.n(),
        d: set.d(),
        true_mean: set.true_mean.clone(),
        empirical_mean: set.empirical_mean.clone(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Without a sidecar the empirical mean stands in for the true mean.
pub fn read_sample(path: &Path) -> Result<SampleSet> {
    let data = read_matrix_csv(path)?;
    let meta: Option<SampleMeta> = read_json(&sidecar_path(path))?;
    match meta {
        Some(m) => {
            let mut set = SampleSet::from_data(data, m.true_mean, m.seed)?;
            set.spec = m.spec;
            Ok(set)
        }
        None => {
            let mean = crate::synth::column_mean(&data);
            SampleSet::from_data(data, mean, 0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionMeta {
    pub eps: f64,
    pub strategy: Option<String>,
    pub seed: Option<u64>,
    pub mask_wstar: Vec<bool>,
    /// Pre-corruption values of the rows with mask false, in row order.
    pub replaced_originals: Vec<Vec<f64>>,
    pub origin_true_mean: Vec<f64>,
    pub origin_seed: u64,
    pub origin_spec: Option<DistributionSpec>,
}

pub fn write_corrupted(path: &Path, z: &CorruptedSet, strategy: Option<&AdversaryStrategy>, seed: Option<u64>) -> Result<()> {
    write_matrix_csv(path, &z.z)?;
    let replaced_originals = z
        .mask_wstar
        .iter()
        .enumerate()
        .filter(|(_, &keep)| !keep)
        .map(|(i, _)| z.origin.data.row(i).to_vec())
        .collect();
    let meta = CorruptionMeta {
        eps: z.epsilon,
        strategy: strategy.map(|s| s.to_string()),
        seed,
        mask_wstar: z.mask_wstar.clone(),
        replaced_originals,
        origin_true_mean: z.origin.true_mean.clone(),
        origin_seed: z.origin.seed,
        origin_spec: z.origin.spec.clone(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Read a corrupted set. A file without a sidecar is taken as uncorrupted
/// data observed at level `eps`, which is then required.
pub fn read_corrupted(path: &Path, eps: Option<f64>) -> Result<CorruptedSet> {
    let z = read_matrix_csv(path)?;
    let meta: Option<CorruptionMeta> = read_json(&sidecar_path(path))?;
    let Some(m) = meta else {
        let eps = eps.ok_or_else(|| invalid(format!("{} has no sidecar, so eps must be given", path.display())))?;
        let origin = read_sample(path)?;
        return CorruptedSet::new(z, vec![true; origin.n()], eps, Arc::new(origin));
    };
    if m.mask_wstar.len() != z.nrows() {
        return Err(Error::Dimension(format!("sidecar mask has {} entries for {} rows", m.mask_wstar.len(), z.nrows())));
    }
    let mut clean = z.clone();
    let mut originals = m.replaced_originals.iter();
    for (i, &keep) in m.mask_wstar.iter().enumerate() {
        if !keep {
            let row = originals.next().ok_or_else(|| invalid("sidecar lists fewer originals than replaced rows"))?;
            if row.len() != z.ncols() {
                return Err(Error::Dimension("replaced original has the wrong length".into()));
            }
            clean.row_mut(i).iter_mut().zip(row).for_each(|(a, b)| *a = *b);
        }
    }
    let mut origin = SampleSet::from_data(clean, m.origin_true_mean, m.origin_seed)?;
    origin.spec = m.origin_spec;
    CorruptedSet::new(z, m.mask_wstar, eps.unwrap_or(m.eps), Arc::new(origin))
}
