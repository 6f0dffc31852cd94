//! Parallel dataset generation, manifests and minibatch assembly.

use std::path::{Path, PathBuf};

use oplearn_core::dataset::{DataGenerator, TRAIN_CHUNK};
use oplearn_core::deeponet::{sensor_sample, DeepONetBatch, SensorGrid};
use oplearn_core::frechet::OwnedBatch;
use oplearn_core::train::{batch_ranges, epoch_permutation};
use oplearn_core::{BasisSet, FunctionElement};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{digest, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::format::{Dataset, DatasetHeader, DatasetKind};

fn header(gen: &DataGenerator, kind: DatasetKind, n_records: usize) -> DatasetHeader {
    DatasetHeader {
        kind,
        n_basis: gen.basis.n_basis(),
        x_grid: gen.x_grid.clone(),
        n_records,
        seed: gen.seed,
        n_steps: gen.n_steps,
        t: gen.t,
        horizon: gen.template.horizon,
    }
}

/// First error in index order, so failures do not depend on scheduling.
fn first_error<T>(results: Vec<oplearn_core::Result<T>>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

pub fn generate_training(gen: &DataGenerator, count: usize) -> Result<Dataset> {
    let chunks = first_error(
        (0..count.div_ceil(TRAIN_CHUNK))
            .into_par_iter()
            .map(|c| gen.training_chunk(c, count))
            .collect(),
    )?;
    let records: Vec<_> = chunks.into_iter().flatten().collect();
    Ok(Dataset::from_training(header(gen, DatasetKind::Train, count), &records))
}

pub fn generate_test(gen: &DataGenerator, count: usize, n_paths: usize) -> Result<Dataset> {
    let records = first_error(
        (0..count)
            .into_par_iter()
            .map(|i| gen.test_record(i, n_paths))
            .collect(),
    )?;
    Ok(Dataset::from_test(header(gen, DatasetKind::Test, count), &records))
}

/// Lineage sidecar written next to every dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub config_hash: String,
    pub data_hash: String,
    pub sha256: String,
    pub n_records: usize,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write_with_manifest(ds: &Dataset, path: &Path, cfg: &ExperimentConfig) -> Result<Manifest> {
    let bytes = ds.encode();
    std::fs::write(path, &bytes).map_err(HarnessError::io(path))?;
    let manifest = Manifest {
        kind: match ds.header.kind {
            DatasetKind::Train => "train".into(),
            DatasetKind::Test => "test".into(),
        },
        config_hash: cfg.hash(),
        data_hash: cfg.data_hash(),
        sha256: digest(&bytes),
        n_records: ds.len(),
    };
    let mp = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&mp, text).map_err(HarnessError::io(&mp))?;
    Ok(manifest)
}

/// Reads a dataset after checking its manifest against `cfg` and the file bytes.
pub fn read_checked(path: &Path, cfg: &ExperimentConfig, kind: DatasetKind) -> Result<Dataset> {
    let mp = manifest_path(path);
    let text = std::fs::read_to_string(&mp).map_err(HarnessError::io(&mp))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| HarnessError::Format {
        path: mp.clone(),
        offset: 0,
        msg: e.to_string(),
    })?;
    if manifest.data_hash != cfg.data_hash() {
        return Err(HarnessError::Lineage(format!(
            "{} was generated from a different data configuration",
            path.display()
        )));
    }
    let bytes = std::fs::read(path).map_err(HarnessError::io(path))?;
    if digest(&bytes) != manifest.sha256 {
        return Err(HarnessError::Lineage(format!(
            "{} does not match the checksum in its manifest",
            path.display()
        )));
    }
    let ds = Dataset::decode(&bytes, path)?;
    if ds.header.kind != kind {
        return Err(HarnessError::Validation(format!(
            "{} holds {:?} records, expected {kind:?}",
            path.display(),
            ds.header.kind
        )));
    }
    let p = &cfg.problem;
    if ds.header.n_basis != p.n_basis || ds.header.x_grid != p.x_grid {
        return Err(HarnessError::Lineage(format!(
            "{} header disagrees with the config",
            path.display()
        )));
    }
    Ok(ds)
}

/// Record indices for each minibatch of `epoch`; the last batch may be short.
pub fn stream_batches(
    n_records: usize,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: usize,
) -> impl Iterator<Item = Vec<usize>> {
    let perm = epoch_permutation(n_records, shuffle_seed, epoch);
    batch_ranges(n_records, batch_size).map(move |r| perm[r].to_vec())
}

/// Coefficients and targets at one grid point.
pub fn frechet_batch(ds: &Dataset, x_index: usize, idx: &[usize]) -> OwnedBatch {
    let mut batch = OwnedBatch {
        inputs: Vec::with_capacity(idx.len() * ds.header.n_basis),
        targets: Vec::with_capacity(idx.len()),
    };
    for &i in idx {
        batch.inputs.extend_from_slice(ds.coeffs(i));
        batch.targets.push(ds.values(i)[x_index]);
    }
    batch
}

/// Sensor values for every record, row-major `n × S`.
pub fn sensor_matrix(basis: &BasisSet, grid: &SensorGrid, ds: &Dataset) -> Result<Vec<f64>> {
    let rows = first_error(
        (0..ds.len())
            .into_par_iter()
            .map(|i| sensor_sample(basis, &FunctionElement::new(ds.coeffs(i).to_vec()), grid))
            .collect(),
    )?;
    Ok(rows.concat())
}

pub fn deeponet_batch(ds: &Dataset, sensors: &[f64], n_sensors: usize, idx: &[usize]) -> DeepONetBatch {
    let mut batch = DeepONetBatch {
        sensors: Vec::with_capacity(idx.len() * n_sensors),
        targets: Vec::with_capacity(idx.len() * ds.header.n_x()),
        xs: ds.header.x_grid.clone(),
    };
    for &i in idx {
        batch
            .sensors
            .extend_from_slice(&sensors[i * n_sensors..(i + 1) * n_sensors]);
        batch.targets.extend_from_slice(ds.values(i));
    }
    batch
}
