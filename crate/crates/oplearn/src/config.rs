//! Experiment configuration: a versioned TOML document.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use oplearn_core::basis::{build_basis, BasisSet, CompactSetSpec, MAX_BASIS};
use oplearn_core::dataset::{validate_x_grid, DataGenerator};
use oplearn_core::deeponet::{DeepONetShape, SensorGrid};
use oplearn_core::frechet::{ActivationSpec, FrechetShape, ScalarSigmoid};
use oplearn_core::optim::OptimizerKind;
use oplearn_core::train::{LrSchedule, TrainConfig};
use oplearn_core::{ProblemSpec, ScalarField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Relative paths are resolved against the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub problem: ProblemSection,
    pub data: DataSection,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub frechet: FrechetSection,
    #[serde(default)]
    pub deeponet: DeepONetSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// `∂_t u + ½u'' + c u = 0`, `u(·, T) = x²`, with `c` drawn from the coefficient cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n_basis: usize,
    pub bound: f64,
    pub x_grid: Vec<f64>,
    pub t: f64,
    pub horizon: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub m_train: usize,
    pub m_test: usize,
    pub oracle_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub dataset: u64,
    pub init: u64,
    pub shuffle: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            dataset: 1,
            init: 2,
            shuffle: 3,
        }
    }
}

/// Optimizer settings shared by both model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub schedule: LrSchedule,
    pub readout_lr_scale: f64,
    pub init_scale: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            optimizer: d.optimizer,
            schedule: d.schedule,
            readout_lr_scale: d.readout_lr_scale,
            init_scale: d.init_scale,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            schedule: self.schedule,
            readout_lr_scale: self.readout_lr_scale,
            init_scale: self.init_scale,
            seed,
            shuffle_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrechetSection {
    pub depth: usize,
    /// Number of deep neurons.
    pub width: usize,
    pub sigmoid: ScalarSigmoid,
    /// Every weight of the functional `ψ`.
    pub psi: f64,
    /// Every coefficient of the direction `z`.
    pub z: f64,
    pub train_activation: bool,
    pub train: TrainSection,
}

impl Default for FrechetSection {
    fn default() -> Self {
        Self {
            depth: 2,
            width: 15,
            sigmoid: ScalarSigmoid::ClippedExp,
            psi: 0.25,
            z: 1.0,
            train_activation: false,
            train: TrainSection {
                learning_rate: 0.03,
                schedule: LrSchedule::Cosine,
                readout_lr_scale: 10.0,
                ..TrainSection::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeepONetSection {
    pub n_sensors: usize,
    pub sensor_lo: f64,
    pub sensor_hi: f64,
    pub branch_hidden: usize,
    pub trunk_hidden: usize,
    pub latent: usize,
    pub train: TrainSection,
}

impl Default for DeepONetSection {
    fn default() -> Self {
        let shape = DeepONetShape::default();
        Self {
            n_sensors: shape.n_sensors,
            sensor_lo: -4.0,
            sensor_hi: 4.0,
            branch_hidden: shape.branch_hidden,
            trunk_hidden: shape.trunk_hidden,
            latent: shape.latent,
            train: TrainSection {
                learning_rate: 3e-3,
                schedule: LrSchedule::Cosine,
                ..TrainSection::default()
            },
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale experiment: 200k training records, 2k test records.
    pub fn desk() -> Self {
        Self {
            version: CONFIG_VERSION,
            output_dir: default_output_dir(),
            problem: ProblemSection {
                n_basis: 5,
                bound: 5.0,
                x_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
                t: 0.0,
                horizon: 1.0,
                n_steps: 100,
            },
            data: DataSection {
                m_train: 200_000,
                m_test: 2_000,
                oracle_paths: 10_000,
            },
            seeds: Seeds::default(),
            frechet: FrechetSection::default(),
            deeponet: DeepONetSection::default(),
        }
    }

    /// Parses and validates a config; errors carry the offending line.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate_with_source(Some(text))?;
        Ok(cfg)
    }

    /// Reads `path` and resolves `output_dir` against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if cfg.output_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_source(None)
    }

    fn validate_with_source(&self, source: Option<&str>) -> Result<()> {
        let fail = |section: &str, key: &str, msg: String| {
            let at = source
                .and_then(|s| locate(s, section, key))
                .map(|line| format!("line {line}: "))
                .unwrap_or_default();
            Err(HarnessError::Config(format!("{at}{section}.{key}: {msg}")))
        };
        if self.version != CONFIG_VERSION {
            return fail("", "version", format!("unsupported version {}", self.version));
        }
        let p = &self.problem;
        if p.n_basis == 0 || p.n_basis > MAX_BASIS {
            return fail("problem", "n_basis", format!("must be in 1..={MAX_BASIS}"));
        }
        if !(p.bound >= 0.0 && p.bound.is_finite()) {
            return fail("problem", "bound", "must be finite and non-negative".into());
        }
        if let Err(e) = validate_x_grid(&p.x_grid) {
            return fail("problem", "x_grid", e.to_string());
        }
        if !(p.t.is_finite() && p.horizon.is_finite() && p.t < p.horizon) {
            return fail("problem", "horizon", "need finite t < horizon".into());
        }
        if p.n_steps == 0 {
            return fail("problem", "n_steps", "must be at least 1".into());
        }
        let d = &self.data;
        for (key, v) in [("m_train", d.m_train), ("m_test", d.m_test)] {
            if v == 0 {
                return fail("data", key, "must be at least 1".into());
            }
        }
        if d.oracle_paths < 2 {
            return fail("data", "oracle_paths", "must be at least 2".into());
        }
        if let Err(e) = self.frechet_shape().validate() {
            return fail("frechet", "width", e.to_string());
        }
        if let Err(e) = self.activation().validate() {
            return fail("frechet", "psi", e.to_string());
        }
        if let Err(e) = self.deeponet_shape().validate() {
            return fail("deeponet", "n_sensors", e.to_string());
        }
        if let Err(e) = self.sensor_grid() {
            return fail("deeponet", "sensor_lo", e.to_string());
        }
        for (section, t) in [
            ("frechet.train", &self.frechet.train),
            ("deeponet.train", &self.deeponet.train),
        ] {
            if let Err(e) = t.to_train_config(0, 0).validate() {
                return fail(section, "learning_rate", e.to_string());
            }
        }
        Ok(())
    }

    /// Hash of everything except `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        digest(c.to_toml().as_bytes())
    }

    /// Hash of the fields that determine dataset contents.
    pub fn data_hash(&self) -> String {
        let mut s = String::new();
        let p = &self.problem;
        let _ = write!(
            s,
            "v{};N={};bound={:?};x={:?};t={:?};T={:?};steps={};train={};test={};paths={};seed={}",
            CONFIG_VERSION,
            p.n_basis,
            p.bound,
            p.x_grid,
            p.t,
            p.horizon,
            p.n_steps,
            self.data.m_train,
            self.data.m_test,
            self.data.oracle_paths,
            self.seeds.dataset
        );
        digest(s.as_bytes())
    }

    pub fn compact(&self) -> CompactSetSpec {
        CompactSetSpec {
            n_basis: self.problem.n_basis,
            bound: self.problem.bound,
        }
    }

    pub fn problem_template(&self) -> ProblemSpec {
        let mut spec = ProblemSpec::heat_with_potential(ScalarField::ZERO);
        spec.horizon = self.problem.horizon;
        spec
    }

    pub fn basis(&self) -> Result<BasisSet> {
        Ok(build_basis(self.problem.n_basis)?)
    }

    pub fn generator(&self) -> Result<DataGenerator> {
        Ok(DataGenerator::new(
            self.basis()?,
            self.compact(),
            self.problem_template(),
            self.problem.x_grid.clone(),
            self.problem.t,
            self.problem.n_steps,
            self.seeds.dataset,
        )?)
    }

    pub fn frechet_shape(&self) -> FrechetShape {
        FrechetShape {
            n_basis: self.problem.n_basis,
            depth: self.frechet.depth,
            width: self.frechet.width,
        }
    }

    pub fn activation(&self) -> ActivationSpec {
        let n = self.problem.n_basis;
        ActivationSpec {
            psi_weights: vec![self.frechet.psi; n],
            z_coeffs: vec![self.frechet.z; n],
            sigmoid: self.frechet.sigmoid,
        }
    }

    pub fn deeponet_shape(&self) -> DeepONetShape {
        DeepONetShape {
            n_sensors: self.deeponet.n_sensors,
            branch_hidden: self.deeponet.branch_hidden,
            trunk_hidden: self.deeponet.trunk_hidden,
            latent: self.deeponet.latent,
        }
    }

    pub fn sensor_grid(&self) -> Result<SensorGrid> {
        let d = &self.deeponet;
        Ok(SensorGrid::uniform(d.sensor_lo, d.sensor_hi, d.n_sensors)?)
    }

    /// Training settings for the Fréchet network at grid index `x_index`.
    pub fn frechet_train(&self, x_index: usize) -> TrainConfig {
        let off = x_index as u64;
        self.frechet
            .train
            .to_train_config(self.seeds.init.wrapping_add(off), self.seeds.shuffle.wrapping_add(off))
    }

    pub fn deeponet_train(&self) -> TrainConfig {
        self.deeponet
            .train
            .to_train_config(self.seeds.init, self.seeds.shuffle)
    }
}

pub(crate) fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 1-based line of `key = …` inside `[section]` (empty section means top level).
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        if current == section && k.trim() == key {
            return Some(i + 1);
        }
    }
    None
}
