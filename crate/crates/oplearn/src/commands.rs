//! Subcommand implementations; `main` only parses arguments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use oplearn_core::basis::{evaluate, sample_compact};
use oplearn_core::deeponet::DeepONetParams;
use oplearn_core::frechet::FrechetNetParams;
use oplearn_core::rng::{stream, Domain};
use oplearn_core::stochastic::mc_solution_grid;
use oplearn_core::train::train;
use oplearn_core::{FunctionElement, ProblemSpec, ScalarField, TrainReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::data::{
    deeponet_batch, frechet_batch, generate_test, generate_training, read_checked, sensor_matrix,
    stream_batches, write_with_manifest,
};
use crate::error::{HarnessError, Result};
use crate::format::{Dataset, DatasetKind};
use crate::report::{errors_csv, EvalReport, Metadata, ParamCounts, XReport, HISTOGRAM_BINS};

pub const REPORT_VERSION: u32 = 1;

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            root: cfg.output_dir.clone(),
        }
    }

    pub fn train_data(&self) -> PathBuf {
        self.root.join("data/train.copl")
    }

    pub fn test_data(&self) -> PathBuf {
        self.root.join("data/test.copl")
    }

    pub fn frechet_checkpoint(&self, x_index: usize) -> PathBuf {
        self.root.join(format!("checkpoints/frechet_x{x_index}.json"))
    }

    pub fn deeponet_checkpoint(&self) -> PathBuf {
        self.root.join("checkpoints/deeponet.json")
    }

    pub fn frechet_trace(&self, x_index: usize) -> PathBuf {
        self.root.join(format!("traces/frechet_x{x_index}.csv"))
    }

    pub fn deeponet_trace(&self) -> PathBuf {
        self.root.join("traces/deeponet.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn timings(&self, command: &str) -> PathBuf {
        self.root.join(format!("timings/{command}.json"))
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    std::fs::write(path, contents).map_err(HarnessError::io(path))
}

/// Wall-clock timings live apart from the deterministic outputs.
fn record_timing(layout: &Layout, command: &str, entries: &[(String, f64)]) -> Result<()> {
    let map: serde_json::Map<String, serde_json::Value> = entries
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::json!(v)))
        .collect();
    write_file(
        &layout.timings(command),
        serde_json::to_string_pretty(&map).expect("timings serialize") + "\n",
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSplit {
    Train,
    Test,
}

pub fn gen_data(cfg: &ExperimentConfig, splits: &[DataSplit]) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let gen = cfg.generator()?;
    let mut written = Vec::new();
    let mut timings = Vec::new();
    for split in splits {
        let start = Instant::now();
        let (ds, path, name) = match split {
            DataSplit::Train => (
                generate_training(&gen, cfg.data.m_train)?,
                layout.train_data(),
                "train",
            ),
            DataSplit::Test => (
                generate_test(&gen, cfg.data.m_test, cfg.data.oracle_paths)?,
                layout.test_data(),
                "test",
            ),
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
        }
        write_with_manifest(&ds, &path, cfg)?;
        timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        written.push(path);
    }
    record_timing(&layout, "gen-data", &timings)?;
    Ok(written)
}

fn trace_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch,loss\n");
    for (e, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(s, "{},{l}", e + 1);
    }
    s
}

/// Grid indices selected by `--x`: `None` means every grid point.
pub fn select_x(cfg: &ExperimentConfig, x: Option<f64>) -> Result<Vec<usize>> {
    let grid = &cfg.problem.x_grid;
    match x {
        None => Ok((0..grid.len()).collect()),
        Some(v) => grid
            .iter()
            .position(|g| (g - v).abs() < 1e-12)
            .map(|i| vec![i])
            .ok_or_else(|| HarnessError::Validation(format!("x = {v} is not on the grid {grid:?}"))),
    }
}

pub struct TrainedFrechet {
    pub x_index: usize,
    pub params: FrechetNetParams,
    pub report: TrainReport,
}

pub fn train_frechet_on(cfg: &ExperimentConfig, ds: &Dataset, x_index: usize) -> Result<TrainedFrechet> {
    let tc = cfg.frechet_train(x_index);
    let mut params = FrechetNetParams::init(cfg.frechet_shape(), &cfg.activation(), tc.init_scale, tc.seed)?;
    params.train_activation = cfg.frechet.train_activation;
    let n = ds.len();
    let steps = n.div_ceil(tc.batch_size);
    let report = train(&mut params, &tc, steps, |epoch| {
        stream_batches(n, tc.batch_size, tc.shuffle_seed, epoch).map(|idx| frechet_batch(ds, x_index, &idx))
    })?;
    Ok(TrainedFrechet {
        x_index,
        params,
        report,
    })
}

pub fn train_deeponet_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<(DeepONetParams, TrainReport)> {
    let tc = cfg.deeponet_train();
    let shape = cfg.deeponet_shape();
    let sensors = sensor_matrix(&cfg.basis()?, &cfg.sensor_grid()?, ds)?;
    let mut params = DeepONetParams::init(shape, tc.init_scale, tc.seed)?;
    let n = ds.len();
    // batch_size counts (record, x) pairs
    let records_per_batch = (tc.batch_size / ds.header.n_x()).max(1);
    let steps = n.div_ceil(records_per_batch);
    let report = train(&mut params, &tc, steps, |epoch| {
        stream_batches(n, records_per_batch, tc.shuffle_seed, epoch)
            .map(|idx| deeponet_batch(ds, &sensors, shape.n_sensors, &idx))
    })?;
    Ok((params, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Frechet,
    DeepONet,
}

/// Trains and writes checkpoints plus loss traces; returns the checkpoint paths.
pub fn train_models(cfg: &ExperimentConfig, model: ModelKind, x: Option<f64>) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(cfg);
    let ds = read_checked(&layout.train_data(), cfg, DatasetKind::Train)?;
    let hashes = (cfg.hash(), cfg.data_hash());
    let hashes = (hashes.0.as_str(), hashes.1.as_str());
    let mut written = Vec::new();
    let mut timings = Vec::new();
    match model {
        ModelKind::Frechet => {
            let selected = select_x(cfg, x)?;
            let trained: Vec<(Result<TrainedFrechet>, f64)> = selected
                .par_iter()
                .map(|&i| {
                    let start = Instant::now();
                    (train_frechet_on(cfg, &ds, i), start.elapsed().as_secs_f64())
                })
                .collect();
            for (t, secs) in trained {
                let t = t?;
                let xv = cfg.problem.x_grid[t.x_index];
                let path = layout.frechet_checkpoint(t.x_index);
                let cp = Checkpoint::frechet(&t.params, xv, t.x_index, hashes, &t.report.epoch_losses);
                write_file(&path, serde_json::to_string_pretty(&cp).expect("checkpoint serializes") + "\n")?;
                write_file(&layout.frechet_trace(t.x_index), trace_csv(&t.report))?;
                timings.push((format!("frechet_x{}", t.x_index), secs));
                written.push(path);
            }
        }
        ModelKind::DeepONet => {
            let start = Instant::now();
            let (params, report) = train_deeponet_on(cfg, &ds)?;
            let path = layout.deeponet_checkpoint();
            let d = &cfg.deeponet;
            let cp = Checkpoint::deeponet(&params, d.sensor_lo, d.sensor_hi, hashes, &report.epoch_losses);
            write_file(&path, serde_json::to_string_pretty(&cp).expect("checkpoint serializes") + "\n")?;
            write_file(&layout.deeponet_trace(), trace_csv(&report))?;
            timings.push(("deeponet".to_string(), start.elapsed().as_secs_f64()));
            written.push(path);
        }
    }
    let name = match model {
        ModelKind::Frechet => "train-frechet",
        ModelKind::DeepONet => "train-deeponet",
    };
    record_timing(&layout, name, &timings)?;
    Ok(written)
}

fn load_checkpoint(path: &Path, cfg: &ExperimentConfig) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(HarnessError::Validation(format!("missing checkpoint {}", path.display())));
    }
    let cp = Checkpoint::read(path)?;
    if cp.config_hash != cfg.hash() || cp.data_hash != cfg.data_hash() {
        return Err(HarnessError::Lineage(format!(
            "{} was trained under a different configuration",
            path.display()
        )));
    }
    Ok(cp)
}

/// Predictions `[x_index][record]` from a per-record closure.
pub fn predict_grid(
    ds: &Dataset,
    predict: impl Fn(usize, usize) -> oplearn_core::Result<f64> + Sync,
) -> Result<Vec<Vec<f64>>> {
    (0..ds.header.n_x())
        .map(|j| {
            (0..ds.len())
                .map(|i| predict(i, j).map_err(oplearn_core::Error::at_record(i)))
                .collect::<oplearn_core::Result<Vec<_>>>()
                .map_err(HarnessError::from)
        })
        .collect()
}

/// `prediction − truth` per grid point.
pub fn errors_against(ds: &Dataset, predictions: &[Vec<f64>]) -> Vec<Vec<f64>> {
    predictions
        .iter()
        .enumerate()
        .map(|(j, col)| {
            col.iter()
                .zip(ds.value_column(j))
                .map(|(p, t)| p - t)
                .collect()
        })
        .collect()
}

pub fn build_report(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    frechet_errors: &[Vec<f64>],
    deeponet_errors: &[Vec<f64>],
    param_counts: ParamCounts,
) -> EvalReport {
    EvalReport {
        version: REPORT_VERSION,
        config_hash: cfg.hash(),
        data_hash: cfg.data_hash(),
        n_test: ds.len(),
        metadata: Metadata {
            seeds: cfg.seeds,
            param_counts,
            m_train: cfg.data.m_train,
            oracle_paths: cfg.data.oracle_paths,
            shared_dataset: true,
            histogram_bins: HISTOGRAM_BINS,
        },
        per_x: ds
            .header
            .x_grid
            .iter()
            .enumerate()
            .map(|(j, &x)| XReport::from_errors(x, &frechet_errors[j], &deeponet_errors[j]))
            .collect(),
    }
}

pub fn evaluate_models(cfg: &ExperimentConfig) -> Result<EvalReport> {
    let layout = Layout::new(cfg);
    let start = Instant::now();
    let ds = read_checked(&layout.test_data(), cfg, DatasetKind::Test)?;
    let shape = cfg.frechet_shape();
    let frechet = (0..ds.header.n_x())
        .map(|j| {
            let path = layout.frechet_checkpoint(j);
            load_checkpoint(&path, cfg)?.to_frechet(&path, &shape)
        })
        .collect::<Result<Vec<_>>>()?;
    let dpath = layout.deeponet_checkpoint();
    let deeponet = load_checkpoint(&dpath, cfg)?.to_deeponet(&dpath, &cfg.deeponet_shape())?;
    let sensors = sensor_matrix(&cfg.basis()?, &cfg.sensor_grid()?, &ds)?;
    let s = deeponet.shape.n_sensors;
    let xs = ds.header.x_grid.clone();

    let f_pred = predict_grid(&ds, |i, j| frechet[j].forward(ds.coeffs(i)))?;
    let d_pred = predict_grid(&ds, |i, j| deeponet.forward(&sensors[i * s..(i + 1) * s], xs[j]))?;
    let f_err = errors_against(&ds, &f_pred);
    let d_err = errors_against(&ds, &d_pred);
    let counts = ParamCounts {
        frechet: frechet[0].param_count(),
        deeponet: deeponet.param_count(),
    };
    let report = build_report(cfg, &ds, &f_err, &d_err, counts);

    let dir = layout.report_dir();
    write_file(
        &dir.join("eval.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    write_file(&dir.join("mse.csv"), report.mse_csv())?;
    write_file(&dir.join("quantiles.csv"), report.quantiles_csv())?;
    write_file(&dir.join("histogram.csv"), report.histogram_csv())?;
    write_file(&dir.join("errors.csv"), errors_csv(&xs, &f_err, &d_err))?;
    record_timing(&layout, "evaluate", &[("evaluate".into(), start.elapsed().as_secs_f64())])?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCase {
    ZeroC,
    ConstC,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub kappa: f64,
    pub x: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub closed_form: f64,
    pub z_score: f64,
    pub pass: bool,
}

/// `u = (x² + (T − t))·e^{κ(T − t)}` for `c ≡ κ`, `φ = x²`, `f = 0`.
pub fn closed_form(x: f64, kappa: f64, t: f64, horizon: f64) -> f64 {
    let tau = horizon - t;
    (x * x + tau) * (kappa * tau).exp()
}

pub struct OracleRequest {
    pub case: OracleCase,
    pub kappas: Vec<f64>,
    pub xs: Vec<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
}

pub fn oracle(cfg: &ExperimentConfig, req: &OracleRequest) -> Result<Vec<OracleCheck>> {
    let kappas = match req.case {
        OracleCase::ZeroC => vec![0.0],
        OracleCase::ConstC if req.kappas.is_empty() => vec![0.3, -0.5],
        OracleCase::ConstC => req.kappas.clone(),
        OracleCase::Custom if req.kappas.is_empty() || req.xs.is_empty() => {
            return Err(HarnessError::Validation("custom oracle needs --kappa and --x".into()));
        }
        OracleCase::Custom => req.kappas.clone(),
    };
    let xs = if req.xs.is_empty() {
        cfg.problem.x_grid.clone()
    } else {
        req.xs.clone()
    };
    let n_paths = req.n_paths.unwrap_or(cfg.data.oracle_paths);
    let seed = req.seed.unwrap_or(cfg.seeds.dataset);
    let p = &cfg.problem;
    let mut checks = Vec::new();
    for (k, &kappa) in kappas.iter().enumerate() {
        let mut spec: ProblemSpec = cfg.problem_template();
        spec.c = ScalarField::Constant(kappa);
        let est = mc_solution_grid(&xs, p.t, &spec, n_paths, p.n_steps, seed.wrapping_add(k as u64))?;
        for (&x, e) in xs.iter().zip(est) {
            let truth = closed_form(x, kappa, p.t, p.horizon);
            let z = (e.estimate - truth) / e.std_error;
            checks.push(OracleCheck {
                kappa,
                x,
                estimate: e.estimate,
                std_error: e.std_error,
                closed_form: truth,
                z_score: z,
                pass: z.abs() <= 3.0,
            });
        }
    }
    Ok(checks)
}

/// Writes `basis.csv` (and `samples.csv` when `samples > 0`) under `report/basis`.
pub fn dump_basis(
    cfg: &ExperimentConfig,
    lo: f64,
    hi: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    if n < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(HarnessError::Validation(format!(
            "--dump-grid needs finite lo < hi and n ≥ 2, got {lo} {hi} {n}"
        )));
    }
    let basis = cfg.basis()?;
    let nb = basis.n_basis();
    let grid: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect();
    let dir = Layout::new(cfg).root.join("report/basis");
    let mut out = Vec::new();

    let mut s = String::from("x");
    for k in 1..=nb {
        let _ = write!(s, ",e_{k}");
    }
    s.push('\n');
    for &x in &grid {
        let _ = write!(s, "{x}");
        for v in basis.basis_values(x)? {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    let path = dir.join("basis.csv");
    write_file(&path, s)?;
    out.push(path);

    if samples > 0 {
        let mut rng = stream(seed, Domain::Samples, 0);
        let draws: Vec<FunctionElement> = (0..samples).map(|_| sample_compact(&cfg.compact(), &mut rng)).collect();
        let mut s = String::from("x");
        for k in 1..=samples {
            let _ = write!(s, ",c_{k}");
        }
        s.push('\n');
        for &x in &grid {
            let _ = write!(s, "{x}");
            for fe in &draws {
                let _ = write!(s, ",{}", evaluate(&basis, fe, x)?);
            }
            s.push('\n');
        }
        let path = dir.join("samples.csv");
        write_file(&path, s)?;
        out.push(path);
    }
    Ok(out)
}
