//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Criteria 5 to 7 run the desk-scale pipeline twice and take several minutes.
//! Setting OPLEARN_ACCEPTANCE_QUICK skips them and exits with status 2.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use oplearn::checkpoint::Checkpoint;
use oplearn::commands::{evaluate_models, gen_data, train_models, DataSplit, Layout, ModelKind};
use oplearn::core::basis::build_basis;
use oplearn::core::deeponet::{DeepONetBatch, DeepONetParams, DeepONetShape};
use oplearn::core::frechet::{ActivationSpec, FrechetNetParams, FrechetShape, RegressionBatch, ScalarSigmoid};
use oplearn::core::hermite::{gram_w12, hermite_with_derivatives};
use oplearn::core::rng::{stream, Domain, StreamRng};
use oplearn::core::stochastic::mc_solution;
use oplearn::core::{ProblemSpec, ScalarField};
use oplearn::report::EvalReport;
use oplearn::ExperimentConfig;
use rand::Rng;

type Outcome = Result<String, String>;

fn main() {
    let checks: [(&str, fn() -> Outcome); 4] = [
        ("1 gram table vs quadrature", gram_table),
        ("2 basis orthonormality", basis_orthonormality),
        ("3 feynman-kac closed forms", feynman_kac),
        ("4 gradients vs finite differences", gradients),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        failed += report(name, timed(check));
    }

    if std::env::var_os("OPLEARN_ACCEPTANCE_QUICK").is_some() {
        println!("SKIP criteria 5 to 7: OPLEARN_ACCEPTANCE_QUICK is set");
        std::process::exit(if failed > 0 { 1 } else { 2 });
    }
    let start = Instant::now();
    match desk_runs() {
        Ok(runs) => {
            let secs = start.elapsed().as_secs_f64();
            failed += report("5 desk-scale accuracy and loss traces", desk_accuracy(&runs.first));
            failed += report("6 determinism", determinism(&runs));
            failed += report("7 error distributions match mse", distribution_consistency(&runs.first));
            println!("desk pipeline: two runs in {secs:.0}s");
        }
        Err(e) => {
            for name in ["5 desk-scale accuracy", "6 determinism", "7 error distributions"] {
                failed += report(name, Err(format!("pipeline failed: {e}")));
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn report(name: &str, outcome: Outcome) -> usize {
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {name}: {detail}");
            0
        }
        Err(detail) => {
            println!("FAIL criterion {name}: {detail}");
            1
        }
    }
}

fn timed(check: fn() -> Outcome) -> Outcome {
    let start = Instant::now();
    check().map(|d| format!("{d} ({:.1}s)", start.elapsed().as_secs_f64()))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Composite Simpson rule on [-12, 12].
fn simpson() -> Vec<(f64, f64)> {
    let (lo, hi, n) = (-12.0, 12.0, 24_000usize);
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let w = match i {
                0 => 1.0,
                _ if i == n => 1.0,
                _ if i % 2 == 1 => 4.0,
                _ => 2.0,
            };
            (lo + h * i as f64, w * h / 3.0)
        })
        .collect()
}

fn gram_table() -> Outcome {
    let k = 13;
    let mut l2 = vec![0.0; k * k];
    let mut d2 = vec![0.0; k * k];
    for (x, w) in simpson() {
        let e = hermite_with_derivatives(x, k - 1).map_err(|e| e.to_string())?;
        let d = e.derivatives.as_ref().ok_or("no derivatives")?;
        for m in 0..k {
            for n in 0..k {
                l2[m * k + n] += w * e.values[m] * e.values[n];
                d2[m * k + n] += w * d[m] * d[n];
            }
        }
    }
    let (mut gram_err, mut l2_err) = (0.0f64, 0.0f64);
    for m in 0..k {
        for n in 0..k {
            gram_err = gram_err.max((l2[m * k + n] + d2[m * k + n] - gram_w12(m, n)).abs());
            let delta = if m == n { 1.0 } else { 0.0 };
            l2_err = l2_err.max((l2[m * k + n] - delta).abs());
        }
    }
    ensure(gram_err < 1e-7 && l2_err < 1e-8, || {
        format!("max gram error {gram_err:e}, max L2 error {l2_err:e}")
    })?;
    Ok(format!("max gram error {gram_err:.1e}, max L2 error {l2_err:.1e}"))
}

fn basis_orthonormality() -> Outcome {
    let n = 5;
    let basis = build_basis(n).map_err(|e| e.to_string())?;
    let (t, g) = (basis.transform(), basis.gram());
    let mut analytic = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += t[i * n + a] * g[a * n + b] * t[j * n + b];
                }
            }
            let delta = if i == j { 1.0 } else { 0.0 };
            analytic = analytic.max((s - delta).abs());
        }
    }
    let mut q = vec![0.0; n * n];
    for (x, w) in simpson() {
        let v = basis.basis_values(x).map_err(|e| e.to_string())?;
        let d = basis.basis_derivatives(x).map_err(|e| e.to_string())?;
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] += w * (v[i] * v[j] + d[i] * d[j]);
            }
        }
    }
    let quad = (0..n * n)
        .map(|ij| (q[ij] - if ij / n == ij % n { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    ensure(analytic < 1e-10 && quad < 1e-6, || {
        format!("T·G·Tᵀ error {analytic:e}, quadrature error {quad:e}")
    })?;
    Ok(format!("T·G·Tᵀ error {analytic:.1e}, quadrature error {quad:.1e}"))
}

fn feynman_kac() -> Outcome {
    let mut worst = 0.0f64;
    for (k, kappa) in [0.0, 0.3, -0.5].into_iter().enumerate() {
        let spec = ProblemSpec::heat_with_potential(ScalarField::Constant(kappa));
        for (i, x) in [-1.0, 0.0, 0.5, 1.0].into_iter().enumerate() {
            let est = mc_solution(x, 0.0, &spec, 10_000, 100, 500 + 10 * k as u64 + i as u64)
                .map_err(|e| e.to_string())?;
            let truth = (x * x + 1.0) * kappa.exp();
            let z = (est.estimate - truth).abs() / est.std_error;
            ensure(z < 3.0, || {
                format!("kappa={kappa} x={x}: {} vs {truth}, {z:.2} standard errors", est.estimate)
            })?;
            worst = worst.max(z);
        }
    }
    Ok(format!("12 cases, worst deviation {worst:.2} standard errors"))
}

const KINK_MARGIN: f64 = 1e-3;
const STEP: f64 = 1e-6;

fn uniform(rng: &mut StreamRng, s: f64) -> f64 {
    s * (2.0 * rng.random::<f64>() - 1.0)
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn central_difference(loss: impl Fn(&[f64]) -> f64, weights: &[f64], i: usize) -> f64 {
    let mut w = weights.to_vec();
    w[i] += STEP;
    let up = loss(&w);
    w[i] -= 2.0 * STEP;
    let down = loss(&w);
    (up - down) / (2.0 * STEP)
}

fn frechet_case(case: u64) -> Option<f64> {
    let mut rng = stream(case, Domain::Samples, 21);
    let shape = FrechetShape { n_basis: 5, depth: 2, width: 15 };
    let act = ActivationSpec {
        psi_weights: vec![0.25; 5],
        z_coeffs: vec![1.0; 5],
        sigmoid: ScalarSigmoid::ClippedExp,
    };
    let p = FrechetNetParams::init(shape, &act, 1.0, case).ok()?;
    let inputs: Vec<f64> = (0..15).map(|_| uniform(&mut rng, 5.0)).collect();
    let targets: Vec<f64> = (0..3).map(|_| uniform(&mut rng, 3.0)).collect();
    // skip draws with any ψ-preactivation near the kink
    for a in inputs.chunks_exact(5) {
        for j in 0..shape.width {
            let mut h = a.to_vec();
            for l in 0..shape.depth {
                let (m, b) = p.stage(j, l);
                let q: f64 = (0..5)
                    .map(|r| 0.25 * (b[r] + (0..5).map(|c| m[r * 5 + c] * h[c]).sum::<f64>()))
                    .sum();
                if q.abs() < KINK_MARGIN {
                    return None;
                }
                h = vec![act.sigmoid.value(q); 5];
            }
        }
    }
    let batch = RegressionBatch { inputs: &inputs, targets: &targets };
    let mut grad = vec![0.0; p.weights.len()];
    p.loss_and_grad(&batch, &mut grad).ok()?;
    // the trailing ψ and z entries are frozen
    let i = rng.random_range(0..shape.neuron_param_count());
    let loss = |w: &[f64]| {
        let mut q = p.clone();
        q.weights.copy_from_slice(w);
        let mut scratch = vec![0.0; w.len()];
        q.loss_and_grad(&batch, &mut scratch).unwrap()
    };
    Some(relative_error(grad[i], central_difference(loss, &p.weights, i)))
}

fn deeponet_case(case: u64) -> Option<f64> {
    let mut rng = stream(case, Domain::Samples, 22);
    let shape = DeepONetShape { n_sensors: 20, branch_hidden: 50, trunk_hidden: 50, latent: 50 };
    let mut p = DeepONetParams::init(shape, 1.0, case).ok()?;
    for w in p.weights.iter_mut() {
        if *w == 0.0 {
            *w = uniform(&mut rng, 0.5);
        }
    }
    let batch = DeepONetBatch {
        sensors: (0..20).map(|_| uniform(&mut rng, 2.0)).collect(),
        targets: (0..2).map(|_| uniform(&mut rng, 2.0)).collect(),
        xs: vec![uniform(&mut rng, 1.0), uniform(&mut rng, 1.0)],
    };
    let (s, hb, ht, lat) = (20, 50, 50, 50);
    let w = &p.weights;
    let b1 = hb * s;
    let v1 = b1 + hb + lat * hb + lat;
    let c1 = v1 + ht;
    for r in 0..hb {
        let pre = w[b1 + r] + (0..s).map(|c| w[r * s + c] * batch.sensors[c]).sum::<f64>();
        if pre.abs() < KINK_MARGIN {
            return None;
        }
    }
    for &x in &batch.xs {
        if (0..ht).any(|r| (w[c1 + r] + w[v1 + r] * x).abs() < KINK_MARGIN) {
            return None;
        }
    }
    let mut grad = vec![0.0; p.weights.len()];
    p.loss_and_grad(&batch, &mut grad).ok()?;
    let i = rng.random_range(0..p.weights.len());
    let loss = |w: &[f64]| {
        let mut q = p.clone();
        q.weights.copy_from_slice(w);
        let mut scratch = vec![0.0; w.len()];
        q.loss_and_grad(&batch, &mut scratch).unwrap()
    };
    Some(relative_error(grad[i], central_difference(loss, &p.weights, i)))
}

fn hundred_cases(name: &str, case: fn(u64) -> Option<f64>) -> Result<f64, String> {
    let (mut checked, mut seed, mut worst) = (0, 0u64, 0.0f64);
    while checked < 100 {
        ensure(seed < 2000, || format!("{name}: too many draws near a kink"))?;
        if let Some(err) = case(seed) {
            ensure(err < 1e-5, || format!("{name} case {seed}: relative error {err:e}"))?;
            worst = worst.max(err);
            checked += 1;
        }
        seed += 1;
    }
    Ok(worst)
}

fn gradients() -> Outcome {
    let f = hundred_cases("frechet", frechet_case)?;
    let d = hundred_cases("deeponet", deeponet_case)?;
    Ok(format!("worst relative error {f:.1e} (Fréchet), {d:.1e} (DeepONet)"))
}

struct Run {
    _dir: tempfile::TempDir,
    cfg: ExperimentConfig,
    report: EvalReport,
}

struct Runs {
    first: Run,
    second: Run,
}

fn desk_config() -> Result<ExperimentConfig, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    ExperimentConfig::load(&path).map_err(|e| e.to_string())
}

fn desk_run() -> Result<Run, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = desk_config()?;
    cfg.output_dir = dir.path().to_path_buf();
    gen_data(&cfg, &[DataSplit::Train, DataSplit::Test]).map_err(|e| e.to_string())?;
    train_models(&cfg, ModelKind::Frechet, None).map_err(|e| e.to_string())?;
    train_models(&cfg, ModelKind::DeepONet, None).map_err(|e| e.to_string())?;
    let report = evaluate_models(&cfg).map_err(|e| e.to_string())?;
    Ok(Run { _dir: dir, cfg, report })
}

fn desk_runs() -> Result<Runs, String> {
    Ok(Runs {
        first: desk_run()?,
        second: desk_run()?,
    })
}

fn desk_accuracy(run: &Run) -> Outcome {
    let cfg = &run.cfg;
    ensure(
        cfg.data.m_train == 200_000
            && cfg.data.m_test == 2_000
            && cfg.frechet.train.epochs == 25
            && cfg.frechet.train.batch_size == 10_000
            && cfg.deeponet.train.epochs == 25,
        || "desk config does not follow the desk protocol".into(),
    )?;
    let mut problems = Vec::new();
    let mut table = Vec::new();
    for r in &run.report.per_x {
        table.push(format!("x={}: {:.3}/{:.3}", r.x, r.mse_frechet, r.mse_deeponet));
        for (model, mse) in [("Fréchet", r.mse_frechet), ("DeepONet", r.mse_deeponet)] {
            if !(mse < 0.15) {
                problems.push(format!("{model} mse {mse:.4} at x={}", r.x));
            }
        }
    }
    let layout = Layout::new(cfg);
    let mut traces: Vec<(String, PathBuf)> = (0..cfg.problem.x_grid.len())
        .map(|i| (format!("Fréchet x{i}"), layout.frechet_checkpoint(i)))
        .collect();
    traces.push(("DeepONet".into(), layout.deeponet_checkpoint()));
    for (name, path) in traces {
        let trace = Checkpoint::read(&path).map_err(|e| e.to_string())?.loss_trace;
        for e in 3..trace.len() {
            if trace[e] > 1.1 * trace[e - 1] {
                problems.push(format!(
                    "{name} loss rose from {:.4} to {:.4} at epoch {}",
                    trace[e - 1],
                    trace[e],
                    e + 1
                ));
            }
        }
    }
    let summary = format!("mse Fréchet/DeepONet {}", table.join(", "));
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", problems.join("; ")))
    }
}

/// Relative path to contents, skipping wall-clock timings.
fn tree(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            let rel = path.strip_prefix(root).unwrap().to_path_buf();
            if rel.starts_with("timings") {
                continue;
            }
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(rel, fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn determinism(runs: &Runs) -> Outcome {
    let a = tree(&runs.first.cfg.output_dir)?;
    let b = tree(&runs.second.cfg.output_dir)?;
    ensure(a.keys().eq(b.keys()), || "runs produced different file sets".into())?;
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b[*k] != **v)
        .map(|(k, _)| k.display().to_string())
        .collect();
    ensure(differing.is_empty(), || format!("files differ: {}", differing.join(", ")))?;
    ensure(runs.first.report == runs.second.report, || "reports differ".into())?;
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect())
}

fn num(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("bad number {s:?}"))
}

fn distribution_consistency(run: &Run) -> Outcome {
    let dir = Layout::new(&run.cfg).report_dir();
    // (model, x) -> (count, Σe²) from each file
    let mut hist: BTreeMap<(String, String), (u64, f64)> = BTreeMap::new();
    for row in csv_rows(&dir.join("histogram.csv"))? {
        let e = hist.entry((row[0].clone(), row[1].clone())).or_default();
        e.0 += row[5].parse::<u64>().map_err(|e| e.to_string())?;
        e.1 += num(&row[6])?;
    }
    let mut raw: BTreeMap<(String, String), (u64, f64)> = BTreeMap::new();
    for row in csv_rows(&dir.join("errors.csv"))? {
        let e = raw.entry((row[0].clone(), row[1].clone())).or_default();
        let v = num(&row[3])?;
        e.0 += 1;
        e.1 += v * v;
    }
    let mut table: BTreeMap<(String, String), f64> = BTreeMap::new();
    for row in csv_rows(&dir.join("mse.csv"))? {
        table.insert(("frechet".into(), row[0].clone()), num(&row[1])?);
        table.insert(("deeponet".into(), row[0].clone()), num(&row[2])?);
    }
    let quantile_rows = csv_rows(&dir.join("quantiles.csv"))?.len();
    ensure(quantile_rows == table.len(), || {
        format!("quantiles.csv has {quantile_rows} rows, expected {}", table.len())
    })?;
    let mut worst = 0.0f64;
    for (key, &mse) in &table {
        let n = run.report.n_test as u64;
        for (source, map) in [("histogram", &hist), ("errors", &raw)] {
            let &(count, sum_sq) = map.get(key).ok_or_else(|| format!("{source}: missing {key:?}"))?;
            ensure(count == n, || format!("{source} {key:?}: {count} samples, expected {n}"))?;
            let gap = (sum_sq / count as f64 - mse).abs();
            ensure(gap <= 1e-12, || format!("{source} {key:?}: mse gap {gap:e}"))?;
            worst = worst.max(gap);
        }
    }
    Ok(format!("{} (model, x) pairs, worst gap {worst:.1e}", table.len()))
}
