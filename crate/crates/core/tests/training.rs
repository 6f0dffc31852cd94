//! Small training runs with known answers.

use oplearn_core::basis::{build_basis, sample_compact, CompactSetSpec};
use oplearn_core::deeponet::{sensor_sample, DeepONetBatch, DeepONetParams, DeepONetShape, SensorGrid};
use oplearn_core::frechet::{ActivationSpec, FrechetNetParams, FrechetShape, OwnedBatch};
use oplearn_core::rng::{stream, Domain};
use oplearn_core::train::{batch_ranges, epoch_permutation, train, LrSchedule, TrainConfig};
use oplearn_core::FunctionElement;

const SHAPE: FrechetShape = FrechetShape { n_basis: 5, depth: 2, width: 15 };

fn cube(bound: f64, n: usize, seed: u64) -> Vec<f64> {
    let spec = CompactSetSpec { n_basis: 5, bound };
    let mut rng = stream(seed, Domain::Samples, 0);
    (0..n).flat_map(|_| sample_compact(&spec, &mut rng).coeffs).collect()
}

fn fit_frechet(inputs: &[f64], targets: &[f64], cfg: &TrainConfig) -> (FrechetNetParams, Vec<f64>) {
    let mut p = FrechetNetParams::init(SHAPE, &ActivationSpec::uniform(5), cfg.init_scale, cfg.seed).unwrap();
    let n = targets.len();
    let report = train(&mut p, cfg, n.div_ceil(cfg.batch_size), |epoch| {
        let perm = epoch_permutation(n, cfg.shuffle_seed, epoch);
        batch_ranges(n, cfg.batch_size)
            .map(|r| OwnedBatch {
                inputs: perm[r.clone()].iter().flat_map(|&i| inputs[5 * i..5 * i + 5].to_vec()).collect(),
                targets: perm[r].iter().map(|&i| targets[i]).collect(),
            })
            .collect::<Vec<_>>()
    })
    .unwrap();
    (p, report.epoch_losses)
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        epochs: 5,
        batch_size: 100,
        learning_rate: 0.01,
        schedule: LrSchedule::Cosine,
        seed: 1,
        shuffle_seed: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_targets_are_learned() {
    let inputs = cube(5.0, 4_000, 1);
    let (p, losses) = fit_frechet(&inputs, &vec![0.0; 4_000], &quick_config());
    assert!(losses[4] < losses[0]);
    let fresh = cube(5.0, 1_000, 2);
    let mean: f64 = fresh.chunks(5).map(|a| p.forward(a).unwrap()).sum::<f64>() / 1_000.0;
    assert!(mean.abs() < 1e-2, "mean output {mean}");
}

#[test]
fn linear_functional_beats_best_constant() {
    let inputs = cube(1.0, 4_000, 3);
    let psi = |a: &[f64]| 0.25 * a.iter().sum::<f64>();
    let targets: Vec<f64> = inputs.chunks(5).map(psi).collect();
    let (p, _) = fit_frechet(&inputs, &targets, &quick_config());
    let fresh = cube(1.0, 2_000, 4);
    let truth: Vec<f64> = fresh.chunks(5).map(psi).collect();
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let constant_mse = truth.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / truth.len() as f64;
    let mse = fresh
        .chunks(5)
        .zip(&truth)
        .map(|(a, t)| (p.forward(a).unwrap() - t).powi(2))
        .sum::<f64>()
        / truth.len() as f64;
    assert!(mse < 0.5 * constant_mse, "mse {mse} vs constant {constant_mse}");
}

#[test]
fn training_is_deterministic() {
    let inputs = cube(5.0, 500, 5);
    let targets: Vec<f64> = inputs.chunks(5).map(|a| a[0] * a[1]).collect();
    let cfg = TrainConfig { epochs: 2, ..quick_config() };
    let (a, la) = fit_frechet(&inputs, &targets, &cfg);
    let (b, lb) = fit_frechet(&inputs, &targets, &cfg);
    assert_eq!(a, b);
    assert_eq!(la, lb);
    let (c, _) = fit_frechet(&inputs, &targets, &TrainConfig { seed: 9, ..cfg });
    assert_ne!(a, c);
}

#[test]
fn deeponet_learns_a_constant() {
    let kappa = 0.7;
    let basis = build_basis(5).unwrap();
    let grid = SensorGrid::default();
    let n = 8_000;
    let coeffs = cube(5.0, n, 6);
    let sensors: Vec<f64> = coeffs
        .chunks(5)
        .flat_map(|a| sensor_sample(&basis, &FunctionElement::new(a.to_vec()), &grid).unwrap())
        .collect();
    let xs = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut p = DeepONetParams::init(DeepONetShape::default(), 1.0, 3).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 50,
        learning_rate: 1e-2,
        schedule: LrSchedule::Cosine,
        ..TrainConfig::default()
    };
    train(&mut p, &cfg, n / cfg.batch_size, |epoch| {
        let perm = epoch_permutation(n, 4, epoch);
        batch_ranges(n, cfg.batch_size)
            .map(|r| DeepONetBatch {
                sensors: perm[r.clone()].iter().flat_map(|&i| sensors[20 * i..20 * i + 20].to_vec()).collect(),
                targets: vec![kappa; r.len() * xs.len()],
                xs: xs.clone(),
            })
            .collect::<Vec<_>>()
    })
    .unwrap();
    for (a, x) in sensors.chunks(20).take(50).zip(xs.iter().cycle()) {
        let out = p.forward(a, *x).unwrap();
        assert!((out - kappa).abs() < 1e-2, "{out}");
    }
}
