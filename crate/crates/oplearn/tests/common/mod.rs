#![allow(dead_code)]

use std::path::Path;

use oplearn::ExperimentConfig;

/// A seconds-scale experiment rooted at `dir`.
pub fn small_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.output_dir = dir.to_path_buf();
    cfg.data.m_train = 2_000;
    cfg.data.m_test = 20;
    cfg.data.oracle_paths = 500;
    cfg.problem.n_steps = 20;
    cfg.frechet.train.epochs = 3;
    cfg.frechet.train.batch_size = 500;
    cfg.deeponet.train.epochs = 3;
    cfg.deeponet.train.batch_size = 2_500;
    cfg
}

pub fn write_config(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}
