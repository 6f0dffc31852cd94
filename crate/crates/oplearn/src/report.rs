//! Error statistics and the evaluation report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Seeds;

pub const HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Equal-width bins over the error range; `sum_sq` is the sum of squared errors per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub sum_sq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub quantiles: Quantiles,
    pub histogram: Histogram,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mse(errors: &[f64]) -> f64 {
    errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64
}

pub fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

pub fn quantiles(errors: &[f64]) -> Quantiles {
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    Quantiles {
        min: s[0],
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
        max: s[s.len() - 1],
    }
}

pub fn histogram(errors: &[f64], bins: usize) -> Histogram {
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    let mut sum_sq = vec![0.0; bins];
    for &e in errors {
        let b = if width > 0.0 {
            (((e - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
        sum_sq[b] += e * e;
    }
    Histogram {
        edges,
        counts,
        sum_sq,
    }
}

pub fn distribution(errors: &[f64]) -> Distribution {
    Distribution {
        quantiles: quantiles(errors),
        histogram: histogram(errors, HISTOGRAM_BINS),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XReport {
    pub x: f64,
    pub mse_frechet: f64,
    pub mse_frechet_rounded: f64,
    pub mse_deeponet: f64,
    pub mse_deeponet_rounded: f64,
    pub frechet: Distribution,
    pub deeponet: Distribution,
}

impl XReport {
    /// Summaries of `prediction − truth` samples at `x`.
    pub fn from_errors(x: f64, frechet: &[f64], deeponet: &[f64]) -> Self {
        let (mf, md) = (mse(frechet), mse(deeponet));
        Self {
            x,
            mse_frechet: mf,
            mse_frechet_rounded: round3(mf),
            mse_deeponet: md,
            mse_deeponet_rounded: round3(md),
            frechet: distribution(frechet),
            deeponet: distribution(deeponet),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub frechet: usize,
    pub deeponet: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seeds: Seeds,
    pub param_counts: ParamCounts,
    pub m_train: usize,
    pub oracle_paths: usize,
    /// Both models were trained on the same training file.
    pub shared_dataset: bool,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub config_hash: String,
    pub data_hash: String,
    pub n_test: usize,
    pub metadata: Metadata,
    pub per_x: Vec<XReport>,
}

impl EvalReport {
    pub fn mse_csv(&self) -> String {
        let mut s = String::from("x,mse_frechet,mse_deeponet,mse_frechet_rounded,mse_deeponet_rounded\n");
        for r in &self.per_x {
            let _ = writeln!(
                s,
                "{},{},{},{:.3},{:.3}",
                r.x, r.mse_frechet, r.mse_deeponet, r.mse_frechet_rounded, r.mse_deeponet_rounded
            );
        }
        s
    }

    fn models(&self) -> impl Iterator<Item = (&'static str, &XReport, &Distribution)> {
        self.per_x.iter().flat_map(|r| {
            [("frechet", r, &r.frechet), ("deeponet", r, &r.deeponet)]
        })
    }

    pub fn quantiles_csv(&self) -> String {
        let mut s = String::from("model,x,min,q1,median,q3,max\n");
        for (model, r, d) in self.models() {
            let q = &d.quantiles;
            let _ = writeln!(s, "{model},{},{},{},{},{},{}", r.x, q.min, q.q1, q.median, q.q3, q.max);
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("model,x,bin,lo,hi,count,sum_sq\n");
        for (model, r, d) in self.models() {
            let h = &d.histogram;
            for b in 0..h.counts.len() {
                let _ = writeln!(
                    s,
                    "{model},{},{b},{},{},{},{}",
                    r.x,
                    h.edges[b],
                    h.edges[b + 1],
                    h.counts[b],
                    h.sum_sq[b]
                );
            }
        }
        s
    }

    /// Text table with MSE rounded to 1e-3 next to full precision.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>6}  {:>9}  {:>9}  {:>22}  {:>22}\n",
            "x", "Fréchet", "DeepONet", "Fréchet (full)", "DeepONet (full)"
        );
        for r in &self.per_x {
            let _ = writeln!(
                s,
                "{:>6}  {:>9.3}  {:>9.3}  {:>22}  {:>22}",
                r.x, r.mse_frechet_rounded, r.mse_deeponet_rounded, r.mse_frechet, r.mse_deeponet
            );
        }
        s
    }
}

/// Raw error samples, one row per (model, x, record).
pub fn errors_csv(xs: &[f64], frechet: &[Vec<f64>], deeponet: &[Vec<f64>]) -> String {
    let mut s = String::from("model,x,record,error\n");
    for (model, errs) in [("frechet", frechet), ("deeponet", deeponet)] {
        for (x, col) in xs.iter().zip(errs) {
            for (i, e) in col.iter().enumerate() {
                let _ = writeln!(s, "{model},{x},{i},{e}");
            }
        }
    }
    s
}
