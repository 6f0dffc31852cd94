//! DeepONet baseline: a branch net on sensor values of `c`, a trunk net on the
//! evaluation point, merged by an inner product plus a scalar bias.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::basis::{evaluate, BasisSet, FunctionElement};
use crate::error::{check_len, Error, Result};
use crate::frechet::dot;
use crate::math;
use crate::rng::{stream, Domain};
use crate::train::Model;

/// Equally spaced sensor locations.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorGrid {
    points: Vec<f64>,
}

impl SensorGrid {
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(alloc::format!(
                "sensor grid needs n ≥ 2 and lo < hi, got n={n} on [{lo}, {hi}]"
            )));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let points = (0..n)
            .map(|k| if k == n - 1 { hi } else { lo + h * k as f64 })
            .collect();
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for SensorGrid {
    fn default() -> Self {
        Self::uniform(-4.0, 4.0, 20).expect("static grid")
    }
}

/// `(c(y_1), …, c(y_S))`.
pub fn sensor_sample(basis: &BasisSet, fe: &FunctionElement, grid: &SensorGrid) -> Result<Vec<f64>> {
    grid.points.iter().map(|&y| evaluate(basis, fe, y)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeepONetShape {
    pub n_sensors: usize,
    pub branch_hidden: usize,
    pub trunk_hidden: usize,
    /// Output width of both nets (the merge dimension).
    pub latent: usize,
}

impl Default for DeepONetShape {
    fn default() -> Self {
        Self {
            n_sensors: 20,
            branch_hidden: 50,
            trunk_hidden: 50,
            latent: 50,
        }
    }
}

impl DeepONetShape {
    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 || self.branch_hidden == 0 || self.trunk_hidden == 0 || self.latent == 0
        {
            return Err(Error::InvalidInput(alloc::format!(
                "DeepONet widths must be positive, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    fn layout(&self) -> Layout {
        let (s, hb, ht, p) = (self.n_sensors, self.branch_hidden, self.trunk_hidden, self.latent);
        let w1 = 0;
        let b1 = w1 + hb * s;
        let w2 = b1 + hb;
        let b2 = w2 + p * hb;
        let v1 = b2 + p;
        let c1 = v1 + ht;
        let v2 = c1 + ht;
        let c2 = v2 + p * ht;
        let bias = c2 + p;
        Layout {
            w1,
            b1,
            w2,
            b2,
            v1,
            c1,
            v2,
            c2,
            bias,
            total: bias + 1,
        }
    }
}

/// Offsets into the flat weight vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    v1: usize,
    c1: usize,
    v2: usize,
    c2: usize,
    bias: usize,
    total: usize,
}

/// Weights laid out as: branch `W1 (Hb×S)`, `b1`, `W2 (P×Hb)`, `b2`; trunk
/// `V1 (Ht×1)`, `c1`, `V2 (P×Ht)`, `c2`; merge bias. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepONetParams {
    pub shape: DeepONetShape,
    pub weights: Vec<f64>,
}

impl DeepONetParams {
    pub fn zeros(shape: DeepONetShape) -> Result<Self> {
        shape.validate()?;
        Ok(Self {
            shape,
            weights: vec![0.0; shape.param_count()],
        })
    }

    /// Weights `~ U(±s/√fan_in)`; biases and merge bias start at zero.
    pub fn init(shape: DeepONetShape, init_scale: f64, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(shape)?;
        let l = shape.layout();
        let mut rng = stream(seed, Domain::Init, 1);
        let mut fill = |w: &mut [f64], fan_in: usize| {
            let s = init_scale / math::sqrt(fan_in as f64);
            for v in w {
                *v = s * (2.0 * rng.random::<f64>() - 1.0);
            }
        };
        fill(&mut p.weights[l.w1..l.b1], shape.n_sensors);
        fill(&mut p.weights[l.w2..l.b2], shape.branch_hidden);
        fill(&mut p.weights[l.v1..l.c1], 1);
        fill(&mut p.weights[l.v2..l.c2], shape.trunk_hidden);
        Ok(p)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn merge_bias(&self) -> f64 {
        self.weights[self.shape.layout().bias]
    }

    pub fn set_merge_bias(&mut self, b: f64) {
        let i = self.shape.layout().bias;
        self.weights[i] = b;
    }

    /// Mutable view of the last branch layer (`W2`, `b2`).
    pub fn branch_output_layer_mut(&mut self) -> &mut [f64] {
        let l = self.shape.layout();
        &mut self.weights[l.w2..l.v1]
    }

    /// Branch output and hidden activations (pre-ReLU kept for the mask).
    fn branch(&self, sensors: &[f64], hidden_pre: &mut [f64], out: &mut [f64]) {
        let l = self.shape.layout();
        let (s, hb) = (self.shape.n_sensors, self.shape.branch_hidden);
        let w = &self.weights;
        for (r, h) in hidden_pre.iter_mut().enumerate() {
            *h = w[l.b1 + r] + dot(&w[l.w1 + r * s..l.w1 + (r + 1) * s], sensors);
        }
        for (r, o) in out.iter_mut().enumerate() {
            let row = &w[l.w2 + r * hb..l.w2 + (r + 1) * hb];
            *o = w[l.b2 + r]
                + row
                    .iter()
                    .zip(hidden_pre.iter())
                    .map(|(a, h)| a * relu(*h))
                    .sum::<f64>();
        }
    }

    fn trunk(&self, x: f64, hidden_pre: &mut [f64], out: &mut [f64]) {
        let l = self.shape.layout();
        let ht = self.shape.trunk_hidden;
        let w = &self.weights;
        for (r, h) in hidden_pre.iter_mut().enumerate() {
            *h = w[l.c1 + r] + w[l.v1 + r] * x;
        }
        for (r, o) in out.iter_mut().enumerate() {
            let row = &w[l.v2 + r * ht..l.v2 + (r + 1) * ht];
            *o = w[l.c2 + r]
                + row
                    .iter()
                    .zip(hidden_pre.iter())
                    .map(|(a, h)| a * relu(*h))
                    .sum::<f64>();
        }
    }

    /// `⟨branch(sensors), trunk(x)⟩ + bias`.
    pub fn forward(&self, sensors: &[f64], x: f64) -> Result<f64> {
        check_len("sensor vector", self.shape.n_sensors, sensors.len())?;
        let sh = self.shape;
        let mut bh = vec![0.0; sh.branch_hidden];
        let mut bo = vec![0.0; sh.latent];
        let mut th = vec![0.0; sh.trunk_hidden];
        let mut to = vec![0.0; sh.latent];
        self.branch(sensors, &mut bh, &mut bo);
        self.trunk(x, &mut th, &mut to);
        Ok(dot(&bo, &to) + self.merge_bias())
    }

    /// Mean squared error over every `(record, x)` pair and its gradient.
    ///
    /// Branch work is done once per record and trunk work once per grid point;
    /// the result equals the pairwise sum.
    pub fn loss_and_grad(&self, batch: &DeepONetBatch, grad: &mut [f64]) -> Result<f64> {
        let sh = self.shape;
        batch.check(sh.n_sensors)?;
        check_len("gradient buffer", self.weights.len(), grad.len())?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let l = sh.layout();
        let nx = batch.xs.len();
        let n_pairs = (batch.n_records() * nx) as f64;
        let (p, hb, ht, s) = (sh.latent, sh.branch_hidden, sh.trunk_hidden, sh.n_sensors);

        let mut trunk_pre = vec![0.0; nx * ht];
        let mut trunk_out = vec![0.0; nx * p];
        for (j, &x) in batch.xs.iter().enumerate() {
            self.trunk(
                x,
                &mut trunk_pre[j * ht..(j + 1) * ht],
                &mut trunk_out[j * p..(j + 1) * p],
            );
        }
        let mut d_trunk = vec![0.0; nx * p];
        let mut bh = vec![0.0; hb];
        let mut bo = vec![0.0; p];
        let mut d_bo = vec![0.0; p];
        let mut d_bh = vec![0.0; hb];
        let bias = self.merge_bias();
        let mut loss = 0.0;

        for (i, (sensors, targets)) in batch
            .sensors
            .chunks_exact(s)
            .zip(batch.targets.chunks_exact(nx))
            .enumerate()
        {
            self.branch(sensors, &mut bh, &mut bo);
            d_bo.iter_mut().for_each(|d| *d = 0.0);
            for j in 0..nx {
                let tr = &trunk_out[j * p..(j + 1) * p];
                let r = dot(&bo, tr) + bias - targets[j];
                if !(r * r).is_finite() {
                    return Err(Error::NonFiniteLoss { record: i });
                }
                loss += r * r;
                let g = 2.0 * r / n_pairs;
                grad[l.bias] += g;
                for k in 0..p {
                    d_bo[k] += g * tr[k];
                    d_trunk[j * p + k] += g * bo[k];
                }
            }
            // branch backward
            d_bh.iter_mut().for_each(|d| *d = 0.0);
            for (k, &d) in d_bo.iter().enumerate() {
                grad[l.b2 + k] += d;
                let row = l.w2 + k * hb;
                for h in 0..hb {
                    grad[row + h] += d * relu(bh[h]);
                    d_bh[h] += d * self.weights[row + h];
                }
            }
            for h in 0..hb {
                if bh[h] <= 0.0 {
                    continue;
                }
                let d = d_bh[h];
                grad[l.b1 + h] += d;
                for (g, x) in grad[l.w1 + h * s..l.w1 + (h + 1) * s].iter_mut().zip(sensors) {
                    *g += d * x;
                }
            }
        }

        let mut d_th = vec![0.0; ht];
        for (j, &x) in batch.xs.iter().enumerate() {
            let pre = &trunk_pre[j * ht..(j + 1) * ht];
            d_th.iter_mut().for_each(|d| *d = 0.0);
            for k in 0..p {
                let d = d_trunk[j * p + k];
                grad[l.c2 + k] += d;
                let row = l.v2 + k * ht;
                for h in 0..ht {
                    grad[row + h] += d * relu(pre[h]);
                    d_th[h] += d * self.weights[row + h];
                }
            }
            for h in 0..ht {
                if pre[h] > 0.0 {
                    grad[l.c1 + h] += d_th[h];
                    grad[l.v1 + h] += d_th[h] * x;
                }
            }
        }
        Ok(loss / n_pairs)
    }
}

impl Model for DeepONetParams {
    type Batch = DeepONetBatch;

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn batch_len(batch: &DeepONetBatch) -> usize {
        batch.targets.len()
    }

    fn loss_and_grad(&self, batch: &DeepONetBatch, grad: &mut [f64]) -> Result<f64> {
        DeepONetParams::loss_and_grad(self, batch, grad)
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Records expanded against a shared x-grid: `sensors` is `B × S`,
/// `targets` is `B × X` with column `j` belonging to `xs[j]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeepONetBatch {
    pub sensors: Vec<f64>,
    pub targets: Vec<f64>,
    pub xs: Vec<f64>,
}

impl DeepONetBatch {
    pub fn n_records(&self) -> usize {
        if self.xs.is_empty() {
            0
        } else {
            self.targets.len() / self.xs.len()
        }
    }

    /// Number of `(sensors, x)` training pairs.
    pub fn n_pairs(&self) -> usize {
        self.targets.len()
    }

    fn check(&self, n_sensors: usize) -> Result<()> {
        if self.xs.is_empty() || self.targets.is_empty() {
            return Err(Error::InvalidInput("empty DeepONet batch".into()));
        }
        if self.targets.len() % self.xs.len() != 0 {
            return Err(Error::ShapeMismatch {
                what: "DeepONet targets (multiple of grid size)",
                expected: self.n_records() * self.xs.len(),
                found: self.targets.len(),
            });
        }
        check_len("DeepONet sensors", self.n_records() * n_sensors, self.sensors.len())
    }
}
