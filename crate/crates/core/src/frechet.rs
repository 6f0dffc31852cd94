//! Fréchet-space network in truncated basis coordinates.
//!
//! The network is a sum of `width` deep neurons
//!
//! ```text
//! 𝒩(ξ) = Σ_j ℓ_j(σ∘𝒜_{j,1}∘⋯∘σ∘𝒜_{j,n})(ξ),   𝒜(ξ) = Aξ + β,   σ(ξ) = β̃(ψ(ξ))·z
//! ```
//!
//! acting on coefficient vectors of length `N`. Truncation to `span{e_1..e_N}`
//! is the identity on stored coordinates.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::math;
use crate::rng::{stream, Domain};
use crate::train::Model;

/// Scalar sigmoid `β̃` with `β̃(y) = 0` for `y ≤ 0` and `β̃(y) → 1` as `y → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ScalarSigmoid {
    /// `max{0, 1 − e^{−y}}`
    #[default]
    ClippedExp,
    /// `max{0, tanh y}`
    ClippedTanh,
}

impl ScalarSigmoid {
    pub fn tag(self) -> &'static str {
        match self {
            ScalarSigmoid::ClippedExp => "clipped-exp",
            ScalarSigmoid::ClippedTanh => "clipped-tanh",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "clipped-exp" => Some(ScalarSigmoid::ClippedExp),
            "clipped-tanh" => Some(ScalarSigmoid::ClippedTanh),
            _ => None,
        }
    }

    #[inline]
    pub fn value(self, y: f64) -> f64 {
        self.value_and_slope(y).0
    }

    /// Value and derivative; the derivative at the kink `y = 0` is taken as 0.
    #[inline]
    pub fn value_and_slope(self, y: f64) -> (f64, f64) {
        if y <= 0.0 {
            return (0.0, 0.0);
        }
        match self {
            ScalarSigmoid::ClippedExp => {
                let e = math::exp(-y);
                (1.0 - e, e)
            }
            ScalarSigmoid::ClippedTanh => {
                let t = math::tanh(y);
                (t, 1.0 - t * t)
            }
        }
    }
}

/// Rank-one activation `σ(ξ) = β̃(ψ·ξ)·z`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActivationSpec {
    pub psi_weights: Vec<f64>,
    pub z_coeffs: Vec<f64>,
    pub sigmoid: ScalarSigmoid,
}

impl ActivationSpec {
    /// `ψ(h) = 0.25·(a_1 + ⋯ + a_N)`, `z = e_1 + ⋯ + e_N`, clipped-exp sigmoid.
    pub fn uniform(n_basis: usize) -> Self {
        Self {
            psi_weights: vec![0.25; n_basis],
            z_coeffs: vec![1.0; n_basis],
            sigmoid: ScalarSigmoid::ClippedExp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_len("activation z", self.psi_weights.len(), self.z_coeffs.len())?;
        if self.psi_weights.iter().all(|&p| p == 0.0) {
            return Err(Error::InvalidInput("psi weights are all zero".into()));
        }
        if self.z_coeffs.iter().all(|&z| z == 0.0) {
            return Err(Error::InvalidInput("z coefficients are all zero".into()));
        }
        Ok(())
    }
}

/// Applies `σ` to a coefficient vector.
pub fn activation(xi: &[f64], act: &ActivationSpec) -> Result<Vec<f64>> {
    check_len("activation input", act.psi_weights.len(), xi.len())?;
    let s = act.sigmoid.value(dot(&act.psi_weights, xi));
    Ok(act.z_coeffs.iter().map(|z| s * z).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrechetShape {
    pub n_basis: usize,
    /// Affine+activation stages per neuron.
    pub depth: usize,
    /// Number of deep neurons summed in the output.
    pub width: usize,
}

impl FrechetShape {
    pub fn validate(&self) -> Result<()> {
        if self.n_basis == 0 || self.depth == 0 || self.width == 0 {
            return Err(Error::InvalidInput(alloc::format!(
                "network shape must be positive, got {self:?}"
            )));
        }
        Ok(())
    }

    fn layer_len(&self) -> usize {
        self.n_basis * self.n_basis + self.n_basis
    }

    fn neuron_len(&self) -> usize {
        self.depth * self.layer_len() + self.n_basis
    }

    fn tail_offset(&self) -> usize {
        self.width * self.neuron_len()
    }

    /// Length of the flat weight vector, activation tail included.
    pub fn weights_len(&self) -> usize {
        self.tail_offset() + 2 * self.n_basis
    }

    /// Trainable neuron parameters (`A`, `β`, `ℓ`).
    pub fn neuron_param_count(&self) -> usize {
        self.tail_offset()
    }
}

/// Flat parameter vector.
///
/// Layout per neuron `j`: for each stage `l = 0..depth` (stage 0 acts on the
/// input) the matrix `A` row-major then the shift `β`; then the readout `ℓ`.
/// The activation's `ψ` and `z` follow all neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct FrechetNetParams {
    pub shape: FrechetShape,
    pub sigmoid: ScalarSigmoid,
    /// Whether `ψ` and `z` receive gradient updates.
    pub train_activation: bool,
    pub weights: Vec<f64>,
}

impl FrechetNetParams {
    pub fn zeros(shape: FrechetShape, activation: &ActivationSpec) -> Result<Self> {
        shape.validate()?;
        activation.validate()?;
        check_len("activation", shape.n_basis, activation.psi_weights.len())?;
        let mut weights = vec![0.0; shape.weights_len()];
        let tail = shape.tail_offset();
        let n = shape.n_basis;
        weights[tail..tail + n].copy_from_slice(&activation.psi_weights);
        weights[tail + n..].copy_from_slice(&activation.z_coeffs);
        Ok(Self {
            shape,
            sigmoid: activation.sigmoid,
            train_activation: false,
            weights,
        })
    }

    /// `A ~ U(±s/√N)`, `β, ℓ ~ U(±s)`.
    pub fn init(
        shape: FrechetShape,
        activation: &ActivationSpec,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut p = Self::zeros(shape, activation)?;
        let mut rng = stream(seed, Domain::Init, 0);
        let n = shape.n_basis;
        let a_scale = init_scale / math::sqrt(n as f64);
        let mut uniform = |s: f64| s * (2.0 * rng.random::<f64>() - 1.0);
        for j in 0..shape.width {
            let base = j * shape.neuron_len();
            for l in 0..shape.depth {
                let off = base + l * shape.layer_len();
                for w in &mut p.weights[off..off + n * n] {
                    *w = uniform(a_scale);
                }
                for w in &mut p.weights[off + n * n..off + n * n + n] {
                    *w = uniform(init_scale);
                }
            }
            let ro = base + shape.depth * shape.layer_len();
            for w in &mut p.weights[ro..ro + n] {
                *w = uniform(init_scale);
            }
        }
        Ok(p)
    }

    pub fn activation(&self) -> ActivationSpec {
        let (tail, n) = (self.shape.tail_offset(), self.shape.n_basis);
        ActivationSpec {
            psi_weights: self.weights[tail..tail + n].to_vec(),
            z_coeffs: self.weights[tail + n..].to_vec(),
            sigmoid: self.sigmoid,
        }
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        let base = self.shape.neuron_param_count();
        if self.train_activation {
            base + 2 * self.shape.n_basis
        } else {
            base
        }
    }

    /// `(A, β)` of stage `l` in neuron `j`.
    pub fn stage(&self, j: usize, l: usize) -> (&[f64], &[f64]) {
        let n = self.shape.n_basis;
        let off = j * self.shape.neuron_len() + l * self.shape.layer_len();
        (
            &self.weights[off..off + n * n],
            &self.weights[off + n * n..off + n * n + n],
        )
    }

    pub fn readout(&self, j: usize) -> &[f64] {
        let n = self.shape.n_basis;
        let off = j * self.shape.neuron_len() + self.shape.depth * self.shape.layer_len();
        &self.weights[off..off + n]
    }

    /// Index ranges of the readout functionals inside `weights`.
    pub fn readout_ranges(&self) -> Vec<core::ops::Range<usize>> {
        (0..self.shape.width)
            .map(|j| {
                let off = j * self.shape.neuron_len() + self.shape.depth * self.shape.layer_len();
                off..off + self.shape.n_basis
            })
            .collect()
    }

    /// Embeds the network in `span{e_1..e_M}`, `M ≥ N`, by zero extension.
    pub fn zero_extend(&self, new_n: usize) -> Result<Self> {
        if new_n < self.shape.n_basis {
            return Err(Error::InvalidInput(alloc::format!(
                "cannot extend from {} to {new_n} coefficients",
                self.shape.n_basis
            )));
        }
        let n = self.shape.n_basis;
        let shape = FrechetShape {
            n_basis: new_n,
            ..self.shape
        };
        let act = self.activation();
        let pad = |v: &[f64]| {
            let mut out = v.to_vec();
            out.resize(new_n, 0.0);
            out
        };
        let ext_act = ActivationSpec {
            psi_weights: pad(&act.psi_weights),
            z_coeffs: pad(&act.z_coeffs),
            sigmoid: act.sigmoid,
        };
        let mut out = Self::zeros(shape, &ext_act)?;
        out.train_activation = self.train_activation;
        for j in 0..self.shape.width {
            for l in 0..self.shape.depth {
                let (a, b) = self.stage(j, l);
                let off = j * shape.neuron_len() + l * shape.layer_len();
                for r in 0..n {
                    out.weights[off + r * new_n..off + r * new_n + n]
                        .copy_from_slice(&a[r * n..(r + 1) * n]);
                }
                out.weights[off + new_n * new_n..off + new_n * new_n + n].copy_from_slice(b);
            }
            let ro = j * shape.neuron_len() + shape.depth * shape.layer_len();
            out.weights[ro..ro + n].copy_from_slice(self.readout(j));
        }
        Ok(out)
    }

    pub fn forward(&self, a: &[f64]) -> Result<f64> {
        check_len("network input", self.shape.n_basis, a.len())?;
        let mut ws = Workspace::new(&self.shape);
        Ok(self.forward_with(a, &mut ws))
    }

    fn forward_with(&self, a: &[f64], ws: &mut Workspace) -> f64 {
        let shape = self.shape;
        let n = shape.n_basis;
        let tail = shape.tail_offset();
        let psi = &self.weights[tail..tail + n];
        let z = &self.weights[tail + n..];
        let mut out = 0.0;
        for j in 0..shape.width {
            ws.h[..n].copy_from_slice(a);
            for l in 0..shape.depth {
                let (m, b) = self.stage(j, l);
                let (h_in, rest) = ws.h[l * n..].split_at_mut(n);
                let pre = &mut ws.pre[l * n..(l + 1) * n];
                affine(m, b, h_in, pre);
                let p = dot(psi, pre);
                let (s, slope) = self.sigmoid.value_and_slope(p);
                ws.p[l] = p;
                ws.s[l] = s;
                ws.slope[l] = slope;
                for (h, zi) in rest[..n].iter_mut().zip(z) {
                    *h = s * zi;
                }
            }
            ws.out[j] = dot(self.readout(j), &ws.h[shape.depth * n..(shape.depth + 1) * n]);
            out += ws.out[j];
            if j + 1 < shape.width {
                ws.stash(j);
            }
        }
        out
    }

    /// Mean squared error over the batch and its exact gradient (written into `grad`).
    pub fn loss_and_grad(&self, batch: &RegressionBatch<'_>, grad: &mut [f64]) -> Result<f64> {
        let shape = self.shape;
        let n = shape.n_basis;
        batch.check(n)?;
        check_len("gradient buffer", self.weights.len(), grad.len())?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let count = batch.len();
        let tail = shape.tail_offset();
        let mut ws = Workspace::new(&shape);
        let mut loss = 0.0;
        let mut dh = vec![0.0; n];
        let mut dpre = vec![0.0; n];
        for (i, (a, &t)) in batch.inputs.chunks_exact(n).zip(batch.targets).enumerate() {
            let out = self.forward_with(a, &mut ws);
            let r = out - t;
            if !(r * r).is_finite() {
                return Err(Error::NonFiniteLoss { record: i });
            }
            loss += r * r;
            let g = 2.0 * r / count as f64;
            for j in 0..shape.width {
                let view = ws.view(j);
                let base = j * shape.neuron_len();
                let ro = base + shape.depth * shape.layer_len();
                let h_top = &view.h[shape.depth * n..(shape.depth + 1) * n];
                for (gl, h) in grad[ro..ro + n].iter_mut().zip(h_top) {
                    *gl += g * h;
                }
                for (d, l) in dh.iter_mut().zip(&self.weights[ro..ro + n]) {
                    *d = g * l;
                }
                for l in (0..shape.depth).rev() {
                    let ds = dot(&dh, &self.weights[tail + n..]);
                    if self.train_activation {
                        let s = view.s[l];
                        for (gz, d) in grad[tail + n..].iter_mut().zip(&dh) {
                            *gz += s * d;
                        }
                    }
                    let dp = ds * view.slope[l];
                    if dp == 0.0 {
                        break;
                    }
                    let pre = &view.pre[l * n..(l + 1) * n];
                    if self.train_activation {
                        for (gp, x) in grad[tail..tail + n].iter_mut().zip(pre) {
                            *gp += dp * x;
                        }
                    }
                    for (d, psi) in dpre.iter_mut().zip(&self.weights[tail..tail + n]) {
                        *d = dp * psi;
                    }
                    let off = base + l * shape.layer_len();
                    let h_in = &view.h[l * n..(l + 1) * n];
                    for r in 0..n {
                        let row = &mut grad[off + r * n..off + (r + 1) * n];
                        for (gw, x) in row.iter_mut().zip(h_in) {
                            *gw += dpre[r] * x;
                        }
                    }
                    for (gb, d) in grad[off + n * n..off + n * n + n].iter_mut().zip(&dpre) {
                        *gb += d;
                    }
                    if l > 0 {
                        let m = &self.weights[off..off + n * n];
                        dh.iter_mut().for_each(|d| *d = 0.0);
                        for r in 0..n {
                            for (d, w) in dh.iter_mut().zip(&m[r * n..(r + 1) * n]) {
                                *d += w * dpre[r];
                            }
                        }
                    }
                }
            }
        }
        if !self.train_activation {
            grad[tail..].iter_mut().for_each(|g| *g = 0.0);
        }
        Ok(loss / count as f64)
    }
}

impl Model for FrechetNetParams {
    type Batch = OwnedBatch;

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn batch_len(batch: &OwnedBatch) -> usize {
        batch.targets.len()
    }

    fn loss_and_grad(&self, batch: &OwnedBatch, grad: &mut [f64]) -> Result<f64> {
        FrechetNetParams::loss_and_grad(self, &batch.view(), grad)
    }

    fn readout_ranges(&self) -> Vec<core::ops::Range<usize>> {
        FrechetNetParams::readout_ranges(self)
    }
}

/// Inputs (row-major, `len × dim`) paired with scalar targets.
#[derive(Debug, Clone, Copy)]
pub struct RegressionBatch<'a> {
    pub inputs: &'a [f64],
    pub targets: &'a [f64],
}

impl RegressionBatch<'_> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        check_len("batch inputs", self.targets.len() * dim, self.inputs.len())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OwnedBatch {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl OwnedBatch {
    pub fn view(&self) -> RegressionBatch<'_> {
        RegressionBatch {
            inputs: &self.inputs,
            targets: &self.targets,
        }
    }
}

/// Forward caches for every neuron of one sample.
struct Workspace {
    n: usize,
    depth: usize,
    h: Vec<f64>,
    pre: Vec<f64>,
    p: Vec<f64>,
    s: Vec<f64>,
    slope: Vec<f64>,
    out: Vec<f64>,
    saved: Vec<Saved>,
}

#[derive(Clone)]
struct Saved {
    h: Vec<f64>,
    pre: Vec<f64>,
    s: Vec<f64>,
    slope: Vec<f64>,
}

struct View<'a> {
    h: &'a [f64],
    pre: &'a [f64],
    s: &'a [f64],
    slope: &'a [f64],
}

impl Workspace {
    fn new(shape: &FrechetShape) -> Self {
        let (n, d) = (shape.n_basis, shape.depth);
        let saved = Saved {
            h: vec![0.0; (d + 1) * n],
            pre: vec![0.0; d * n],
            s: vec![0.0; d],
            slope: vec![0.0; d],
        };
        Self {
            n,
            depth: d,
            h: vec![0.0; (d + 1) * n],
            pre: vec![0.0; d * n],
            p: vec![0.0; d],
            s: vec![0.0; d],
            slope: vec![0.0; d],
            out: vec![0.0; shape.width],
            saved: vec![saved; shape.width.saturating_sub(1)],
        }
    }

    fn stash(&mut self, j: usize) {
        let s = &mut self.saved[j];
        s.h.copy_from_slice(&self.h);
        s.pre.copy_from_slice(&self.pre);
        s.s.copy_from_slice(&self.s);
        s.slope.copy_from_slice(&self.slope);
    }

    /// Caches of neuron `j`; the last neuron lives in the live buffers.
    fn view(&self, j: usize) -> View<'_> {
        debug_assert!(self.h.len() == (self.depth + 1) * self.n);
        match self.saved.get(j) {
            Some(s) => View {
                h: &s.h,
                pre: &s.pre,
                s: &s.s,
                slope: &s.slope,
            },
            None => View {
                h: &self.h,
                pre: &self.pre,
                s: &self.s,
                slope: &self.slope,
            },
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn affine(m: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = b[r] + dot(&m[r * n..(r + 1) * n], x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_shape() -> FrechetShape {
        FrechetShape {
            n_basis: 5,
            depth: 2,
            width: 15,
        }
    }

    #[test]
    fn activation_examples() {
        let act = ActivationSpec::uniform(5);
        assert!(activation(&[0.0; 5], &act).unwrap().iter().all(|&v| v == 0.0));
        let v = activation(&[1.0; 5], &act).unwrap();
        let want = 1.0 - (-1.25f64).exp();
        for x in v {
            assert!((x - want).abs() < 1e-15);
        }
        assert!((want - 0.71350).abs() < 1e-5);
        let big = activation(&[1e6; 5], &act).unwrap();
        assert!(big.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let neg = activation(&[-1e6; 5], &act).unwrap();
        assert!(neg.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn activation_spec_validation() {
        let mut act = ActivationSpec::uniform(3);
        act.z_coeffs = vec![0.0; 3];
        assert!(act.validate().is_err());
        let mut act = ActivationSpec::uniform(3);
        act.psi_weights = vec![0.0; 3];
        assert!(act.validate().is_err());
    }

    #[test]
    fn parameter_count() {
        let p = FrechetNetParams::zeros(desk_shape(), &ActivationSpec::uniform(5)).unwrap();
        assert_eq!(p.param_count(), 975);
    }

    #[test]
    fn forward_examples() {
        let act = ActivationSpec::uniform(5);
        let shape1 = FrechetShape {
            n_basis: 5,
            depth: 1,
            width: 1,
        };
        let mut p = FrechetNetParams::zeros(shape1, &act).unwrap();
        assert_eq!(p.forward(&[0.3, -1.0, 2.0, 0.0, 4.0]).unwrap(), 0.0);
        // A = I, β = 0, ℓ = (1,…,1)
        for r in 0..5 {
            p.weights[r * 5 + r] = 1.0;
        }
        for w in &mut p.weights[30..35] {
            *w = 1.0;
        }
        let out = p.forward(&[1.0; 5]).unwrap();
        let want = 5.0 * (1.0 - (-1.25f64).exp());
        assert!((out - want).abs() < 1e-14);
        assert!((out - 3.56748).abs() < 1e-5);
        assert!(p.forward(&[1.0; 4]).is_err());
    }

    #[test]
    fn zero_readout_gives_zero() {
        let mut p = FrechetNetParams::init(desk_shape(), &ActivationSpec::uniform(5), 1.0, 3)
            .unwrap();
        for r in p.readout_ranges() {
            p.weights[r].iter_mut().for_each(|w| *w = 0.0);
        }
        assert_eq!(p.forward(&[1.0, -2.0, 3.0, 0.5, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn zero_extension_preserves_output() {
        let p = FrechetNetParams::init(desk_shape(), &ActivationSpec::uniform(5), 1.0, 9)
            .unwrap();
        let q = p.zero_extend(8).unwrap();
        let a = [0.7, -3.1, 2.2, 4.9, -0.4];
        let mut a8 = a.to_vec();
        a8.resize(8, 0.0);
        assert_eq!(p.forward(&a).unwrap(), q.forward(&a8).unwrap());
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        let p = FrechetNetParams::init(desk_shape(), &ActivationSpec::uniform(5), 1.0, 2)
            .unwrap();
        let inputs = [0.1, 0.2, 0.3, 0.4, 0.5, -1.0, 2.0, -3.0, 4.0, -5.0];
        let targets = [
            p.forward(&inputs[..5]).unwrap(),
            p.forward(&inputs[5..]).unwrap(),
        ];
        let mut grad = vec![0.0; p.weights.len()];
        let loss = p
            .loss_and_grad(
                &RegressionBatch {
                    inputs: &inputs,
                    targets: &targets,
                },
                &mut grad,
            )
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn empty_batch_rejected() {
        let p = FrechetNetParams::zeros(desk_shape(), &ActivationSpec::uniform(5)).unwrap();
        let mut grad = vec![0.0; p.weights.len()];
        let err = p
            .loss_and_grad(
                &RegressionBatch {
                    inputs: &[],
                    targets: &[],
                },
                &mut grad,
            )
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn non_finite_target_reports_record() {
        let p = FrechetNetParams::init(desk_shape(), &ActivationSpec::uniform(5), 1.0, 2)
            .unwrap();
        let inputs = [0.0; 15];
        let targets = [0.0, 1.0, f64::INFINITY];
        let mut grad = vec![0.0; p.weights.len()];
        let err = p
            .loss_and_grad(
                &RegressionBatch {
                    inputs: &inputs,
                    targets: &targets,
                },
                &mut grad,
            )
            .unwrap_err();
        assert_eq!(err, Error::NonFiniteLoss { record: 2 });
    }
}
