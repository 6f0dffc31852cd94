//! Path simulation and the pathwise Feynman–Kac functional.
//!
//! For `∂_t u + ½η²u'' + b u' + c u = f` with `u(·,T) = φ`, the sample
//!
//! ```text
//! 𝒳 = φ(X_T)·exp(I(t,T)) − Σ_k f(X_k)·exp(I(t,s_k))·Δ
//! ```
//!
//! has expectation `u(x,t)`, where `I(t,s)` is the left-endpoint Riemann sum
//! of `∫c(X_r)dr`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::HermiteExpansion;
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{stream, Domain};

/// Paths per random stream in Monte Carlo estimates.
pub const PATHS_PER_PARTITION: usize = 1000;

/// A time-independent scalar coefficient.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Identity,
    Square,
    Expansion(HermiteExpansion),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub const ZERO: ScalarField = ScalarField::Constant(0.0);

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarField::Constant(k) => *k,
            ScalarField::Identity => x,
            ScalarField::Square => x * x,
            ScalarField::Expansion(e) => e.eval(x),
            ScalarField::Custom(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarField::Constant(k) if *k == 0.0)
    }

    fn is_constant(&self, v: f64) -> bool {
        matches!(self, ScalarField::Constant(k) if *k == v)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(k) => write!(f, "Constant({k})"),
            ScalarField::Identity => f.write_str("Identity"),
            ScalarField::Square => f.write_str("Square"),
            ScalarField::Expansion(e) => write!(f, "Expansion({:?})", e.weights()),
            ScalarField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Coefficients of the backward Cauchy problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// Final datum φ.
    pub phi: ScalarField,
    /// Potential c.
    pub c: ScalarField,
    /// Source f.
    pub f: ScalarField,
    /// Drift b.
    pub drift: ScalarField,
    /// Diffusion η, with `a = η²`.
    pub diffusion: ScalarField,
    /// Terminal time T.
    pub horizon: f64,
}

impl ProblemSpec {
    /// `φ(x) = x²`, `b = 0`, `η = 1`, `f = 0` on `[0, 1]` with the given potential.
    pub fn heat_with_potential(c: ScalarField) -> Self {
        Self {
            phi: ScalarField::Square,
            c,
            f: ScalarField::ZERO,
            drift: ScalarField::ZERO,
            diffusion: ScalarField::Constant(1.0),
            horizon: 1.0,
        }
    }

    fn is_brownian(&self) -> bool {
        self.drift.is_zero() && self.diffusion.is_constant(1.0)
    }
}

/// Time grid and starting point of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub x0: f64,
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_start < self.t_end) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::InvalidInput(alloc::format!(
                "need t_start < t_end, got [{}, {}]",
                self.t_start,
                self.t_end
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidInput("x0 must be finite".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }
}

/// Driving increments and the resulting states `X_0, …, X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub step: f64,
    pub increments: Vec<f64>,
    pub states: Vec<f64>,
}

/// Fills `out` with independent `N(0, step)` draws.
pub fn draw_increments<R: Rng + ?Sized>(step: f64, rng: &mut R, out: &mut [f64]) {
    let sd = math::sqrt(step);
    for dw in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *dw = sd * z;
    }
}

/// Writes `X_0 = x0, …, X_n` driven by `increments` into `states`.
pub fn integrate_path(
    x0: f64,
    step: f64,
    increments: &[f64],
    spec: &ProblemSpec,
    states: &mut [f64],
) -> Result<()> {
    debug_assert_eq!(states.len(), increments.len() + 1);
    states[0] = x0;
    if spec.is_brownian() {
        // X(s) = x0 + W(s), so paths from different x0 differ only by the offset
        let mut w = 0.0;
        for (k, dw) in increments.iter().enumerate() {
            w += dw;
            states[k + 1] = x0 + w;
        }
    } else {
        for (k, dw) in increments.iter().enumerate() {
            let x = states[k];
            states[k + 1] = x + spec.drift.eval(x) * step + spec.diffusion.eval(x) * dw;
        }
    }
    if let Some(k) = states.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteState { step: k });
    }
    Ok(())
}

/// Euler–Maruyama path (exact in law for `b = 0`, `η = 1`).
pub fn simulate_path<R: Rng + ?Sized>(
    cfg: &PathConfig,
    spec: &ProblemSpec,
    rng: &mut R,
) -> Result<BrownianPath> {
    cfg.validate()?;
    let step = cfg.step();
    let mut increments = vec![0.0; cfg.n_steps];
    draw_increments(step, rng, &mut increments);
    let mut states = vec![0.0; cfg.n_steps + 1];
    integrate_path(cfg.x0, step, &increments, spec, &mut states)?;
    Ok(BrownianPath {
        step,
        increments,
        states,
    })
}

/// Pathwise functional `𝒳` over `states` on a uniform grid of width `step`.
pub fn feynman_kac_functional(states: &[f64], step: f64, spec: &ProblemSpec) -> Result<f64> {
    let n = states.len() - 1;
    let mut c_sum = 0.0;
    let mut f_sum = 0.0;
    let has_source = !spec.f.is_zero();
    let has_potential = !spec.c.is_zero();
    for (k, &x) in states[..n].iter().enumerate() {
        if has_source {
            let weight = if has_potential {
                math::exp(c_sum * step)
            } else {
                1.0
            };
            if !weight.is_finite() {
                return Err(Error::ExpOverflow { step: k });
            }
            f_sum += spec.f.eval(x) * weight;
        }
        if has_potential {
            c_sum += spec.c.eval(x);
        }
    }
    let discount = if has_potential {
        math::exp(c_sum * step)
    } else {
        1.0
    };
    if !discount.is_finite() {
        return Err(Error::ExpOverflow { step: n });
    }
    let value = spec.phi.eval(states[n]) * discount - f_sum * step;
    if !value.is_finite() {
        return Err(Error::ExpOverflow { step: n });
    }
    Ok(value)
}

/// `𝒳` for one simulated path.
pub fn feynman_kac_sample(path: &BrownianPath, spec: &ProblemSpec) -> Result<f64> {
    feynman_kac_functional(&path.states, path.step, spec)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Running mean and centred second moment (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn estimate(&self) -> McEstimate {
        let var = if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            estimate: self.mean,
            std_error: math::sqrt(var / self.count as f64),
            n_paths: self.count,
        }
    }
}

/// Inputs shared by every partition of a Monte Carlo run.
#[derive(Debug, Clone)]
pub struct McJob<'a> {
    /// Starting points; all share the same driving increments per path.
    pub xs: &'a [f64],
    pub t: f64,
    pub spec: &'a ProblemSpec,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl McJob<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidInput(alloc::format!(
                "n_paths must be at least 2, got {}",
                self.n_paths
            )));
        }
        if self.xs.is_empty() {
            return Err(Error::InvalidInput("no evaluation points".into()));
        }
        PathConfig {
            t_start: self.t,
            t_end: self.spec.horizon,
            n_steps: self.n_steps,
            x0: self.xs[0],
        }
        .validate()
    }

    pub fn n_partitions(&self) -> usize {
        self.n_paths.div_ceil(PATHS_PER_PARTITION)
    }

    /// Per-x moments of partition `p` (paths `p·P .. min((p+1)·P, n_paths)`).
    pub fn run_partition(&self, p: usize) -> Result<Vec<Moments>> {
        let step = (self.spec.horizon - self.t) / self.n_steps as f64;
        let lo = p * PATHS_PER_PARTITION;
        let hi = ((p + 1) * PATHS_PER_PARTITION).min(self.n_paths);
        let mut rng = stream(self.seed, Domain::MonteCarlo, p as u64);
        let mut increments = vec![0.0; self.n_steps];
        let mut states = vec![0.0; self.n_steps + 1];
        let mut moments = vec![Moments::default(); self.xs.len()];
        for _ in lo..hi {
            draw_increments(step, &mut rng, &mut increments);
            for (x, m) in self.xs.iter().zip(moments.iter_mut()) {
                integrate_path(*x, step, &increments, self.spec, &mut states)?;
                m.push(feynman_kac_functional(&states, step, self.spec)?);
            }
        }
        Ok(moments)
    }

    /// Merges partition results in partition order.
    pub fn merge(&self, parts: &[Vec<Moments>]) -> Vec<McEstimate> {
        let mut total = vec![Moments::default(); self.xs.len()];
        for part in parts {
            for (t, m) in total.iter_mut().zip(part) {
                t.merge(m);
            }
        }
        total.iter().map(Moments::estimate).collect()
    }

    /// Runs every partition sequentially.
    pub fn run(&self) -> Result<Vec<McEstimate>> {
        self.validate()?;
        let parts = (0..self.n_partitions())
            .map(|p| self.run_partition(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.merge(&parts))
    }
}

/// Monte Carlo estimate of `u(x, t)` from `n_paths` independent paths.
pub fn mc_solution(
    x: f64,
    t: f64,
    spec: &ProblemSpec,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    let xs = [x];
    let job = McJob {
        xs: &xs,
        t,
        spec,
        n_paths,
        n_steps,
        seed,
    };
    Ok(job.run()?[0])
}

/// Estimates at several starting points with common driving noise.
pub fn mc_solution_grid(
    xs: &[f64],
    t: f64,
    spec: &ProblemSpec,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    McJob {
        xs,
        t,
        spec,
        n_paths,
        n_steps,
        seed,
    }
    .run()
}
