//! Hermite functions with Gaussian weight `exp(-πx²)`.
//!
//! The family `𝓗_m(x) = H_m(x)·exp(-πx²)` is orthonormal in `L²(ℝ)` and
//! satisfies the ladder relations
//!
//! ```text
//!  -𝓗'_m + 2πx·𝓗_m = 2√(π(m+1))·𝓗_{m+1}
//!  -𝓗'_m - 2πx·𝓗_m = -2√(πm)·𝓗_{m-1}
//! ```
//!
//! Their difference gives the three-term recurrence used for evaluation and
//! their sum the derivative identity. The raw factorial formula is never used.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;

/// Tabulated Hermite functions (and optionally derivatives) at one abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteEval {
    pub x: f64,
    /// `𝓗_0(x), …, 𝓗_M(x)`.
    pub values: Vec<f64>,
    /// `𝓗'_0(x), …, 𝓗'_K(x)` once filled by [`hermite_derivatives`].
    pub derivatives: Option<Vec<f64>>,
}

impl HermiteEval {
    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }
}

/// Evaluates `𝓗_0(x), …, 𝓗_{max_m}(x)` by the stable three-term recurrence.
pub fn hermite_values(x: f64, max_m: usize) -> Result<HermiteEval> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(alloc::format!(
            "hermite abscissa must be finite, got {x}"
        )));
    }
    let mut values = vec![0.0; max_m + 1];
    fill_values(x, &mut values);
    Ok(HermiteEval {
        x,
        values,
        derivatives: None,
    })
}

/// Writes `𝓗_0(x), …, 𝓗_{out.len()-1}(x)` into `out` without allocating.
#[inline]
pub fn fill_values(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = math::FOURTH_ROOT_2 * math::exp(-PI * x * x);
    if out.len() == 1 {
        return;
    }
    let two_pi_x = 2.0 * PI * x;
    // 𝓗_1 = 2πx·𝓗_0 / √π
    out[1] = two_pi_x * out[0] / math::sqrt(PI);
    for m in 1..out.len() - 1 {
        let mf = m as f64;
        out[m + 1] =
            (two_pi_x * out[m] - math::sqrt(PI * mf) * out[m - 1]) / math::sqrt(PI * (mf + 1.0));
    }
}

/// Fills derivatives `𝓗'_0, …, 𝓗'_{max_m}` from values tabulated up to `max_m + 1`.
pub fn hermite_derivatives(eval: HermiteEval, max_m: usize) -> Result<HermiteEval> {
    if eval.values.len() < max_m + 2 {
        return Err(Error::ShapeMismatch {
            what: "hermite values (need max_m + 2 entries)",
            expected: max_m + 2,
            found: eval.values.len(),
        });
    }
    let mut derivatives = vec![0.0; max_m + 1];
    fill_derivatives(&eval.values, &mut derivatives);
    Ok(HermiteEval {
        derivatives: Some(derivatives),
        ..eval
    })
}

/// `out[m] = √(πm)·𝓗_{m-1} − √(π(m+1))·𝓗_{m+1}`; requires `values.len() > out.len()`.
#[inline]
pub fn fill_derivatives(values: &[f64], out: &mut [f64]) {
    debug_assert!(values.len() > out.len());
    for (m, d) in out.iter_mut().enumerate() {
        let mf = m as f64;
        let down = if m == 0 {
            0.0
        } else {
            math::sqrt(PI * mf) * values[m - 1]
        };
        *d = down - math::sqrt(PI * (mf + 1.0)) * values[m + 1];
    }
}

/// Values and derivatives up to `max_m` in one call.
pub fn hermite_with_derivatives(x: f64, max_m: usize) -> Result<HermiteEval> {
    hermite_derivatives(hermite_values(x, max_m + 1)?, max_m)
}

/// `⟨𝓗_m, 𝓗_n⟩` in `W^{1,2}` from the closed-form table.
pub fn gram_w12(m: usize, n: usize) -> f64 {
    if m == n {
        1.0 + PI * (2 * m + 1) as f64
    } else if m.abs_diff(n) == 2 {
        let l = m.max(n) as f64;
        -PI * math::sqrt(l * (l - 1.0))
    } else {
        0.0
    }
}

/// Row-major `n × n` Gram matrix of `𝓗_0, …, 𝓗_{n-1}` in `W^{1,2}`.
pub fn gram_matrix(n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = gram_w12(i, j);
        }
    }
    g
}
