//! `W^{1,2}`-orthonormal basis built from Hermite functions.
//!
//! Basis elements are numbered `e_1, …, e_N` in user-facing output and stored
//! 0-based; row `k` of the transform holds the Hermite coordinates of `e_{k+1}`
//! over `𝓗_0, …, 𝓗_k`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::hermite::{self, gram_matrix};
use crate::math;

/// Largest basis the Gram–Schmidt construction accepts.
pub const MAX_BASIS: usize = 64;

/// Change of basis from Hermite functions to the orthonormal `(e_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    n_basis: usize,
    /// Row-major, lower triangular: `e_k = Σ_m transform[k][m]·𝓗_m`.
    transform: Vec<f64>,
    /// Row-major Hermite Gram matrix in `W^{1,2}`.
    gram: Vec<f64>,
}

impl BasisSet {
    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn transform(&self) -> &[f64] {
        &self.transform
    }

    pub fn transform_entry(&self, k: usize, m: usize) -> f64 {
        self.transform[k * self.n_basis + m]
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    /// Hermite weights `w_m = Σ_k a_k T[k][m]` of the function with coordinates `a`.
    pub fn hermite_weights(&self, fe: &FunctionElement) -> Result<Vec<f64>> {
        check_len("function element", self.n_basis, fe.coeffs.len())?;
        let n = self.n_basis;
        let mut w = vec![0.0; n];
        for (k, &a) in fe.coeffs.iter().enumerate() {
            for m in 0..=k {
                w[m] += a * self.transform[k * n + m];
            }
        }
        Ok(w)
    }

    /// Fast pointwise evaluator for one function element.
    pub fn expansion(&self, fe: &FunctionElement) -> Result<HermiteExpansion> {
        Ok(HermiteExpansion {
            weights: self.hermite_weights(fe)?,
        })
    }

    /// `e_1(x), …, e_N(x)`.
    pub fn basis_values(&self, x: f64) -> Result<Vec<f64>> {
        let h = hermite::hermite_values(x, self.n_basis - 1)?.values;
        Ok(self.apply_transform(&h))
    }

    /// `e'_1(x), …, e'_N(x)`.
    pub fn basis_derivatives(&self, x: f64) -> Result<Vec<f64>> {
        let h = hermite::hermite_with_derivatives(x, self.n_basis - 1)?;
        Ok(self.apply_transform(h.derivatives.as_deref().unwrap_or(&[])))
    }

    fn apply_transform(&self, hermite: &[f64]) -> Vec<f64> {
        let n = self.n_basis;
        (0..n)
            .map(|k| {
                self.transform[k * n..k * n + k + 1]
                    .iter()
                    .zip(hermite)
                    .map(|(t, h)| t * h)
                    .sum()
            })
            .collect()
    }
}

/// Builds `e_1, …, e_N` by modified Gram–Schmidt in the exact `W^{1,2}` inner product.
pub fn build_basis(n_basis: usize) -> Result<BasisSet> {
    if n_basis == 0 || n_basis > MAX_BASIS {
        return Err(Error::InvalidInput(alloc::format!(
            "basis size must lie in 1..={MAX_BASIS}, got {n_basis}"
        )));
    }
    let n = n_basis;
    let gram = gram_matrix(n);
    let inner = |u: &[f64], v: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            let row = &gram[i * n..(i + 1) * n];
            acc += u[i] * row.iter().zip(v).map(|(g, v)| g * v).sum::<f64>();
        }
        acc
    };

    let mut transform = vec![0.0; n * n];
    let mut u = vec![0.0; n];
    for k in 0..n {
        u.iter_mut().for_each(|v| *v = 0.0);
        u[k] = 1.0;
        // Two sweeps: the second removes what round-off left behind in the first.
        for _ in 0..2 {
            for j in 0..k {
                let q = &transform[j * n..(j + 1) * n];
                let proj = inner(&u, q);
                for (ui, qi) in u.iter_mut().zip(q) {
                    *ui -= proj * qi;
                }
            }
        }
        let norm2 = inner(&u, &u);
        if !(norm2 > 1e-12 * gram[k * n + k]) {
            return Err(Error::SingularGram {
                index: k,
                residual: norm2,
            });
        }
        let inv = 1.0 / math::sqrt(norm2);
        for (t, ui) in transform[k * n..(k + 1) * n].iter_mut().zip(&u) {
            *t = ui * inv;
        }
    }
    Ok(BasisSet {
        n_basis,
        transform,
        gram,
    })
}

/// Coordinates of a function with respect to `(e_k)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunctionElement {
    pub coeffs: Vec<f64>,
}

impl FunctionElement {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    /// Coordinates of `e_{k+1}` (0-based `k`).
    pub fn unit(n: usize, k: usize) -> Self {
        let mut fe = Self::zero(n);
        fe.coeffs[k] = 1.0;
        fe
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// `Σ_k a_k e_k(x)` through the transform applied to the Hermite table.
pub fn evaluate(basis: &BasisSet, fe: &FunctionElement, x: f64) -> Result<f64> {
    check_len("function element", basis.n_basis, fe.coeffs.len())?;
    let e = basis.basis_values(x)?;
    Ok(fe.coeffs.iter().zip(&e).map(|(a, e)| a * e).sum())
}

/// Derivative of the represented function at `x`.
pub fn evaluate_derivative(basis: &BasisSet, fe: &FunctionElement, x: f64) -> Result<f64> {
    check_len("function element", basis.n_basis, fe.coeffs.len())?;
    let e = basis.basis_derivatives(x)?;
    Ok(fe.coeffs.iter().zip(&e).map(|(a, e)| a * e).sum())
}

/// `W^{1,2}` inner product; a plain dot product since `(e_k)` is orthonormal.
pub fn w12_inner(fe1: &FunctionElement, fe2: &FunctionElement) -> Result<f64> {
    check_len("function element", fe1.coeffs.len(), fe2.coeffs.len())?;
    Ok(fe1.coeffs.iter().zip(&fe2.coeffs).map(|(a, b)| a * b).sum())
}

/// A function `Σ_m w_m 𝓗_m`, evaluated by the recurrence without allocating.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    weights: Vec<f64>,
}

impl HermiteExpansion {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        use core::f64::consts::PI;
        let w = &self.weights;
        if w.is_empty() {
            return 0.0;
        }
        let h0 = math::FOURTH_ROOT_2 * math::exp(-PI * x * x);
        let mut acc = w[0] * h0;
        if w.len() == 1 {
            return acc;
        }
        let two_pi_x = 2.0 * PI * x;
        let (mut prev, mut cur) = (h0, two_pi_x * h0 * RECIP_SQRT_PI);
        acc += w[1] * cur;
        for (m, wm) in w.iter().enumerate().skip(2) {
            let k = (m - 1) as f64;
            let next = (two_pi_x * cur - math::sqrt(PI * k) * prev) / math::sqrt(PI * (k + 1.0));
            acc += wm * next;
            prev = cur;
            cur = next;
        }
        acc
    }
}

const RECIP_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// The coefficient cube `{Σ a_k e_k : |a_k| ≤ bound}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompactSetSpec {
    pub n_basis: usize,
    pub bound: f64,
}

impl Default for CompactSetSpec {
    fn default() -> Self {
        Self {
            n_basis: 5,
            bound: 5.0,
        }
    }
}

impl CompactSetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_basis == 0 || self.n_basis > MAX_BASIS {
            return Err(Error::InvalidInput(alloc::format!(
                "n_basis must lie in 1..={MAX_BASIS}, got {}",
                self.n_basis
            )));
        }
        if !(self.bound >= 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!(
                "compact-set bound must be finite and non-negative, got {}",
                self.bound
            )));
        }
        Ok(())
    }
}

/// Draws coordinates independently and uniformly from `[-bound, bound]`.
pub fn sample_compact<R: Rng + ?Sized>(spec: &CompactSetSpec, rng: &mut R) -> FunctionElement {
    let coeffs = (0..spec.n_basis)
        .map(|_| spec.bound * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    FunctionElement { coeffs }
}
