//! Numerical core for learning the map `c ↦ u(x, t)` of the backward problem
//! `∂_t u + ½η²u'' + b u' + c u = f`, `u(·, T) = φ`.
//!
//! Potentials live in the span of a `W^{1,2}`-orthonormal basis built from
//! Hermite functions; training targets come from the Feynman–Kac
//! representation; two regressors are provided: a Fréchet-space network acting
//! on basis coefficients and a DeepONet acting on sensor values.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is off.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod basis;
pub mod dataset;
pub mod deeponet;
pub mod error;
pub mod frechet;
pub mod hermite;
pub mod math;
pub mod optim;
pub mod rng;
pub mod stochastic;
pub mod train;

pub use basis::{build_basis, BasisSet, CompactSetSpec, FunctionElement};
pub use error::{Error, Result};
pub use frechet::{ActivationSpec, FrechetNetParams, FrechetShape};
pub use deeponet::{DeepONetParams, DeepONetShape, SensorGrid};
pub use stochastic::{McEstimate, ProblemSpec, ScalarField};
pub use train::{TrainConfig, TrainReport};
