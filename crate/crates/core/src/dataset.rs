//! Training and test record generation.
//!
//! Training records pair a coefficient draw with one noisy Feynman–Kac sample
//! per grid point, all grid points driven by the same Brownian increments.
//! Test records carry Monte Carlo estimates of `u` with standard errors.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::basis::{sample_compact, BasisSet, CompactSetSpec, FunctionElement};
use crate::error::{check_len, Error, Result};
use crate::rng::{stream, Domain};
use crate::stochastic::{
    draw_increments, feynman_kac_functional, integrate_path, mc_solution_grid, ProblemSpec,
    ScalarField,
};

/// Training records per random stream.
pub const TRAIN_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub coeffs: Vec<f64>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub coeffs: Vec<f64>,
    pub truths: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Checks that a grid is non-empty, finite and strictly increasing.
pub fn validate_x_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("x_grid is empty".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("x_grid has non-finite entries".into()));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(alloc::format!(
            "x_grid must be strictly increasing ({} then {})",
            w[0],
            w[1]
        )));
    }
    Ok(())
}

/// Everything needed to produce records deterministically from a seed.
#[derive(Debug, Clone)]
pub struct DataGenerator {
    pub basis: BasisSet,
    pub compact: CompactSetSpec,
    /// φ, f, b, η and T; the potential is replaced per record.
    pub template: ProblemSpec,
    pub x_grid: Vec<f64>,
    pub t: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl DataGenerator {
    pub fn new(
        basis: BasisSet,
        compact: CompactSetSpec,
        template: ProblemSpec,
        x_grid: Vec<f64>,
        t: f64,
        n_steps: usize,
        seed: u64,
    ) -> Result<Self> {
        compact.validate()?;
        check_len("compact set dimension", basis.n_basis(), compact.n_basis)?;
        validate_x_grid(&x_grid)?;
        if !(t < template.horizon) || !t.is_finite() {
            return Err(Error::InvalidInput(alloc::format!(
                "need t < T, got t={t}, T={}",
                template.horizon
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        Ok(Self {
            basis,
            compact,
            template,
            x_grid,
            t,
            n_steps,
            seed,
        })
    }

    pub fn step(&self) -> f64 {
        (self.template.horizon - self.t) / self.n_steps as f64
    }

    /// The problem with potential `c = Σ a_k e_k`.
    pub fn problem_for(&self, fe: &FunctionElement) -> Result<ProblemSpec> {
        let mut spec = self.template.clone();
        spec.c = ScalarField::Expansion(self.basis.expansion(fe)?);
        Ok(spec)
    }

    /// Training records `chunk·TRAIN_CHUNK .. min((chunk+1)·TRAIN_CHUNK, total)`.
    pub fn training_chunk(&self, chunk: usize, total: usize) -> Result<Vec<SampleRecord>> {
        let lo = chunk * TRAIN_CHUNK;
        let hi = ((chunk + 1) * TRAIN_CHUNK).min(total);
        let mut rng = stream(self.seed, Domain::TrainData, chunk as u64);
        let step = self.step();
        let mut increments = vec![0.0; self.n_steps];
        let mut states = vec![0.0; self.n_steps + 1];
        let mut out = Vec::with_capacity(hi.saturating_sub(lo));
        for index in lo..hi {
            let fe = sample_compact(&self.compact, &mut rng);
            draw_increments(step, &mut rng, &mut increments);
            let spec = self.problem_for(&fe)?;
            let targets = self
                .x_grid
                .iter()
                .map(|&x| {
                    integrate_path(x, step, &increments, &spec, &mut states)?;
                    feynman_kac_functional(&states, step, &spec)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(Error::at_record(index))?;
            out.push(SampleRecord {
                coeffs: fe.coeffs,
                targets,
            });
        }
        Ok(out)
    }

    /// All training records, sequentially.
    pub fn training_set(&self, count: usize) -> Result<Vec<SampleRecord>> {
        let mut out = Vec::with_capacity(count);
        for chunk in 0..count.div_ceil(TRAIN_CHUNK) {
            out.extend(self.training_chunk(chunk, count)?);
        }
        Ok(out)
    }

    /// Coefficients of test record `index`.
    pub fn test_coeffs(&self, index: usize) -> FunctionElement {
        let mut rng = stream(self.seed, Domain::TestCoeffs, index as u64);
        sample_compact(&self.compact, &mut rng)
    }

    /// Test record `index` with its coefficients and Monte Carlo truths.
    pub fn test_record(&self, index: usize, n_paths: usize) -> Result<TestRecord> {
        self.test_record_for(index, self.test_coeffs(index), n_paths)
    }

    /// Monte Carlo truths for given coefficients, seeded by the record index.
    pub fn test_record_for(
        &self,
        index: usize,
        fe: FunctionElement,
        n_paths: usize,
    ) -> Result<TestRecord> {
        let oracle_seed: u64 = stream(self.seed, Domain::TestOracle, index as u64).random();
        let spec = self.problem_for(&fe)?;
        let est = mc_solution_grid(&self.x_grid, self.t, &spec, n_paths, self.n_steps, oracle_seed)
            .map_err(Error::at_record(index))?;
        Ok(TestRecord {
            coeffs: fe.coeffs,
            truths: est.iter().map(|e| e.estimate).collect(),
            std_errors: est.iter().map(|e| e.std_error).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;

    fn generator(bound: f64, phi: ScalarField) -> DataGenerator {
        let mut template = ProblemSpec::heat_with_potential(ScalarField::ZERO);
        template.phi = phi;
        DataGenerator::new(
            build_basis(5).unwrap(),
            CompactSetSpec { n_basis: 5, bound },
            template,
            vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            0.0,
            100,
            17,
        )
        .unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(validate_x_grid(&[-1.0, 0.0, 1.0]).is_ok());
        assert!(validate_x_grid(&[]).is_err());
        assert!(validate_x_grid(&[0.0, 0.0]).is_err());
        assert!(validate_x_grid(&[1.0, -1.0]).is_err());
        assert!(validate_x_grid(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn zero_potential_targets_share_one_draw() {
        let g = generator(0.0, ScalarField::Square);
        let rec = &g.training_set(1).unwrap()[0];
        assert!(rec.coeffs.iter().all(|&a| a == 0.0));
        // recover W(1) from x = 0 and check the other grid points
        let w1 = rec.targets[2].sqrt();
        let w1 = if (rec.targets[4] - (1.0 + w1).powi(2)).abs()
            < (rec.targets[4] - (1.0 - w1).powi(2)).abs()
        {
            w1
        } else {
            -w1
        };
        for (x, t) in g.x_grid.iter().zip(&rec.targets) {
            assert!((t - (x + w1).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_datum_offsets() {
        let g = generator(0.0, ScalarField::Identity);
        for rec in g.training_set(20).unwrap() {
            for (x, t) in g.x_grid.iter().zip(&rec.targets) {
                assert!((t - rec.targets[2] - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chunks_concatenate_to_full_set() {
        let g = generator(5.0, ScalarField::Square);
        let all = g.training_set(TRAIN_CHUNK + 7).unwrap();
        let second = g.training_chunk(1, TRAIN_CHUNK + 7).unwrap();
        assert_eq!(second.len(), 7);
        assert_eq!(&all[TRAIN_CHUNK..], &second[..]);
        for r in &all {
            assert!(r.coeffs.iter().all(|a| a.abs() <= 5.0));
        }
    }

    #[test]
    fn test_record_is_deterministic() {
        let g = generator(5.0, ScalarField::Square);
        let a = g.test_record(3, 200).unwrap();
        assert_eq!(a, g.test_record(3, 200).unwrap());
        assert!(a.std_errors.iter().all(|&s| s > 0.0));
    }
}
