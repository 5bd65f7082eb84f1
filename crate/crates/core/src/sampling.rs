//! Seeded random streams and Gaussian sampling from (possibly singular)
//! covariance matrices.
//!
//! Every resampling repetition gets its own ChaCha stream derived from the
//! root seed and the repetition index, so results do not depend on how
//! repetitions are scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::{psd_factor, SymMatrix, DEFAULT_CLAMP_TOL};

/// Random stream for repetition `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Fills `out` with iid standard normal draws.
pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
}

/// Draws from `N(0, S)` through an eigen-factor `L` with `L·Lᵀ = S`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &SymMatrix) -> Result<Self> {
        Ok(GaussianSampler {
            factor: psd_factor(cov, DEFAULT_CLAMP_TOL)?,
        })
    }

    pub fn from_factor(factor: DMatrix<f64>) -> Self {
        GaussianSampler { factor }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Numerical rank of the covariance, i.e. the number of latent normals
    /// consumed per draw.
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut z = DVector::zeros(self.rank());
        fill_standard_normal(rng, z.as_mut_slice());
        &self.factor * z
    }

    /// `n` draws as the columns of a `dim × n` matrix.
    pub fn sample_columns<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.rank(), n);
        fill_standard_normal(rng, z.as_mut_slice());
        &self.factor * z
    }
}
