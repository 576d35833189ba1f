//! Concentrated Gaussians `X = X̄ · Exp(ξ)`, `ξ ~ N(0, Σ)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::sem3::{SEm3, Tangent};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct ConcentratedGaussian {
    mean: SEm3,
    covariance: DMatrix<f64>,
}

impl ConcentratedGaussian {
    /// Checks dimensions and symmetry (`1e-12`); PSD-ness is checked lazily
    /// when a square root is needed.
    pub fn new(mean: SEm3, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.dim();
        if covariance.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "covariance must be {d}x{d}, got {:?}",
                covariance.shape()
            )));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        Ok(ConcentratedGaussian { mean, covariance })
    }

    pub fn mean(&self) -> &SEm3 {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Draws `X̄ · Exp(L ε)` with `L` the lower Cholesky factor of `Σ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SEm3> {
        let l = linalg::sqrt_factor(&self.covariance, "concentrated gaussian covariance")?;
        Ok(self.sample_with_factor(&l, rng))
    }

    /// Draws `n` samples, factorizing `Σ` once.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<SEm3>> {
        let l = linalg::sqrt_factor(&self.covariance, "concentrated gaussian covariance")?;
        Ok((0..n).map(|_| self.sample_with_factor(&l, rng)).collect())
    }

    fn sample_with_factor<R: Rng + ?Sized>(&self, l: &DMatrix<f64>, rng: &mut R) -> SEm3 {
        let d = self.mean.dim();
        let eps = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let xi = Tangent::from_vector(l * eps);
        self.mean.compose(&SEm3::exp(&xi))
    }
}
