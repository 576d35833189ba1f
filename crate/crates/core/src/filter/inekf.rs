use nalgebra::DMatrix;

use super::nano::{to_dvec, to_dyn};
use super::FilterState;
use crate::error::{Error, Result};
use crate::lie::{SEm3, Tangent};
use crate::linalg;
use crate::models::measurement::star_from_point;
use crate::models::InvariantMeasurement;

/// Invariant EKF update in the same increment coordinates as NANO-L.
///
/// The reduced measurement map has Jacobian `H = −⊙ᵀ` at `ξ = 0`, giving
/// `K = P Hᵀ (H P Hᵀ + Γ)⁻¹`, `ξ̂ = K (y − h(X̂))`, `X̂ ← X̂ Exp(ξ̂)` and
/// `P ← (I − K H) P`.
pub fn inekf_update(fs: &FilterState, meas: &InvariantMeasurement) -> Result<FilterState> {
    let d = fs.layout.dim();
    if meas.b_coeffs.len() != fs.layout.m() {
        return Err(Error::Dimension(format!(
            "measurement built for m = {}, state has m = {}",
            meas.b_coeffs.len(),
            fs.layout.m()
        )));
    }
    // Conditioning check only; the gain uses Γ directly.
    meas.gamma_inverse()?;
    let z = meas.predict(&fs.mean);
    let h = -star_from_point(&z, &meas.b_coeffs).transpose();
    let ph_t = &fs.cov * h.transpose();
    let s = linalg::symmetrized(&h * &ph_t + to_dyn(&meas.gamma_reduced));
    let s_inv = linalg::spd_inverse(&s, "innovation covariance")?;
    let gain = ph_t * s_inv;
    let residual = to_dvec(&(meas.y_reduced - z));
    let xi = Tangent::from_vector(&gain * residual);
    let cov = (DMatrix::identity(d, d) - &gain * h) * &fs.cov;
    Ok(FilterState {
        mean: fs.mean.compose(&SEm3::exp(&xi)),
        cov: linalg::symmetrized(cov),
        layout: fs.layout.clone(),
    })
}
