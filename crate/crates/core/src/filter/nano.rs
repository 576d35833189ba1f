use nalgebra::{DMatrix, DVector, Matrix3};

use super::{FilterState, IncrementBelief};
use crate::error::{Error, Result};
use crate::lie::sem3::right_jacobian;
use crate::lie::{SEm3, Tangent, Vec3};
use crate::linalg;
use crate::models::measurement::star_from_point;
use crate::models::InvariantMeasurement;

/// How `E[Exp(−ξ) X̂⁻¹ b]` is evaluated inside the mean iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Expectation {
    /// Third-degree spherical cubature, `2d` points.
    #[default]
    Cubature,
    /// The map evaluated at the belief mean (a Gauss-Newton step).
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NanoConfig {
    /// KL threshold between successive iterates.
    pub gamma: f64,
    pub max_iters: usize,
    /// Multiplier on the `√d` cubature spread.
    pub cubature_scale: f64,
    pub expectation: Expectation,
}

impl Default for NanoConfig {
    fn default() -> Self {
        NanoConfig {
            gamma: 1e-4,
            max_iters: 1,
            cubature_scale: 1.0,
            expectation: Expectation::Cubature,
        }
    }
}

impl NanoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.cubature_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cubature_scale must be positive, got {}",
                self.cubature_scale
            )));
        }
        Ok(())
    }
}

/// Cubature points `mean ± √d · scale · L e_j`, `j = 1..d`, equally weighted.
pub fn cubature_points(belief: &IncrementBelief, scale: f64) -> Result<Vec<DVector<f64>>> {
    let d = belief.dim();
    let l = linalg::sqrt_factor(&belief.cov, "cubature covariance")?;
    let spread = (d as f64).sqrt() * scale;
    let mut pts = Vec::with_capacity(2 * d);
    for j in 0..d {
        let col = l.column(j) * spread;
        pts.push(&belief.mean + &col);
        pts.push(&belief.mean - col);
    }
    Ok(pts)
}

fn mean_over_points<T, F>(pts: &[DVector<f64>], mut f: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: FnMut(&DVector<f64>) -> T,
{
    let w = 1.0 / pts.len() as f64;
    pts.iter().fold(T::default(), |acc, p| acc + f(p)) * w
}

/// `E_{N(ξ̂, P)}[ [Exp(−ξ) X⁻¹ b]_{0..3} ]` by spherical cubature.
pub fn expectation_of_h(
    belief: &IncrementBelief,
    x: &SEm3,
    meas: &InvariantMeasurement,
) -> Result<Vec3> {
    expectation_scaled(belief, &meas.predict(x), meas, 1.0)
}

fn expectation_scaled(
    belief: &IncrementBelief,
    z: &Vec3,
    meas: &InvariantMeasurement,
    scale: f64,
) -> Result<Vec3> {
    let pts = cubature_points(belief, scale)?;
    Ok(mean_over_points(&pts, |p| {
        meas.reduced_map_from(z, &Tangent::from_vector(p.clone()))
    }))
}

/// `KL(N(a) ‖ N(b))`.
pub fn kl_gaussian(a: &IncrementBelief, b: &IncrementBelief) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::Dimension(format!("KL between dimensions {d} and {}", b.dim())));
    }
    let b_chol = b
        .cov
        .clone()
        .cholesky()
        .ok_or(Error::NotPsd { context: "KL second argument" })?;
    let diff = &b.mean - &a.mean;
    let maha = diff.dot(&b_chol.solve(&diff));
    let trace = b_chol.solve(&a.cov).trace();
    let logdet_b = 2.0 * b_chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let logdet_a = linalg::spd_log_det(&a.cov, "KL first argument")?;
    Ok(0.5 * (trace + maha - d as f64 + logdet_b - logdet_a))
}

/// The variational objective
///
/// `J = E_q[ℓ] + ½ (ξ̂_p − ξ̂)ᵀ P_p⁻¹ (ξ̂_p − ξ̂) + ½ tr(P_p⁻¹ P) − ½ log(|P| / |P_p|) − d/2`
///
/// with `ℓ(ξ) = ½ rᵀ Γ⁻¹ r`, `r = y − [Exp(−ξ) X⁻¹ b]_{0..3}`, and the
/// expectation taken by cubature.
pub fn cost_j(
    belief: &IncrementBelief,
    prior: &IncrementBelief,
    x: &SEm3,
    meas: &InvariantMeasurement,
) -> Result<f64> {
    let d = belief.dim();
    let gamma_inv = meas.gamma_inverse()?;
    let z = meas.predict(x);
    let pts = cubature_points(belief, 1.0)?;
    let expected_nll = mean_over_points(&pts, |p| {
        let r = meas.y_reduced - meas.reduced_map_from(&z, &Tangent::from_vector(p.clone()));
        0.5 * r.dot(&(gamma_inv * r))
    });
    let prior_chol = prior
        .cov
        .clone()
        .cholesky()
        .ok_or(Error::NotPsd { context: "prior covariance" })?;
    let diff = &prior.mean - &belief.mean;
    let maha = diff.dot(&prior_chol.solve(&diff));
    let trace = prior_chol.solve(&belief.cov).trace();
    let logdet_p = linalg::spd_log_det(&belief.cov, "belief covariance")?;
    let logdet_prior = 2.0 * prior_chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(expected_nll + 0.5 * maha + 0.5 * trace - 0.5 * (logdet_p - logdet_prior) - 0.5 * d as f64)
}

/// Outcome of one NANO-L measurement update.
#[derive(Debug, Clone)]
pub struct NanoUpdate {
    /// Lifted state with the increment reset to zero.
    pub state: FilterState,
    /// Increment prior the optimization started from.
    pub prior: IncrementBelief,
    /// Final increment belief before the lift.
    pub posterior: IncrementBelief,
    pub iterations: usize,
    /// KL between the last two iterates.
    pub last_kl: f64,
}

/// NANO-L update for an invariant observation; see [`nano_update_detailed`].
pub fn nano_update_invariant(
    fs: &FilterState,
    meas: &InvariantMeasurement,
    cfg: &NanoConfig,
) -> Result<FilterState> {
    nano_update_detailed(fs, meas, cfg).map(|u| u.state)
}

/// NANO-L update returning the intermediate beliefs.
///
/// 1. `P⁻¹ = P_p⁻¹ + ⊙ Γ⁻¹ ⊙ᵀ`, computed once.
/// 2. From `ξ̂⁽⁰⁾ = 0`, iterate
///    `ξ̂⁽ⁱ⁺¹⁾ = ξ̂⁽ⁱ⁾ − P P_p⁻¹ ξ̂⁽ⁱ⁾ − P ⊙ Γ⁻¹ (y − E_{N(ξ̂⁽ⁱ⁾, P)}[h])`
///    until the KL between successive iterates drops below `cfg.gamma` or
///    `cfg.max_iters` is reached.
/// 3. Lift: `X̂ ← X̂ Exp(ξ̂)`, `P ← J_r(ξ̂) P J_r(ξ̂)ᵀ`.
pub fn nano_update_detailed(
    fs: &FilterState,
    meas: &InvariantMeasurement,
    cfg: &NanoConfig,
) -> Result<NanoUpdate> {
    let d = fs.layout.dim();
    if meas.b_coeffs.len() != fs.layout.m() {
        return Err(Error::Dimension(format!(
            "measurement built for m = {}, state has m = {}",
            meas.b_coeffs.len(),
            fs.layout.m()
        )));
    }
    let gamma_inv = meas.gamma_inverse()?;
    let z = meas.predict(&fs.mean);
    let star = star_from_point(&z, &meas.b_coeffs);
    let prior = fs.belief();
    let prior_inv = linalg::spd_inverse(&prior.cov, "prior covariance")?;

    let info = &prior_inv + &star * to_dyn(&gamma_inv) * star.transpose();
    let post_cov = linalg::spd_inverse(&info, "posterior information")?;
    let gain = &post_cov * &star * to_dyn(&gamma_inv);
    let damping = &post_cov * &prior_inv;

    let mut current = prior.clone();
    let mut iterations = 0;
    let mut last_kl = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let expected = match cfg.expectation {
            Expectation::Cubature => expectation_scaled(
                &IncrementBelief {
                    mean: current.mean.clone(),
                    cov: post_cov.clone(),
                },
                &z,
                meas,
                cfg.cubature_scale,
            )?,
            Expectation::Linearized => {
                meas.reduced_map_from(&z, &Tangent::from_vector(current.mean.clone()))
            }
        };
        let residual = meas.y_reduced - expected;
        let step = &damping * (&current.mean - &prior.mean) + &gain * to_dvec(&residual);
        let next = IncrementBelief {
            mean: &current.mean - step,
            cov: post_cov.clone(),
        };
        last_kl = kl_gaussian(&current, &next)?;
        current = next;
        iterations += 1;
        if last_kl < cfg.gamma {
            break;
        }
    }

    let xi = Tangent::from_vector(current.mean.clone());
    let jr = right_jacobian(&xi);
    let cov = linalg::symmetrized(&jr * &current.cov * jr.transpose());
    debug_assert_eq!(cov.nrows(), d);
    Ok(NanoUpdate {
        state: FilterState {
            mean: fs.mean.compose(&SEm3::exp(&xi)),
            cov,
            layout: fs.layout.clone(),
        },
        prior,
        posterior: current,
        iterations,
        last_kl,
    })
}

pub(crate) fn to_dyn(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(3, 3, m.iter().copied())
}

pub(crate) fn to_dvec(v: &Vec3) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// A negative log-likelihood over the increment with its derivatives.
pub trait Likelihood {
    fn value(&self, xi: &DVector<f64>) -> f64;
    fn gradient(&self, xi: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, xi: &DVector<f64>) -> DMatrix<f64>;
}

/// `ℓ(ξ) = ½ rᵀ Γ⁻¹ r` for an invariant observation, with the analytic
/// derivatives `∂ℓ = ⊙ Γ⁻¹ r` and the constant Hessian `⊙ Γ⁻¹ ⊙ᵀ`.
#[derive(Debug, Clone)]
pub struct InvariantLikelihood {
    z: Vec3,
    meas: InvariantMeasurement,
    gamma_inv: Matrix3<f64>,
    star: DMatrix<f64>,
}

impl InvariantLikelihood {
    pub fn new(x: &SEm3, meas: &InvariantMeasurement) -> Result<Self> {
        let z = meas.predict(x);
        Ok(InvariantLikelihood {
            star: star_from_point(&z, &meas.b_coeffs),
            gamma_inv: meas.gamma_inverse()?,
            meas: meas.clone(),
            z,
        })
    }

    fn residual(&self, xi: &DVector<f64>) -> Vec3 {
        self.meas.y_reduced - self.meas.reduced_map_from(&self.z, &Tangent::from_vector(xi.clone()))
    }

    /// `⊙ Γ⁻¹ ⊙ᵀ`.
    pub fn analytic_hessian(&self) -> DMatrix<f64> {
        &self.star * to_dyn(&self.gamma_inv) * self.star.transpose()
    }
}

impl Likelihood for InvariantLikelihood {
    fn value(&self, xi: &DVector<f64>) -> f64 {
        let r = self.residual(xi);
        0.5 * r.dot(&(self.gamma_inv * r))
    }

    fn gradient(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.star * to_dvec(&(self.gamma_inv * self.residual(xi)))
    }

    fn hessian(&self, _xi: &DVector<f64>) -> DMatrix<f64> {
        self.analytic_hessian()
    }
}

/// One natural-gradient step on a Gaussian belief for an arbitrary
/// likelihood, with both expectations taken by cubature under the current
/// belief:
///
/// `P⁻¹ ← P_p⁻¹ + E[∇²ℓ]`, `ξ̂ ← ξ̂ − P E[∇ℓ] − P P_p⁻¹ (ξ̂ − ξ̂_p)`.
pub fn ngd_update_generic<L: Likelihood + ?Sized>(
    belief: &IncrementBelief,
    prior: &IncrementBelief,
    likelihood: &L,
    cfg: &NanoConfig,
) -> Result<IncrementBelief> {
    let pts = cubature_points(belief, cfg.cubature_scale)?;
    let d = belief.dim();
    let w = 1.0 / pts.len() as f64;
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for p in &pts {
        grad += likelihood.gradient(p) * w;
        hess += likelihood.hessian(p) * w;
    }
    let prior_inv = linalg::spd_inverse(&prior.cov, "prior covariance")?;
    let cov = linalg::spd_inverse(&(&prior_inv + linalg::symmetrized(hess)), "posterior information")?;
    let mean = &belief.mean - &cov * (grad + &prior_inv * (&belief.mean - &prior.mean));
    Ok(IncrementBelief { mean, cov })
}

/// Cubature estimate of `E[∇²ℓ]` under `belief`.
pub fn expected_hessian<L: Likelihood + ?Sized>(
    belief: &IncrementBelief,
    likelihood: &L,
) -> Result<DMatrix<f64>> {
    let pts = cubature_points(belief, 1.0)?;
    let d = belief.dim();
    let w = 1.0 / pts.len() as f64;
    Ok(pts
        .iter()
        .fold(DMatrix::zeros(d, d), |acc, p| acc + likelihood.hessian(p) * w))
}
