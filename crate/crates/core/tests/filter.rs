mod common;

use common::*;
use nalgebra::{DMatrix, DVector, Matrix3};
use nanol::filter::{
    cost_j, cubature_points, expectation_of_h, expected_hessian, inekf_update, kl_gaussian,
    nano_update_detailed, ngd_update_generic, predict, Expectation, FilterState, IncrementBelief,
    InvariantLikelihood, Likelihood, NanoConfig,
};
use nanol::lie::{SEm3, Vec3};
use nanol::models::{
    assemble_process_noise, make_landmark_measurement, make_leg_measurement, ImuSample,
    InvariantMeasurement, LegGeometry, NoiseConfig, StateLayout, STANCE_ANGLES,
};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A landmark measurement of a random state and its filter state.
fn landmark_case(r: &mut ChaCha8Rng) -> (FilterState, InvariantMeasurement) {
    let layout = StateLayout::inertial();
    let x = element(r, 2);
    let cov = spd(r, 9, 1e-4, 5e-2);
    let m = normal3(r) * 3.0;
    let y = x.rotation().inverse().act(&(m - x.col(1))) + normal3(r) * 0.1;
    let meas = make_landmark_measurement(&y, &m, 0.1, &layout);
    (FilterState::new(x, cov, layout).unwrap(), meas)
}

fn leg_case(r: &mut ChaCha8Rng) -> (FilterState, InvariantMeasurement) {
    let layout = StateLayout::legged(1);
    let x = element(r, 3);
    let cov = spd(r, 12, 1e-4, 5e-2);
    let joints = Vec3::from(STANCE_ANGLES) + normal3(r) * 0.1;
    let meas = make_leg_measurement(&joints, &NoiseConfig::default(), &LegGeometry::quadruped()[0], &layout, 2)
        .unwrap();
    (FilterState::new(x, cov, layout).unwrap(), meas)
}

/// `(P⁻¹ + H Γ⁻¹ Hᵀ)⁻¹` with `Hᵀ` built directly from `[(−z)^∧, c_i I]`.
fn information_form(fs: &FilterState, meas: &InvariantMeasurement) -> DMatrix<f64> {
    let x = &fs.mean;
    let mut acc = meas.b_point;
    for (c, p) in meas.b_coeffs.iter().zip(x.cols()) {
        acc -= p * *c;
    }
    let z = x.rotation().matrix().transpose() * acc;
    let d = fs.layout.dim();
    let mut ht = DMatrix::zeros(3, d);
    let zh = nanol::lie::hat(&-z);
    ht.view_mut((0, 0), (3, 3)).copy_from(&DMatrix::from_iterator(3, 3, zh.iter().copied()));
    for (i, c) in meas.b_coeffs.iter().enumerate() {
        for k in 0..3 {
            ht[(k, 3 + 3 * i + k)] = *c;
        }
    }
    let g = meas.gamma_reduced.try_inverse().unwrap();
    let g = DMatrix::from_iterator(3, 3, g.iter().copied());
    let info = fs.cov.clone().try_inverse().unwrap() + ht.transpose() * g * &ht;
    info.try_inverse().unwrap()
}

#[test]
fn posterior_covariance_is_closed_form_for_any_iteration_count() {
    let mut r = rng(30);
    for k in 0..1000 {
        let (fs, meas) = if k % 2 == 0 { landmark_case(&mut r) } else { leg_case(&mut r) };
        let oracle = information_form(&fs, &meas);
        for iters in [1, 3, 10] {
            let cfg = NanoConfig {
                max_iters: iters,
                gamma: 1e-12,
                ..Default::default()
            };
            let up = nano_update_detailed(&fs, &meas, &cfg).unwrap();
            let err = (&up.posterior.cov - &oracle).amax() / oracle.amax();
            assert!(err < 1e-12, "relative error {err}");
        }
    }
}

#[test]
fn linearized_single_iteration_equals_invariant_ekf() {
    let mut r = rng(31);
    for k in 0..200 {
        let (fs, meas) = if k % 2 == 0 { landmark_case(&mut r) } else { leg_case(&mut r) };
        let cfg = NanoConfig {
            max_iters: 1,
            expectation: Expectation::Linearized,
            ..Default::default()
        };
        let up = nano_update_detailed(&fs, &meas, &cfg).unwrap();
        let ekf = inekf_update(&fs, &meas).unwrap();
        assert!((up.state.mean.matrix() - ekf.mean.matrix()).amax() < 1e-10);
        let scale = ekf.cov.amax();
        assert!((&up.posterior.cov - &ekf.cov).amax() / scale < 1e-10);
    }
}

#[test]
fn cubature_expectation_agrees_with_sampling() {
    let mut r = rng(32);
    let (fs, meas) = landmark_case(&mut r);
    let belief = IncrementBelief::centered(fs.cov.clone() * 0.2);
    let cub = expectation_of_h(&belief, &fs.mean, &meas).unwrap();
    let l = belief.cov.clone().cholesky().unwrap().l();
    let n = 100_000;
    let mut acc = Vec3::zeros();
    let mut sq = Vec3::zeros();
    for _ in 0..n {
        let e: DVector<f64> = DVector::from_fn(9, |_, _| StandardNormal.sample(&mut r));
        let h = meas.reduced_map(&fs.mean, &tangent_of(&l * e));
        acc += h;
        sq += h.component_mul(&h);
    }
    let mean = acc / n as f64;
    let var = sq / n as f64 - mean.component_mul(&mean);
    for i in 0..3 {
        let se = (var[i] / n as f64).sqrt();
        assert!((cub[i] - mean[i]).abs() < 5.0 * se + 1e-4, "axis {i}: {} vs {}", cub[i], mean[i]);
    }
}

#[test]
fn cubature_rule_is_exact_for_cubic_polynomials() {
    let mut r = rng(33);
    let cov = spd(&mut r, 4, 0.1, 1.0);
    let mean = DVector::from_fn(4, |i, _| i as f64 * 0.3 - 0.5);
    let b = IncrementBelief::new(mean.clone(), cov.clone()).unwrap();
    let pts = cubature_points(&b, 1.0).unwrap();
    let w = 1.0 / pts.len() as f64;
    // E[x0³] = μ³ + 3 μ σ².
    let third: f64 = pts.iter().map(|p| p[0].powi(3) * w).sum();
    let expected = mean[0].powi(3) + 3.0 * mean[0] * cov[(0, 0)];
    assert!((third - expected).abs() < 1e-12);
    // E[x0 x1] = μ0 μ1 + Σ01.
    let cross: f64 = pts.iter().map(|p| p[0] * p[1] * w).sum();
    assert!((cross - (mean[0] * mean[1] + cov[(0, 1)])).abs() < 1e-12);
}

/// `ℓ(ξ) = ½ (ξ − a)ᵀ A (ξ − a)`.
struct Quadratic {
    a: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Likelihood for Quadratic {
    fn value(&self, xi: &DVector<f64>) -> f64 {
        let e = xi - &self.a;
        0.5 * e.dot(&(&self.hess * &e))
    }
    fn gradient(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.hess * (xi - &self.a)
    }
    fn hessian(&self, _xi: &DVector<f64>) -> DMatrix<f64> {
        self.hess.clone()
    }
}

#[test]
fn one_natural_gradient_step_solves_a_quadratic_problem() {
    let mut r = rng(34);
    for _ in 0..50 {
        let d = 6;
        let prior = IncrementBelief::new(DVector::from_fn(d, |_, _| StandardNormal.sample(&mut r)), spd(&mut r, d, 0.1, 2.0))
            .unwrap();
        let lik = Quadratic {
            a: DVector::from_fn(d, |_, _| StandardNormal.sample(&mut r)),
            hess: spd(&mut r, d, 0.5, 3.0),
        };
        // Start away from the prior to check the step does not depend on it.
        let start = IncrementBelief::new(DVector::from_element(d, 0.7), spd(&mut r, d, 0.2, 1.0)).unwrap();
        let out = ngd_update_generic(&start, &prior, &lik, &NanoConfig::default()).unwrap();
        let prior_inv = prior.cov.clone().try_inverse().unwrap();
        let post_cov = (&prior_inv + &lik.hess).try_inverse().unwrap();
        let post_mean = &post_cov * (&prior_inv * &prior.mean + &lik.hess * &lik.a);
        assert!((out.cov - &post_cov).amax() < 1e-10);
        assert!((out.mean - post_mean).amax() < 1e-10);
    }
}

/// `ℓ` of the first-order invariant model `r = y − (z − ⊙ᵀ ξ)`, with the
/// Hessian taken by central differences of `ℓ`.
struct NumericLinearModel {
    residual0: Vec3,
    star_t: DMatrix<f64>,
    gamma_inv: Matrix3<f64>,
}

impl NumericLinearModel {
    fn residual(&self, xi: &DVector<f64>) -> Vec3 {
        let lin = &self.star_t * xi;
        self.residual0 - Vec3::new(-lin[0], -lin[1], -lin[2])
    }
}

impl Likelihood for NumericLinearModel {
    fn value(&self, xi: &DVector<f64>) -> f64 {
        let r = self.residual(xi);
        0.5 * r.dot(&(self.gamma_inv * r))
    }
    fn gradient(&self, _xi: &DVector<f64>) -> DVector<f64> {
        unimplemented!("only the Hessian is exercised")
    }
    fn hessian(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let d = xi.len();
        let h = 1e-3;
        DMatrix::from_fn(d, d, |i, j| {
            let f = |si: f64, sj: f64| {
                let mut p = xi.clone();
                p[i] += si * h;
                p[j] += sj * h;
                self.value(&p)
            };
            (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * h * h)
        })
    }
}

#[test]
fn analytic_hessian_equals_expected_numeric_hessian() {
    let mut r = rng(35);
    for k in 0..20 {
        let (fs, meas) = if k % 2 == 0 { landmark_case(&mut r) } else { leg_case(&mut r) };
        let lik = InvariantLikelihood::new(&fs.mean, &meas).unwrap();
        let star = nanol::models::star_operator(&fs.mean, &meas);
        let model = NumericLinearModel {
            residual0: meas.y_reduced - meas.predict(&fs.mean),
            star_t: star.transpose(),
            gamma_inv: meas.gamma_inverse().unwrap(),
        };
        let expected = expected_hessian(&fs.belief(), &model).unwrap();
        let analytic = lik.analytic_hessian();
        assert!((&expected - &analytic).norm() / analytic.norm() < 1e-8);
        let averaged = expected_hessian(&fs.belief(), &lik).unwrap();
        assert!((averaged - &analytic).norm() / analytic.norm() < 1e-14);
    }
}

#[test]
fn update_never_increases_uncertainty() {
    let mut r = rng(36);
    for k in 0..200 {
        let (fs, meas) = if k % 2 == 0 { landmark_case(&mut r) } else { leg_case(&mut r) };
        let up = nano_update_detailed(&fs, &meas, &NanoConfig::default()).unwrap();
        let diff = &fs.cov - &up.posterior.cov;
        let min_eig = diff.symmetric_eigenvalues().min();
        assert!(min_eig > -1e-12 * fs.cov.amax(), "{min_eig}");
    }
}

#[test]
fn prediction_adds_process_noise() {
    let mut r = rng(37);
    let layout = StateLayout::legged(2);
    let q = assemble_process_noise(&NoiseConfig::default(), &layout, &[true, false]);
    for _ in 0..100 {
        let fs = FilterState::new(element(&mut r, 4), spd(&mut r, 15, 1e-4, 1e-2), layout.clone()).unwrap();
        let u = ImuSample {
            t: 0.0,
            omega: normal3(&mut r),
            accel: normal3(&mut r) * 3.0,
        };
        let noisy = predict(&fs, &u, 0.01, &q).unwrap();
        let clean = predict(&fs, &u, 0.01, &DMatrix::zeros(15, 15)).unwrap();
        let added = &noisy.cov - &clean.cov;
        assert!(added.symmetric_eigenvalues().min() > -1e-15);
        assert!(noisy.cov.trace() >= clean.cov.trace());
        assert_eq!(noisy.mean, clean.mean);
    }
}

#[test]
fn uninformative_measurement_keeps_the_prior() {
    let mut r = rng(38);
    let layout = StateLayout::inertial();
    let x = element(&mut r, 2);
    let cov = spd(&mut r, 9, 1e-3, 1e-2);
    let fs = FilterState::new(x.clone(), cov.clone(), layout.clone()).unwrap();
    let mut meas = make_landmark_measurement(&Vec3::new(0.3, 0.1, -0.2), &Vec3::zeros(), 0.1, &layout);
    meas.b_coeffs = vec![0.0, 0.0];
    let up = nano_update_detailed(&fs, &meas, &NanoConfig::default()).unwrap();
    assert!((&up.posterior.cov - &cov).amax() < 1e-15);
    assert_eq!(up.state.mean, x.compose(&SEm3::exp(&tangent_of(DVector::zeros(9)))));
}

#[test]
fn variational_cost_decreases_from_the_prior() {
    let mut r = rng(39);
    for k in 0..100 {
        let (fs, meas) = if k % 2 == 0 { landmark_case(&mut r) } else { leg_case(&mut r) };
        let up = nano_update_detailed(&fs, &meas, &NanoConfig::default()).unwrap();
        let before = cost_j(&up.prior, &up.prior, &fs.mean, &meas).unwrap();
        let after = cost_j(&up.posterior, &up.prior, &fs.mean, &meas).unwrap();
        assert!(after <= before, "{after} > {before}");
    }
}

#[test]
fn iteration_stops_on_small_kl() {
    let mut r = rng(40);
    let (fs, meas) = landmark_case(&mut r);
    let loose = NanoConfig {
        max_iters: 50,
        gamma: 1e3,
        ..Default::default()
    };
    assert_eq!(nano_update_detailed(&fs, &meas, &loose).unwrap().iterations, 1);
    let tight = NanoConfig {
        max_iters: 50,
        gamma: 1e-10,
        ..Default::default()
    };
    let up = nano_update_detailed(&fs, &meas, &tight).unwrap();
    assert!(up.iterations > 1 && up.iterations < 50, "{}", up.iterations);
    assert!(up.last_kl < 1e-10);
    let prev = IncrementBelief::new(up.posterior.mean.clone(), up.posterior.cov.clone()).unwrap();
    assert_eq!(kl_gaussian(&prev, &up.posterior).unwrap(), 0.0);
}

#[test]
fn increment_belief_is_reset_after_the_lift() {
    let mut r = rng(41);
    let (fs, meas) = leg_case(&mut r);
    let up = nano_update_detailed(&fs, &meas, &NanoConfig::default()).unwrap();
    let xi = tangent_of(up.posterior.mean.clone());
    let expected = fs.mean.compose(&SEm3::exp(&xi));
    assert_eq!(up.state.mean, expected);
    assert!(up.state.belief().mean.iter().all(|v| *v == 0.0));
}
