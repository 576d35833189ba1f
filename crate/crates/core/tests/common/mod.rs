#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use nanol::lie::{SEm3, Tangent, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::from_fn(|_, _| StandardNormal.sample(rng))
}

/// Rotation vector with angle uniform in `[0, max_angle)`.
pub fn rotation_vector(rng: &mut ChaCha8Rng, max_angle: f64) -> Vec3 {
    let axis = normal3(rng).normalize();
    axis * rng.random::<f64>() * max_angle
}

/// Tangent whose rotation part stays inside the log domain.
pub fn tangent(rng: &mut ChaCha8Rng, m: usize) -> Tangent {
    let phi = rotation_vector(rng, PI - 1e-3);
    let rhos: Vec<Vec3> = (0..m).map(|_| normal3(rng) * 2.0).collect();
    Tangent::from_blocks(&phi, &rhos)
}

pub fn small_tangent(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> Tangent {
    let v: DVector<f64> = DVector::from_fn(3 + 3 * m, |_, _| StandardNormal.sample(&mut *rng));
    Tangent::from_vector(v * scale)
}

pub fn element(rng: &mut ChaCha8Rng, m: usize) -> SEm3 {
    SEm3::exp(&tangent(rng, m))
}

/// Random symmetric positive definite matrix with eigenvalues in
/// `[lo, hi]`.
pub fn spd(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let a: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut *rng));
    let q = a.qr().q();
    let eig: DVector<f64> = DVector::from_fn(d, |_, _| lo + (hi - lo) * rng.random::<f64>());
    let p = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&p + p.transpose()) * 0.5
}

pub fn tangent_of(v: DVector<f64>) -> Tangent {
    Tangent::from_vector(v)
}

/// `Log(X⁻¹ Y)`.
pub fn right_diff(x: &SEm3, y: &SEm3) -> DVector<f64> {
    x.inverse().compose(y).log().unwrap().into_vector()
}
