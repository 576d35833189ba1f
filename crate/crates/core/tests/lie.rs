mod common;

use common::*;
use nalgebra::{DMatrix, DVector, Matrix3};
use nanol::lie::sem3::{left_jacobian, right_jacobian};
use nanol::lie::{bch_first_order, so3, wedge, ConcentratedGaussian, SEm3, SmallArg, Tangent, Vec3, SO3};
use proptest::prelude::*;

#[test]
fn exp_log_roundtrip_so3() {
    let mut r = rng(1);
    for _ in 0..10_000 {
        let phi = rotation_vector(&mut r, std::f64::consts::PI - 1e-3);
        let back = SO3::exp(&phi).log().unwrap();
        assert!((back - phi).norm() < 1e-9, "{phi:?}");
    }
}

#[test]
fn exp_log_roundtrip_extended_poses() {
    let mut r = rng(2);
    for m in [2, 3] {
        for _ in 0..10_000 {
            let xi = tangent(&mut r, m);
            let back = SEm3::exp(&xi).log().unwrap();
            assert!((back.as_vector() - xi.as_vector()).norm() < 1e-9);
        }
    }
}

#[test]
fn exp_matches_matrix_exponential() {
    let mut r = rng(3);
    for _ in 0..50 {
        let xi = tangent(&mut r, 2);
        // Truncated power series of the 5×5 algebra element.
        let a = wedge(&xi);
        let mut term = DMatrix::identity(5, 5);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * &a / k as f64;
            sum += &term;
        }
        assert!((SEm3::exp(&xi).matrix() - sum).amax() < 1e-10);
    }
}

#[test]
fn adjoint_conjugation() {
    let mut r = rng(4);
    for m in [1, 2, 3, 6] {
        for _ in 0..200 {
            let x = element(&mut r, m);
            let xi = small_tangent(&mut r, m, 0.5);
            let lhs = x.matrix() * wedge(&xi) * x.inverse().matrix();
            let rhs = wedge(&tangent_of(x.adjoint() * xi.as_vector()));
            assert!((lhs - rhs).amax() < 1e-9);
            let conj = x.compose(&SEm3::exp(&xi)).compose(&x.inverse());
            let direct = SEm3::exp(&tangent_of(x.adjoint() * xi.as_vector()));
            assert!((conj.matrix() - direct.matrix()).amax() < 1e-9);
        }
    }
}

#[test]
fn adjoint_is_a_homomorphism() {
    let mut r = rng(5);
    for _ in 0..200 {
        let x = element(&mut r, 3);
        let y = element(&mut r, 3);
        let lhs = x.compose(&y).adjoint();
        assert!((lhs - x.adjoint() * y.adjoint()).amax() < 1e-9);
        assert!((x.adjoint() * x.adjoint_inv() - DMatrix::identity(12, 12)).amax() < 1e-12);
    }
}

fn fd_right_jacobian(xi: &Tangent, h: f64) -> DMatrix<f64> {
    let d = xi.dim();
    let base = SEm3::exp(xi);
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut plus = xi.as_vector().clone();
        let mut minus = xi.as_vector().clone();
        plus[j] += h;
        minus[j] -= h;
        let col = (right_diff(&base, &SEm3::exp(&tangent_of(plus)))
            - right_diff(&base, &SEm3::exp(&tangent_of(minus))))
            / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

#[test]
fn right_jacobian_matches_finite_differences_at_second_order() {
    let mut r = rng(6);
    for _ in 0..20 {
        let xi = small_tangent(&mut r, 2, 0.6);
        let jr = right_jacobian(&xi);
        let e1 = (fd_right_jacobian(&xi, 1e-2) - &jr).amax();
        let e2 = (fd_right_jacobian(&xi, 5e-3) - &jr).amax();
        assert!(e1 < 1e-3);
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "convergence ratio {ratio}");
    }
}

#[test]
fn left_and_right_jacobians_are_related_by_the_adjoint() {
    let mut r = rng(7);
    for _ in 0..200 {
        let xi = small_tangent(&mut r, 3, 0.8);
        let jl = left_jacobian(&xi);
        let jr = right_jacobian(&xi);
        assert!((jl - SEm3::exp(&xi).adjoint() * jr).amax() < 1e-10);
    }
}

#[test]
fn series_rotation_block_matches_closed_form() {
    let mut r = rng(8);
    for _ in 0..200 {
        let xi = small_tangent(&mut r, 2, 0.8);
        let jl = left_jacobian(&xi);
        let closed = so3::left_jacobian(&xi.phi());
        let block = jl.view((0, 0), (3, 3)).into_owned();
        assert!((block - DMatrix::from_iterator(3, 3, closed.iter().copied())).amax() < 1e-12);
        let inv = so3::left_jacobian_inv(&xi.phi());
        assert!((closed * inv - Matrix3::identity()).amax() < 1e-12);
    }
}

#[test]
fn bch_error_is_second_order_in_the_small_argument() {
    let mut r = rng(9);
    for _ in 0..20 {
        let big = small_tangent(&mut r, 2, 0.5);
        let dir = small_tangent(&mut r, 2, 1.0);
        let err = |h: f64| {
            let small = tangent_of(dir.as_vector() * h);
            let exact = SEm3::exp(&big).compose(&SEm3::exp(&small)).log().unwrap();
            let approx = bch_first_order(&big, &small, SmallArg::Second);
            (exact.as_vector() - approx.as_vector()).norm()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");

        let err_first = |h: f64| {
            let small = tangent_of(dir.as_vector() * h);
            let exact = SEm3::exp(&small).compose(&SEm3::exp(&big)).log().unwrap();
            let approx = bch_first_order(&small, &big, SmallArg::First);
            (exact.as_vector() - approx.as_vector()).norm()
        };
        let ratio = err_first(1e-2) / err_first(5e-3);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn concentrated_gaussian_moments() {
    let mut r = rng(10);
    let mean = element(&mut r, 2);
    let cov = spd(&mut r, 9, 1e-3, 1e-2);
    let g = ConcentratedGaussian::new(mean.clone(), cov.clone()).unwrap();
    let n = 100_000;
    let samples = g.sample_n(n, &mut r).unwrap();
    let mut m1 = DVector::zeros(9);
    let mut m2 = DMatrix::zeros(9, 9);
    for s in &samples {
        let e = right_diff(&mean, s);
        m1 += &e;
        m2 += &e * e.transpose();
    }
    m1 /= n as f64;
    m2 /= n as f64;
    // Standard error of each entry is about sqrt(1e-2 / 1e5) ≈ 3e-4.
    assert!(m1.amax() < 2e-3, "{}", m1.amax());
    assert!((m2 - cov).amax() < 1e-3);
}

#[test]
fn long_composition_chains_stay_on_the_group() {
    let mut r = rng(11);
    let step = SEm3::exp(&small_tangent(&mut r, 3, 0.05));
    let mut x = SEm3::identity(3);
    for _ in 0..10_000 {
        x = x.compose(&step);
    }
    assert!(x.invariant_error() < 1e-12, "{}", x.invariant_error());
}

#[test]
fn inverse_and_identity() {
    let mut r = rng(12);
    for _ in 0..100 {
        let x = element(&mut r, 4);
        let e = x.compose(&x.inverse());
        assert!((e.matrix() - SEm3::identity(4).matrix()).amax() < 1e-12);
    }
}

#[test]
fn half_turn_is_rejected() {
    let r = SO3::exp(&Vec3::new(std::f64::consts::PI, 0.0, 0.0));
    assert!(r.log().is_err());
    let x = SEm3::new(r, vec![Vec3::zeros(); 2]);
    assert!(x.log().is_err());
}

proptest! {
    #[test]
    fn roundtrip_holds_for_arbitrary_tangents(
        phi in prop::array::uniform3(-1.8f64..1.8),
        rho in prop::array::uniform6(-10.0f64..10.0),
    ) {
        let phi = Vec3::from(phi);
        let xi = Tangent::from_blocks(&phi, &[Vec3::new(rho[0], rho[1], rho[2]), Vec3::new(rho[3], rho[4], rho[5])]);
        let back = SEm3::exp(&xi).log().unwrap();
        prop_assert!((back.as_vector() - xi.as_vector()).norm() < 1e-9);
    }

    #[test]
    fn exp_of_sum_along_a_line(t in -1.0f64..1.0, s in -1.0f64..1.0) {
        let xi = Tangent::from_blocks(&Vec3::new(0.3, -0.2, 0.5), &[Vec3::new(1.0, 2.0, -1.0)]);
        let a = SEm3::exp(&tangent_of(xi.as_vector() * t));
        let b = SEm3::exp(&tangent_of(xi.as_vector() * s));
        let ab = SEm3::exp(&tangent_of(xi.as_vector() * (t + s)));
        prop_assert!((a.compose(&b).matrix() - ab.matrix()).amax() < 1e-12);
    }
}
