//! The extended pose group SE_m(3): a rotation plus `m` translational
//! columns, with tangent vectors laid out as `[φ; ρ_1; …; ρ_m]`.

use nalgebra::{DMatrix, DVector};

use super::so3::{self, Vec3, SO3};
use crate::error::{Error, Result};

/// Number of compositions after which the rotation block is re-projected
/// onto SO(3).
pub const RENORMALIZE_EVERY: u32 = 1000;

/// Series terms whose Frobenius norm falls below this are dropped.
const SERIES_TOL: f64 = 1e-14;
const SERIES_CAP: usize = 30;

/// A tangent vector of SE_m(3), `d = 3 + 3m` components.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent(DVector<f64>);

impl Tangent {
    pub fn zeros(m: usize) -> Self {
        Tangent(DVector::zeros(3 + 3 * m))
    }

    /// Panics unless `v.len()` is a multiple of three.
    pub fn from_vector(v: DVector<f64>) -> Self {
        assert!(
            v.len() >= 3 && v.len() % 3 == 0,
            "tangent dimension must be 3 + 3m"
        );
        Tangent(v)
    }

    pub fn from_blocks(phi: &Vec3, rhos: &[Vec3]) -> Self {
        let mut v = DVector::zeros(3 + 3 * rhos.len());
        v.fixed_rows_mut::<3>(0).copy_from(phi);
        for (i, rho) in rhos.iter().enumerate() {
            v.fixed_rows_mut::<3>(3 + 3 * i).copy_from(rho);
        }
        Tangent(v)
    }

    pub fn m(&self) -> usize {
        self.0.len() / 3 - 1
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn phi(&self) -> Vec3 {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn rho(&self, i: usize) -> Vec3 {
        self.0.fixed_rows::<3>(3 + 3 * i).into_owned()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl std::ops::Neg for &Tangent {
    type Output = Tangent;
    fn neg(self) -> Tangent {
        Tangent(-&self.0)
    }
}

/// An element of SE_m(3).
#[derive(Debug, Clone)]
pub struct SEm3 {
    rot: SO3,
    cols: Vec<Vec3>,
    compositions: u32,
}

impl PartialEq for SEm3 {
    fn eq(&self, other: &Self) -> bool {
        self.rot == other.rot && self.cols == other.cols
    }
}

impl SEm3 {
    pub fn identity(m: usize) -> Self {
        SEm3 {
            rot: SO3::identity(),
            cols: vec![Vec3::zeros(); m],
            compositions: 0,
        }
    }

    pub fn new(rot: SO3, cols: Vec<Vec3>) -> Self {
        SEm3 {
            rot,
            cols,
            compositions: 0,
        }
    }

    /// Reads the `(3+m) × (3+m)` matrix form. The lower block is not checked.
    pub fn from_matrix(mat: &DMatrix<f64>) -> Result<Self> {
        let n = mat.nrows();
        if n < 3 || mat.ncols() != n {
            return Err(Error::Dimension(format!(
                "group matrix must be square with at least 3 rows, got {}x{}",
                n,
                mat.ncols()
            )));
        }
        let rot = SO3::from_matrix_unchecked(mat.fixed_view::<3, 3>(0, 0).into_owned());
        let cols = (3..n)
            .map(|j| mat.fixed_view::<3, 1>(0, j).into_owned())
            .collect();
        Ok(SEm3::new(rot, cols))
    }

    pub fn m(&self) -> usize {
        self.cols.len()
    }

    pub fn dim(&self) -> usize {
        3 + 3 * self.cols.len()
    }

    pub fn rotation(&self) -> &SO3 {
        &self.rot
    }

    pub fn col(&self, i: usize) -> &Vec3 {
        &self.cols[i]
    }

    pub fn cols(&self) -> &[Vec3] {
        &self.cols
    }

    pub fn set_col(&mut self, i: usize, v: Vec3) {
        self.cols[i] = v;
    }

    pub fn set_rotation(&mut self, rot: SO3) {
        self.rot = rot;
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = 3 + self.m();
        let mut mat = DMatrix::identity(n, n);
        mat.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.matrix());
        for (j, c) in self.cols.iter().enumerate() {
            mat.fixed_view_mut::<3, 1>(0, 3 + j).copy_from(c);
        }
        mat
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rot.inverse();
        SEm3 {
            cols: self.cols.iter().map(|p| -(rt.matrix() * p)).collect(),
            rot: rt,
            compositions: self.compositions,
        }
    }

    /// `self · other`. The rotation is re-projected every
    /// [`RENORMALIZE_EVERY`] compositions.
    pub fn compose(&self, other: &SEm3) -> Self {
        debug_assert_eq!(self.m(), other.m());
        let r = self.rot.matrix();
        let mut out = SEm3 {
            rot: self.rot.compose(&other.rot),
            cols: self
                .cols
                .iter()
                .zip(&other.cols)
                .map(|(p1, p2)| r * p2 + p1)
                .collect(),
            compositions: self.compositions.max(other.compositions) + 1,
        };
        if out.compositions >= RENORMALIZE_EVERY {
            out.renormalize();
        }
        out
    }

    pub fn renormalize(&mut self) {
        self.rot = SO3::from_matrix_projected(self.rot.matrix());
        self.compositions = 0;
    }

    /// First three rows of `X⁻¹ b` for `b = [b0; c]`, i.e. `Rᵀ(b0 − Σ c_i p_i)`.
    pub fn inverse_act_point(&self, b0: &Vec3, c: &[f64]) -> Vec3 {
        debug_assert_eq!(c.len(), self.m());
        let mut acc = *b0;
        for (ci, p) in c.iter().zip(&self.cols) {
            acc -= p * *ci;
        }
        self.rot.matrix().transpose() * acc
    }

    /// First three rows of `X z` for `z = [z0; c]`.
    pub fn act_point(&self, z0: &Vec3, c: &[f64]) -> Vec3 {
        let mut acc = self.rot.matrix() * z0;
        for (ci, p) in c.iter().zip(&self.cols) {
            acc += p * *ci;
        }
        acc
    }

    pub fn exp(xi: &Tangent) -> Self {
        let phi = xi.phi();
        let jl = so3::left_jacobian(&phi);
        SEm3::new(
            SO3::exp(&phi),
            (0..xi.m()).map(|i| jl * xi.rho(i)).collect(),
        )
    }

    pub fn log(&self) -> Result<Tangent> {
        let phi = self.rot.log()?;
        let jl_inv = so3::left_jacobian_inv(&phi);
        let rhos: Vec<Vec3> = self.cols.iter().map(|p| jl_inv * p).collect();
        Ok(Tangent::from_blocks(&phi, &rhos))
    }

    /// Adjoint matrix: `R` on the diagonal, `p_i^∧ R` in the first block
    /// column of block row `i + 1`.
    pub fn adjoint(&self) -> DMatrix<f64> {
        let d = self.dim();
        let r = self.rot.matrix();
        let mut ad = DMatrix::zeros(d, d);
        for blk in 0..=self.m() {
            ad.fixed_view_mut::<3, 3>(3 * blk, 3 * blk).copy_from(r);
        }
        for (i, p) in self.cols.iter().enumerate() {
            ad.fixed_view_mut::<3, 3>(3 + 3 * i, 0)
                .copy_from(&(so3::hat(p) * r));
        }
        ad
    }

    /// Inverse of [`SEm3::adjoint`], equal to `Ad_{X⁻¹}`.
    pub fn adjoint_inv(&self) -> DMatrix<f64> {
        self.inverse().adjoint()
    }

    /// Largest deviation from the group invariants: orthogonality of `R`
    /// (Frobenius) and `|det R − 1|`.
    pub fn invariant_error(&self) -> f64 {
        let r = self.rot.matrix();
        self.rot
            .orthogonality_error()
            .max((r.determinant() - 1.0).abs())
    }
}

/// `ξ ↦ ξ^∧ ∈ se_m(3)`.
pub fn wedge(xi: &Tangent) -> DMatrix<f64> {
    let n = 3 + xi.m();
    let mut mat = DMatrix::zeros(n, n);
    mat.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&so3::hat(&xi.phi()));
    for i in 0..xi.m() {
        mat.fixed_view_mut::<3, 1>(0, 3 + i).copy_from(&xi.rho(i));
    }
    mat
}

/// Little adjoint `ad_ξ`, so that `ad_ξ η = vee([ξ^∧, η^∧])`.
pub fn little_adjoint(xi: &Tangent) -> DMatrix<f64> {
    let d = xi.dim();
    let phi_hat = so3::hat(&xi.phi());
    let mut ad = DMatrix::zeros(d, d);
    for blk in 0..=xi.m() {
        ad.fixed_view_mut::<3, 3>(3 * blk, 3 * blk)
            .copy_from(&phi_hat);
    }
    for i in 0..xi.m() {
        ad.fixed_view_mut::<3, 3>(3 + 3 * i, 0)
            .copy_from(&so3::hat(&xi.rho(i)));
    }
    ad
}

/// `Σ_k sign^k / (k+1)! · ad_ξ^k`, truncated by [`SERIES_TOL`].
fn jacobian_series(xi: &Tangent, sign: f64) -> DMatrix<f64> {
    let d = xi.dim();
    let ad = little_adjoint(xi) * sign;
    let mut sum = DMatrix::identity(d, d);
    let mut power = DMatrix::identity(d, d);
    for k in 1..SERIES_CAP {
        power = &power * &ad;
        let term = &power / factorial(k + 1);
        let small = term.norm() < SERIES_TOL;
        sum += term;
        if small {
            break;
        }
    }
    sum
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Right Jacobian of SE_m(3) from the ad-series.
pub fn right_jacobian(xi: &Tangent) -> DMatrix<f64> {
    jacobian_series(xi, -1.0)
}

/// Left Jacobian of SE_m(3) from the ad-series.
pub fn left_jacobian(xi: &Tangent) -> DMatrix<f64> {
    jacobian_series(xi, 1.0)
}

/// Which argument of [`bch_first_order`] is assumed small.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallArg {
    First,
    Second,
}

/// First-order BCH: the tangent `z` with `Exp(z) ≈ Exp(x1) Exp(x2)`.
pub fn bch_first_order(x1: &Tangent, x2: &Tangent, small: SmallArg) -> Tangent {
    let solve = |jac: DMatrix<f64>, v: &DVector<f64>| {
        jac.lu()
            .solve(v)
            .expect("SE_m(3) Jacobians are invertible for finite arguments")
    };
    let v = match small {
        SmallArg::First => solve(left_jacobian(x2), x1.as_vector()) + x2.as_vector(),
        SmallArg::Second => x1.as_vector() + solve(right_jacobian(x1), x2.as_vector()),
    };
    Tangent(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xi(vals: &[f64]) -> Tangent {
        Tangent::from_vector(DVector::from_column_slice(vals))
    }

    #[test]
    fn identity_roundtrips() {
        let id = SEm3::exp(&Tangent::zeros(3));
        assert_eq!(id, SEm3::identity(3));
        assert_eq!(id.log().unwrap(), Tangent::zeros(3));
        assert_eq!(SEm3::identity(2).adjoint(), DMatrix::identity(9, 9));
    }

    #[test]
    fn pure_translation() {
        let t = xi(&[0.0, 0.0, 0.0, 1.0, 2.0, 3.0, -4.0, 5.0, 6.0]);
        let x = SEm3::exp(&t);
        assert_eq!(x.rotation(), &SO3::identity());
        assert_eq!(x.col(0), &Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(x.col(1), &Vec3::new(-4.0, 5.0, 6.0));
    }

    #[test]
    fn matrix_roundtrip_and_inverse() {
        let x = SEm3::exp(&xi(&[0.2, -0.1, 0.4, 1.0, 0.5, -0.3, 2.0, 0.0, 1.0]));
        let back = SEm3::from_matrix(&x.matrix()).unwrap();
        assert_eq!(back, x);
        let prod = x.compose(&x.inverse()).matrix();
        assert!((prod - DMatrix::identity(5, 5)).norm() < 1e-14);
    }

    #[test]
    fn inverse_act_matches_matrix_product() {
        let x = SEm3::exp(&xi(&[0.2, -0.1, 0.4, 1.0, 0.5, -0.3, 2.0, 0.0, 1.0]));
        let b = DVector::from_column_slice(&[0.5, 2.0, -1.0, 0.0, 1.0]);
        let full = x.inverse().matrix() * &b;
        let red = x.inverse_act_point(&Vec3::new(0.5, 2.0, -1.0), &[0.0, 1.0]);
        assert!((full.rows(0, 3) - red).norm() < 1e-15);
    }

    #[test]
    fn commuting_bch_is_exact() {
        let a = xi(&[0.1, 0.2, -0.05, 0.0, 0.0, 0.0]);
        let b = xi(&[0.02, 0.04, -0.01, 0.0, 0.0, 0.0]);
        let z = bch_first_order(&a, &b, SmallArg::Second);
        let sum = a.as_vector() + b.as_vector();
        assert!((z.as_vector() - sum).norm() < 1e-15);
        let z0 = bch_first_order(&a, &Tangent::zeros(1), SmallArg::Second);
        assert_eq!(z0, a);
    }
}
