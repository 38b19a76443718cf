//! A quadratic bilevel problem with closed-form hypergradient and optimum.
//!
//! Lower level: ½ θᵀAθ − θᵀBφ over θ (A symmetric positive definite).
//! Upper level: ½‖θ − a‖² + ½ρ‖φ‖².
//!
//! The lower-level best response is θ*(φ) = A⁻¹Bφ, so the implicit
//! hypergradient at any (θ, φ) is ρφ + BᵀA⁻¹(θ − a), and the bilevel optimum
//! solves (CᵀC + ρI)φ = Cᵀa with C = A⁻¹B.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::problem::BilevelProblem;
use crate::error::{check_shape, Result};
use crate::loss::LossValue;

#[derive(Debug, Clone)]
pub struct QuadraticBilevel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub target: DVector<f64>,
    pub rho: f64,
}

fn col(x: &Array2<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().copied())
}

fn to_array(v: &DVector<f64>) -> Array2<f64> {
    Array2::from_shape_vec((v.len(), 1), v.iter().copied().collect()).expect("column shape")
}

impl QuadraticBilevel {
    /// Random instance whose lower Hessian has eigenvalues in [lo, hi].
    pub fn random(n_inner: usize, n_outer: usize, lo: f64, hi: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
        let q = normal(n_inner, n_inner).qr().q();
        let b = normal(n_inner, n_outer) / (n_inner as f64).sqrt();
        let target = normal(n_inner, 1).column(0).into_owned();
        let eig: Vec<f64> = (0..n_inner)
            .map(|k| {
                if n_inner == 1 {
                    lo
                } else {
                    lo + (hi - lo) * k as f64 / (n_inner - 1) as f64
                }
            })
            .collect();
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        QuadraticBilevel { a, b, target, rho: 0.1 }
    }

    /// Instance with A = I.
    pub fn identity(n_inner: usize, n_outer: usize, seed: u64) -> Self {
        let mut f = QuadraticBilevel::random(n_inner, n_outer, 1.0, 1.0, seed);
        f.a = DMatrix::identity(n_inner, n_inner);
        f
    }

    fn a_inv(&self) -> DMatrix<f64> {
        self.a.clone().cholesky().expect("A is positive definite").inverse()
    }

    /// Exact implicit hypergradient at (inner, outer).
    pub fn ift_hypergradient(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Array2<f64> {
        let theta = col(inner);
        let phi = col(outer);
        to_array(&(phi * self.rho + self.b.transpose() * (self.a_inv() * (theta - &self.target))))
    }

    pub fn best_response(&self, outer: &Array2<f64>) -> Array2<f64> {
        to_array(&(self.a_inv() * &self.b * col(outer)))
    }

    /// Outer variables at the bilevel optimum.
    pub fn optimum(&self) -> Array2<f64> {
        let c = self.a_inv() * &self.b;
        let p = self.b.ncols();
        let lhs = c.transpose() * &c + DMatrix::identity(p, p) * self.rho;
        let rhs = c.transpose() * &self.target;
        to_array(&lhs.cholesky().expect("positive definite").solve(&rhs))
    }

    pub fn zeros(&self) -> (Array2<f64>, Array2<f64>) {
        (Array2::zeros(self.inner_shape()), Array2::zeros(self.outer_shape()))
    }
}

impl BilevelProblem for QuadraticBilevel {
    fn inner_shape(&self) -> (usize, usize) {
        (self.a.nrows(), 1)
    }

    fn outer_shape(&self) -> (usize, usize) {
        (self.b.ncols(), 1)
    }

    fn lower_loss(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<f64> {
        check_shape("fixture inner", self.inner_shape(), inner.dim())?;
        check_shape("fixture outer", self.outer_shape(), outer.dim())?;
        let t = col(inner);
        Ok(0.5 * t.dot(&(&self.a * &t)) - t.dot(&(&self.b * col(outer))))
    }

    fn upper_loss(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<LossValue> {
        check_shape("fixture inner", self.inner_shape(), inner.dim())?;
        check_shape("fixture outer", self.outer_shape(), outer.dim())?;
        let d = col(inner) - &self.target;
        let u = 0.5 * d.norm_squared();
        let r = 0.5 * col(outer).norm_squared();
        Ok(LossValue::new(u, r, 1.0, self.rho))
    }

    fn lower_grads(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        check_shape("fixture inner", self.inner_shape(), inner.dim())?;
        check_shape("fixture outer", self.outer_shape(), outer.dim())?;
        let t = col(inner);
        let gi = &self.a * &t - &self.b * col(outer);
        let go = -(self.b.transpose() * t);
        Ok((to_array(&gi), to_array(&go)))
    }

    fn upper_grads(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<(LossValue, Array2<f64>, Array2<f64>)> {
        let loss = self.upper_loss(inner, outer)?;
        let gi = col(inner) - &self.target;
        let go = col(outer) * self.rho;
        Ok((loss, to_array(&gi), to_array(&go)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_and_symmetry() {
        let f = QuadraticBilevel::random(6, 4, 0.5, 1.5, 3);
        assert!((&f.a - f.a.transpose()).amax() < 1e-14);
        let eig = f.a.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| (0.5 - 1e-12..=1.5 + 1e-12).contains(&e)));
    }

    #[test]
    fn optimum_zeroes_the_hypergradient() {
        let f = QuadraticBilevel::random(5, 3, 0.5, 2.0, 9);
        let phi = f.optimum();
        let theta = f.best_response(&phi);
        let g = f.ift_hypergradient(&theta, &phi);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }
}
