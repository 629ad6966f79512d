//! Small dense linear-algebra helpers.

use rand_distr::{Distribution, StandardNormal};

use crate::exec::rng_from_seed;
use crate::{Matrix, Vector};

/// Relative tolerance of [`power_iteration`].
pub const POWER_TOL: f64 = 1e-10;
/// Iteration cap of [`power_iteration`].
pub const POWER_MAX_ITERS: usize = 10_000;
const POWER_SEED: u64 = 0x0005_EED0_FA7A;

/// Largest eigenvalue of a symmetric positive semidefinite operator given by
/// its action, by power iteration from a fixed random start vector.
///
/// Stops when successive Rayleigh quotients agree to `tol` relative, or after
/// `max_iters`.
pub fn power_iteration(
    dim: usize,
    apply: impl Fn(&Vector) -> Vector,
    tol: f64,
    max_iters: usize,
) -> f64 {
    let mut rng = rng_from_seed(POWER_SEED);
    let mut v = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = apply(&v);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    log::warn!("power iteration hit the {max_iters} iteration cap");
    lambda
}

/// `‖AᵀA‖₂`, the squared top singular value of `A`.
pub fn gram_spectral_norm(a: &Matrix) -> f64 {
    power_iteration(
        a.ncols(),
        |v| a.tr_mul(&(a * v)),
        POWER_TOL,
        POWER_MAX_ITERS,
    )
}

/// Least-squares data `(A, b)` with the cached Lipschitz constant of
/// `x -> Aᵀ(Ax - b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    pub a: Matrix,
    pub b: Vector,
    /// `‖AᵀA‖₂`
    pub lip: f64,
}

impl LinearProblem {
    pub fn new(a: Matrix, b: Vector) -> Self {
        assert_eq!(a.nrows(), b.len(), "A and b disagree on the row count");
        let lip = gram_spectral_norm(&a);
        LinearProblem { a, b, lip }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// `Ax - b`
    pub fn residual(&self, x: &Vector) -> Vector {
        &self.a * x - &self.b
    }

    /// `Aᵀ(Ax - b)`
    pub fn ls_gradient(&self, x: &Vector) -> Vector {
        self.a.tr_mul(&self.residual(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(m: usize, n: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn matches_svd() {
        for (m, n, seed) in [(5, 5, 1), (20, 40, 2), (50, 100, 3)] {
            let a = gaussian(m, n, seed);
            let lip = gram_spectral_norm(&a);
            let s = a.clone().svd(false, false).singular_values.max();
            assert!((lip - s * s).abs() <= 1e-8 * s * s, "{lip} vs {}", s * s);
        }
    }

    #[test]
    fn identity_and_diagonal() {
        assert!((gram_spectral_norm(&Matrix::identity(4, 4)) - 1.0).abs() < 1e-12);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -3.0, 2.0]));
        assert!((gram_spectral_norm(&d) - 9.0).abs() < 1e-8);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(gram_spectral_norm(&Matrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn residual_and_gradient() {
        let p = LinearProblem::new(Matrix::identity(2, 2), Vector::from_vec(vec![1.0, 2.0]));
        let x = Vector::from_vec(vec![3.0, 3.0]);
        assert_eq!(p.residual(&x), Vector::from_vec(vec![2.0, 1.0]));
        assert_eq!(p.ls_gradient(&x), Vector::from_vec(vec![2.0, 1.0]));
    }
}
