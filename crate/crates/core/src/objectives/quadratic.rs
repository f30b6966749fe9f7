use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::Objective;
use crate::error::{Error, Result};

/// `l(β) = ½ βᵀAβ + bᵀβ + c` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    strictly_convex: bool,
    lambda_max: OnceLock<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl QuadraticObjective {
    /// Builds the objective. When `strictly_convex` is declared, `A` must be
    /// positive definite.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64, strictly_convex: bool) -> Result<Self> {
        let n = b.len();
        if a.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.nrows() });
        }
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
        }
        let scale = 1.0 + a.amax();
        for i in 0..n {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidArgument(format!(
                        "quadratic matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if strictly_convex {
            let min_eig = a.clone().symmetric_eigenvalues().min();
            if n > 0 && !(min_eig > 0.0) {
                return Err(Error::NotStrictlyConvex(format!(
                    "smallest eigenvalue {min_eig:.3e} is not positive"
                )));
            }
        }
        Ok(QuadraticObjective { a, b, c, strictly_convex, lambda_max: OnceLock::new() })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Largest eigenvalue of `A`, cached.
    pub fn lambda_max(&self) -> f64 {
        *self.lambda_max.get_or_init(|| {
            if self.b.is_empty() {
                0.0
            } else {
                self.a.clone().symmetric_eigenvalues().max()
            }
        })
    }

    /// Unconstrained minimizer `-A⁻¹b`.
    pub fn minimizer(&self) -> Result<DVector<f64>> {
        let all: Vec<usize> = (0..self.b.len()).collect();
        self.solve_on(&all)
    }

    fn solve_on(&self, coords: &[usize]) -> Result<DVector<f64>> {
        let n = self.b.len();
        let mut beta = DVector::zeros(n);
        if coords.is_empty() {
            return Ok(beta);
        }
        let k = coords.len();
        let sub = DMatrix::from_fn(k, k, |r, c| self.a[(coords[r], coords[c])]);
        let rhs = DVector::from_fn(k, |r, _| -self.b[coords[r]]);
        let x = match sub.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => sub
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::NotStrictlyConvex("singular restricted block".into()))?,
        };
        for (r, &j) in coords.iter().enumerate() {
            beta[j] = x[r];
        }
        Ok(beta)
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, beta: &DVector<f64>) -> f64 {
        0.5 * beta.dot(&(&self.a * beta)) + self.b.dot(beta) + self.c
    }

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.a * beta + &self.b
    }

    fn value_and_gradient(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        let ab = &self.a * beta;
        let value = 0.5 * beta.dot(&ab) + self.b.dot(beta) + self.c;
        (value, ab + &self.b)
    }

    fn is_strictly_convex(&self) -> bool {
        self.strictly_convex
    }

    fn restricted_solve(&self, coords: &[usize]) -> Option<Result<DVector<f64>>> {
        Some(self.solve_on(coords))
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.lambda_max())
    }

    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        Some(self)
    }
}

/// `‖Xβ − y‖² + ρ‖β‖²` as a quadratic: `A = 2(XᵀX + ρI)`, `b = −2Xᵀy`,
/// `c = ‖y‖²`. Strict convexity is declared when `A` is positive definite.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> Result<QuadraticObjective> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    let n = x.ncols();
    let xt = x.transpose();
    let mut a = &xt * x;
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    a *= 2.0;
    // XᵀX is symmetric in exact arithmetic; force it bitwise.
    let a = (&a + a.transpose()) * 0.5;
    let b = -2.0 * (&xt * y);
    let c = y.norm_squared();
    let pd = n == 0 || a.clone().cholesky().is_some();
    QuadraticObjective::new(a, b, c, pd)
}

/// `1e-6 · trace(XᵀX) / n`, the ridge used when none is given.
pub fn default_ridge(x: &DMatrix<f64>) -> f64 {
    let n = x.ncols().max(1) as f64;
    1e-6 * x.norm_squared() / n
}
