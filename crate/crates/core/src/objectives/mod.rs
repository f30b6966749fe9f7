//! Smooth objectives and their restricted curvature constants.

mod diagnostics;
mod logistic;
mod quadratic;
mod rsc;

pub use diagnostics::{finite_difference_error, midpoint_convexity_violations};
pub use logistic::RidgeLogisticObjective;
pub use quadratic::{default_ridge, least_squares, QuadraticObjective};
pub use rsc::{
    check_rsc_inequalities, estimate_rsc_constants, rsc_constants_quadratic, RscCheckReport, RscConstants,
    RscViolation, DEFAULT_ENUMERATION_CAP,
};

pub(crate) use rsc::binomial;

use nalgebra::DVector;

use crate::error::Result;

/// A differentiable objective `l : R^n -> R`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, beta: &DVector<f64>) -> f64;

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64>;

    fn value_and_gradient(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.value(beta), self.gradient(beta))
    }

    /// Whether the objective is declared strictly convex.
    fn is_strictly_convex(&self) -> bool;

    /// Exact minimizer over the free coordinates `coords` with every other
    /// coordinate held at zero. Objectives that have no closed form return
    /// `None` and are minimized iteratively.
    fn restricted_solve(&self, _coords: &[usize]) -> Option<Result<DVector<f64>>> {
        None
    }

    /// Upper bound on the gradient's Lipschitz constant, when cheaply known.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }

    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, beta: &DVector<f64>) -> f64 {
        (**self).value(beta)
    }
    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(beta)
    }
    fn value_and_gradient(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        (**self).value_and_gradient(beta)
    }
    fn is_strictly_convex(&self) -> bool {
        (**self).is_strictly_convex()
    }
    fn restricted_solve(&self, coords: &[usize]) -> Option<Result<DVector<f64>>> {
        (**self).restricted_solve(coords)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        (**self).lipschitz_hint()
    }
    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        (**self).as_quadratic()
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, beta: &DVector<f64>) -> f64 {
        (**self).value(beta)
    }
    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(beta)
    }
    fn value_and_gradient(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        (**self).value_and_gradient(beta)
    }
    fn is_strictly_convex(&self) -> bool {
        (**self).is_strictly_convex()
    }
    fn restricted_solve(&self, coords: &[usize]) -> Option<Result<DVector<f64>>> {
        (**self).restricted_solve(coords)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        (**self).lipschitz_hint()
    }
    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        (**self).as_quadratic()
    }
}
