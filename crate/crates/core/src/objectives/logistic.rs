use nalgebra::{DMatrix, DVector};

use super::Objective;
use crate::error::{Error, Result};

/// `l(β) = Σ log(1 + exp(−yᵢ xᵢᵀβ)) + ρ‖β‖²` with labels in `{−1, +1}`.
#[derive(Debug, Clone)]
pub struct RidgeLogisticObjective {
    x: DMatrix<f64>,
    y: DVector<f64>,
    ridge: f64,
    lipschitz: f64,
}

impl RidgeLogisticObjective {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, ridge: f64) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if !(ridge > 0.0) {
            return Err(Error::InvalidArgument(format!("logistic ridge must be > 0, got {ridge}")));
        }
        if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument(format!("labels must be +1 or -1, found {bad}")));
        }
        let gram = x.transpose() * &x;
        let top = if gram.nrows() == 0 { 0.0 } else { gram.symmetric_eigenvalues().max() };
        Ok(RidgeLogisticObjective { lipschitz: 0.25 * top + 2.0 * ridge, x, y, ridge })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    fn margins(&self, beta: &DVector<f64>) -> DVector<f64> {
        (&self.x * beta).component_mul(&self.y)
    }
}

/// `log(1 + exp(u))` without overflow.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl Objective for RidgeLogisticObjective {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, beta: &DVector<f64>) -> f64 {
        let m = self.margins(beta);
        m.iter().map(|&mi| softplus(-mi)).sum::<f64>() + self.ridge * beta.norm_squared()
    }

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        self.value_and_gradient(beta).1
    }

    fn value_and_gradient(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        let m = self.margins(beta);
        let value = m.iter().map(|&mi| softplus(-mi)).sum::<f64>() + self.ridge * beta.norm_squared();
        // d/dm softplus(-m) = -sigmoid(-m)
        let weights = DVector::from_fn(m.len(), |i, _| -self.y[i] * sigmoid(-m[i]));
        let grad = self.x.transpose() * weights + 2.0 * self.ridge * beta;
        (value, grad)
    }

    fn is_strictly_convex(&self) -> bool {
        true
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{finite_difference_error, midpoint_convexity_violations};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn instance(seed: u64) -> RidgeLogisticObjective {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(12, 5, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(12, |i, _| if i % 3 == 0 { -1.0 } else { 1.0 });
        RidgeLogisticObjective::new(x, y, 0.1).unwrap()
    }

    #[test]
    fn value_at_zero_is_m_log2() {
        let obj = instance(1);
        let v = obj.value(&DVector::zeros(5));
        assert!((v - 12.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let obj = instance(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let beta = DVector::from_fn(5, |_, _| StandardNormal.sample(&mut rng));
            assert!(finite_difference_error(&obj, &beta, 1e-5) < 1e-5);
        }
    }

    #[test]
    fn finite_for_huge_margins() {
        let obj = instance(3);
        let beta = DVector::from_element(5, 1e4);
        assert!(obj.value(&beta).is_finite());
        assert!(obj.gradient(&beta).iter().all(|g| g.is_finite()));
    }

    #[test]
    fn strictly_convex_on_random_pairs() {
        let obj = instance(4);
        assert_eq!(midpoint_convexity_violations(&obj, 200, 11), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = DMatrix::zeros(2, 2);
        assert!(RidgeLogisticObjective::new(x.clone(), DVector::from_vec(vec![1.0, -1.0]), 0.0).is_err());
        assert!(RidgeLogisticObjective::new(x, DVector::from_vec(vec![1.0, 0.5]), 1.0).is_err());
    }
}
