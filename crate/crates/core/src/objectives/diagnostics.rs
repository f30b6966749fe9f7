use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Objective;

/// Relative error `‖g_fd − ∇l(β)‖ / max(‖∇l(β)‖, 1e-6)` between the analytic
/// gradient and central differences with step `h`.
pub fn finite_difference_error<O: Objective + ?Sized>(obj: &O, beta: &DVector<f64>, h: f64) -> f64 {
    let grad = obj.gradient(beta);
    let mut fd = DVector::zeros(beta.len());
    let mut probe = beta.clone();
    for j in 0..beta.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let up = obj.value(&probe);
        probe[j] = orig - h;
        let down = obj.value(&probe);
        probe[j] = orig;
        fd[j] = (up - down) / (2.0 * h);
    }
    (fd - &grad).norm() / grad.norm().max(1e-6)
}

/// Number of random pairs `β₁ ≠ β₂` for which the strict midpoint inequality
/// `l(½β₁ + ½β₂) < ½l(β₁) + ½l(β₂)` fails.
pub fn midpoint_convexity_violations<O: Objective + ?Sized>(obj: &O, trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = obj.dim();
    let mut violations = 0;
    for _ in 0..trials {
        let b1 = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let b2 = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let mid = obj.value(&((&b1 + &b2) * 0.5));
        let avg = 0.5 * (obj.value(&b1) + obj.value(&b2));
        if !(mid < avg) {
            violations += 1;
        }
    }
    violations
}
