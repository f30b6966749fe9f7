//! Gradient descent with Barzilai-Borwein trial steps and monotone
//! backtracking, shared by the smooth inner solves.

use nalgebra::DVector;

use super::SolverConfig;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e12;

/// Slack for comparing objective values that differ only by rounding.
pub(crate) fn rounding_slack(f: f64) -> f64 {
    8.0 * f64::EPSILON * (1.0 + f.abs())
}

/// `f(x + d) − f(x)` without the cancellation of subtracting two nearly
/// equal values: for small changes the trapezoid rule `½(g + g')ᵀd` is used,
/// which is exact for quadratics.
pub(crate) fn smooth_change(
    f: f64,
    g: &DVector<f64>,
    f_new: f64,
    g_new: &DVector<f64>,
    d: &DVector<f64>,
) -> f64 {
    let direct = f_new - f;
    if direct.abs() > 1e-6 * (1.0 + f.abs()) {
        direct
    } else {
        0.5 * (g.dot(d) + g_new.dot(d))
    }
}

pub(crate) struct SmoothRun {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes a smooth function until `‖∇f‖ ≤ tol`.
///
/// A step is accepted when it satisfies the Armijo condition, or, once the
/// decrease is below rounding, when it keeps the value within rounding and
/// shrinks the gradient.
pub(crate) fn gradient_descent<F>(
    mut eval: F,
    x0: DVector<f64>,
    tol: f64,
    cfg: &SolverConfig,
    step0: f64,
) -> SmoothRun
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut x = x0;
    let (mut f, mut g) = eval(&x);
    let mut gnorm = g.norm();
    let mut step = step0.clamp(MIN_STEP, MAX_STEP);
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if gnorm <= tol {
            return SmoothRun { x, value: f, grad_norm: gnorm, iterations, converged: true };
        }
        iterations += 1;
        let g2 = gnorm * gnorm;
        let mut s = step;
        let accepted = loop {
            let x_new = &x - &g * s;
            let (f_new, g_new) = eval(&x_new);
            if f_new.is_finite() {
                let change = smooth_change(f, &g, f_new, &g_new, &(&x_new - &x));
                let armijo = change <= -ARMIJO * s * g2;
                let stalled_ok = f_new <= f + rounding_slack(f) && g_new.norm() < gnorm;
                if armijo || stalled_ok {
                    break Some((x_new, f_new, g_new));
                }
            }
            s *= cfg.backtrack;
            if s < MIN_STEP {
                break None;
            }
        };
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };
        let sk = &x_new - &x;
        let yk = &g_new - &g;
        let sy = sk.dot(&yk);
        step = if sy > 0.0 {
            (sk.norm_squared() / sy).clamp(MIN_STEP, MAX_STEP)
        } else {
            (s * 2.0).min(MAX_STEP)
        };
        x = x_new;
        f = f_new;
        g = g_new;
        gnorm = g.norm();
    }
    SmoothRun { converged: gnorm <= tol, x, value: f, grad_norm: gnorm, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_ill_conditioned_quadratic() {
        let d = DVector::from_vec(vec![1.0, 10.0, 1000.0]);
        let target = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let run = gradient_descent(
            |x| {
                let r = x - &target;
                (0.5 * r.dot(&r.component_mul(&d)), r.component_mul(&d))
            },
            DVector::zeros(3),
            1e-10,
            &SolverConfig::default(),
            1.0,
        );
        assert!(run.converged);
        assert!((run.x - target).norm() < 1e-9);
    }

    #[test]
    fn reports_iteration_exhaustion() {
        let cfg = SolverConfig { max_iters: 1, ..SolverConfig::default() };
        let run = gradient_descent(
            |x| (0.5 * x.norm_squared() * 100.0, x * 100.0),
            DVector::from_element(2, 1.0),
            1e-12,
            &cfg,
            1e-4,
        );
        assert!(!run.converged);
        assert_eq!(run.iterations, 1);
    }
}
