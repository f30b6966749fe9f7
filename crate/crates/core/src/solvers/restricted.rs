use std::sync::Arc;

use nalgebra::DVector;

use super::descent::gradient_descent;
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::partition::{Coefficients, GroupPartition};

fn gather(v: &DVector<f64>, coords: &[usize]) -> DVector<f64> {
    DVector::from_iterator(coords.len(), coords.iter().map(|&j| v[j]))
}

fn scatter(n: usize, coords: &[usize], sub: &DVector<f64>) -> DVector<f64> {
    let mut full = DVector::zeros(n);
    for (r, &j) in coords.iter().enumerate() {
        full[j] = sub[r];
    }
    full
}

/// Minimizes `l` over `{β : β|T_i = 0 for every i ∉ selected}`.
///
/// Coordinates outside the selected groups are exactly zero in the result.
/// Objectives with a closed-form restricted solve (quadratics) use it, with
/// iterative refinement when the residual misses the tolerance; others run
/// gradient descent on the free coordinates.
pub fn restricted_minimize<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    selected: &[usize],
    cfg: &SolverConfig,
) -> Result<Coefficients> {
    cfg.validate()?;
    p.check_dim(obj.dim())?;
    p.check_groups(selected)?;
    let n = p.n();
    let coords = p.coordinates_of(selected);
    if coords.is_empty() {
        return Ok(Coefficients::zeros(p.clone()));
    }
    let g0 = obj.gradient(&DVector::zeros(n));
    let tol = cfg.grad_tol * (1.0 + g0.norm());

    if let Some(direct) = obj.restricted_solve(&coords) {
        let mut beta = direct?;
        for _ in 0..3 {
            let g = gather(&obj.gradient(&beta), &coords);
            if g.norm() <= tol {
                return Coefficients::new(beta, p.clone());
            }
            // Iterative refinement: β ← β − A_II⁻¹ ∇l(β)|_I
            let correction = match obj.as_quadratic() {
                Some(q) => {
                    let k = coords.len();
                    let sub = nalgebra::DMatrix::from_fn(k, k, |r, c| q.a()[(coords[r], coords[c])]);
                    match sub.cholesky() {
                        Some(ch) => ch.solve(&g),
                        None => break,
                    }
                }
                None => break,
            };
            let step = scatter(n, &coords, &correction);
            beta -= step;
        }
        let residual = gather(&obj.gradient(&beta), &coords).norm();
        if residual <= tol {
            return Coefficients::new(beta, p.clone());
        }
        // Fall through to the iterative path from the direct solution.
        return iterate(obj, p, &coords, gather(&beta, &coords), tol, cfg);
    }
    iterate(obj, p, &coords, DVector::zeros(coords.len()), tol, cfg)
}

fn iterate<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    coords: &[usize],
    start: DVector<f64>,
    tol: f64,
    cfg: &SolverConfig,
) -> Result<Coefficients> {
    let n = p.n();
    let step0 = cfg
        .initial_step
        .or_else(|| obj.lipschitz_hint().map(|l| 1.0 / l.max(f64::MIN_POSITIVE)))
        .unwrap_or(1.0);
    let run = gradient_descent(
        |sub| {
            let full = scatter(n, coords, sub);
            let (v, g) = obj.value_and_gradient(&full);
            (v, gather(&g, coords))
        },
        start,
        tol,
        cfg,
        step0,
    );
    let beta = scatter(n, coords, &run.x);
    if !run.converged {
        return Err(Error::NotConverged {
            iterations: run.iterations,
            residual: run.grad_norm,
            best: beta.iter().copied().collect(),
        });
    }
    Coefficients::new(beta, p.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{least_squares, QuadraticObjective, RidgeLogisticObjective};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn empty_support_is_zero() {
        let obj =
            least_squares(&DMatrix::identity(3, 3), &DVector::from_vec(vec![1.0, 2.0, 3.0]), 0.0).unwrap();
        let p = Arc::new(GroupPartition::singletons(3));
        let beta = restricted_minimize(&obj, &p, &[], &SolverConfig::default()).unwrap();
        assert_eq!(beta.values(), &DVector::zeros(3));
    }

    #[test]
    fn identity_design_decouples() {
        let obj =
            least_squares(&DMatrix::identity(3, 3), &DVector::from_vec(vec![1.0, 2.0, 3.0]), 0.0).unwrap();
        let p = Arc::new(GroupPartition::singletons(3));
        let beta = restricted_minimize(&obj, &p, &[0, 2], &SolverConfig::default()).unwrap();
        assert!((beta.values() - DVector::from_vec(vec![1.0, 0.0, 3.0])).norm() < 1e-14);
        assert_eq!(beta.values()[1].to_bits(), 0f64.to_bits());
    }

    #[test]
    fn full_support_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = DMatrix::from_fn(6, 6, |_, _| StandardNormal.sample(&mut rng));
        let a = m.transpose() * &m + DMatrix::identity(6, 6);
        let a = (&a + a.transpose()) * 0.5;
        let b = DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
        let obj = QuadraticObjective::new(a.clone(), b.clone(), 0.0, true).unwrap();
        let p = Arc::new(GroupPartition::contiguous(&[2, 3, 1]).unwrap());
        let beta = restricted_minimize(&obj, &p, &[0, 1, 2], &SolverConfig::default()).unwrap();
        let oracle = a.lu().solve(&(-b)).unwrap();
        assert!((beta.values() - &oracle).norm() < 1e-10 * (1.0 + oracle.norm()));
        assert!(obj.gradient(beta.values()).norm() <= 1e-10);
    }

    #[test]
    fn logistic_restricted_stationary_and_zero_off_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(30, 6, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(30, |i, _| if (i * 7) % 5 < 2 { -1.0 } else { 1.0 });
        let obj = RidgeLogisticObjective::new(x, y, 0.05).unwrap();
        let p = Arc::new(GroupPartition::contiguous(&[2, 2, 2]).unwrap());
        let cfg = SolverConfig::default();
        let beta = restricted_minimize(&obj, &p, &[0, 2], &cfg).unwrap();
        let v = beta.values();
        assert_eq!(v[2].to_bits(), 0f64.to_bits());
        assert_eq!(v[3].to_bits(), 0f64.to_bits());
        let g = obj.gradient(v);
        let g0 = obj.gradient(&DVector::zeros(6)).norm();
        let free: f64 = [0, 1, 4, 5].iter().map(|&j| g[j] * g[j]).sum::<f64>().sqrt();
        assert!(free <= cfg.grad_tol * (1.0 + g0));
    }

    #[test]
    fn exhausted_iterations_carry_best_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(20, 4, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(20, |i, _| if i % 2 == 0 { -1.0 } else { 1.0 });
        let obj = RidgeLogisticObjective::new(x, y, 0.05).unwrap();
        let p = Arc::new(GroupPartition::singletons(4));
        let cfg = SolverConfig { max_iters: 1, ..SolverConfig::default() };
        match restricted_minimize(&obj, &p, &[0, 1, 2, 3], &cfg) {
            Err(Error::NotConverged { best, iterations, .. }) => {
                assert_eq!(best.len(), 4);
                assert_eq!(iterations, 1);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_group_index() {
        let obj = least_squares(&DMatrix::identity(2, 2), &DVector::zeros(2), 0.0).unwrap();
        let p = Arc::new(GroupPartition::singletons(2));
        assert!(restricted_minimize(&obj, &p, &[2], &SolverConfig::default()).is_err());
    }
}
