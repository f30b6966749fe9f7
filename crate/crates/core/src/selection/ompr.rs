use std::sync::Arc;

use super::trace::WithTrace;
use super::{
    argmax_lowest, argmin_lowest, gradient_scale, group_omp, restricted_value, RoundRecord, SelectionConfig,
    SelectionFailure, SelectionOutcome, SelectionTrace,
};
use crate::error::Error;
use crate::objectives::{rsc_constants_quadratic, Objective};
use crate::partition::{group_norms, GroupPartition};

/// Enumeration budget for annotating the trace with the guarantee regime.
const REGIME_CAP: u128 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OmprParams {
    /// Target sparsity the guarantee compares against.
    pub k: usize,
    /// Size of the working set.
    pub k_prime: usize,
    /// Number of swap rounds `R`.
    pub rounds: usize,
    /// Initial working set; defaults to `k'` rounds of Group OMP.
    pub initial: Option<Vec<usize>>,
}

/// `k' ≥ k(L₂²/μ²_{k+k'} + 1)` for quadratics where the constants can be
/// enumerated cheaply.
fn regime<O: Objective + ?Sized>(obj: &O, p: &GroupPartition, k: usize, k_prime: usize) -> Option<bool> {
    let q = obj.as_quadratic()?;
    let t = p.num_groups();
    if t < 2 {
        return None;
    }
    let l2 = rsc_constants_quadratic(q, p, 2, REGIME_CAP).ok()?;
    let mu = rsc_constants_quadratic(q, p, (k + k_prime).min(t), REGIME_CAP).ok()?;
    if !(l2.certified && mu.certified) {
        return None;
    }
    let kappa2 = (l2.smoothness / mu.mu).powi(2);
    Some(k_prime as f64 >= k as f64 * (kappa2 + 1.0))
}

/// Group Orthogonal Matching Pursuit with Replacement.
///
/// Each round adds the unselected group with the largest gradient norm and
/// drops the selected group with the smallest coefficient norm (lowest index
/// on ties). Returns the working set `S^r`, `r ∈ 0..=R`, with the smallest
/// restricted objective, earliest on ties.
pub fn group_ompr<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    params: &OmprParams,
    cfg: &SelectionConfig,
) -> Result<SelectionOutcome, SelectionFailure> {
    let OmprParams { k, k_prime, rounds, .. } = *params;
    let mut trace = SelectionTrace::new("ompr", k, k_prime);
    let fail = |error: Error, trace: &SelectionTrace| SelectionFailure { error, trace: trace.clone() };
    if k_prime > p.num_groups() {
        return Err(fail(
            Error::InvalidArgument(format!("k' = {k_prime} exceeds {} groups", p.num_groups())),
            &trace,
        ));
    }
    let initial = match &params.initial {
        Some(s0) => {
            p.check_groups(s0).with_trace(&trace)?;
            if s0.len() != k_prime {
                return Err(fail(
                    Error::InvalidArgument(format!(
                        "initial set has {} groups, expected k' = {k_prime}",
                        s0.len()
                    )),
                    &trace,
                ));
            }
            s0.clone()
        }
        None => group_omp(obj, p, k, k_prime, cfg).map_err(|f| fail(f.error, &trace))?.selected,
    };
    trace.regime_satisfied = regime(obj, p, k, k_prime);

    let stop_tol = cfg.solver.grad_tol * gradient_scale(obj);
    let mut current = initial;
    let (mut beta, mut value) = restricted_value(obj, p, &current, &cfg.solver).with_trace(&trace)?;
    let mut best = (current.clone(), beta.clone(), value);

    for round in 1..=rounds {
        let unselected = p.complement(&current);
        let norms = group_norms(&obj.gradient(beta.values()), p).with_trace(&trace)?;
        let mut rec = RoundRecord::new(round, value, norms.clone());
        let add = argmax_lowest(&unselected, |i| norms[i]);
        let Some(add) = add.filter(|&i| norms[i] > stop_tol) else {
            // No unselected group carries gradient: swapping cannot help.
            rec.fixed_point = true;
            rec.support = current.clone();
            trace.iterations.push(rec);
            trace.stop_reason = Some(format!("round {round}: fixed point"));
            break;
        };
        let coef_norms = beta.group_norms();
        let drop = argmin_lowest(&current, |j| coef_norms[j]).expect("working set is non-empty");
        rec.selected = Some(add);
        rec.removed = Some(drop);
        rec.removed_norm = Some(coef_norms[drop]);
        rec.tau = Some(norms[add]);
        current.retain(|&j| j != drop);
        current.push(add);
        let (next_beta, next_value) = restricted_value(obj, p, &current, &cfg.solver).with_trace(&trace)?;
        rec.objective_after = next_value;
        rec.support = current.clone();
        trace.iterations.push(rec);
        beta = next_beta;
        value = next_value;
        if value < best.2 {
            best = (current.clone(), beta.clone(), value);
        }
    }
    let (selected, beta, value) = best;
    Ok(SelectionOutcome { selected, beta, value, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{least_squares, QuadraticObjective};
    use crate::rng::{gaussian, seeded};
    use nalgebra::{DMatrix, DVector};

    fn instance(seed: u64) -> (QuadraticObjective, Arc<GroupPartition>) {
        let mut rng = seeded(seed);
        let x = DMatrix::from_fn(14, 8, |_, _| gaussian(&mut rng));
        let y = DVector::from_fn(14, |_, _| gaussian(&mut rng));
        (
            least_squares(&x, &y, 0.1).unwrap(),
            Arc::new(GroupPartition::contiguous(&[1, 2, 1, 1, 2, 1]).unwrap()),
        )
    }

    #[test]
    fn zero_rounds_returns_initial_set() {
        let (obj, p) = instance(1);
        let params = OmprParams { k: 1, k_prime: 2, rounds: 0, initial: Some(vec![4, 1]) };
        let out = group_ompr(&obj, &p, &params, &SelectionConfig::default()).unwrap();
        assert_eq!(out.selected, vec![4, 1]);
        assert!(out.trace.iterations.is_empty());
    }

    #[test]
    fn returns_best_visited_set() {
        let (obj, p) = instance(2);
        let params = OmprParams { k: 2, k_prime: 3, rounds: 6, initial: Some(vec![0, 2, 5]) };
        let out = group_ompr(&obj, &p, &params, &SelectionConfig::default()).unwrap();
        let visited_min = out
            .trace
            .iterations
            .iter()
            .map(|r| r.objective_after)
            .chain(std::iter::once(out.trace.iterations[0].objective_before))
            .fold(f64::INFINITY, f64::min);
        assert!((out.value - visited_min).abs() < 1e-12);
        assert_eq!(out.selected.len(), 3);
        for rec in &out.trace.iterations {
            if let (Some(a), Some(r)) = (rec.selected, rec.removed) {
                assert_ne!(a, r);
                assert!(rec.support.contains(&a) && !rec.support.contains(&r));
            }
        }
    }

    #[test]
    fn fixed_point_when_optimum_inside_working_set() {
        let x = DMatrix::identity(4, 4);
        let y = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0]);
        let obj = least_squares(&x, &y, 0.0).unwrap();
        let p = Arc::new(GroupPartition::singletons(4));
        let params = OmprParams { k: 1, k_prime: 2, rounds: 3, initial: Some(vec![0, 1]) };
        let out = group_ompr(&obj, &p, &params, &SelectionConfig::default()).unwrap();
        assert!(out.trace.iterations[0].fixed_point);
        assert_eq!(out.selected, vec![0, 1]);
    }

    #[test]
    fn default_initialization_uses_omp() {
        let (obj, p) = instance(3);
        let cfg = SelectionConfig::default();
        let params = OmprParams { k: 1, k_prime: 2, rounds: 0, initial: None };
        let out = group_ompr(&obj, &p, &params, &cfg).unwrap();
        let omp = group_omp(&obj, &p, 1, 2, &cfg).unwrap();
        assert_eq!(out.selected, omp.selected);
        assert!(out.trace.regime_satisfied.is_some());
    }

    #[test]
    fn rejects_wrong_initial_size() {
        let (obj, p) = instance(4);
        let params = OmprParams { k: 1, k_prime: 3, rounds: 1, initial: Some(vec![0]) };
        assert!(group_ompr(&obj, &p, &params, &SelectionConfig::default()).is_err());
    }
}
