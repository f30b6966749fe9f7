use std::sync::Arc;

use super::trace::WithTrace;
use super::{
    argmax_lowest, gradient_scale, restricted_value, RoundRecord, SelectionConfig, SelectionFailure,
    SelectionOutcome, SelectionTrace,
};
use crate::error::Error;
use crate::objectives::Objective;
use crate::partition::{group_norms, GroupPartition};

/// Group Orthogonal Matching Pursuit.
///
/// Each round re-optimizes over the selected groups and adds the unselected
/// group with the largest gradient norm (lowest index on ties). Stops early
/// when the gradient on every unselected group is below the stationarity
/// tolerance, i.e. the restricted optimum is already global.
pub fn group_omp<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    k: usize,
    k_prime: usize,
    cfg: &SelectionConfig,
) -> Result<SelectionOutcome, SelectionFailure> {
    let mut trace = SelectionTrace::new("omp", k, k_prime);
    if k_prime > p.num_groups() {
        return Err(SelectionFailure {
            error: Error::InvalidArgument(format!(
                "k' = {k_prime} exceeds the number of groups {}",
                p.num_groups()
            )),
            trace,
        });
    }
    let stop_tol = cfg.solver.grad_tol * gradient_scale(obj);
    let mut selected: Vec<usize> = Vec::new();
    let (mut beta, mut value) = restricted_value(obj, p, &selected, &cfg.solver).with_trace(&trace)?;

    for round in 1..=k_prime {
        let unselected = p.complement(&selected);
        let norms = group_norms(&obj.gradient(beta.values()), p).with_trace(&trace)?;
        let best = argmax_lowest(&unselected, |i| norms[i]).expect("k' <= t leaves a candidate");
        let tau = norms[best];
        if tau <= stop_tol {
            trace.stop_reason = Some(format!(
                "round {round}: unselected gradient norm {tau:.3e} below tolerance; restricted optimum is global"
            ));
            break;
        }
        let mut rec = RoundRecord::new(round, value, norms);
        rec.selected = Some(best);
        rec.tau = Some(tau);
        selected.push(best);
        let (next_beta, next_value) = restricted_value(obj, p, &selected, &cfg.solver).with_trace(&trace)?;
        rec.objective_after = next_value;
        rec.support = selected.clone();
        trace.iterations.push(rec);
        beta = next_beta;
        value = next_value;
    }
    Ok(SelectionOutcome { selected, beta, value, trace })
}
