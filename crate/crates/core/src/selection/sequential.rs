use std::sync::Arc;

use super::trace::WithTrace;
use super::{
    argmax_lowest, gradient_scale, restricted_value, threshold_tau, RoundRecord, SelectionConfig,
    SelectionFailure, SelectionOutcome, SelectionTrace, ThresholdReport,
};
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::partition::GroupPartition;
use crate::solvers::{attention_minimize, group_lasso_minimize_from, AttentionSolution, LassoSolution};

pub const DEFAULT_DELTA: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct LassoRound {
    pub record: RoundRecord,
    pub report: ThresholdReport,
    /// Solution at the `λ` that produced the selection.
    pub solution: LassoSolution,
}

#[derive(Debug, Clone)]
pub struct AttentionRound {
    pub record: RoundRecord,
    pub report: ThresholdReport,
    pub solution: AttentionSolution,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Penalized groups whose norm in `beta` exceeds the detection threshold.
fn active_groups(
    p: &GroupPartition,
    penalized: &[usize],
    beta: &nalgebra::DVector<f64>,
    eta: f64,
) -> Vec<usize> {
    penalized.iter().copied().filter(|&i| p.group_norm(beta, i) > eta).collect()
}

/// Solves the group LASSO at `lambda` with every unselected group penalized
/// and returns the active penalized group of largest norm.
pub fn sequential_lasso_step<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    selected: &[usize],
    lambda: f64,
    cfg: &SelectionConfig,
) -> Result<(usize, LassoSolution)> {
    p.check_groups(selected)?;
    let penalized = p.complement(selected);
    let sol = group_lasso_minimize_from(obj, p, &penalized, lambda, &cfg.solver, None)?;
    let beta = sol.beta.values();
    let active = active_groups(p, &penalized, beta, cfg.detection_threshold(beta));
    let norms = sol.beta.group_norms();
    match argmax_lowest(&active, |i| norms[i]) {
        Some(i) => Ok((i, sol)),
        None => Err(Error::NoSelection(format!(
            "no penalized group exceeds the detection threshold at lambda = {lambda:.6e}"
        ))),
    }
}

fn stop_tolerance<O: Objective + ?Sized>(obj: &O, cfg: &SelectionConfig) -> f64 {
    cfg.solver.grad_tol * gradient_scale(obj)
}

/// Runs `solve` at `λ = (1 − δ)τ`, and once more at `δ/10` when it does not
/// isolate a single active group.
fn threshold_round<S, F>(
    round: usize,
    report: &ThresholdReport,
    delta: f64,
    mut solve: F,
) -> Result<(RoundRecord, S)>
where
    F: FnMut(f64) -> Result<(Vec<usize>, Vec<f64>, S)>,
{
    let tau = report.tau;
    let mut rec = RoundRecord::new(round, report.objective, report.group_grad_norms.clone());
    rec.tau = Some(tau);
    rec.argmax_set = report.argmax_set.clone();

    let mut used = delta;
    let (mut active, mut norms, mut sol) = solve((1.0 - used) * tau)?;
    if active.len() != 1 {
        used = delta / 10.0;
        rec.retried = true;
        (active, norms, sol) = solve((1.0 - used) * tau)?;
    }
    rec.delta = Some(used);
    rec.lambda = Some((1.0 - used) * tau);
    let Some(pick) = argmax_lowest(&active, |i| norms[i]) else {
        return Err(Error::NoSelection(format!(
            "round {round}: no penalized group active at lambda = (1 - {used:.1e}) tau"
        )));
    };
    rec.selected = Some(pick);
    rec.in_argmax_set = Some(report.argmax_set.contains(&pick));
    rec.active_groups = active;
    Ok((rec, sol))
}

/// One round of Group Sequential LASSO from the selected set `selected`.
///
/// Fails with [`Error::OptimumReached`] when `τ` is below the stationarity
/// tolerance.
pub fn sequential_lasso_round<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    selected: &[usize],
    round: usize,
    delta: f64,
    cfg: &SelectionConfig,
) -> Result<LassoRound> {
    check_delta(delta)?;
    let report = threshold_tau(obj, p, selected, cfg)?;
    if report.tau <= stop_tolerance(obj, cfg) {
        return Err(Error::OptimumReached);
    }
    let penalized = p.complement(selected);
    let start = report.beta_inf().values().clone();
    let (mut rec, solution) = threshold_round(round, &report, delta, |lambda| {
        let sol = group_lasso_minimize_from(obj, p, &penalized, lambda, &cfg.solver, Some(&start))?;
        let beta = sol.beta.values();
        let active = active_groups(p, &penalized, beta, cfg.detection_threshold(beta));
        Ok((active, sol.beta.group_norms(), sol))
    })?;
    let mut support = selected.to_vec();
    support.push(rec.selected.expect("round selected a group"));
    rec.support = support;
    Ok(LassoRound { record: rec, report, solution })
}

/// One round of Group Sequential Attention. Selection reads the effective
/// group norms `‖w_i β|T_i‖₂`.
pub fn sequential_attention_round<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    selected: &[usize],
    round: usize,
    delta: f64,
    cfg: &SelectionConfig,
) -> Result<AttentionRound> {
    check_delta(delta)?;
    let report = threshold_tau(obj, p, selected, cfg)?;
    if report.tau <= stop_tolerance(obj, cfg) {
        return Err(Error::OptimumReached);
    }
    let penalized = p.complement(selected);
    let seed = cfg.seed.wrapping_add(round as u64);
    let (mut rec, solution) = threshold_round(round, &report, delta, |lambda| {
        let sol = attention_minimize(obj, p, &penalized, lambda, &cfg.solver, cfg.restarts, seed)?;
        let eff = sol.effective.values();
        let active = active_groups(p, &penalized, eff, cfg.detection_threshold(eff));
        Ok((active, sol.effective.group_norms(), sol))
    })?;
    let mut support = selected.to_vec();
    support.push(rec.selected.expect("round selected a group"));
    rec.support = support;
    Ok(AttentionRound { record: rec, report, solution })
}

fn run_rounds<O, F>(
    obj: &O,
    p: &Arc<GroupPartition>,
    algorithm: &str,
    k_prime: usize,
    cfg: &SelectionConfig,
    mut round_fn: F,
) -> std::result::Result<SelectionOutcome, SelectionFailure>
where
    O: Objective + ?Sized,
    F: FnMut(&[usize], usize) -> Result<RoundRecord>,
{
    let mut trace = SelectionTrace::new(algorithm, k_prime, k_prime);
    if k_prime > p.num_groups() {
        return Err(SelectionFailure {
            error: Error::InvalidArgument(format!(
                "k' = {k_prime} exceeds the number of groups {}",
                p.num_groups()
            )),
            trace,
        });
    }
    let mut selected = Vec::new();
    for round in 1..=k_prime {
        match round_fn(&selected, round) {
            Ok(mut rec) => {
                let pick = rec.selected.expect("round selected a group");
                let (_, after) = restricted_value(obj, p, &rec.support, &cfg.solver).with_trace(&trace)?;
                rec.objective_after = after;
                selected.push(pick);
                trace.iterations.push(rec);
            }
            Err(Error::OptimumReached) => {
                trace.stop_reason =
                    Some(format!("round {round}: tau below tolerance; restricted optimum is global"));
                break;
            }
            Err(error) => return Err(SelectionFailure { error, trace }),
        }
    }
    let (beta, value) = restricted_value(obj, p, &selected, &cfg.solver).with_trace(&trace)?;
    Ok(SelectionOutcome { selected, beta, value, trace })
}

/// Group Sequential LASSO: each round penalizes the unselected groups at
/// `λ = (1 − δ)τ` and adds the group the LASSO activates.
pub fn sequential_lasso<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    k_prime: usize,
    delta: f64,
    cfg: &SelectionConfig,
) -> std::result::Result<SelectionOutcome, SelectionFailure> {
    if let Err(error) = check_delta(delta) {
        return Err(SelectionFailure { error, trace: SelectionTrace::new("seq-lasso", k_prime, k_prime) });
    }
    run_rounds(obj, p, "seq-lasso", k_prime, cfg, |sel, round| {
        sequential_lasso_round(obj, p, sel, round, delta, cfg).map(|r| r.record)
    })
}

/// Group Sequential Attention: as [`sequential_lasso`] with the inner solve
/// replaced by the attention-factorized problem.
pub fn sequential_attention<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    k_prime: usize,
    delta: f64,
    cfg: &SelectionConfig,
) -> std::result::Result<SelectionOutcome, SelectionFailure> {
    if let Err(error) = check_delta(delta) {
        return Err(SelectionFailure {
            error,
            trace: SelectionTrace::new("seq-attention", k_prime, k_prime),
        });
    }
    run_rounds(obj, p, "seq-attention", k_prime, cfg, |sel, round| {
        sequential_attention_round(obj, p, sel, round, delta, cfg).map(|r| r.record)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{least_squares, QuadraticObjective, RidgeLogisticObjective};
    use crate::rng::{gaussian, seeded};
    use crate::selection::group_omp;
    use nalgebra::{DMatrix, DVector};

    fn regression(
        seed: u64,
        m: usize,
        n: usize,
        ridge: f64,
    ) -> (DMatrix<f64>, DVector<f64>, QuadraticObjective) {
        let mut rng = seeded(seed);
        let x = DMatrix::from_fn(m, n, |_, _| gaussian(&mut rng));
        let y = DVector::from_fn(m, |_, _| gaussian(&mut rng));
        let obj = least_squares(&x, &y, ridge).unwrap();
        (x, y, obj)
    }

    #[test]
    fn first_round_matches_largest_correlation() {
        let (x, y, obj) = regression(3, 20, 7, 0.0);
        let p = Arc::new(GroupPartition::singletons(7));
        let r = sequential_lasso_round(&obj, &p, &[], 1, DEFAULT_DELTA, &SelectionConfig::default()).unwrap();
        let corr = x.transpose() * y;
        let expected = (0..7).max_by(|&a, &b| corr[a].abs().partial_cmp(&corr[b].abs()).unwrap()).unwrap();
        assert_eq!(r.record.selected, Some(expected));
        assert_eq!(r.record.in_argmax_set, Some(true));
    }

    #[test]
    fn agrees_with_omp_on_random_instances() {
        let cfg = SelectionConfig::default();
        for seed in 0..10 {
            let (_, _, obj) = regression(100 + seed, 18, 9, 0.05);
            let p = Arc::new(GroupPartition::contiguous(&[2, 1, 2, 1, 1, 2]).unwrap());
            let lasso = sequential_lasso(&obj, &p, 3, DEFAULT_DELTA, &cfg).unwrap();
            let omp = group_omp(&obj, &p, 3, 3, &cfg).unwrap();
            assert_eq!(lasso.selected, omp.selected, "seed {seed}");
            assert!((lasso.value - omp.value).abs() < 1e-10 * (1.0 + omp.value.abs()));
        }
    }

    #[test]
    fn logistic_selection_lies_in_argmax_set() {
        let mut rng = seeded(9);
        let x = DMatrix::from_fn(40, 6, |_, _| gaussian(&mut rng));
        let y = DVector::from_fn(40, |i, _| if x[(i, 0)] + 0.5 * x[(i, 3)] > 0.0 { 1.0 } else { -1.0 });
        let obj = RidgeLogisticObjective::new(x, y, 0.1).unwrap();
        let p = Arc::new(GroupPartition::contiguous(&[2, 2, 2]).unwrap());
        let out = sequential_lasso(&obj, &p, 2, DEFAULT_DELTA, &SelectionConfig::default()).unwrap();
        for rec in &out.trace.iterations {
            assert_eq!(rec.in_argmax_set, Some(true));
        }
    }

    #[test]
    fn never_reselects() {
        let (_, _, obj) = regression(11, 25, 10, 0.1);
        let p = Arc::new(GroupPartition::singletons(10));
        let out = sequential_lasso(&obj, &p, 6, DEFAULT_DELTA, &SelectionConfig::default()).unwrap();
        let mut sorted = out.selected.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), out.selected.len());
    }

    #[test]
    fn lambda_above_tau_selects_nothing() {
        let (_, _, obj) = regression(12, 15, 5, 0.1);
        let p = Arc::new(GroupPartition::singletons(5));
        let cfg = SelectionConfig::default();
        let report = threshold_tau(&obj, &p, &[1], &cfg).unwrap();
        let err = sequential_lasso_step(&obj, &p, &[1], 1.05 * report.tau, &cfg).unwrap_err();
        assert!(matches!(err, Error::NoSelection(_)));
        let (pick, _) = sequential_lasso_step(&obj, &p, &[1], 0.99 * report.tau, &cfg).unwrap();
        assert!(report.argmax_set.contains(&pick));
    }

    #[test]
    fn attention_reproduces_lasso_selection() {
        let cfg = SelectionConfig::default();
        for seed in 0..4 {
            let (_, _, obj) = regression(200 + seed, 14, 6, 0.1);
            let p = Arc::new(GroupPartition::contiguous(&[2, 1, 2, 1]).unwrap());
            let lasso = sequential_lasso(&obj, &p, 2, DEFAULT_DELTA, &cfg).unwrap();
            let att = sequential_attention(&obj, &p, 2, DEFAULT_DELTA, &cfg).unwrap();
            assert_eq!(lasso.selected, att.selected, "seed {seed}");
        }
    }

    #[test]
    fn zero_rounds_select_nothing() {
        let (_, _, obj) = regression(13, 10, 4, 0.1);
        let p = Arc::new(GroupPartition::singletons(4));
        let out = sequential_attention(&obj, &p, 0, DEFAULT_DELTA, &SelectionConfig::default()).unwrap();
        assert!(out.selected.is_empty());
    }

    #[test]
    fn single_group_is_selected() {
        let (_, _, obj) = regression(14, 10, 3, 0.1);
        let p = Arc::new(GroupPartition::contiguous(&[3]).unwrap());
        let out = sequential_attention(&obj, &p, 1, DEFAULT_DELTA, &SelectionConfig::default()).unwrap();
        assert_eq!(out.selected, vec![0]);
    }

    #[test]
    fn stops_at_global_optimum() {
        let x = DMatrix::identity(3, 3);
        let y = DVector::from_vec(vec![0.0, 2.0, 0.0]);
        let obj = least_squares(&x, &y, 0.0).unwrap();
        let p = Arc::new(GroupPartition::singletons(3));
        let out = sequential_lasso(&obj, &p, 3, DEFAULT_DELTA, &SelectionConfig::default()).unwrap();
        assert_eq!(out.selected, vec![1]);
        assert!(out.trace.stop_reason.is_some());
    }

    #[test]
    fn solver_failure_keeps_completed_rounds() {
        let (_, _, obj) = regression(15, 12, 5, 0.1);
        let p = Arc::new(GroupPartition::singletons(5));
        let mut cfg = SelectionConfig::default();
        cfg.solver.max_iters = 1;
        let failure = sequential_lasso(&obj, &p, 3, DEFAULT_DELTA, &cfg).unwrap_err();
        assert!(matches!(failure.error, Error::NotConverged { .. }));
    }

    #[test]
    fn rejects_bad_delta() {
        let (_, _, obj) = regression(16, 8, 3, 0.1);
        let p = Arc::new(GroupPartition::singletons(3));
        assert!(sequential_lasso(&obj, &p, 1, 1.5, &SelectionConfig::default()).is_err());
    }
}
