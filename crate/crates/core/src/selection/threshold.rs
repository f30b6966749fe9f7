use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SelectionConfig;
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::partition::{group_norms, Coefficients, GroupPartition};
use crate::solvers::restricted_minimize;

/// The regularization level at which the group-LASSO solution first leaves
/// the selected set, and the groups that can enter there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// `max_{i ∉ S} ‖∇l(β∞)|T_i‖₂`.
    pub tau: f64,
    /// `M^τ`: unselected groups within `tie_tol` (relative) of `tau`.
    pub argmax_set: Vec<usize>,
    /// `‖∇l(β∞)|T_i‖₂` for all groups.
    pub group_grad_norms: Vec<f64>,
    /// `l(β∞)`.
    pub objective: f64,
    #[serde(skip)]
    pub beta_inf: Option<Coefficients>,
}

impl ThresholdReport {
    pub fn beta_inf(&self) -> &Coefficients {
        self.beta_inf.as_ref().expect("computed report carries β∞")
    }
}

/// Computes `β∞ = argmin{l(β) : β|T_i = 0, i ∉ S}` and the threshold
/// `τ = max_{i ∉ S} ‖∇l(β∞)|T_i‖₂`, which equals the dual norm of
/// `u∞ = −∇l(β∞)` on the unselected groups.
pub fn threshold_tau<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    selected: &[usize],
    cfg: &SelectionConfig,
) -> Result<ThresholdReport> {
    p.check_groups(selected)?;
    let unselected = p.complement(selected);
    if unselected.is_empty() {
        return Err(Error::InvalidArgument("threshold requires at least one unselected group".into()));
    }
    let beta = restricted_minimize(obj, p, selected, &cfg.solver)?;
    let (objective, grad) = obj.value_and_gradient(beta.values());
    let norms = group_norms(&grad, p)?;
    let tau = unselected.iter().map(|&i| norms[i]).fold(0.0, f64::max);
    let cutoff = (1.0 - cfg.tie_tol) * tau;
    let argmax_set = unselected.iter().copied().filter(|&i| norms[i] >= cutoff).collect();
    Ok(ThresholdReport { tau, argmax_set, group_grad_norms: norms, objective, beta_inf: Some(beta) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::least_squares;
    use crate::rng::{gaussian, seeded};
    use crate::solvers::group_lasso_minimize;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn empty_selection_matches_closed_form() {
        let mut rng = seeded(2);
        let x = DMatrix::from_fn(9, 6, |_, _| gaussian(&mut rng));
        let y = DVector::from_fn(9, |_, _| gaussian(&mut rng));
        let obj = least_squares(&x, &y, 0.0).unwrap();
        let p = Arc::new(GroupPartition::contiguous(&[2, 3, 1]).unwrap());
        let report = threshold_tau(&obj, &p, &[], &SelectionConfig::default()).unwrap();
        // ∇l(0) = −2Xᵀy
        let g0 = -2.0 * x.transpose() * &y;
        let expected = (0..3).map(|i| p.group_norm(&g0, i)).fold(0.0, f64::max);
        assert!((report.tau - expected).abs() < 1e-12 * (1.0 + expected));
        assert_eq!(report.argmax_set.len(), 1);
    }

    #[test]
    fn global_optimum_in_reach_gives_zero() {
        // y lies in the span of the first group's columns.
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let obj = least_squares(&x, &y, 0.0).unwrap();
        let p = Arc::new(GroupPartition::contiguous(&[2, 1]).unwrap());
        let report = threshold_tau(&obj, &p, &[0], &SelectionConfig::default()).unwrap();
        assert!(report.tau < 1e-12);
    }

    #[test]
    fn two_sided_threshold_behavior() {
        let mut rng = seeded(5);
        let x = DMatrix::from_fn(12, 7, |_, _| gaussian(&mut rng));
        let y = DVector::from_fn(12, |_, _| gaussian(&mut rng));
        let obj = least_squares(&x, &y, 0.2).unwrap();
        let p = Arc::new(GroupPartition::contiguous(&[2, 2, 1, 2]).unwrap());
        let cfg = SelectionConfig::default();
        let selected = [2];
        let report = threshold_tau(&obj, &p, &selected, &cfg).unwrap();
        let pen = p.complement(&selected);

        let above = group_lasso_minimize(&obj, &p, &pen, 1.01 * report.tau, &cfg.solver).unwrap();
        let eta = cfg.detection_threshold(above.beta.values());
        assert!(above.penalized_support(eta).is_empty());

        let below = group_lasso_minimize(&obj, &p, &pen, 0.99 * report.tau, &cfg.solver).unwrap();
        let eta = cfg.detection_threshold(below.beta.values());
        let support = below.penalized_support(eta);
        assert!(!support.is_empty());
        assert!(support.iter().all(|i| report.argmax_set.contains(i)));
    }

    #[test]
    fn all_selected_is_rejected() {
        let obj = least_squares(&DMatrix::identity(2, 2), &DVector::zeros(2), 0.0).unwrap();
        let p = Arc::new(GroupPartition::singletons(2));
        assert!(threshold_tau(&obj, &p, &[0, 1], &SelectionConfig::default()).is_err());
    }
}
