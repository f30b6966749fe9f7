use nalgebra::DVector;

use crate::partition::GroupPartition;

/// Proximal map of `κ‖·‖₂`: `max(0, 1 − κ/‖v‖₂)·v`.
pub fn group_soft_threshold(v: &DVector<f64>, kappa: f64) -> DVector<f64> {
    let norm = v.norm();
    if norm <= kappa {
        DVector::zeros(v.len())
    } else {
        v * (1.0 - kappa / norm)
    }
}

/// Applies the group soft-threshold in place to each penalized group.
pub(crate) fn shrink_groups(x: &mut DVector<f64>, p: &GroupPartition, penalized: &[usize], kappa: f64) {
    for &i in penalized {
        let norm = p.group_norm(x, i);
        let scale = if norm <= kappa { 0.0 } else { 1.0 - kappa / norm };
        for &j in p.group(i) {
            x[j] *= scale;
        }
    }
}
