//! Attention-factorized form of the group LASSO:
//!
//! `min_{w, β} l(β_w) + (λ/2) Σ_{i ∈ penalized} (w_i² + ‖β|T_i‖²)`, with
//! `β_w|T_i = w_i · β|T_i`.
//!
//! Selected (unpenalized) groups keep `w_i = 1` and are not regularized.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::descent::gradient_descent;
use super::lasso::{group_lasso_minimize, LassoSolution};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::partition::{Coefficients, GroupPartition};
use crate::rng::{gaussian, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// Initialized from the group-LASSO solution via `w_i = √‖β|T_i‖`.
    Mapped,
    Random(usize),
}

#[derive(Debug, Clone)]
pub struct AttentionSolution {
    /// Length `t`; fixed at 1 on unpenalized groups.
    pub weights: DVector<f64>,
    pub beta: Coefficients,
    /// The effective point `β_w`.
    pub effective: Coefficients,
    pub value: f64,
    pub best_start: StartKind,
    /// Attention objective at the mapped initialization.
    pub mapped_value: f64,
    pub lasso: LassoSolution,
    pub converged_starts: usize,
}

fn effective_point(p: &GroupPartition, w: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    let mut out = beta.clone();
    for i in 0..p.num_groups() {
        for &j in p.group(i) {
            out[j] *= w[i];
        }
    }
    out
}

/// Value of the factorized objective at `(w, β)`.
pub fn attention_objective<O: Objective + ?Sized>(
    obj: &O,
    p: &GroupPartition,
    penalized: &[usize],
    lambda: f64,
    w: &DVector<f64>,
    beta: &DVector<f64>,
) -> f64 {
    let reg: f64 = penalized.iter().map(|&i| w[i] * w[i] + p.group_norm(beta, i).powi(2)).sum();
    obj.value(&effective_point(p, w, beta)) + 0.5 * lambda * reg
}

/// Maps a group-LASSO point to the attention point with equal objective:
/// `w_i = √‖β|T_i‖`, `β|T_i ← β|T_i / w_i` on nonzero penalized groups and
/// `w_i = 0`, `β|T_i = 0` on zero ones.
pub fn map_lasso_to_attention(
    p: &GroupPartition,
    penalized: &[usize],
    lasso_beta: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let mut w = DVector::from_element(p.num_groups(), 1.0);
    let mut beta = lasso_beta.clone();
    for &i in penalized {
        let norm = p.group_norm(lasso_beta, i);
        if norm > 0.0 {
            let wi = norm.sqrt();
            w[i] = wi;
            for &j in p.group(i) {
                beta[j] /= wi;
            }
        } else {
            w[i] = 0.0;
            for &j in p.group(i) {
                beta[j] = 0.0;
            }
        }
    }
    (w, beta)
}

struct Layout<'a> {
    p: &'a GroupPartition,
    penalized: &'a [usize],
}

impl Layout<'_> {
    fn pack(&self, w: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
        let n = self.p.n();
        let mut x = DVector::zeros(n + self.penalized.len());
        x.rows_mut(0, n).copy_from(beta);
        for (k, &i) in self.penalized.iter().enumerate() {
            x[n + k] = w[i];
        }
        x
    }

    fn unpack(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.p.n();
        let beta = x.rows(0, n).into_owned();
        let mut w = DVector::from_element(self.p.num_groups(), 1.0);
        for (k, &i) in self.penalized.iter().enumerate() {
            w[i] = x[n + k];
        }
        (w, beta)
    }
}

fn eval_packed<O: Objective + ?Sized>(
    obj: &O,
    layout: &Layout<'_>,
    lambda: f64,
    x: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let p = layout.p;
    let n = p.n();
    let (w, beta) = layout.unpack(x);
    let (f, g) = obj.value_and_gradient(&effective_point(p, &w, &beta));
    let mut grad = DVector::zeros(x.len());
    for i in 0..p.num_groups() {
        for &j in p.group(i) {
            grad[j] = w[i] * g[j];
        }
    }
    let mut reg = 0.0;
    for (k, &i) in layout.penalized.iter().enumerate() {
        let mut inner = 0.0;
        let mut sq = 0.0;
        for &j in p.group(i) {
            inner += g[j] * beta[j];
            sq += beta[j] * beta[j];
            grad[j] += lambda * beta[j];
        }
        grad[n + k] = inner + lambda * w[i];
        reg += w[i] * w[i] + sq;
    }
    (f + 0.5 * lambda * reg, grad)
}

/// Minimizes the factorized objective by gradient descent from the mapped
/// group-LASSO point and from `restarts` random points, returning the best
/// converged run.
pub fn attention_minimize<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    penalized: &[usize],
    lambda: f64,
    cfg: &SolverConfig,
    restarts: usize,
    seed: u64,
) -> Result<AttentionSolution> {
    cfg.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("attention requires lambda > 0, got {lambda}")));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let mut penalized = penalized.to_vec();
    penalized.sort_unstable();
    let lasso = group_lasso_minimize(obj, p, &penalized, lambda, cfg)?;

    let n = p.n();
    let layout = Layout { p, penalized: &penalized };
    let g0 = obj.gradient(&DVector::zeros(n));
    let tol = cfg.grad_tol * (1.0 + lambda + g0.norm());
    let step0 = cfg.initial_step.or_else(|| obj.lipschitz_hint().map(|l| 1.0 / (l + lambda))).unwrap_or(1.0);

    let (w_map, beta_map) = map_lasso_to_attention(p, &penalized, lasso.beta.values());
    let mapped_value = attention_objective(obj, p, &penalized, lambda, &w_map, &beta_map);

    let mut starts = vec![(StartKind::Mapped, layout.pack(&w_map, &beta_map))];
    let mut rng = seeded(seed);
    let spread = (lasso.beta.values().norm() / (n.max(1) as f64).sqrt()).max(0.1);
    for r in 0..restarts {
        let beta = DVector::from_fn(n, |_, _| spread * gaussian(&mut rng));
        let w = DVector::from_fn(p.num_groups(), |_, _| 1.0 + 0.1 * gaussian(&mut rng));
        starts.push((StartKind::Random(r), layout.pack(&w, &beta)));
    }

    let mut best: Option<(StartKind, DVector<f64>, f64)> = None;
    let mut converged_starts = 0;
    let mut last_failure = None;
    for (kind, x0) in starts {
        let run = gradient_descent(|x| eval_packed(obj, &layout, lambda, x), x0, tol, cfg, step0);
        if !run.converged {
            last_failure = Some(run);
            continue;
        }
        converged_starts += 1;
        if best.as_ref().is_none_or(|(_, _, v)| run.value < *v) {
            best = Some((kind, run.x, run.value));
        }
    }
    let Some((best_start, x, value)) = best else {
        let run = last_failure.expect("at least one start");
        return Err(Error::NotConverged {
            iterations: run.iterations,
            residual: run.grad_norm,
            best: run.x.iter().copied().collect(),
        });
    };
    let (w, beta) = layout.unpack(&x);
    let effective = effective_point(p, &w, &beta);
    Ok(AttentionSolution {
        weights: w,
        beta: Coefficients::new(beta, p.clone())?,
        effective: Coefficients::new(effective, p.clone())?,
        value,
        best_start,
        mapped_value,
        lasso,
        converged_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{least_squares, QuadraticObjective};
    use nalgebra::DMatrix;

    fn small_instance(seed: u64) -> (QuadraticObjective, Arc<GroupPartition>) {
        let mut rng = seeded(seed);
        let p = Arc::new(GroupPartition::contiguous(&[2, 1, 2]).unwrap());
        let x = DMatrix::from_fn(8, 5, |_, _| gaussian(&mut rng));
        let y = DVector::from_fn(8, |_, _| gaussian(&mut rng));
        (least_squares(&x, &y, 0.1).unwrap(), p)
    }

    #[test]
    fn mapped_point_reproduces_lasso_value() {
        let (obj, p) = small_instance(1);
        let cfg = SolverConfig::default();
        let lasso = group_lasso_minimize(&obj, &p, &[0, 1, 2], 0.6, &cfg).unwrap();
        let (w, beta) = map_lasso_to_attention(&p, &[0, 1, 2], lasso.beta.values());
        let v = attention_objective(&obj, &p, &[0, 1, 2], 0.6, &w, &beta);
        assert!((v - lasso.objective).abs() <= 1e-10 * (1.0 + lasso.objective.abs()));
    }

    #[test]
    fn zero_solution_maps_to_zero() {
        let (obj, p) = small_instance(2);
        let cfg = SolverConfig::default();
        let g = obj.gradient(&DVector::zeros(5));
        let big = 2.0 * g.norm();
        let sol = attention_minimize(&obj, &p, &[0, 1, 2], big, &cfg, 1, 0).unwrap();
        assert!(sol.effective.values().norm() < 1e-8);
        assert!((sol.value - obj.value(&DVector::zeros(5))).abs() < 1e-9);
    }

    #[test]
    fn best_of_restarts_matches_lasso() {
        for seed in 0..4 {
            let (obj, p) = small_instance(10 + seed);
            let cfg = SolverConfig::default();
            let sol = attention_minimize(&obj, &p, &[1, 2], 0.4, &cfg, 3, seed).unwrap();
            let lasso = sol.lasso.objective;
            assert!(sol.value <= lasso + 1e-6 * (1.0 + lasso.abs()));
            assert!(sol.value >= lasso - 1e-6 * (1.0 + lasso.abs()));
            assert_eq!(sol.weights[0], 1.0);
        }
    }

    #[test]
    fn requires_positive_lambda() {
        let (obj, p) = small_instance(3);
        assert!(attention_minimize(&obj, &p, &[0], 0.0, &SolverConfig::default(), 1, 0).is_err());
        assert!(attention_minimize(&obj, &p, &[0], 1.0, &SolverConfig::default(), 0, 0).is_err());
    }
}
