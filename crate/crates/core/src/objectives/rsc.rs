//! Restricted strong convexity / smoothness constants over group-sparse
//! directions.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Objective, QuadraticObjective};
use crate::error::{Error, Result};
use crate::partition::GroupPartition;

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;
const SAMPLED_SUBSETS: usize = 2_000;

/// Bounds `μ_s ≤ (Bregman divergence)/(½‖Δ‖²) ≤ L_s` over directions `Δ`
/// supported on at most `s` groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RscConstants {
    pub s: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub smoothness: f64,
    /// Exact by exhaustive enumeration, as opposed to a sampled estimate.
    pub certified: bool,
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn extreme_eigenvalues(a: &DMatrix<f64>, coords: &[usize]) -> (f64, f64) {
    let k = coords.len();
    let sub = DMatrix::from_fn(k, k, |r, c| a[(coords[r], coords[c])]);
    let eig = sub.symmetric_eigenvalues();
    (eig.min(), eig.max())
}

/// Exact constants for a quadratic: the extreme eigenvalues of `A` over
/// principal submatrices indexed by unions of `s` groups.
///
/// By Cauchy interlacing a union of fewer groups never attains a more extreme
/// eigenvalue than some union of exactly `s` groups containing it, so only
/// unions of exactly `s` groups are enumerated. When `C(t, s)` exceeds `cap`
/// the bounds come from random subsets and are marked uncertified.
pub fn rsc_constants_quadratic(
    obj: &QuadraticObjective,
    p: &GroupPartition,
    s: usize,
    cap: u128,
) -> Result<RscConstants> {
    p.check_dim(obj.dim())?;
    let t = p.num_groups();
    if s == 0 || s > t {
        return Err(Error::InvalidArgument(format!("sparsity level {s} outside [1, {t}]")));
    }
    let count = binomial(t, s);
    let a = obj.a();
    let (mu, smoothness, certified) = if count <= cap {
        let subsets: Vec<Vec<usize>> = (0..t).combinations(s).collect();
        let (mu, big_l) = subsets
            .par_iter()
            .map(|groups| extreme_eigenvalues(a, &p.coordinates_of(groups)))
            .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |x, y| (x.0.min(y.0), x.1.max(y.1)));
        (mu, big_l, true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(s as u64);
        let mut mu = f64::INFINITY;
        let mut big_l = f64::NEG_INFINITY;
        for _ in 0..SAMPLED_SUBSETS {
            let groups = sample(&mut rng, t, s).into_vec();
            let (lo, hi) = extreme_eigenvalues(a, &p.coordinates_of(&groups));
            mu = mu.min(lo);
            big_l = big_l.max(hi);
        }
        (mu, big_l, false)
    };
    if !(mu > 0.0) {
        return Err(Error::NotStrictlyConvex(format!(
            "restricted smallest eigenvalue {mu:.3e} at group sparsity {s}"
        )));
    }
    Ok(RscConstants { s, mu, smoothness, certified })
}

fn random_direction(rng: &mut ChaCha8Rng, p: &GroupPartition, s: usize) -> DVector<f64> {
    let mut delta = DVector::zeros(p.n());
    let s = s.min(p.num_groups());
    if s == 0 {
        return delta;
    }
    for g in sample(rng, p.num_groups(), s).into_iter() {
        for &j in p.group(g) {
            delta[j] = StandardNormal.sample(rng);
        }
    }
    delta
}

fn bregman<O: Objective + ?Sized>(obj: &O, beta: &DVector<f64>, delta: &DVector<f64>) -> (f64, f64) {
    let (v0, g0) = obj.value_and_gradient(beta);
    let v1 = obj.value(&(beta + delta));
    (v1 - v0 - g0.dot(delta), v0)
}

/// Sampled constants for objectives without a closed-form Hessian: the
/// extreme values of `2·D(β, Δ)/‖Δ‖²` over random `β` and random `s`-group
/// directions. Never certified.
pub fn estimate_rsc_constants<O: Objective + ?Sized>(
    obj: &O,
    p: &GroupPartition,
    s: usize,
    samples: usize,
    seed: u64,
) -> Result<RscConstants> {
    p.check_dim(obj.dim())?;
    if s == 0 || s > p.num_groups() {
        return Err(Error::InvalidArgument(format!("sparsity level {s} outside [1, {}]", p.num_groups())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = f64::INFINITY;
    let mut big_l = f64::NEG_INFINITY;
    for _ in 0..samples.max(1) {
        let beta = DVector::from_fn(p.n(), |_, _| StandardNormal.sample(&mut rng));
        let delta = random_direction(&mut rng, p, s) * 1e-2;
        let sq = delta.norm_squared();
        if sq == 0.0 {
            continue;
        }
        let (d, _) = bregman(obj, &beta, &delta);
        let ratio = 2.0 * d / sq;
        mu = mu.min(ratio);
        big_l = big_l.max(ratio);
    }
    Ok(RscConstants { s, mu, smoothness: big_l, certified: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscViolation {
    pub trial: usize,
    /// `l(β+Δ) − l(β) − ⟨∇l(β), Δ⟩`
    pub bregman: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscCheckReport {
    pub trials: usize,
    pub violations: usize,
    pub first_violation: Option<RscViolation>,
}

impl RscCheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

const RSC_SLACK: f64 = 1e-9;

/// Samples random `β` and `Δ` with `‖Δ‖_group ≤ s` and checks
/// `μ/2·‖Δ‖² ≤ D(β, Δ) ≤ L/2·‖Δ‖²` up to `1e-9·(1 + |l(β)|)`.
#[allow(clippy::too_many_arguments)]
pub fn check_rsc_inequalities<O: Objective + ?Sized>(
    obj: &O,
    p: &GroupPartition,
    s: usize,
    mu: f64,
    smoothness: f64,
    trials: usize,
    seed: u64,
) -> RscCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut first = None;
    for trial in 0..trials.max(1) {
        let beta = DVector::from_fn(p.n(), |_, _| StandardNormal.sample(&mut rng));
        let delta = random_direction(&mut rng, p, s);
        let (d, v0) = bregman(obj, &beta, &delta);
        let sq = delta.norm_squared();
        let lower = 0.5 * mu * sq;
        let upper = 0.5 * smoothness * sq;
        let slack = RSC_SLACK * (1.0 + v0.abs());
        if d < lower - slack || d > upper + slack {
            violations += 1;
            first.get_or_insert(RscViolation { trial, bregman: d, lower, upper });
        }
    }
    RscCheckReport { trials: trials.max(1), violations, first_violation: first }
}
