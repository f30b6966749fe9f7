//! Group selection algorithms. Each run emits a [`SelectionTrace`].

mod config;
mod omp;
mod ompr;
mod sequential;
mod threshold;
mod trace;

pub use config::SelectionConfig;
pub use omp::group_omp;
pub use ompr::{group_ompr, OmprParams};
pub use sequential::{
    sequential_attention, sequential_attention_round, sequential_lasso, sequential_lasso_round,
    sequential_lasso_step, AttentionRound, LassoRound, DEFAULT_DELTA,
};
pub use threshold::{threshold_tau, ThresholdReport};
pub use trace::{RoundRecord, SelectionFailure, SelectionOutcome, SelectionTrace};

use std::sync::Arc;

use crate::error::Result;
use crate::objectives::Objective;
use crate::partition::{Coefficients, GroupPartition};
use crate::solvers::{restricted_minimize, SolverConfig};

/// Index of the largest value, lowest index on exact ties.
pub(crate) fn argmax_lowest(candidates: &[usize], score: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in candidates {
        let v = score(i);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the smallest value, lowest index on exact ties.
pub(crate) fn argmin_lowest(candidates: &[usize], score: impl Fn(usize) -> f64) -> Option<usize> {
    argmax_lowest(candidates, |i| -score(i))
}

/// Restricted minimizer over `selected` and its objective value.
pub fn restricted_value<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    selected: &[usize],
    cfg: &SolverConfig,
) -> Result<(Coefficients, f64)> {
    let beta = restricted_minimize(obj, p, selected, cfg)?;
    let v = obj.value(beta.values());
    Ok((beta, v))
}

/// `1 + ‖∇l(0)‖`, the scale for stationarity tests.
pub(crate) fn gradient_scale<O: Objective + ?Sized>(obj: &O) -> f64 {
    1.0 + obj.gradient(&nalgebra::DVector::zeros(obj.dim())).norm()
}

/// The four selection algorithms, by their command-line names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Omp,
    Ompr,
    SeqLasso,
    SeqAttention,
}

impl std::str::FromStr for Algorithm {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omp" => Ok(Algorithm::Omp),
            "ompr" => Ok(Algorithm::Ompr),
            "seq-lasso" => Ok(Algorithm::SeqLasso),
            "seq-attention" => Ok(Algorithm::SeqAttention),
            other => Err(crate::error::Error::InvalidArgument(format!(
                "unknown algorithm {other:?} (expected omp, ompr, seq-lasso or seq-attention)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SelectParams {
    pub algorithm: Algorithm,
    pub k: usize,
    pub k_prime: usize,
    /// OMPR swap rounds.
    pub rounds: usize,
    /// Sequential LASSO / attention offset below `τ`.
    pub delta: f64,
}

/// Runs `params.algorithm`.
pub fn select<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    params: &SelectParams,
    cfg: &SelectionConfig,
) -> std::result::Result<SelectionOutcome, SelectionFailure> {
    match params.algorithm {
        Algorithm::Omp => group_omp(obj, p, params.k, params.k_prime, cfg),
        Algorithm::Ompr => group_ompr(
            obj,
            p,
            &OmprParams { k: params.k, k_prime: params.k_prime, rounds: params.rounds, initial: None },
            cfg,
        ),
        Algorithm::SeqLasso => sequential_lasso(obj, p, params.k_prime, params.delta, cfg),
        Algorithm::SeqAttention => sequential_attention(obj, p, params.k_prime, params.delta, cfg),
    }
}
