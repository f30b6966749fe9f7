use std::sync::Arc;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::partition::GroupPartition;
use crate::selection::restricted_value;
use crate::solvers::SolverConfig;

pub const DEFAULT_ORACLE_CAP: u128 = 100_000;

/// Best group-`k`-sparse solution found by exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_support: Vec<usize>,
    pub opt_value: f64,
    pub enumerated_count: usize,
}

/// Restricted-minimizes every support of at most `k` groups and returns the
/// best. Ties keep the support enumerated first (smaller, then
/// lexicographically smaller).
pub fn brute_force_best_subset<O: Objective + ?Sized>(
    obj: &O,
    p: &Arc<GroupPartition>,
    k: usize,
    cfg: &SolverConfig,
    cap: u128,
) -> Result<OracleResult> {
    let t = p.num_groups();
    let k = k.min(t);
    let count: u128 =
        (0..=k).map(|j| crate::objectives::binomial(t, j)).fold(0u128, |a, b| a.saturating_add(b));
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let supports: Vec<Vec<usize>> = (0..=k).flat_map(|j| (0..t).combinations(j)).collect();
    let values: Vec<f64> = supports
        .par_iter()
        .map(|s| restricted_value(obj, p, s, cfg).map(|(_, v)| v))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    Ok(OracleResult {
        best_support: supports[best].clone(),
        opt_value: values[best],
        enumerated_count: supports.len(),
    })
}
