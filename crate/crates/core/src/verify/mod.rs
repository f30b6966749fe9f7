//! Brute-force oracles and randomized certification of the selection
//! guarantees.
//!
//! Each `certify_*` function runs seeded trials in parallel (trial `i` uses
//! seed `seed + i`), merges them in trial order and returns a
//! [`ClaimReport`]. Inequalities with exact constants are checked with an
//! absolute slack of [`SLACK_INEQUALITY`]; equalities limited by solver
//! accuracy use [`SLACK_SOLVER`] relative to `max(1, |value|)`.

mod claims;
mod generators;
mod oracle;

pub use claims::{
    certify_attention_equivalence, certify_css, certify_equivalence, certify_omp_guarantees,
    certify_ompr_guarantees, AttentionParams, CssParams, EquivalenceParams, GuaranteeParams,
};
pub use generators::{tied_instance, Family};
pub use oracle::{brute_force_best_subset, OracleResult, DEFAULT_ORACLE_CAP};

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::css::{css_objective, CssInstance, CssLoss};
use crate::error::Result;
use crate::io::{InstanceFile, MatrixJson};
use crate::objectives::Objective;
use crate::partition::GroupPartition;
use crate::selection::SelectionConfig;

pub const SLACK_INEQUALITY: f64 = 1e-9;
pub const SLACK_SOLVER: f64 = 1e-6;

/// A serializable problem instance, enough to replay a failed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Instance {
    Objective(InstanceFile),
    Css { x: MatrixJson, loss: CssLoss, ridge: f64 },
}

impl Instance {
    pub fn build(&self) -> Result<(Box<dyn Objective>, Arc<GroupPartition>)> {
        match self {
            Instance::Objective(f) => f.build(),
            Instance::Css { x, loss, ridge } => {
                let x = x.to_matrix()?;
                let k = x.ncols();
                let (obj, p) = css_objective(&CssInstance::new(x, *loss, *ridge, k)?)?;
                Ok((Box::new(obj), p))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimFailure {
    pub trial: usize,
    pub seed: u64,
    /// Kinds of the failed checks, in order of first failure.
    pub kinds: Vec<String>,
    pub messages: Vec<String>,
    pub instance: Instance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimReport {
    pub claim: String,
    pub instances: usize,
    pub passes: usize,
    /// Individual inequalities and assertions evaluated.
    pub checks: usize,
    /// Smallest `rhs + slack − lhs` over all inequalities; negative means a
    /// violation.
    pub worst_slack: Option<f64>,
    pub parameters: Value,
    /// Fraction of sequential rounds that needed the smaller offset.
    pub retry_rate: Option<f64>,
    /// Per-trial constants and sizes, in trial order.
    pub details: Vec<Value>,
    /// Number of failing trials per kind of check.
    pub failed_by_kind: BTreeMap<String, usize>,
    pub failures: Vec<ClaimFailure>,
}

impl ClaimReport {
    pub fn passed(&self) -> bool {
        self.passes == self.instances
    }

    /// Trials that failed at least one check of `kind`.
    pub fn failures_of(&self, kind: &str) -> usize {
        self.failed_by_kind.get(kind).copied().unwrap_or(0)
    }
}

/// Accumulates the checks of one trial. Failures are filed under the kind
/// set by the last call to [`Trial::kind`], `"run"` initially.
#[derive(Debug, Default)]
pub(crate) struct Trial {
    messages: Vec<String>,
    kind: Option<&'static str>,
    failed_kinds: Vec<&'static str>,
    worst: Option<f64>,
    checks: usize,
    rounds: usize,
    retries: usize,
    details: Value,
}

impl Trial {
    pub(crate) fn kind(&mut self, kind: &'static str) {
        self.kind = Some(kind);
    }

    fn record(&mut self, message: String) {
        let kind = self.kind.unwrap_or("run");
        if !self.failed_kinds.contains(&kind) {
            self.failed_kinds.push(kind);
        }
        self.messages.push(message);
    }

    /// Checks `lhs ≤ rhs + slack`.
    fn leq(&mut self, label: impl FnOnce() -> String, lhs: f64, rhs: f64, slack: f64) {
        self.checks += 1;
        let margin = rhs + slack - lhs;
        self.worst = Some(self.worst.map_or(margin, |w| w.min(margin)));
        if !(margin >= 0.0) {
            self.record(format!("{}: {lhs:.12e} > {rhs:.12e} + {slack:.1e}", label()));
        }
    }

    fn holds(&mut self, ok: bool, label: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.record(label());
        }
    }

    fn fail(&mut self, message: String) {
        self.record(message);
    }
}

fn run_trials<F>(claim: &str, trials: usize, seed: u64, parameters: Value, run: F) -> ClaimReport
where
    F: Fn(usize, u64) -> (Instance, Trial) + Sync,
{
    let outcomes: Vec<(u64, Instance, Trial)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let (inst, trial) = run(i, s);
            (s, inst, trial)
        })
        .collect();
    let mut report = ClaimReport {
        claim: claim.to_string(),
        instances: trials,
        passes: 0,
        checks: 0,
        worst_slack: None,
        parameters,
        retry_rate: None,
        details: Vec::with_capacity(trials),
        failed_by_kind: BTreeMap::new(),
        failures: Vec::new(),
    };
    let (mut rounds, mut retries) = (0, 0);
    for (i, (s, inst, trial)) in outcomes.into_iter().enumerate() {
        report.checks += trial.checks;
        rounds += trial.rounds;
        retries += trial.retries;
        if let Some(w) = trial.worst {
            report.worst_slack = Some(report.worst_slack.map_or(w, |r| r.min(w)));
        }
        report.details.push(trial.details);
        for kind in &trial.failed_kinds {
            *report.failed_by_kind.entry(kind.to_string()).or_default() += 1;
        }
        if trial.messages.is_empty() {
            report.passes += 1;
        } else {
            report.failures.push(ClaimFailure {
                trial: i,
                seed: s,
                kinds: trial.failed_kinds.iter().map(|k| k.to_string()).collect(),
                messages: trial.messages,
                instance: inst,
            });
        }
    }
    if rounds > 0 {
        report.retry_rate = Some(retries as f64 / rounds as f64);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Claim {
    Equivalence,
    Omp,
    Ompr,
    Attention,
    Css,
}

impl std::str::FromStr for Claim {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equivalence" => Ok(Claim::Equivalence),
            "omp" => Ok(Claim::Omp),
            "ompr" => Ok(Claim::Ompr),
            "attention" => Ok(Claim::Attention),
            "css" => Ok(Claim::Css),
            other => Err(crate::error::Error::InvalidArgument(format!(
                "unknown claim {other:?} (expected equivalence, omp, ompr, attention or css)"
            ))),
        }
    }
}

/// Runs `claim` on its default instance suite:
///
/// * `equivalence`: ridge quadratics on even trials, ridge logistic on odd, 3 rounds;
/// * `omp`: least-squares quadratics with `t = 6`, `k = 2`;
/// * `ompr`: near-isotropic quadratics with `t = 10`, `k = 2`;
/// * `attention`: ridge quadratics;
/// * `css`: Gaussian `8 × 5` matrices, `k = 2`.
pub fn certify(claim: Claim, trials: usize, seed: u64, cfg: &SelectionConfig) -> ClaimReport {
    match claim {
        Claim::Equivalence => certify_equivalence(
            |s| {
                if s % 2 == 0 {
                    Family::RidgeQuadratic.generate(s)
                } else {
                    Family::Logistic.generate(s)
                }
            },
            &EquivalenceParams { trials, seed, ..EquivalenceParams::default() },
            cfg,
        ),
        Claim::Omp => certify_omp_guarantees(
            |s| Family::Quadratic { t: 6 }.generate(s),
            &GuaranteeParams { trials, seed, ..GuaranteeParams::default() },
            cfg,
        ),
        Claim::Ompr => certify_ompr_guarantees(
            |s| Family::NearIsotropic { t: 10, spread: 0.3 }.generate(s),
            &GuaranteeParams { trials, seed, ..GuaranteeParams::default() },
            cfg,
        ),
        Claim::Attention => certify_attention_equivalence(
            |s| Family::RidgeQuadratic.generate(s),
            &AttentionParams { trials, seed },
            cfg,
        ),
        Claim::Css => certify_css(&CssParams { trials, seed, ..CssParams::default() }, cfg),
    }
}
