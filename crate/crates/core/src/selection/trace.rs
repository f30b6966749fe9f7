use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Coefficients;

/// One round of a selection algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: usize,
    pub selected: Option<usize>,
    /// Group swapped out (OMPR only).
    pub removed: Option<usize>,
    /// `‖β∞|T_j‖₂` of the removed group before the swap.
    pub removed_norm: Option<f64>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    /// Relative offset `λ = (1 − delta)·τ` actually used.
    pub delta: Option<f64>,
    pub retried: bool,
    pub argmax_set: Vec<usize>,
    /// Whether the selected group lies in `M^τ`.
    pub in_argmax_set: Option<bool>,
    /// Penalized groups above the detection threshold at `λ`.
    pub active_groups: Vec<usize>,
    /// `‖∇l(β∞)|T_i‖₂` for every group.
    pub group_grad_norms: Vec<f64>,
    pub objective_before: f64,
    pub objective_after: f64,
    pub fixed_point: bool,
    /// Selected set after the round.
    pub support: Vec<usize>,
}

impl RoundRecord {
    pub(crate) fn new(round: usize, objective_before: f64, group_grad_norms: Vec<f64>) -> Self {
        RoundRecord {
            round,
            selected: None,
            removed: None,
            removed_norm: None,
            tau: None,
            lambda: None,
            delta: None,
            retried: false,
            argmax_set: Vec::new(),
            in_argmax_set: None,
            active_groups: Vec::new(),
            group_grad_norms,
            objective_before,
            objective_after: objective_before,
            fixed_point: false,
            support: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub algorithm: String,
    pub k: usize,
    pub k_prime: usize,
    pub iterations: Vec<RoundRecord>,
    pub stop_reason: Option<String>,
    /// For OMPR on quadratics: whether `k' ≥ k(L₂²/μ²_{k+k'} + 1)`.
    pub regime_satisfied: Option<bool>,
}

impl SelectionTrace {
    pub(crate) fn new(algorithm: &str, k: usize, k_prime: usize) -> Self {
        SelectionTrace { algorithm: algorithm.to_string(), k, k_prime, ..SelectionTrace::default() }
    }

    /// One JSON object per round, newline separated.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.iterations {
            let mut value = serde_json::to_value(rec)?;
            crate::io::round_json_floats(&mut value);
            serde_json::to_writer(&mut out, &value)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: std::io::BufRead>(input: R) -> Result<Vec<RoundRecord>> {
        let mut out = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line)?);
        }
        Ok(out)
    }

    /// `round,selected,tau,objective` summary.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "selected", "tau", "objective"])?;
        for rec in &self.iterations {
            w.write_record([
                rec.round.to_string(),
                rec.selected.map(|s| s.to_string()).unwrap_or_default(),
                rec.tau.map(crate::io::format_sig).unwrap_or_default(),
                crate::io::format_sig(rec.objective_after),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of a completed selection run.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub selected: Vec<usize>,
    /// Restricted minimizer over `selected`.
    pub beta: Coefficients,
    pub value: f64,
    pub trace: SelectionTrace,
}

/// A run that failed part-way; the trace holds every completed round.
#[derive(Debug)]
pub struct SelectionFailure {
    pub error: Error,
    pub trace: SelectionTrace,
}

impl fmt::Display for SelectionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} failed after {} rounds: {}",
            self.trace.algorithm,
            self.trace.iterations.len(),
            self.error
        )
    }
}

impl std::error::Error for SelectionFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub(crate) trait WithTrace<T> {
    fn with_trace(self, trace: &SelectionTrace) -> std::result::Result<T, SelectionFailure>;
}

impl<T> WithTrace<T> for Result<T> {
    fn with_trace(self, trace: &SelectionTrace) -> std::result::Result<T, SelectionFailure> {
        self.map_err(|error| SelectionFailure { error, trace: trace.clone() })
    }
}
