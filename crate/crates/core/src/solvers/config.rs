use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stationarity tolerance: group-LASSO solves stop at a KKT residual of
    /// `grad_tol·(1 + λ)`, smooth solves at a gradient norm of
    /// `grad_tol·(1 + ‖∇l(0)‖)`.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Step shrink factor for backtracking.
    pub backtrack: f64,
    /// Initial step; defaults to `1/L` when the objective supplies `L`.
    pub initial_step: Option<f64>,
    /// Nesterov extrapolation in the proximal solver. Off by default since it
    /// gives up monotone descent.
    pub accelerated: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-10,
            max_iters: 100_000,
            backtrack: 0.5,
            initial_step: None,
            accelerated: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("grad_tol must be > 0, got {}", self.grad_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if let Some(s) = self.initial_step {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument(format!("initial step must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}
