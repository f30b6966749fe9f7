use serde::{Deserialize, Serialize};

use crate::partition::DETECTION_FACTOR;
use crate::solvers::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub solver: SolverConfig,
    /// Relative tolerance for membership in the argmax set `M^τ`.
    pub tie_tol: f64,
    /// Detection threshold is `detection_factor · (1 + ‖β‖₂)`.
    pub detection_factor: f64,
    /// Random restarts for the attention solver.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            solver: SolverConfig::default(),
            tie_tol: 1e-9,
            detection_factor: DETECTION_FACTOR,
            restarts: 2,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn detection_threshold(&self, beta: &nalgebra::DVector<f64>) -> f64 {
        self.detection_factor * (1.0 + beta.norm())
    }
}
