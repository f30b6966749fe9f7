//! Inner optimizers: support-restricted smooth minimization, the composite
//! group-LASSO problem, and its attention-factorized counterpart.

mod attention;
mod config;
mod descent;
mod lasso;
mod prox;
mod restricted;

pub use attention::{
    attention_minimize, attention_objective, map_lasso_to_attention, AttentionSolution, StartKind,
};
pub use config::SolverConfig;
pub use lasso::{group_lasso_minimize, group_lasso_minimize_from, kkt_residual, LassoSolution};
pub use prox::group_soft_threshold;
pub use restricted::restricted_minimize;
