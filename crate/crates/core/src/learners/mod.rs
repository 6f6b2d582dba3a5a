//! Regression learners and the cross-validated ensemble used by Stage 1.

mod design;
mod folds;
mod glm;
mod super_learner;

pub use design::{CovariateSet, DesignSpec, Term};
pub use folds::{make_folds, FoldAssignment};
pub use glm::{fit_glm, predict, score_max_norm, Family, GlmFit};
pub use super_learner::{
    fit_super_learner, solve_simplex_weights, CandidateFit, Learner, SuperLearnerFit,
};
