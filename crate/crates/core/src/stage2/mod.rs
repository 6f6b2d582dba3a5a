//! Stage 2: cluster-level effect estimation across clusters.

mod aps;
mod inference;
mod tmle;

pub use aps::{aps_select, default_candidates, ApsSelection, GSpec, QSpec};
pub use inference::{inference_t, t_quantile_975, TInference};
pub use tmle::{
    estimate_effect_tmle, estimate_effect_unadjusted, ClusterLevelRow, EffectEstimate,
    Stage2Method, G_BOUNDS,
};
