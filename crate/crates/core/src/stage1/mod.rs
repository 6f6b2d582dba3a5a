//! Stage 1: per-cluster endpoint estimation.
//!
//! Within one cluster the cluster-level covariates and arm are constant, so
//! the endpoint reduces to the outcome probability in the target population,
//! re-expressed as the ratio `P(Y2=1) / E[E(Y1 | Δ=1, W)]`. Four estimators
//! are provided: the naive Screened and Eligible subset means, the
//! MCAR-style unadjusted ratio, and the TMLE with Super-Learner nuisance
//! estimation and a targeted denominator.

mod ratio;
mod targeting;

pub use ratio::{influence_curve_ratio, se_from_ic};
pub use targeting::target_denominator;

use crate::data::ClusterRecord;
use crate::error::{Error, Result};
use crate::learners::{
    fit_super_learner, CovariateSet, DesignSpec, Learner, SuperLearnerFit,
};
use crate::seeds::{derive_seed, tag};

/// Lower/upper bound for outcome-regression predictions.
pub const QBAR_BOUNDS: (f64, f64) = (0.005, 0.995);
/// Lower truncation for the measurement mechanism.
pub const G_TRUNC: f64 = 0.025;
/// Interaction learner needs at least this many measured observations.
const INTERACTION_MIN_N: usize = 20;

/// Which Stage-1 estimator produced an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage1Method {
    Screened,
    Eligible,
    Unadjusted,
    Tmle,
}

impl std::fmt::Display for Stage1Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage1Method::Screened => "screened",
            Stage1Method::Eligible => "eligible",
            Stage1Method::Unadjusted => "unadjusted",
            Stage1Method::Tmle => "tmle",
        };
        write!(f, "{s}")
    }
}

/// Candidate library used for the Stage-1 nuisance Super Learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LibraryKind {
    /// Mean, main-effects GLM, and all-pairwise-interactions GLM.
    #[default]
    Standard,
    /// Mean and main-effects GLM.
    MainEffects,
    /// Mean only.
    MeanOnly,
}

impl LibraryKind {
    /// Assemble the learner list for a given adjustment set and measured
    /// count. The interaction learner is dropped for small measured subsets.
    pub fn build(self, names: &[&str], measured: usize) -> Vec<Learner> {
        match self {
            LibraryKind::MeanOnly => vec![Learner::Mean],
            LibraryKind::MainEffects => {
                vec![Learner::Mean, Learner::Glm(DesignSpec::main_effects(names))]
            }
            LibraryKind::Standard => {
                let mut lib =
                    vec![Learner::Mean, Learner::Glm(DesignSpec::main_effects(names))];
                if measured >= INTERACTION_MIN_N {
                    lib.push(Learner::Glm(DesignSpec::with_pairwise(names)));
                }
                lib
            }
        }
    }
}

/// A Stage-1 endpoint estimate for one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEndpoint {
    pub estimate: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// Per-individual influence-curve values. Length is the full cluster for
    /// ratio methods and the conditioning subset for Screened/Eligible.
    pub ic: Vec<f64>,
    pub se: f64,
    pub method: Stage1Method,
    /// Fluctuation coefficient (TMLE only).
    pub epsilon: Option<f64>,
    /// Set when the targeted denominator was floored at the lower bound.
    pub denominator_floored: bool,
}

/// Fitted nuisances for the TMLE endpoint.
#[derive(Debug, Clone)]
pub struct NuisanceFits {
    /// Outcome regression `E(Y1 | Δ=1, W)`.
    pub qbar: SuperLearnerFit,
    /// Measurement mechanism `P(Δ=1 | W)`.
    pub g: SuperLearnerFit,
    /// Targeted predictions for all individuals, in record order.
    pub qbar_star: Vec<f64>,
}

fn undefined(cluster: &ClusterRecord, reason: &str) -> Error {
    Error::EndpointUndefined { cluster: cluster.id.clone(), reason: reason.into() }
}

/// Mean and IC-based SE of a binary subset, computed from counts so the
/// result is exactly invariant to row order.
fn subset_mean_endpoint(
    cluster: &ClusterRecord,
    method: Stage1Method,
    member: impl Fn(&crate::data::IndividualRecord) -> bool,
    reason: &str,
) -> Result<ClusterEndpoint> {
    let mut n_sub = 0usize;
    let mut n_pos = 0usize;
    for r in &cluster.individuals {
        if member(r) {
            n_sub += 1;
            n_pos += usize::from(r.y2 == 1);
        }
    }
    if n_sub == 0 {
        return Err(undefined(cluster, reason));
    }
    let est = n_pos as f64 / n_sub as f64;
    let ic: Vec<f64> = cluster
        .individuals
        .iter()
        .filter(|r| member(r))
        .map(|r| f64::from(r.y2) - est)
        .collect();
    // sampleVar of {0,1} deviations from counts.
    let se = if n_sub < 2 {
        0.0
    } else {
        let var = (n_pos as f64 * (1.0 - est).powi(2)
            + (n_sub - n_pos) as f64 * est.powi(2))
            / (n_sub as f64 - 1.0);
        (var / n_sub as f64).sqrt()
    };
    Ok(ClusterEndpoint {
        estimate: est,
        numerator: est,
        denominator: 1.0,
        ic,
        se,
        method,
        epsilon: None,
        denominator_floored: false,
    })
}

/// Empirical mean outcome among the measured (`P̂(Y2=1 | Δ=1)`).
pub fn estimate_endpoint_screened(cluster: &ClusterRecord) -> Result<ClusterEndpoint> {
    subset_mean_endpoint(cluster, Stage1Method::Screened, |r| r.delta == 1, "no measured individuals")
}

/// Empirical mean outcome among those known to be in the target population
/// (`P̂(Y2=1 | Y1=1)`).
pub fn estimate_endpoint_eligible(cluster: &ClusterRecord) -> Result<ClusterEndpoint> {
    subset_mean_endpoint(
        cluster,
        Stage1Method::Eligible,
        |r| r.y1 == 1,
        "no individuals with y1 = 1",
    )
}

/// Ratio estimator under the MCAR assumption:
/// `P̂(Y2=1) / P̂(Y1=1 | Δ=1)`.
pub fn estimate_endpoint_unadjusted(cluster: &ClusterRecord) -> Result<ClusterEndpoint> {
    let n = cluster.n();
    let m = cluster.measured_count();
    if m == 0 {
        return Err(undefined(cluster, "no measured individuals"));
    }
    let y1_pos = cluster.individuals.iter().filter(|r| r.y1 == 1).count();
    let y2_pos = cluster.individuals.iter().filter(|r| r.y2 == 1).count();
    let den = y1_pos as f64 / m as f64;
    if den == 0.0 {
        return Err(undefined(cluster, "denominator P(Y1=1 | Δ=1) is zero"));
    }
    let num = y2_pos as f64 / n as f64;
    let ghat = m as f64 / n as f64;

    let ic_num: Vec<f64> =
        cluster.individuals.iter().map(|r| f64::from(r.y2) - num).collect();
    let ic_den: Vec<f64> = cluster
        .individuals
        .iter()
        .map(|r| f64::from(r.delta) / ghat * (f64::from(r.y1) - den))
        .collect();
    let (ic, se) = influence_curve_ratio(num, den, &ic_num, &ic_den)?;
    Ok(ClusterEndpoint {
        estimate: num / den,
        numerator: num,
        denominator: den,
        ic,
        se,
        method: Stage1Method::Unadjusted,
        epsilon: None,
        denominator_floored: false,
    })
}

/// Canonical processing order: rows sorted by content so results do not
/// depend on the input permutation. Ties are identical rows and therefore
/// interchangeable.
fn canonical_order(cluster: &ClusterRecord, adjust_l: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cluster.n()).collect();
    let key = |r: &crate::data::IndividualRecord| {
        (
            r.w1.to_bits(),
            r.w2,
            r.w3,
            r.delta,
            r.y1,
            r.y2,
            if adjust_l { r.l.map(f64::to_bits).unwrap_or(0) } else { 0 },
        )
    };
    idx.sort_by_key(|&i| key(&cluster.individuals[i]));
    idx
}

fn covariates_in_order(
    cluster: &ClusterRecord,
    order: &[usize],
    adjust_l: bool,
) -> Result<CovariateSet> {
    let get = |i: usize| &cluster.individuals[order[i]];
    let n = order.len();
    let w1: Vec<f64> = (0..n).map(|i| get(i).w1).collect();
    let w2: Vec<f64> = (0..n).map(|i| f64::from(get(i).w2)).collect();
    let w3: Vec<f64> = (0..n).map(|i| f64::from(get(i).w3)).collect();
    if adjust_l {
        let mut l = Vec::with_capacity(n);
        for i in 0..n {
            l.push(get(i).l.ok_or_else(|| {
                Error::Precondition(format!(
                    "cluster {}: adjust_l set but l is missing",
                    cluster.id
                ))
            })?);
        }
        CovariateSet::from_columns(&[("w1", &w1), ("w2", &w2), ("w3", &w3), ("l", &l)])
    } else {
        CovariateSet::from_columns(&[("w1", &w1), ("w2", &w2), ("w3", &w3)])
    }
}

/// TMLE endpoint with externally supplied nuisance predictions (record
/// order). Used directly by robustness checks; the full pipeline feeds it
/// Super-Learner fits.
pub fn estimate_endpoint_tmle_with_nuisances(
    cluster: &ClusterRecord,
    qbar_init: &[f64],
    g_hat: &[f64],
) -> Result<ClusterEndpoint> {
    let n = cluster.n();
    if qbar_init.len() != n || g_hat.len() != n {
        return Err(Error::Precondition("nuisance predictions must cover every individual".into()));
    }
    let qb: Vec<f64> =
        qbar_init.iter().map(|&q| q.clamp(QBAR_BOUNDS.0, QBAR_BOUNDS.1)).collect();
    let gh: Vec<f64> = g_hat.iter().map(|&g| g.clamp(G_TRUNC, 1.0)).collect();
    let delta: Vec<u8> = cluster.individuals.iter().map(|r| r.delta).collect();
    let y1: Vec<u8> = cluster.individuals.iter().map(|r| r.y1).collect();

    let (qbar_star, eps) = target_denominator(&qb, &gh, &delta, &y1)?;

    let mut den = qbar_star.iter().sum::<f64>() / n as f64;
    let mut floored = false;
    if den < QBAR_BOUNDS.0 {
        den = QBAR_BOUNDS.0;
        floored = true;
    }
    let y2_pos = cluster.individuals.iter().filter(|r| r.y2 == 1).count();
    let num = y2_pos as f64 / n as f64;

    let ic_num: Vec<f64> =
        cluster.individuals.iter().map(|r| f64::from(r.y2) - num).collect();
    let ic_den: Vec<f64> = (0..n)
        .map(|i| {
            f64::from(delta[i]) / gh[i] * (f64::from(y1[i]) - qbar_star[i]) + qbar_star[i]
                - den
        })
        .collect();
    let (ic, se) = influence_curve_ratio(num, den, &ic_num, &ic_den)?;
    Ok(ClusterEndpoint {
        estimate: num / den,
        numerator: num,
        denominator: den,
        ic,
        se,
        method: Stage1Method::Tmle,
        epsilon: Some(eps),
        denominator_floored: floored,
    })
}

/// Full TMLE endpoint: Super-Learner nuisances, targeting, delta-method
/// inference.
///
/// `seed` scopes all randomness (fold assignment) for this cluster; the
/// caller derives it from the analysis seed and the cluster id.
pub fn estimate_endpoint_tmle(
    cluster: &ClusterRecord,
    library: LibraryKind,
    k: usize,
    seed: u64,
    adjust_l: bool,
) -> Result<(ClusterEndpoint, NuisanceFits)> {
    let n = cluster.n();
    let m = cluster.measured_count();
    if m == 0 {
        return Err(undefined(cluster, "no measured individuals"));
    }
    if m == 1 {
        return Err(undefined(cluster, "only one measured individual"));
    }

    let order = canonical_order(cluster, adjust_l);
    let covs = covariates_in_order(cluster, &order, adjust_l)?;
    let delta_ord: Vec<f64> =
        order.iter().map(|&i| f64::from(cluster.individuals[i].delta)).collect();
    let y1_ord: Vec<f64> =
        order.iter().map(|&i| f64::from(cluster.individuals[i].y1)).collect();

    let names: Vec<&str> = if adjust_l {
        vec!["w1", "w2", "w3", "l"]
    } else {
        vec!["w1", "w2", "w3"]
    };

    // Outcome regression on the measured subset.
    let measured_rows: Vec<usize> = (0..n).filter(|&i| delta_ord[i] == 1.0).collect();
    let covs_measured = covs.subset(&measured_rows);
    let y1_measured: Vec<f64> = measured_rows.iter().map(|&i| y1_ord[i]).collect();
    let qbar_lib = library.build(&names, m);
    let k_q = k.min(m).max(2);
    let qbar = fit_super_learner(
        &qbar_lib,
        &covs_measured,
        &y1_measured,
        k_q,
        derive_seed(seed, &[tag::QBAR]),
    )?;
    let qbar_pred_ord: Vec<f64> = qbar
        .predict(&covs)?
        .into_iter()
        .map(|p| p.clamp(QBAR_BOUNDS.0, QBAR_BOUNDS.1))
        .collect();

    // Measurement mechanism on everyone.
    let g_lib = library.build(&names, m);
    let k_g = k.min(n).max(2);
    let g = fit_super_learner(&g_lib, &covs, &delta_ord, k_g, derive_seed(seed, &[tag::GHAT]))?;
    let g_pred_ord: Vec<f64> =
        g.predict(&covs)?.into_iter().map(|p| p.clamp(G_TRUNC, 1.0)).collect();

    // Scatter predictions back to record order and run the targeted step.
    let mut qbar_pred = vec![0.0; n];
    let mut g_pred = vec![0.0; n];
    for (pos, &orig) in order.iter().enumerate() {
        qbar_pred[orig] = qbar_pred_ord[pos];
        g_pred[orig] = g_pred_ord[pos];
    }
    let endpoint = estimate_endpoint_tmle_with_nuisances(cluster, &qbar_pred, &g_pred)?;
    let qbar_star = {
        // Recover targeted predictions in record order from the endpoint's
        // construction inputs.
        let qb: Vec<f64> = qbar_pred.clone();
        let gh: Vec<f64> = g_pred.clone();
        let delta: Vec<u8> = cluster.individuals.iter().map(|r| r.delta).collect();
        let y1: Vec<u8> = cluster.individuals.iter().map(|r| r.y1).collect();
        target_denominator(&qb, &gh, &delta, &y1)?.0
    };
    Ok((endpoint, NuisanceFits { qbar, g, qbar_star }))
}
