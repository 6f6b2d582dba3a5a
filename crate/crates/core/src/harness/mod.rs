//! Replicate runner: trial analysis, Monte Carlo loops, metric aggregation.

mod checksum;
mod config;
mod metrics;

pub use checksum::{hash_str, trial_checksum};
pub use config::{EstimatorConfig, RunConfig};
pub use metrics::{
    aggregate_metrics, format_table1, write_replicates_csv, write_summary_csv,
    SimulationMetrics,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::TrialData;
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, tag};
use crate::simgen::{generate_trial, SimParams};
use crate::stage1::{
    estimate_endpoint_eligible, estimate_endpoint_screened, estimate_endpoint_tmle,
    estimate_endpoint_unadjusted, ClusterEndpoint, LibraryKind, Stage1Method,
};
use crate::stage2::{
    aps_select, default_candidates, estimate_effect_tmle, estimate_effect_unadjusted,
    ClusterLevelRow, EffectEstimate, Stage2Method,
};

/// A trial analysis result: the effect estimate plus how many clusters were
/// dropped for undefined endpoints.
#[derive(Debug, Clone)]
pub struct AnalyzedTrial {
    pub estimate: EffectEstimate,
    pub dropped_clusters: usize,
}

/// Stage-1 endpoints for every cluster (None where undefined).
fn stage1_endpoints(
    data: &TrialData,
    stage1: Stage1Method,
    library: LibraryKind,
    k1: usize,
    adjust_l: bool,
    stage1_seed: u64,
) -> Result<Vec<Option<ClusterEndpoint>>> {
    data.clusters
        .par_iter()
        .map(|cluster| {
            let res = match stage1 {
                Stage1Method::Screened => estimate_endpoint_screened(cluster),
                Stage1Method::Eligible => estimate_endpoint_eligible(cluster),
                Stage1Method::Unadjusted => estimate_endpoint_unadjusted(cluster),
                Stage1Method::Tmle => {
                    let seed = derive_seed(stage1_seed, &[tag::CLUSTER, hash_str(&cluster.id)]);
                    estimate_endpoint_tmle(cluster, library, k1, seed, adjust_l)
                        .map(|(e, _)| e)
                }
            };
            match res {
                Ok(e) => Ok(Some(e)),
                Err(Error::EndpointUndefined { .. }) => Ok(None),
                Err(other) => Err(other),
            }
        })
        .collect()
}

fn stage2_effect(
    data: &TrialData,
    endpoints: &[Option<ClusterEndpoint>],
    config: &EstimatorConfig,
    analysis_seed: u64,
) -> Result<AnalyzedTrial> {
    let mut rows = Vec::with_capacity(data.j());
    let mut dropped = 0usize;
    for (cluster, ep) in data.clusters.iter().zip(endpoints) {
        match ep {
            Some(e) => rows.push(ClusterLevelRow {
                e1c: cluster.e1c,
                e2c: cluster.e2c,
                w1c: cluster.w1c,
                w2c: cluster.w2c,
                w3c: cluster.w3c,
                a: cluster.a,
                y: e.estimate,
            }),
            None => dropped += 1,
        }
    }
    let n1 = rows.iter().filter(|r| r.a == 1).count();
    let n0 = rows.len() - n1;
    if n0 < 2 || n1 < 2 {
        return Err(Error::Precondition(format!(
            "fewer than 2 usable clusters per arm after dropping {dropped} (arm0 {n0}, arm1 {n1})"
        )));
    }
    let estimate = match config.stage2 {
        Stage2Method::Unadjusted => estimate_effect_unadjusted(&rows)?,
        Stage2Method::TmleAps => {
            let (cand_q, cand_g) = default_candidates();
            let seed =
                derive_seed(analysis_seed, &[tag::STAGE2, config.stage2_stream_id()]);
            let selection = aps_select(&rows, &cand_q, &cand_g, config.k2, seed)?;
            estimate_effect_tmle(&rows, &selection)?
        }
    };
    Ok(AnalyzedTrial { estimate, dropped_clusters: dropped })
}

/// Run the two-stage pipeline on one trial.
///
/// All randomness (Stage-1 fold assignment per cluster, Stage-2 fold
/// assignment) derives from `seed` and the estimator configuration, so a
/// given `(data, config, seed)` triple always produces identical output.
pub fn analyze_trial(
    data: &TrialData,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<AnalyzedTrial> {
    let stage1_seed = derive_seed(seed, &[tag::STAGE1, config.stage1_stream_id()]);
    let endpoints = stage1_endpoints(
        data,
        config.stage1,
        config.library,
        config.k1,
        config.adjust_l,
        stage1_seed,
    )?;
    stage2_effect(data, &endpoints, config, seed)
}

/// Per-estimator outcome of one replicate.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateEstimate {
    pub psi: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
    pub dropped_clusters: usize,
}

/// One replicate: the generated trial's checksum and each estimator's
/// result (or failure message).
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateResult {
    pub rep_id: usize,
    pub trial_checksum: u64,
    /// Aligned with the estimator list; `Err` carries the failure message.
    pub estimates: Vec<std::result::Result<ReplicateEstimate, String>>,
}

/// Run `reps` simulated trials, analyzing each with every estimator.
///
/// Replicate `r` derives its trial from `(seed, REPLICATE, r)` and its
/// analysis streams from the same path, so results are bitwise identical
/// under any worker count. Estimator failures are recorded, not fatal.
pub fn run_replicates(
    params: &SimParams,
    estimators: &[EstimatorConfig],
    reps: usize,
    seed: u64,
) -> Result<Vec<ReplicateResult>> {
    if reps == 0 {
        return Err(Error::Precondition("reps must be at least 1".into()));
    }
    params.validate()?;
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(seed, &[tag::REPLICATE, rep as u64]);
            let trial = generate_trial(params, rep_seed)?;
            let checksum = trial_checksum(&trial);

            // Estimators sharing a Stage-1 configuration reuse endpoints.
            let mut stage1_cache: Vec<(
                (Stage1Method, LibraryKind, usize, bool),
                Result<Vec<Option<ClusterEndpoint>>>,
            )> = Vec::new();
            let mut estimates = Vec::with_capacity(estimators.len());
            for config in estimators {
                let key = config.stage1_key();
                if !stage1_cache.iter().any(|(k, _)| *k == key) {
                    let stage1_seed =
                        derive_seed(rep_seed, &[tag::STAGE1, config.stage1_stream_id()]);
                    let eps = stage1_endpoints(
                        &trial,
                        config.stage1,
                        config.library,
                        config.k1,
                        config.adjust_l,
                        stage1_seed,
                    );
                    stage1_cache.push((key, eps));
                }
                let endpoints =
                    &stage1_cache.iter().find(|(k, _)| *k == key).expect("cached").1;
                let outcome = match endpoints {
                    Err(e) => Err(e.to_string()),
                    Ok(eps) => stage2_effect(&trial, eps, config, rep_seed)
                        .map(|a| ReplicateEstimate {
                            psi: a.estimate.psi,
                            se: a.estimate.se,
                            ci_lo: a.estimate.ci_lo,
                            ci_hi: a.estimate.ci_hi,
                            p_value: a.estimate.p_value,
                            dropped_clusters: a.dropped_clusters,
                        })
                        .map_err(|e| e.to_string()),
                };
                estimates.push(outcome);
            }
            Ok(ReplicateResult { rep_id: rep, trial_checksum: checksum, estimates })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_params() -> SimParams {
        SimParams { j: 12, n_mean: 40.0, n_sd: 4.0, ..SimParams::default() }
    }

    #[test]
    fn replicates_are_deterministic() {
        let params = tiny_params();
        let ests = vec![
            EstimatorConfig::new(Stage1Method::Unadjusted, Stage2Method::Unadjusted),
            EstimatorConfig::new(Stage1Method::Tmle, Stage2Method::TmleAps),
        ];
        let r1 = run_replicates(&params, &ests, 2, 7).unwrap();
        let r2 = run_replicates(&params, &ests, 2, 7).unwrap();
        assert_eq!(r1.len(), 2);
        for (a, b) in r1.iter().zip(&r2) {
            assert_eq!(a.trial_checksum, b.trial_checksum);
            for (x, y) in a.estimates.iter().zip(&b.estimates) {
                let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
                assert_eq!(x.psi.to_bits(), y.psi.to_bits());
                assert_eq!(x.se.to_bits(), y.se.to_bits());
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let params = tiny_params();
        let ests = vec![EstimatorConfig::new(Stage1Method::Tmle, Stage2Method::Unadjusted)];
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = pool1.install(|| run_replicates(&params, &ests, 2, 3).unwrap());
        let r4 = pool4.install(|| run_replicates(&params, &ests, 2, 3).unwrap());
        for (a, b) in r1.iter().zip(&r4) {
            let (x, y) =
                (a.estimates[0].as_ref().unwrap(), b.estimates[0].as_ref().unwrap());
            assert_eq!(x.psi.to_bits(), y.psi.to_bits());
        }
    }

    #[test]
    fn analyze_trial_permutation_invariant_in_cluster_order() {
        let params = tiny_params();
        let trial = generate_trial(&params, 40).unwrap();
        let mut shuffled = trial.clone();
        shuffled.clusters.reverse();
        let config = EstimatorConfig::new(Stage1Method::Tmle, Stage2Method::TmleAps);
        let a = analyze_trial(&trial, &config, 5).unwrap();
        let b = analyze_trial(&shuffled, &config, 5).unwrap();
        assert_eq!(a.estimate.psi.to_bits(), b.estimate.psi.to_bits());
        assert_eq!(a.estimate.se.to_bits(), b.estimate.se.to_bits());
    }

    #[test]
    fn full_measurement_collapses_tmle_to_unadjusted() {
        // Force full measurement by saturating both measurement branches.
        let mut params = tiny_params();
        params.delta.when_w3.intercept = 30.0;
        params.delta.when_not_w3.intercept = 30.0;
        let trial = generate_trial(&params, 11).unwrap();
        assert!(trial
            .clusters
            .iter()
            .all(|c| c.measured_count() == c.n()));
        let una = analyze_trial(
            &trial,
            &EstimatorConfig::new(Stage1Method::Unadjusted, Stage2Method::Unadjusted),
            9,
        )
        .unwrap();
        let tmle = analyze_trial(
            &trial,
            &EstimatorConfig::new(Stage1Method::Tmle, Stage2Method::Unadjusted),
            9,
        )
        .unwrap();
        assert!(
            (una.estimate.psi - tmle.estimate.psi).abs() < 1e-6,
            "{} vs {}",
            una.estimate.psi,
            tmle.estimate.psi
        );
    }
}
