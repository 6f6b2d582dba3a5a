//! Ground-truth effect computation over a large cluster population.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seeds::{derive_rng, tag};
use crate::simgen::{generate_cluster, SimParams};

/// The true counterfactual strata effect, evaluated by simulation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TruthResult {
    /// `Ψ* = E[Y^{c*}(1) − Y^{c*}(0)]`.
    pub psi_star: f64,
    pub yc1_mean: f64,
    pub yc0_mean: f64,
    pub clusters_used: usize,
    /// Clusters dropped because a counterfactual stratum was empty.
    pub clusters_dropped: usize,
}

/// Average the per-cluster counterfactual endpoints
/// `Y^{c*}(a) = P(Y2(a)=1 | Y1*(a)=1)` over `truth_clusters` fresh clusters.
pub fn compute_truth(params: &SimParams, seed: u64) -> Result<TruthResult> {
    params.validate()?;
    let per_cluster: Vec<Option<(f64, f64)>> = (0..params.truth_clusters)
        .into_par_iter()
        .map(|idx| {
            let mut rng = derive_rng(seed, &[tag::TRUTH, idx as u64]);
            let cluster = generate_cluster(params, format!("t{idx}"), &mut rng);
            let mut n_strata = [0usize; 2];
            let mut n_pos = [0usize; 2];
            for r in &cluster.individuals {
                let lat = r.latent.as_ref().expect("simulated cluster has latents");
                for arm in 0..2 {
                    let in_stratum = lat.y1_star_cf.map_or(lat.y1_star, |cf| cf[arm]) == 1;
                    if in_stratum {
                        n_strata[arm] += 1;
                        n_pos[arm] += usize::from(lat.y2_cf[arm] == 1);
                    }
                }
            }
            if n_strata[0] == 0 || n_strata[1] == 0 {
                None
            } else {
                Some((
                    n_pos[1] as f64 / n_strata[1] as f64,
                    n_pos[0] as f64 / n_strata[0] as f64,
                ))
            }
        })
        .collect();

    let mut used = 0usize;
    let mut sum1 = 0.0;
    let mut sum0 = 0.0;
    for v in per_cluster.iter().flatten() {
        used += 1;
        sum1 += v.0;
        sum0 += v.1;
    }
    if used == 0 {
        return Err(Error::Computation(
            "every cluster had an empty counterfactual stratum".into(),
        ));
    }
    let yc1_mean = sum1 / used as f64;
    let yc0_mean = sum0 / used as f64;
    Ok(TruthResult {
        psi_star: yc1_mean - yc0_mean,
        yc1_mean,
        yc0_mean,
        clusters_used: used,
        clusters_dropped: params.truth_clusters - used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{DeltaBranch, DeltaCoeffs, Y2Coeffs};

    fn small(params: &mut SimParams) {
        params.truth_clusters = 1000;
    }

    #[test]
    fn no_pathway_means_no_effect() {
        // Zero every arm coefficient in both the measurement and outcome
        // models: the effect must vanish up to Monte Carlo error.
        let mut p = SimParams::default();
        small(&mut p);
        p.delta = DeltaCoeffs {
            when_w3: DeltaBranch { a: 0.0, w2_a: 0.0, ..p.delta.when_w3 },
            when_not_w3: DeltaBranch { a: 0.0, w2_a: 0.0, ..p.delta.when_not_w3 },
        };
        p.y2 = Y2Coeffs { a: 0.0, a_w3: 0.0, ..p.y2 };
        let t = compute_truth(&p, 5).unwrap();
        // MC SE of psi_star is roughly 0.13/sqrt(1000) with shared draws.
        assert!(t.psi_star.abs() < 3.0 * 0.005, "psi_star = {}", t.psi_star);
    }

    #[test]
    fn indirect_effect_persists_without_direct_effect() {
        let mut p = SimParams::default();
        small(&mut p);
        p.y2 = Y2Coeffs { a: 0.0, a_w3: 0.0, ..p.y2 };
        let t = compute_truth(&p, 5).unwrap();
        assert!(t.psi_star > 0.005, "mediated pathway should remain: {}", t.psi_star);
    }

    #[test]
    fn psi_star_is_difference_of_means() {
        let mut p = SimParams::default();
        small(&mut p);
        let t = compute_truth(&p, 1).unwrap();
        assert!((t.psi_star - (t.yc1_mean - t.yc0_mean)).abs() < 1e-15);
        assert_eq!(t.clusters_used + t.clusters_dropped, 1000);
    }
}
