//! Synthetic trial generation with counterfactuals.
//!
//! The process per cluster: latent uniforms drive the cluster covariates,
//! the cluster size and the arm; each individual then draws a fixed block of
//! uniforms for covariates, target-population membership, measurement and
//! outcome. Counterfactuals under both arms share the same uniform draws, so
//! raising a success probability can only switch outcomes from 0 to 1, and
//! the observed data equal the counterfactual at the realized arm.

mod params;
mod truth;

pub use params::{
    DeltaBranch, DeltaCoeffs, ExtendedParams, SimParams, Y1StarCoeffs, Y2Coeffs,
};
pub use truth::{compute_truth, TruthResult};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{ClusterRecord, IndividualRecord, SimLatents, TrialData};
use crate::error::Result;
use crate::seeds::{derive_rng, tag};

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Standard normal via Box-Muller (two uniform draws, fixed consumption).
fn draw_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

struct ClusterLatents {
    u_e1c: f64,
    u_e2c: f64,
    e1c: f64,
    e2c: f64,
}

impl SimParams {
    fn delta_prob(&self, b: &ClusterLatents, w1: f64, w2: f64, w3: f64, a: f64, l: f64) -> f64 {
        let l_term = self.extended.map_or(0.0, |x| x.delta_l * l);
        let br1 = &self.delta.when_w3;
        let br0 = &self.delta.when_not_w3;
        let lp1 = br1.intercept
            + br1.a * a
            + br1.w1 * w1
            + br1.w2_a * w2 * a
            + br1.w3 * w3
            + br1.e1c * b.e1c
            + br1.e2c * b.e2c
            + br1.u_e1c * b.u_e1c
            + br1.u_e2c * b.u_e2c
            + l_term;
        let lp0 = br0.intercept
            + br0.a * a
            + br0.w1 * w1
            + br0.w2_a * w2 * a
            + br0.w3 * w3
            + br0.e1c * b.e1c
            + br0.e2c * b.e2c
            + br0.u_e1c * b.u_e1c
            + br0.u_e2c * b.u_e2c
            + l_term;
        w3 * expit(lp1) + (1.0 - w3) * expit(lp0)
    }

    fn y1star_prob(&self, b: &ClusterLatents, w1: f64, w2: f64, w3: f64, a: f64, l: f64) -> f64 {
        let c = &self.y1star;
        let mut lp = c.intercept
            + c.e1c * b.e1c
            + c.e2c * b.e2c
            + c.w1 * w1
            + c.w2 * w2
            + c.w3 * w3
            + c.u_e1c * b.u_e1c
            + c.u_e2c * b.u_e2c;
        if let Some(x) = &self.extended {
            lp += x.y1star_a * a + x.y1star_l * l;
        }
        expit(lp)
    }

    fn y2_prob(&self, b: &ClusterLatents, w1: f64, w2: f64, w3: f64, a: f64, l: f64) -> f64 {
        let c = &self.y2;
        let mut lp = c.intercept
            + c.a * a
            + c.w1 * w1
            + c.w2 * w2
            + c.e1c * b.e1c
            + c.e2c * b.e2c
            + c.a_w3 * a * w3;
        if let Some(x) = &self.extended {
            lp += x.y2_l * l;
        }
        expit(lp)
    }

    fn l_prob(&self, b: &ClusterLatents, w1: f64, w2: f64, w3: f64, a: f64) -> f64 {
        match &self.extended {
            None => 0.0,
            Some(x) => expit(
                x.l_intercept
                    + x.l_a * a
                    + x.l_w1 * w1
                    + x.l_w2 * w2
                    + x.l_w3 * w3
                    + x.l_e1c * b.e1c
                    + x.l_e2c * b.e2c,
            ),
        }
    }
}

/// Generate one cluster from its own random stream.
pub fn generate_cluster(params: &SimParams, id: String, rng: &mut ChaCha8Rng) -> ClusterRecord {
    let extended = params.extended.is_some();

    // Cluster-level draws, in fixed order.
    let u_e1c: f64 = rng.gen();
    let u_e2c: f64 = rng.gen::<f64>() * 0.5;
    let e1c = u_e1c + params.sigma_e * draw_normal(rng);
    let e2c = u_e2c + params.sigma_e * draw_normal(rng);
    let n_raw = params.n_mean + params.n_sd * draw_normal(rng);
    let n = (n_raw.round() as i64).max(2) as usize;
    let a: u8 = u8::from(rng.gen::<f64>() < 0.5);
    let lat = ClusterLatents { u_e1c, u_e2c, e1c, e2c };

    let mut individuals = Vec::with_capacity(n);
    for _ in 0..n {
        // Fixed per-individual block: the slot for u_l is consumed even in
        // the base process so that base and extended runs with equal seeds
        // stay draw-aligned.
        let u_w1: f64 = rng.gen();
        let u_w2: f64 = rng.gen();
        let u_w3: f64 = rng.gen();
        let u_l: f64 = rng.gen();
        let u_y1: f64 = rng.gen();
        let u_d: f64 = rng.gen();
        let u_y2: f64 = rng.gen();

        // W1 ~ Uniform(18, 60) scaled to [0, 1].
        let w1 = u_w1;
        let w2 = u8::from(u_w2 < 0.6);
        let w3 = u8::from(u_w3 < 0.65);
        let (w1f, w2f, w3f) = (w1, f64::from(w2), f64::from(w3));

        let l_cf: [f64; 2] = if extended {
            let l0 = f64::from(u_l < params.l_prob(&lat, w1f, w2f, w3f, 0.0));
            let l1 = f64::from(u_l < params.l_prob(&lat, w1f, w2f, w3f, 1.0));
            [l0, l1]
        } else {
            [0.0, 0.0]
        };

        let y1_star_cf: [u8; 2] = {
            let p0 = params.y1star_prob(&lat, w1f, w2f, w3f, 0.0, l_cf[0]);
            let p1 = params.y1star_prob(&lat, w1f, w2f, w3f, 1.0, l_cf[1]);
            [u8::from(u_y1 < p0), u8::from(u_y1 < p1)]
        };

        let delta_cf: [u8; 2] = {
            let p0 = params.delta_prob(&lat, w1f, w2f, w3f, 0.0, l_cf[0]);
            let p1 = params.delta_prob(&lat, w1f, w2f, w3f, 1.0, l_cf[1]);
            [u8::from(u_d < p0), u8::from(u_d < p1)]
        };

        let y2_cf: [u8; 2] = {
            let mut out = [0u8; 2];
            for arm in 0..2 {
                if delta_cf[arm] * y1_star_cf[arm] == 1 {
                    let p = params.y2_prob(&lat, w1f, w2f, w3f, arm as f64, l_cf[arm]);
                    out[arm] = u8::from(u_y2 < p);
                }
            }
            out
        };

        let arm = usize::from(a);
        let delta = delta_cf[arm];
        let y1 = delta * y1_star_cf[arm];
        let y2 = y2_cf[arm];
        individuals.push(IndividualRecord {
            w1,
            w2,
            w3,
            delta,
            y1,
            y2,
            l: extended.then_some(l_cf[arm]),
            latent: Some(SimLatents {
                y1_star: y1_star_cf[arm],
                delta_cf,
                y2_cf,
                y1_star_cf: extended.then_some(y1_star_cf),
                l_cf: extended.then_some(l_cf),
            }),
        });
    }

    ClusterRecord::new(id, e1c, e2c, a, individuals).expect("generated cluster is structurally valid")
}

/// Generate a full trial; cluster `j` uses the stream derived from
/// `(seed, TRIAL, j)`, so output is identical under any parallelism.
pub fn generate_trial(params: &SimParams, seed: u64) -> Result<TrialData> {
    params.validate()?;
    let width = (params.j.max(2) - 1).to_string().len();
    let clusters: Vec<ClusterRecord> = (0..params.j)
        .into_par_iter()
        .map(|idx| {
            let mut rng = derive_rng(seed, &[tag::TRIAL, idx as u64]);
            generate_cluster(params, format!("c{idx:0width$}"), &mut rng)
        })
        .collect();
    Ok(TrialData::new(clusters))
}

/// Generate a trial under the extended scenario; fails if the extension
/// block is missing.
pub fn generate_trial_extended(params: &SimParams, seed: u64) -> Result<TrialData> {
    if params.extended.is_none() {
        return Err(crate::error::Error::Precondition(
            "extended parameters are required".into(),
        ));
    }
    generate_trial(params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate;

    #[test]
    fn deterministic_and_valid() {
        let params = SimParams { j: 8, ..SimParams::default() };
        let t1 = generate_trial(&params, 11).unwrap();
        let t2 = generate_trial(&params, 11).unwrap();
        assert_eq!(t1, t2);
        assert!(validate(&t1).is_empty(), "{}", validate(&t1));
    }

    #[test]
    fn observed_equals_counterfactual_at_realized_arm() {
        let params = SimParams { j: 6, ..SimParams::default() };
        let t = generate_trial(&params, 3).unwrap();
        for c in &t.clusters {
            let arm = usize::from(c.a);
            for r in &c.individuals {
                let lat = r.latent.as_ref().unwrap();
                assert_eq!(r.delta, lat.delta_cf[arm]);
                assert_eq!(r.y2, lat.y2_cf[arm]);
                assert_eq!(r.y1, r.delta * lat.y1_star);
            }
        }
    }

    #[test]
    fn structural_zero_when_not_in_stratum() {
        let params = SimParams { j: 6, ..SimParams::default() };
        let t = generate_trial(&params, 5).unwrap();
        for c in &t.clusters {
            for r in &c.individuals {
                let lat = r.latent.as_ref().unwrap();
                if lat.y1_star == 0 {
                    assert_eq!(lat.y2_cf, [0, 0]);
                }
                for arm in 0..2 {
                    if lat.delta_cf[arm] == 0 {
                        assert_eq!(lat.y2_cf[arm], 0);
                    }
                }
            }
        }
    }

    #[test]
    fn base_y1star_is_arm_invariant() {
        let params = SimParams { j: 10, ..SimParams::default() };
        let t = generate_trial(&params, 9).unwrap();
        for c in &t.clusters {
            for r in &c.individuals {
                assert!(r.latent.as_ref().unwrap().y1_star_cf.is_none());
            }
        }
    }

    #[test]
    fn extended_with_zero_l_terms_matches_base() {
        let base = SimParams { j: 5, ..SimParams::default() };
        let zeroed = SimParams {
            j: 5,
            extended: Some(ExtendedParams {
                y1star_a: 0.0,
                y1star_l: 0.0,
                delta_l: 0.0,
                y2_l: 0.0,
                ..ExtendedParams::default()
            }),
            ..SimParams::default()
        };
        let t_base = generate_trial(&base, 21).unwrap();
        let t_ext = generate_trial(&zeroed, 21).unwrap();
        assert_eq!(t_base.j(), t_ext.j());
        for (cb, ce) in t_base.clusters.iter().zip(&t_ext.clusters) {
            assert_eq!(cb.a, ce.a);
            assert_eq!(cb.n(), ce.n());
            for (rb, re) in cb.individuals.iter().zip(&ce.individuals) {
                assert_eq!((rb.w1, rb.w2, rb.w3), (re.w1, re.w2, re.w3));
                assert_eq!((rb.delta, rb.y1, rb.y2), (re.delta, re.y1, re.y2));
                assert!(re.l.is_some());
            }
        }
    }

    #[test]
    fn extended_arm_shifts_target_population() {
        let params = SimParams { j: 12, ..SimParams::extended_default() };
        let t = generate_trial_extended(&params, 13).unwrap();
        let mut differs = 0usize;
        let mut total = 0usize;
        for c in &t.clusters {
            for r in &c.individuals {
                let cf = r.latent.as_ref().unwrap().y1_star_cf.unwrap();
                total += 1;
                differs += usize::from(cf[0] != cf[1]);
            }
        }
        assert!(differs > 0, "A -> L -> Y1* pathway produced no shifts in {total}");
    }

    #[test]
    fn mean_cluster_size_near_target() {
        let params = SimParams { j: 200, ..SimParams::default() };
        let t = generate_trial(&params, 17).unwrap();
        let mean_n =
            t.clusters.iter().map(|c| c.n() as f64).sum::<f64>() / t.j() as f64;
        // 3 standard errors of Normal(100, 10) over 200 clusters.
        assert!((mean_n - 100.0).abs() < 3.0 * 10.0 / (200.0f64).sqrt());
    }
}
