//! Full two-stage analysis of one simulated trial: Stage-1 TMLE endpoints,
//! then the unadjusted Stage-2 contrast versus the cluster-level TMLE with
//! Adaptive Pre-specification.
//!
//! ```text
//! cargo run --release --example effect_estimation
//! ```

use two_stage_tmle::harness::{analyze_trial, EstimatorConfig};
use two_stage_tmle::simgen::{compute_truth, generate_trial, SimParams};
use two_stage_tmle::stage1::Stage1Method;
use two_stage_tmle::stage2::Stage2Method;

fn main() -> two_stage_tmle::Result<()> {
    let params = SimParams::default();
    let trial = generate_trial(&params, 2024)?;
    let truth = compute_truth(&params, 1)?;
    println!("true effect: {:+.2}%\n", 100.0 * truth.psi_star);

    for (label, config) in [
        ("tmle / unadjusted", EstimatorConfig::new(Stage1Method::Tmle, Stage2Method::Unadjusted)),
        ("tmle / tmle-aps  ", EstimatorConfig::new(Stage1Method::Tmle, Stage2Method::TmleAps)),
    ] {
        let analyzed = analyze_trial(&trial, &config, 7)?;
        let e = &analyzed.estimate;
        println!(
            "{label}: psi = {:+.2}%  95% CI ({:+.2}%, {:+.2}%)  se = {:.4}  p = {:.4}",
            100.0 * e.psi,
            100.0 * e.ci_lo,
            100.0 * e.ci_hi,
            e.se,
            e.p_value
        );
        if let Some(sel) = &e.selection {
            println!(
                "   APS selected q: {} | g: {}  (cv risk {:.6})",
                sel.q_spec.describe(),
                sel.g_spec.describe(),
                sel.cv_risk
            );
        }
    }
    Ok(())
}
