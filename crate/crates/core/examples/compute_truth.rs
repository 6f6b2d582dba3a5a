//! Evaluate the true counterfactual strata effect under the default
//! data-generating process, and show that zeroing every arm pathway kills
//! the effect while keeping the measurement pathway sustains it.
//!
//! ```text
//! cargo run --release --example compute_truth
//! ```

use two_stage_tmle::simgen::{compute_truth, SimParams};

fn main() -> two_stage_tmle::Result<()> {
    let params = SimParams::default();
    let truth = compute_truth(&params, 1)?;
    println!(
        "defaults:            psi* = {:+.4}%  (Yc*(1) = {:.4}, Yc*(0) = {:.4}, {} clusters)",
        100.0 * truth.psi_star,
        truth.yc1_mean,
        truth.yc0_mean,
        truth.clusters_used
    );

    // Remove the direct outcome pathway; the measurement-mediated effect
    // remains.
    let mut no_direct = params.clone();
    no_direct.y2.a = 0.0;
    no_direct.y2.a_w3 = 0.0;
    let t = compute_truth(&no_direct, 1)?;
    println!("no direct pathway:   psi* = {:+.4}%", 100.0 * t.psi_star);

    // Remove the measurement pathway too; nothing is left.
    let mut no_effect = no_direct;
    no_effect.delta.when_w3.a = 0.0;
    no_effect.delta.when_w3.w2_a = 0.0;
    no_effect.delta.when_not_w3.a = 0.0;
    no_effect.delta.when_not_w3.w2_a = 0.0;
    let t = compute_truth(&no_effect, 1)?;
    println!("no pathway at all:   psi* = {:+.4}%", 100.0 * t.psi_star);
    Ok(())
}
