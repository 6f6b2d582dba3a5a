//! A desk-scale replicate study: all five estimator configurations over a
//! small number of replicates, aggregated into the benchmark table layout.
//!
//! The full-size study (1000 replicates, J = 150) is the CLI's `table1`
//! subcommand; this example keeps runtime to a few seconds.
//!
//! ```text
//! cargo run --release --example mini_study
//! ```

use two_stage_tmle::harness::{
    aggregate_metrics, format_table1, run_replicates, EstimatorConfig,
};
use two_stage_tmle::simgen::{compute_truth, SimParams};

fn main() -> two_stage_tmle::Result<()> {
    let params = SimParams { j: 50, truth_clusters: 2000, ..SimParams::default() };
    let estimators = EstimatorConfig::benchmark_set();
    let reps = 40;

    let truth = compute_truth(&params, 1)?;
    let results = run_replicates(&params, &estimators, reps, 1)?;
    let metrics = aggregate_metrics(&results, &estimators, &truth, 0.05);
    print!("{}", format_table1(&metrics, &truth));
    println!("\n(J = {}, {reps} replicates; expect loose agreement only)", params.j);
    Ok(())
}
