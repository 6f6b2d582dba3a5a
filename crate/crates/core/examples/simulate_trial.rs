//! Generate a cluster-randomized trial, validate it, and write the CSV.
//!
//! ```text
//! cargo run --release --example simulate_trial [out.csv]
//! ```

use two_stage_tmle::data::{validate, write_trial_csv};
use two_stage_tmle::harness::trial_checksum;
use two_stage_tmle::simgen::{generate_trial, SimParams};

fn main() -> two_stage_tmle::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "trial.csv".into());
    let params = SimParams::default();
    let trial = generate_trial(&params, 1)?;

    let report = validate(&trial);
    assert!(report.is_empty(), "generated trial must validate:\n{report}");

    let (n0, n1) = trial.arm_counts();
    let total: usize = trial.clusters.iter().map(|c| c.n()).sum();
    let measured: usize = trial.clusters.iter().map(|c| c.measured_count()).sum();
    let eligible: usize = trial
        .clusters
        .iter()
        .flat_map(|c| &c.individuals)
        .filter(|r| r.y1 == 1)
        .count();
    let outcomes: usize = trial
        .clusters
        .iter()
        .flat_map(|c| &c.individuals)
        .filter(|r| r.y2 == 1)
        .count();

    println!("J = {} clusters ({} control, {} intervention)", trial.j(), n0, n1);
    println!("{total} individuals; {measured} measured, {eligible} known in target population, {outcomes} outcomes");
    println!("checksum {:016x}", trial_checksum(&trial));

    write_trial_csv(&trial, &out)?;
    println!("wrote {out}");
    Ok(())
}
