//! Estimate one cluster's endpoint with all four Stage-1 estimators.
//!
//! Shows how the naive subset means (Screened, Eligible) land away from the
//! cluster's underlying target-population outcome probability, while the
//! ratio estimators — especially the targeted one — track it.
//!
//! ```text
//! cargo run --release --example cluster_endpoints
//! ```

use two_stage_tmle::seeds::{derive_rng, tag};
use two_stage_tmle::simgen::{generate_cluster, SimParams};
use two_stage_tmle::stage1::{
    estimate_endpoint_eligible, estimate_endpoint_screened, estimate_endpoint_tmle,
    estimate_endpoint_unadjusted, LibraryKind,
};

fn main() -> two_stage_tmle::Result<()> {
    let params = SimParams { n_mean: 400.0, ..SimParams::default() };
    let mut rng = derive_rng(7, &[tag::CLUSTER, 0]);
    let cluster = generate_cluster(&params, "demo".into(), &mut rng);

    // Latent benchmark: the within-cluster outcome probability among the
    // underlying target population (unobservable in real data).
    let arm = usize::from(cluster.a);
    let (mut ns, mut np) = (0usize, 0usize);
    for r in &cluster.individuals {
        let lat = r.latent.as_ref().unwrap();
        if lat.y1_star == 1 {
            ns += 1;
            np += usize::from(lat.y2_cf[arm] == 1);
        }
    }
    let latent_truth = np as f64 / ns as f64;

    println!(
        "cluster: N = {}, arm = {}, measured = {}, latent target population = {}",
        cluster.n(),
        cluster.a,
        cluster.measured_count(),
        ns
    );
    println!("latent Y^c*           = {latent_truth:.4}\n");

    let scr = estimate_endpoint_screened(&cluster)?;
    let eli = estimate_endpoint_eligible(&cluster)?;
    let una = estimate_endpoint_unadjusted(&cluster)?;
    let (tmle, nuis) = estimate_endpoint_tmle(&cluster, LibraryKind::Standard, 10, 42, false)?;

    for e in [&scr, &eli, &una, &tmle] {
        println!(
            "{:<11} estimate = {:.4}  (se {:.4}, num {:.4}, den {:.4})",
            e.method.to_string(),
            e.estimate,
            e.se,
            e.numerator,
            e.denominator
        );
    }
    println!(
        "\ntargeting: epsilon = {:+.5}; outcome-regression weights {:?}",
        tmle.epsilon.unwrap(),
        nuis.qbar.weights.iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
    Ok(())
}
