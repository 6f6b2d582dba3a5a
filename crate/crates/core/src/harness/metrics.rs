//! Metric aggregation over replicates and report output.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::harness::{EstimatorConfig, ReplicateResult};
use crate::simgen::TruthResult;

/// Aggregate operating characteristics of one estimator.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationMetrics {
    pub estimator: String,
    /// Successful replicates.
    pub n_reps: usize,
    pub n_failed: usize,
    pub mean_pt: f64,
    pub mean_ci_lo: f64,
    pub mean_ci_hi: f64,
    /// `mean(psi) − psi_star`.
    pub bias: f64,
    /// Mean standard-error estimate (σ̂).
    pub avg_se: f64,
    /// Monte Carlo SD of the point estimates (σ).
    pub mc_sd: f64,
    /// Fraction of CIs containing the truth.
    pub coverage: f64,
    /// Fraction of replicates rejecting the null at `alpha`.
    pub power: f64,
}

/// Compute the Table-1 metrics for every estimator.
///
/// Failed replicates are excluded per estimator and counted; an estimator
/// with zero successes gets NaN metrics.
pub fn aggregate_metrics(
    results: &[ReplicateResult],
    estimators: &[EstimatorConfig],
    truth: &TruthResult,
    alpha: f64,
) -> Vec<SimulationMetrics> {
    let psi_star = truth.psi_star;
    estimators
        .iter()
        .enumerate()
        .map(|(idx, est)| {
            let ok: Vec<_> =
                results.iter().filter_map(|r| r.estimates[idx].as_ref().ok()).collect();
            let n = ok.len();
            let n_failed = results.len() - n;
            if n == 0 {
                return SimulationMetrics {
                    estimator: est.name(),
                    n_reps: 0,
                    n_failed,
                    mean_pt: f64::NAN,
                    mean_ci_lo: f64::NAN,
                    mean_ci_hi: f64::NAN,
                    bias: f64::NAN,
                    avg_se: f64::NAN,
                    mc_sd: f64::NAN,
                    coverage: f64::NAN,
                    power: f64::NAN,
                };
            }
            let nf = n as f64;
            let mean_pt = ok.iter().map(|e| e.psi).sum::<f64>() / nf;
            let mean_ci_lo = ok.iter().map(|e| e.ci_lo).sum::<f64>() / nf;
            let mean_ci_hi = ok.iter().map(|e| e.ci_hi).sum::<f64>() / nf;
            let avg_se = ok.iter().map(|e| e.se).sum::<f64>() / nf;
            let mc_sd = if n < 2 {
                0.0
            } else {
                (ok.iter().map(|e| (e.psi - mean_pt).powi(2)).sum::<f64>() / (nf - 1.0))
                    .sqrt()
            };
            let coverage = ok
                .iter()
                .filter(|e| e.ci_lo <= psi_star && psi_star <= e.ci_hi)
                .count() as f64
                / nf;
            let power = ok.iter().filter(|e| e.p_value < alpha).count() as f64 / nf;
            SimulationMetrics {
                estimator: est.name(),
                n_reps: n,
                n_failed,
                mean_pt,
                mean_ci_lo,
                mean_ci_hi,
                bias: mean_pt - psi_star,
                avg_se,
                mc_sd,
                coverage,
                power,
            }
        })
        .collect()
}

/// Render the benchmark table as aligned text (percent units where the
/// reference table uses them).
pub fn format_table1(metrics: &[SimulationMetrics], truth: &TruthResult) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Results from {} simulated trials (true effect {:.2}%)\n\n",
        metrics.first().map_or(0, |m| m.n_reps + m.n_failed),
        100.0 * truth.psi_star
    ));
    out.push_str(&format!(
        "{:<12} {:<12} {:>22} {:>7} {:>8} {:>8} {:>7} {:>7}\n",
        "Stage 1", "Stage 2", "Pt (95% CI)", "Bias", "sigma^", "sigma", "Cover.", "Power"
    ));
    for m in metrics {
        let (s1, s2) = m.estimator.split_once('/').unwrap_or((m.estimator.as_str(), ""));
        let pt = format!(
            "{:.2} ({:.2}, {:.2})",
            100.0 * m.mean_pt,
            100.0 * m.mean_ci_lo,
            100.0 * m.mean_ci_hi
        );
        out.push_str(&format!(
            "{:<12} {:<12} {:>22} {:>7.2} {:>8.4} {:>8.4} {:>7.1} {:>7.1}\n",
            s1,
            s2,
            pt,
            100.0 * m.bias,
            m.avg_se,
            m.mc_sd,
            100.0 * m.coverage,
            100.0 * m.power
        ));
    }
    out
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write the per-replicate CSV (one row per replicate per estimator).
pub fn write_replicates_csv(
    results: &[ReplicateResult],
    estimators: &[EstimatorConfig],
    mut w: impl Write,
) -> Result<()> {
    writeln!(
        w,
        "rep_id,estimator,psi,se,ci_lo,ci_hi,p_value,dropped_clusters,trial_checksum,failed"
    )?;
    for r in results {
        for (est, outcome) in estimators.iter().zip(&r.estimates) {
            match outcome {
                Ok(e) => writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},0",
                    r.rep_id,
                    est.name(),
                    fmt(e.psi),
                    fmt(e.se),
                    fmt(e.ci_lo),
                    fmt(e.ci_hi),
                    fmt(e.p_value),
                    e.dropped_clusters,
                    r.trial_checksum
                )?,
                Err(_) => writeln!(
                    w,
                    "{},{},,,,,,,{},1",
                    r.rep_id,
                    est.name(),
                    r.trial_checksum
                )?,
            }
        }
    }
    Ok(())
}

/// Write the summary CSV (one row per estimator).
pub fn write_summary_csv(
    metrics: &[SimulationMetrics],
    truth: &TruthResult,
    mut w: impl Write,
) -> Result<()> {
    writeln!(
        w,
        "estimator,n_reps,n_failed,psi_star,mean_pt,mean_ci_lo,mean_ci_hi,bias,avg_se,mc_sd,coverage,power"
    )?;
    for m in metrics {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            m.estimator,
            m.n_reps,
            m.n_failed,
            fmt(truth.psi_star),
            fmt(m.mean_pt),
            fmt(m.mean_ci_lo),
            fmt(m.mean_ci_hi),
            fmt(m.bias),
            fmt(m.avg_se),
            fmt(m.mc_sd),
            fmt(m.coverage),
            fmt(m.power)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ReplicateEstimate;

    fn truth() -> TruthResult {
        TruthResult {
            psi_star: 0.02,
            yc1_mean: 0.3,
            yc0_mean: 0.28,
            clusters_used: 1000,
            clusters_dropped: 0,
        }
    }

    fn rep(id: usize, psi: f64, se: f64, p: f64) -> ReplicateResult {
        ReplicateResult {
            rep_id: id,
            trial_checksum: 42,
            estimates: vec![Ok(ReplicateEstimate {
                psi,
                se,
                ci_lo: psi - 2.0 * se,
                ci_hi: psi + 2.0 * se,
                p_value: p,
                dropped_clusters: 0,
            })],
        }
    }

    #[test]
    fn hand_computed_three_replicates() {
        let results = vec![
            rep(0, 0.02, 0.01, 0.04),
            rep(1, 0.03, 0.02, 0.20),
            rep(2, 0.01, 0.03, 0.90),
        ];
        let ests =
            vec![EstimatorConfig::benchmark_set()[2]];
        let m = aggregate_metrics(&results, &ests, &truth(), 0.05);
        assert_eq!(m.len(), 1);
        let m = &m[0];
        assert!((m.mean_pt - 0.02).abs() < 1e-15);
        assert!(m.bias.abs() < 1e-15);
        assert!((m.avg_se - 0.02).abs() < 1e-15);
        assert!((m.mc_sd - 0.01).abs() < 1e-12);
        assert!((m.coverage - 1.0).abs() < 1e-15);
        assert!((m.power - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_estimates_have_zero_bias_full_coverage() {
        let results: Vec<ReplicateResult> =
            (0..5).map(|i| rep(i, 0.02, 0.005, 0.01)).collect();
        let ests = vec![EstimatorConfig::benchmark_set()[0]];
        let m = &aggregate_metrics(&results, &ests, &truth(), 0.05)[0];
        assert_eq!(m.bias, 0.0);
        assert_eq!(m.coverage, 1.0);
        assert_eq!(m.mc_sd, 0.0);
    }

    #[test]
    fn failures_are_counted_and_excluded() {
        let mut results = vec![rep(0, 0.02, 0.01, 0.2), rep(1, 0.04, 0.01, 0.2)];
        results.push(ReplicateResult {
            rep_id: 2,
            trial_checksum: 1,
            estimates: vec![Err("boom".into())],
        });
        let ests = vec![EstimatorConfig::benchmark_set()[0]];
        let m = &aggregate_metrics(&results, &ests, &truth(), 0.05)[0];
        assert_eq!(m.n_reps, 2);
        assert_eq!(m.n_failed, 1);
        assert!((m.mean_pt - 0.03).abs() < 1e-15);
    }
}
