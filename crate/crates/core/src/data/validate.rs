//! Structural validation producing a report instead of hard failures.

use std::fmt;

use crate::data::TrialData;

/// A single invariant violation with its location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    /// `"trial"`, `"cluster <id>"` or `"cluster <id> row <i>"`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Every invariant violation found in a trial; empty iff the data is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, location: String, message: impl Into<String>) {
        self.issues.push(ValidationIssue { location, message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "no violations");
        }
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Check every structural invariant and report all violations.
pub fn validate(data: &TrialData) -> ValidationReport {
    let mut report = ValidationReport::default();

    if data.j() < 4 {
        report.push("trial".into(), format!("J = {} clusters; at least 4 required", data.j()));
    }
    let (n0, n1) = data.arm_counts();
    if n0 < 2 {
        report.push("trial".into(), format!("fewer than 2 clusters in arm 0 (found {n0})"));
    }
    if n1 < 2 {
        report.push("trial".into(), format!("fewer than 2 clusters in arm 1 (found {n1})"));
    }

    for cluster in &data.clusters {
        let loc = format!("cluster {}", cluster.id);
        if cluster.n() < 2 {
            report.push(loc.clone(), format!("{} individual(s); at least 2 required", cluster.n()));
        }
        if cluster.a > 1 {
            report.push(loc.clone(), format!("arm must be 0 or 1, found {}", cluster.a));
        }

        // Aggregates must equal within-cluster means to machine precision.
        if let Ok((w1c, w2c, w3c)) =
            crate::data::aggregate_cluster_covariates(&cluster.individuals)
        {
            let n = cluster.n() as f64;
            let tol = 1e-12 * n.max(1.0);
            for (name, stored, fresh) in [
                ("w1c", cluster.w1c, w1c),
                ("w2c", cluster.w2c, w2c),
                ("w3c", cluster.w3c, w3c),
            ] {
                if (stored - fresh).abs() > tol {
                    report.push(
                        loc.clone(),
                        format!("{name} = {stored} does not match recomputed mean {fresh}"),
                    );
                }
            }
        }

        for (i, rec) in cluster.individuals.iter().enumerate() {
            let rloc = format!("{loc} row {}", i + 1);
            if !(0.0..=1.0).contains(&rec.w1) {
                report.push(rloc.clone(), format!("w1 = {} outside [0, 1]", rec.w1));
            }
            if rec.delta == 0 && rec.y1 == 1 {
                report.push(rloc.clone(), "y1 = 1 with delta = 0 violates Y1 = Δ·Y1*");
            }
            if rec.y1 == 0 && rec.y2 == 1 {
                report.push(rloc.clone(), "y2 = 1 with y1 = 0 violates outcome contingency");
            }
            if let Some(lat) = &rec.latent {
                for arm in [0usize, 1usize] {
                    let y1s = lat.y1_star_cf.map_or(lat.y1_star, |cf| cf[arm]);
                    if lat.y2_cf[arm] == 1 && (lat.delta_cf[arm] == 0 || y1s == 0) {
                        report.push(
                            rloc.clone(),
                            format!("y2_cf[{arm}] = 1 without delta_cf and y1_star both 1"),
                        );
                    }
                }
                let arm = usize::from(cluster.a);
                if rec.delta != lat.delta_cf[arm] {
                    report.push(rloc.clone(), "observed delta differs from delta_cf at realized arm");
                }
                if rec.y2 != lat.y2_cf[arm] {
                    report.push(rloc.clone(), "observed y2 differs from y2_cf at realized arm");
                }
                let y1s = lat.y1_star_cf.map_or(lat.y1_star, |cf| cf[arm]);
                if rec.y1 != rec.delta * y1s {
                    report.push(rloc.clone(), "observed y1 differs from delta × y1_star");
                }
            }
        }
    }
    report
}
