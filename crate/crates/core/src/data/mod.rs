//! Hierarchical trial data model: individuals nested in clusters.
//!
//! The observed row for an individual is `(W1, W2, W3, Δ, Y1, Y2)` plus an
//! optional post-baseline covariate `L`. `Y1` is the observed indicator of
//! membership in the target population, defined as `Δ × Y1*`; it is zero for
//! anyone not measured. `Y2` is the outcome and is structurally zero unless
//! `Y1 = 1`. Simulated data may carry latent counterfactuals which analysis
//! code never reads.

mod csv_io;
mod validate;

pub use csv_io::{load_trial_csv, load_trial_reader, write_trial_csv, write_trial_writer};
pub use validate::{validate, ValidationIssue, ValidationReport};

use crate::error::{Error, Result};

/// Latent and counterfactual values carried by simulated individuals.
///
/// `delta_cf` and `y2_cf` are indexed by arm: `[value under a=0, under a=1]`.
/// `y1_star_cf` is populated only by the extended generator, where the arm
/// may shift target-population membership; in the base process `y1_star` is
/// arm-invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLatents {
    pub y1_star: u8,
    pub delta_cf: [u8; 2],
    pub y2_cf: [u8; 2],
    pub y1_star_cf: Option<[u8; 2]>,
    pub l_cf: Option<[f64; 2]>,
}

/// One individual: baseline covariates, measurement indicator and outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualRecord {
    /// Scaled continuous covariate in `[0, 1]`.
    pub w1: f64,
    pub w2: u8,
    pub w3: u8,
    /// Measurement / screening indicator.
    pub delta: u8,
    /// Observed target-population indicator, `Y1 = Δ·Y1*`.
    pub y1: u8,
    /// Outcome; structurally zero unless `y1 = 1`.
    pub y2: u8,
    /// Post-baseline covariate (extension only).
    pub l: Option<f64>,
    /// Latent fields (simulated data only); never read by estimators.
    pub latent: Option<SimLatents>,
}

impl IndividualRecord {
    /// Check the record's structural invariants.
    pub fn check(&self) -> Result<()> {
        if self.delta == 0 && self.y1 == 1 {
            return Err(Error::Validation(
                "y1=1 with delta=0 violates Y1 = Δ·Y1*".into(),
            ));
        }
        if self.y1 == 0 && self.y2 == 1 {
            return Err(Error::Validation(
                "y2=1 with y1=0 violates the outcome contingency (Y2=1 implies Y1=1)".into(),
            ));
        }
        Ok(())
    }
}

/// One cluster: shared covariates, arm, and its individuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    pub id: String,
    pub e1c: f64,
    pub e2c: f64,
    /// Randomized arm indicator.
    pub a: u8,
    pub individuals: Vec<IndividualRecord>,
    /// Empirical mean of `w1` over the cluster.
    pub w1c: f64,
    pub w2c: f64,
    pub w3c: f64,
}

impl ClusterRecord {
    /// Build a cluster, computing covariate aggregates.
    ///
    /// Fails if there are fewer than two individuals or a record violates a
    /// structural invariant.
    pub fn new(
        id: impl Into<String>,
        e1c: f64,
        e2c: f64,
        a: u8,
        individuals: Vec<IndividualRecord>,
    ) -> Result<Self> {
        let id = id.into();
        if individuals.len() < 2 {
            return Err(Error::Validation(format!(
                "cluster {id} has {} individual(s); at least 2 required",
                individuals.len()
            )));
        }
        for rec in &individuals {
            rec.check()?;
        }
        let (w1c, w2c, w3c) = aggregate_cluster_covariates(&individuals)?;
        Ok(Self { id, e1c, e2c, a, individuals, w1c, w2c, w3c })
    }

    /// Number of individuals `N_j`.
    pub fn n(&self) -> usize {
        self.individuals.len()
    }

    pub fn measured_count(&self) -> usize {
        self.individuals.iter().filter(|r| r.delta == 1).count()
    }
}

/// A full trial: the list of clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    pub clusters: Vec<ClusterRecord>,
}

impl TrialData {
    pub fn new(clusters: Vec<ClusterRecord>) -> Self {
        Self { clusters }
    }

    /// Number of clusters `J`.
    pub fn j(&self) -> usize {
        self.clusters.len()
    }

    pub fn arm_counts(&self) -> (usize, usize) {
        let n1 = self.clusters.iter().filter(|c| c.a == 1).count();
        (self.clusters.len() - n1, n1)
    }
}

/// Empirical means of `(w1, w2, w3)` over a cluster's individuals.
pub fn aggregate_cluster_covariates(
    individuals: &[IndividualRecord],
) -> Result<(f64, f64, f64)> {
    if individuals.is_empty() {
        return Err(Error::Precondition("cannot aggregate an empty cluster".into()));
    }
    let n = individuals.len() as f64;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    for r in individuals {
        s1 += r.w1;
        s2 += f64::from(r.w2);
        s3 += f64::from(r.w3);
    }
    Ok((s1 / n, s2 / n, s3 / n))
}
