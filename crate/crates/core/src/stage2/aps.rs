//! Adaptive Pre-specification: data-adaptive selection of the Stage-2
//! adjustment approach.
//!
//! Candidate working models adjust for at most one cluster-level covariate.
//! The loss is the squared influence curve of the candidate cluster-level
//! TMLE, cross-validated with training-fold nuisance fits. Selection is
//! collaborative: the outcome regression is chosen first (with the known
//! propensity), then the propensity candidate is chosen given it. Ties go to
//! the earlier candidate, so degenerate data falls back to the unadjusted
//! default.

use crate::error::{Error, Result};
use crate::learners::make_folds;
use crate::stage2::tmle::{fit_candidate_tmle, ClusterLevelRow, TmleComponents};

/// Propensity-score specification: the known randomization probability or a
/// one-covariate logistic fit.
#[derive(Debug, Clone, PartialEq)]
pub enum GSpec {
    /// Known randomization probability 0.5.
    Known,
    /// Logistic regression of the arm on one cluster covariate.
    Logistic(String),
}

impl GSpec {
    pub fn describe(&self) -> String {
        match self {
            GSpec::Known => "known(0.5)".into(),
            GSpec::Logistic(c) => format!("logistic({c})"),
        }
    }
}

/// Outcome-regression specification: arm plus at most one covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct QSpec {
    /// Adjustment covariate; `None` is the unadjusted working model.
    pub covariate: Option<String>,
}

impl QSpec {
    pub fn describe(&self) -> String {
        match &self.covariate {
            None => "unadjusted".into(),
            Some(c) => format!("adjust({c})"),
        }
    }
}

/// The selected adjustment specification with its search record.
#[derive(Debug, Clone, PartialEq)]
pub struct ApsSelection {
    pub q_spec: QSpec,
    pub g_spec: GSpec,
    /// Cross-validated risk of the selected pair.
    pub cv_risk: f64,
    /// Every evaluated `(description, risk)` pair, in evaluation order.
    pub candidate_risks: Vec<(String, f64)>,
}

impl ApsSelection {
    /// The default: unadjusted working model with the known propensity.
    pub fn default_selection() -> Self {
        Self {
            q_spec: QSpec { covariate: None },
            g_spec: GSpec::Known,
            cv_risk: f64::NAN,
            candidate_risks: Vec::new(),
        }
    }
}

/// Cross-validated risk (mean squared influence curve) of one candidate
/// pair.
fn cv_risk_for(
    rows: &[ClusterLevelRow],
    order: &[usize],
    q: &QSpec,
    g: &GSpec,
    folds: &crate::learners::FoldAssignment,
) -> Result<f64> {
    let j = order.len();
    let mut total = 0.0;
    for fold in 0..folds.k {
        let train_pos = folds.training(fold);
        let valid_pos = folds.validation(fold);
        let train: Vec<ClusterLevelRow> =
            train_pos.iter().map(|&p| rows[order[p]].clone()).collect();
        let comp: TmleComponents = fit_candidate_tmle(&train, q, g)?;
        for &p in &valid_pos {
            let row = &rows[order[p]];
            let ic = comp.influence_value(row);
            total += ic * ic;
        }
    }
    Ok(total / j as f64)
}

/// Select the adjustment specification by collaborative cross-validation.
///
/// `candidates_q` must start with the unadjusted default, `candidates_g`
/// with the known propensity; both orderings break ties.
pub fn aps_select(
    rows: &[ClusterLevelRow],
    candidates_q: &[QSpec],
    candidates_g: &[GSpec],
    k: usize,
    seed: u64,
) -> Result<ApsSelection> {
    let j = rows.len();
    if j < k {
        return Err(Error::Precondition(format!("J = {j} smaller than k = {k} folds")));
    }
    if candidates_q.is_empty() || candidates_g.is_empty() {
        return Err(Error::Precondition("candidate lists must be nonempty".into()));
    }
    if candidates_q[0].covariate.is_some() {
        return Err(Error::Precondition("first q candidate must be the unadjusted default".into()));
    }
    if candidates_g[0] != GSpec::Known {
        return Err(Error::Precondition("first g candidate must be the known propensity".into()));
    }

    // Canonical processing order keeps the selection invariant to the
    // caller's row permutation.
    let order = super::tmle::canonical_row_order(rows);
    let folds = make_folds(j, k, seed)?;

    let mut candidate_risks = Vec::new();
    let mut best_q = 0usize;
    let mut best_risk = f64::INFINITY;
    for (qi, q) in candidates_q.iter().enumerate() {
        let risk = cv_risk_for(rows, &order, q, &GSpec::Known, &folds)?;
        candidate_risks.push((format!("q: {} | g: known(0.5)", q.describe()), risk));
        if risk < best_risk {
            best_risk = risk;
            best_q = qi;
        }
    }
    let q_sel = candidates_q[best_q].clone();

    let mut best_g = 0usize;
    for (gi, g) in candidates_g.iter().enumerate() {
        let risk = if *g == GSpec::Known && best_q < candidate_risks.len() {
            // Already evaluated during the q stage.
            candidate_risks[best_q].1
        } else {
            cv_risk_for(rows, &order, &q_sel, g, &folds)?
        };
        candidate_risks.push((format!("q: {} | g: {}", q_sel.describe(), g.describe()), risk));
        if risk < best_risk {
            best_risk = risk;
            best_g = gi;
        }
    }
    let g_sel = candidates_g[best_g].clone();

    Ok(ApsSelection { q_spec: q_sel, g_spec: g_sel, cv_risk: best_risk, candidate_risks })
}

/// Default candidate sets over the standard cluster covariates.
pub fn default_candidates() -> (Vec<QSpec>, Vec<GSpec>) {
    let covs = ["e1c", "e2c", "w1c", "w2c", "w3c"];
    let mut q = vec![QSpec { covariate: None }];
    q.extend(covs.iter().map(|c| QSpec { covariate: Some((*c).into()) }));
    let mut g = vec![GSpec::Known];
    g.extend(covs.iter().map(|c| GSpec::Logistic((*c).into())));
    (q, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(e1c: f64, a: u8, y: f64) -> ClusterLevelRow {
        ClusterLevelRow { e1c, e2c: 0.3, w1c: 0.5, w2c: 0.5, w3c: 0.5, a, y }
    }

    #[test]
    fn risks_table_contains_default_and_min() {
        let rows: Vec<ClusterLevelRow> = (0..20)
            .map(|i| {
                let e1 = (i as f64) / 20.0;
                row(e1, (i % 2) as u8, 0.2 + 0.1 * e1 + if i % 2 == 1 { 0.05 } else { 0.0 })
            })
            .collect();
        let (q, g) = default_candidates();
        let sel = aps_select(&rows, &q, &g, 5, 17).unwrap();
        assert!(sel
            .candidate_risks
            .iter()
            .any(|(d, _)| d.contains("q: unadjusted | g: known(0.5)")));
        let default_risk = sel
            .candidate_risks
            .iter()
            .find(|(d, _)| d == "q: unadjusted | g: known(0.5)")
            .unwrap()
            .1;
        assert!(sel.cv_risk <= default_risk + 1e-12);
    }

    #[test]
    fn strong_linear_signal_selects_covariate() {
        // y almost exactly linear in e1c: adjustment must win.
        let rows: Vec<ClusterLevelRow> = (0..30)
            .map(|i| {
                let e1 = (i as f64) / 30.0;
                let noise = ((i * 7919 % 13) as f64 - 6.0) * 0.001;
                row(e1, (i % 2) as u8, 5.0 * e1 + noise)
            })
            .collect();
        let (q, g) = default_candidates();
        let sel = aps_select(&rows, &q, &g, 5, 3).unwrap();
        assert_eq!(sel.q_spec.covariate.as_deref(), Some("e1c"));
    }
}
