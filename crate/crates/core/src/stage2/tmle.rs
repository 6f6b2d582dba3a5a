//! Cluster-level TMLE for the treatment effect on Stage-1 endpoints.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learners::{fit_glm, CovariateSet, DesignSpec, Family};
use crate::stage2::aps::{ApsSelection, GSpec, QSpec};
use crate::stage2::inference::inference_t;

/// Propensity truncation bounds for estimated cluster-level propensities.
pub const G_BOUNDS: (f64, f64) = (0.05, 0.95);

/// One cluster's Stage-2 row: candidate adjustment covariates, arm, and the
/// Stage-1 endpoint estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterLevelRow {
    pub e1c: f64,
    pub e2c: f64,
    pub w1c: f64,
    pub w2c: f64,
    pub w3c: f64,
    pub a: u8,
    pub y: f64,
}

impl ClusterLevelRow {
    pub fn covariate(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "e1c" => self.e1c,
            "e2c" => self.e2c,
            "w1c" => self.w1c,
            "w2c" => self.w2c,
            "w3c" => self.w3c,
            other => {
                return Err(Error::Precondition(format!(
                    "unknown cluster covariate '{other}'"
                )))
            }
        })
    }
}

/// Stage-2 estimator label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage2Method {
    Unadjusted,
    TmleAps,
}

impl std::fmt::Display for Stage2Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage2Method::Unadjusted => write!(f, "unadjusted"),
            Stage2Method::TmleAps => write!(f, "tmle-aps"),
        }
    }
}

/// The Stage-2 effect estimate with influence-curve inference.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    /// Risk difference `Ψ̂`.
    pub psi: f64,
    pub se: f64,
    pub df: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
    /// Cluster-level influence curve, aligned with the input rows.
    pub ic: Vec<f64>,
    pub selection: Option<ApsSelection>,
    pub method: Stage2Method,
    /// Set when an estimated propensity was truncated to the bounds.
    pub g_truncated: bool,
}

/// Canonical processing order for cluster rows (content-sorted), so effect
/// estimates are bitwise invariant to the caller's row permutation.
pub(crate) fn canonical_row_order(rows: &[ClusterLevelRow]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by_key(|&i| {
        let r = &rows[i];
        (
            r.y.to_bits(),
            r.a,
            r.e1c.to_bits(),
            r.e2c.to_bits(),
            r.w1c.to_bits(),
            r.w2c.to_bits(),
            r.w3c.to_bits(),
        )
    });
    idx
}

fn check_arms(rows: &[ClusterLevelRow]) -> Result<()> {
    let n1 = rows.iter().filter(|r| r.a == 1).count();
    let n0 = rows.len() - n1;
    if n0 < 2 || n1 < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 clusters per arm (found {n0} control, {n1} intervention)"
        )));
    }
    Ok(())
}

/// Unadjusted contrast of arm-specific mean endpoints with influence-curve
/// Student-t inference.
pub fn estimate_effect_unadjusted(rows: &[ClusterLevelRow]) -> Result<EffectEstimate> {
    check_arms(rows)?;
    let j = rows.len();
    let order = canonical_row_order(rows);

    let mut sum1 = 0.0;
    let mut sum0 = 0.0;
    let mut j1 = 0usize;
    for &i in &order {
        if rows[i].a == 1 {
            sum1 += rows[i].y;
            j1 += 1;
        } else {
            sum0 += rows[i].y;
        }
    }
    let j0 = j - j1;
    let mean1 = sum1 / j1 as f64;
    let mean0 = sum0 / j0 as f64;
    let psi = mean1 - mean0;
    let p1 = j1 as f64 / j as f64;
    let p0 = j0 as f64 / j as f64;

    let ic: Vec<f64> = rows
        .iter()
        .map(|r| {
            if r.a == 1 {
                (r.y - mean1) / p1
            } else {
                -(r.y - mean0) / p0
            }
        })
        .collect();
    let ic_canon: Vec<f64> = order.iter().map(|&i| ic[i]).collect();
    let df = j - 2;
    let t = inference_t(psi, &ic_canon, df)?;
    Ok(EffectEstimate {
        psi,
        se: t.se,
        df,
        ci_lo: t.ci_lo,
        ci_hi: t.ci_hi,
        p_value: t.p_value,
        ic,
        selection: None,
        method: Stage2Method::Unadjusted,
        g_truncated: false,
    })
}

/// Fitted components of one candidate cluster-level TMLE.
pub(crate) struct TmleComponents {
    q_coefs: Vec<f64>,
    q_cov: Option<String>,
    g: GFit,
    pub eps1: f64,
    pub eps0: f64,
    pub psi: f64,
    pub g_truncated: bool,
}

enum GFit {
    Known,
    Logistic { cov: String, coefs: Vec<f64> },
}

impl TmleComponents {
    fn qbar(&self, a: f64, row: &ClusterLevelRow) -> f64 {
        let mut eta = self.q_coefs[0] + self.q_coefs[1] * a;
        if let Some(cov) = &self.q_cov {
            eta += self.q_coefs[2] * row.covariate(cov).expect("validated covariate");
        }
        eta
    }

    fn ghat(&self, row: &ClusterLevelRow) -> f64 {
        match &self.g {
            GFit::Known => 0.5,
            GFit::Logistic { cov, coefs } => {
                let eta = coefs[0]
                    + coefs[1] * row.covariate(cov).expect("validated covariate");
                let p = 1.0 / (1.0 + (-eta.clamp(-30.0, 30.0)).exp());
                p.clamp(G_BOUNDS.0, G_BOUNDS.1)
            }
        }
    }

    /// Targeted predictions and the candidate's influence-curve value for
    /// one (possibly held-out) row.
    pub fn influence_value(&self, row: &ClusterLevelRow) -> f64 {
        let g = self.ghat(row);
        let a = f64::from(row.a);
        let h1 = a / g;
        let h0 = -(1.0 - a) / (1.0 - g);
        let qstar_obs = self.qbar(a, row) + self.eps1 * h1 + self.eps0 * h0;
        let qstar1 = self.qbar(1.0, row) + self.eps1 / g;
        let qstar0 = self.qbar(0.0, row) - self.eps0 / (1.0 - g);
        (h1 + h0) * (row.y - qstar_obs) + qstar1 - qstar0 - self.psi
    }
}

/// Fit the candidate TMLE (working outcome model, propensity, linear
/// fluctuation, point estimate) on the given rows.
pub(crate) fn fit_candidate_tmle(
    rows: &[ClusterLevelRow],
    q: &QSpec,
    g: &GSpec,
) -> Result<TmleComponents> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Precondition("need at least 2 rows to fit".into()));
    }
    let a_col: Vec<f64> = rows.iter().map(|r| f64::from(r.a)).collect();
    let y_col: Vec<f64> = rows.iter().map(|r| r.y).collect();

    // Working outcome regression: gaussian, arm main effect, optional
    // single covariate.
    let (covs, spec, q_cov) = match &q.covariate {
        None => (
            CovariateSet::from_columns(&[("a", &a_col)])?,
            DesignSpec::main_effects(&["a"]),
            None,
        ),
        Some(c) => {
            let x: Vec<f64> =
                rows.iter().map(|r| r.covariate(c)).collect::<Result<Vec<_>>>()?;
            (
                CovariateSet::from_columns(&[("a", &a_col), (c.as_str(), &x)])?,
                DesignSpec::main_effects(&["a", c]),
                Some(c.clone()),
            )
        }
    };
    let q_fit = fit_glm(&spec, Family::GaussianIdentity, &covs, &y_col, None, None)?;
    let mut q_coefs = q_fit.coefficients.clone();
    if q_coefs.len() == 2 {
        q_coefs.push(0.0);
    }

    // Propensity.
    let mut g_truncated = false;
    let g_fit = match g {
        GSpec::Known => GFit::Known,
        GSpec::Logistic(c) => {
            let x: Vec<f64> =
                rows.iter().map(|r| r.covariate(c)).collect::<Result<Vec<_>>>()?;
            let gcovs = CovariateSet::from_columns(&[(c.as_str(), &x)])?;
            let fit = fit_glm(
                &DesignSpec::main_effects(&[c]),
                Family::BinomialLogit,
                &gcovs,
                &a_col,
                None,
                None,
            )?;
            GFit::Logistic { cov: c.clone(), coefs: fit.coefficients }
        }
    };

    let mut comp = TmleComponents {
        q_coefs,
        q_cov,
        g: g_fit,
        eps1: 0.0,
        eps0: 0.0,
        psi: 0.0,
        g_truncated: false,
    };

    // Linear fluctuation: least squares of (y - qbar) on (H1, H0). The
    // clever covariates have disjoint support so the system is diagonal.
    let mut num1 = 0.0;
    let mut den1 = 0.0;
    let mut num0 = 0.0;
    let mut den0 = 0.0;
    for row in rows {
        let g_i = comp.ghat(row);
        if let GFit::Logistic { .. } = comp.g {
            let raw = {
                let GFit::Logistic { cov, coefs } = &comp.g else { unreachable!() };
                let eta = coefs[0] + coefs[1] * row.covariate(cov)?;
                1.0 / (1.0 + (-eta.clamp(-30.0, 30.0)).exp())
            };
            if raw < G_BOUNDS.0 || raw > G_BOUNDS.1 {
                g_truncated = true;
            }
        }
        let a = f64::from(row.a);
        let resid = row.y - comp.qbar(a, row);
        if row.a == 1 {
            let h1 = 1.0 / g_i;
            num1 += h1 * resid;
            den1 += h1 * h1;
        } else {
            let h0 = -1.0 / (1.0 - g_i);
            num0 += h0 * resid;
            den0 += h0 * h0;
        }
    }
    comp.eps1 = if den1 > 0.0 { num1 / den1 } else { 0.0 };
    comp.eps0 = if den0 > 0.0 { num0 / den0 } else { 0.0 };
    comp.g_truncated = g_truncated;

    // Point estimate: mean contrast of targeted arm-specific predictions.
    let mut total = 0.0;
    for row in rows {
        let g_i = comp.ghat(row);
        let qstar1 = comp.qbar(1.0, row) + comp.eps1 / g_i;
        let qstar0 = comp.qbar(0.0, row) - comp.eps0 / (1.0 - g_i);
        total += qstar1 - qstar0;
    }
    comp.psi = total / n as f64;
    Ok(comp)
}

/// Cluster-level TMLE effect estimate under the given (typically
/// APS-selected) adjustment specification.
pub fn estimate_effect_tmle(
    rows: &[ClusterLevelRow],
    selection: &ApsSelection,
) -> Result<EffectEstimate> {
    check_arms(rows)?;
    let j = rows.len();
    let order = canonical_row_order(rows);
    let rows_canon: Vec<ClusterLevelRow> = order.iter().map(|&i| rows[i].clone()).collect();

    let comp = fit_candidate_tmle(&rows_canon, &selection.q_spec, &selection.g_spec)?;
    let ic_canon: Vec<f64> = rows_canon.iter().map(|r| comp.influence_value(r)).collect();
    let mut ic = vec![0.0; j];
    for (pos, &orig) in order.iter().enumerate() {
        ic[orig] = ic_canon[pos];
    }
    let df = j - 2;
    let t = inference_t(comp.psi, &ic_canon, df)?;
    Ok(EffectEstimate {
        psi: comp.psi,
        se: t.se,
        df,
        ci_lo: t.ci_lo,
        ci_hi: t.ci_hi,
        p_value: t.p_value,
        ic,
        selection: Some(selection.clone()),
        method: Stage2Method::TmleAps,
        g_truncated: comp.g_truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(e1c: f64, a: u8, y: f64) -> ClusterLevelRow {
        ClusterLevelRow { e1c, e2c: 0.0, w1c: 0.0, w2c: 0.0, w3c: 0.0, a, y }
    }

    #[test]
    fn unadjusted_arithmetic() {
        let rows =
            vec![row(0.0, 1, 0.4), row(0.1, 1, 0.6), row(0.2, 0, 0.1), row(0.3, 0, 0.3)];
        let e = estimate_effect_unadjusted(&rows).unwrap();
        assert!((e.psi - 0.3).abs() < 1e-15);
        assert_eq!(e.df, 2);
    }

    #[test]
    fn identical_outcomes_give_null() {
        let rows =
            vec![row(0.0, 1, 0.5), row(0.1, 1, 0.5), row(0.2, 0, 0.5), row(0.3, 0, 0.5)];
        let e = estimate_effect_unadjusted(&rows).unwrap();
        assert_eq!(e.psi, 0.0);
        assert!((e.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_arm_errors() {
        let rows = vec![row(0.0, 1, 0.5), row(0.1, 1, 0.4), row(0.2, 1, 0.3), row(0.3, 1, 0.2)];
        assert!(estimate_effect_unadjusted(&rows).is_err());
    }

    #[test]
    fn unadjusted_se_matches_two_sample_formula() {
        let ys1 = [0.42, 0.38, 0.51, 0.47, 0.55, 0.33, 0.46, 0.40];
        let ys0 = [0.31, 0.29, 0.35, 0.41, 0.28, 0.37, 0.30, 0.36];
        let mut rows = Vec::new();
        for (i, &y) in ys1.iter().enumerate() {
            rows.push(row(i as f64, 1, y));
        }
        for (i, &y) in ys0.iter().enumerate() {
            rows.push(row(i as f64 + 10.0, 0, y));
        }
        let e = estimate_effect_unadjusted(&rows).unwrap();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
        };
        let two_sample = (var(&ys1) / 8.0 + var(&ys0) / 8.0).sqrt();
        let j = 16.0;
        // IC-based SE equals the two-sample formula up to a J/(J-1)-type
        // finite-sample factor.
        let ratio = e.se / two_sample;
        assert!(
            (ratio - 1.0).abs() < 2.5 / j,
            "se ratio {ratio} deviates more than O(1/J)"
        );
    }

    #[test]
    fn tmle_default_selection_collapses_to_unadjusted() {
        let rows = vec![
            row(0.9, 1, 0.45),
            row(0.8, 1, 0.52),
            row(0.2, 1, 0.61),
            row(0.4, 0, 0.30),
            row(0.5, 0, 0.25),
            row(0.6, 0, 0.38),
        ];
        let unadj = estimate_effect_unadjusted(&rows).unwrap();
        let tmle = estimate_effect_tmle(&rows, &ApsSelection::default_selection()).unwrap();
        assert!(
            (tmle.psi - unadj.psi).abs() < 1e-10,
            "{} vs {}",
            tmle.psi,
            unadj.psi
        );
    }

    #[test]
    fn location_invariance() {
        let base = vec![
            row(0.9, 1, 0.45),
            row(0.8, 1, 0.52),
            row(0.2, 0, 0.30),
            row(0.4, 0, 0.25),
            row(0.5, 1, 0.61),
            row(0.6, 0, 0.38),
        ];
        let shifted: Vec<ClusterLevelRow> = base
            .iter()
            .map(|r| ClusterLevelRow { y: r.y + 10.0, ..r.clone() })
            .collect();
        let sel = ApsSelection {
            q_spec: QSpec { covariate: Some("e1c".into()) },
            g_spec: GSpec::Known,
            cv_risk: f64::NAN,
            candidate_risks: vec![],
        };
        let e1 = estimate_effect_tmle(&base, &sel).unwrap();
        let e2 = estimate_effect_tmle(&shifted, &sel).unwrap();
        assert!((e1.psi - e2.psi).abs() < 1e-10);
        for (a, b) in e1.ic.iter().zip(&e2.ic) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn tmle_ic_mean_zero_and_score_solved() {
        let rows: Vec<ClusterLevelRow> = (0..24)
            .map(|i| {
                let e1 = (i as f64) / 24.0;
                let a = (i % 2) as u8;
                row(e1, a, 0.2 + 0.3 * e1 + 0.1 * f64::from(a) + ((i * 31 % 7) as f64) * 0.01)
            })
            .collect();
        let sel = ApsSelection {
            q_spec: QSpec { covariate: Some("e1c".into()) },
            g_spec: GSpec::Known,
            cv_risk: f64::NAN,
            candidate_risks: vec![],
        };
        let e = estimate_effect_tmle(&rows, &sel).unwrap();
        let mean_ic: f64 = e.ic.iter().sum::<f64>() / e.ic.len() as f64;
        assert!(mean_ic.abs() < 1e-10, "mean ic = {mean_ic}");
    }

    #[test]
    fn arm_relabel_antisymmetry() {
        let rows: Vec<ClusterLevelRow> = (0..12)
            .map(|i| row((i as f64) / 12.0, (i % 2) as u8, 0.3 + 0.05 * (i as f64)))
            .collect();
        let flipped: Vec<ClusterLevelRow> =
            rows.iter().map(|r| ClusterLevelRow { a: 1 - r.a, ..r.clone() }).collect();
        let e1 = estimate_effect_unadjusted(&rows).unwrap();
        let e2 = estimate_effect_unadjusted(&flipped).unwrap();
        assert!((e1.psi + e2.psi).abs() < 1e-14);
        let t1 = estimate_effect_tmle(&rows, &ApsSelection::default_selection()).unwrap();
        let t2 = estimate_effect_tmle(&flipped, &ApsSelection::default_selection()).unwrap();
        assert!((t1.psi + t2.psi).abs() < 1e-12);
    }
}
