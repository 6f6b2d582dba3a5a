//! Working generalized linear models fit from first principles.
//!
//! Binomial-logit models are fit by iteratively reweighted least squares
//! (Newton-Raphson on the log-likelihood); gaussian-identity models by the
//! weighted least squares closed form. Singular normal equations drop the
//! offending columns rather than fail; separation clamps coefficients and
//! reports `converged = false`.

use crate::error::{Error, Result};
use crate::learners::design::{CovariateSet, DesignSpec};

/// Outcome family and link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    BinomialLogit,
    GaussianIdentity,
}

/// Coefficient magnitude cap on the linear-predictor scale.
const COEF_CAP: f64 = 20.0;
/// Score-equation convergence tolerance.
const SCORE_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

/// A fitted working GLM.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub spec: DesignSpec,
    pub family: Family,
    /// One coefficient per term; dropped terms hold 0.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Indices of terms dropped for collinearity.
    pub dropped: Vec<usize>,
}

#[inline]
pub(crate) fn expit(x: f64) -> f64 {
    // Clamp to keep probabilities strictly inside (0, 1).
    1.0 / (1.0 + (-x.clamp(-30.0, 30.0)).exp())
}

/// Solve the symmetric system `a·x = b` in place by Gauss-Jordan,
/// dropping columns whose pivot collapses (collinearity).
///
/// Returns the solution (zeros in dropped positions) and the dropped indices.
fn solve_sym_drop(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> (Vec<f64>, Vec<usize>) {
    let scale = (0..p).map(|j| a[j * p + j]).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let tol = 1e-10 * scale;
    let mut dropped = Vec::new();
    for k in 0..p {
        let pivot = a[k * p + k];
        if pivot.abs() <= tol {
            dropped.push(k);
            for i in 0..p {
                a[i * p + k] = 0.0;
                a[k * p + i] = 0.0;
            }
            a[k * p + k] = 1.0;
            b[k] = 0.0;
            continue;
        }
        for i in 0..p {
            if i == k {
                continue;
            }
            let f = a[i * p + k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in 0..p {
                a[i * p + j] -= f * a[k * p + j];
            }
            b[i] -= f * b[k];
        }
    }
    let x = (0..p).map(|k| b[k] / a[k * p + k]).collect();
    (x, dropped)
}

/// Fit a working GLM.
///
/// `weights` default to 1; `offset` is added to the linear predictor and is
/// not part of the coefficient vector.
pub fn fit_glm(
    spec: &DesignSpec,
    family: Family,
    covs: &CovariateSet,
    y: &[f64],
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
) -> Result<GlmFit> {
    let n = covs.n_rows();
    if y.len() != n {
        return Err(Error::Precondition(format!("y has length {}, expected {n}", y.len())));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::Precondition("weights length mismatch".into()));
        }
        if !w.iter().any(|&wi| wi > 0.0) {
            return Err(Error::Precondition("no observation with positive weight".into()));
        }
    } else if n == 0 {
        return Err(Error::Precondition("no observations".into()));
    }
    if let Some(o) = offset {
        if o.len() != n {
            return Err(Error::Precondition("offset length mismatch".into()));
        }
    }
    if family == Family::BinomialLogit && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Precondition("binomial outcomes must be 0 or 1".into()));
    }

    let p = spec.len();
    let x = spec.build_matrix(covs)?;
    let wt = |i: usize| weights.map_or(1.0, |w| w[i]);
    let off = |i: usize| offset.map_or(0.0, |o| o[i]);

    match family {
        Family::GaussianIdentity => {
            let mut xtx = vec![0.0; p * p];
            let mut xty = vec![0.0; p];
            for i in 0..n {
                let wi = wt(i);
                if wi == 0.0 {
                    continue;
                }
                let xi = &x[i * p..(i + 1) * p];
                let ri = y[i] - off(i);
                for j in 0..p {
                    xty[j] += wi * xi[j] * ri;
                    for l in j..p {
                        xtx[j * p + l] += wi * xi[j] * xi[l];
                    }
                }
            }
            for j in 0..p {
                for l in 0..j {
                    xtx[j * p + l] = xtx[l * p + j];
                }
            }
            let (beta, dropped) = solve_sym_drop(xtx, xty, p);
            Ok(GlmFit {
                spec: spec.clone(),
                family,
                coefficients: beta,
                converged: true,
                iterations: 1,
                dropped,
            })
        }
        Family::BinomialLogit => {
            let mut beta = vec![0.0; p];
            let mut dropped: Vec<usize> = Vec::new();
            let mut converged = false;
            let mut iterations = 0;
            for iter in 1..=MAX_ITER {
                iterations = iter;
                let mut xtwx = vec![0.0; p * p];
                let mut score = vec![0.0; p];
                for i in 0..n {
                    let wi = wt(i);
                    if wi == 0.0 {
                        continue;
                    }
                    let xi = &x[i * p..(i + 1) * p];
                    let eta: f64 =
                        xi.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + off(i);
                    let mu = expit(eta);
                    let v = wi * mu * (1.0 - mu);
                    let r = wi * (y[i] - mu);
                    for j in 0..p {
                        score[j] += xi[j] * r;
                        for l in j..p {
                            xtwx[j * p + l] += v * xi[j] * xi[l];
                        }
                    }
                }
                for j in 0..p {
                    for l in 0..j {
                        xtwx[j * p + l] = xtwx[l * p + j];
                    }
                }
                let max_score = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
                if max_score < SCORE_TOL {
                    converged = true;
                    break;
                }
                let (step, drop_now) = solve_sym_drop(xtwx, score.clone(), p);
                for d in drop_now {
                    if !dropped.contains(&d) {
                        dropped.push(d);
                    }
                }
                for j in 0..p {
                    beta[j] += step[j];
                }
                // Separation guard: runaway coefficients cannot converge.
                if beta.iter().any(|b| b.abs() > COEF_CAP) {
                    break;
                }
            }
            for d in &dropped {
                beta[*d] = 0.0;
            }
            if !converged {
                for b in beta.iter_mut() {
                    *b = b.clamp(-COEF_CAP, COEF_CAP);
                }
            }
            Ok(GlmFit { spec: spec.clone(), family, coefficients: beta, converged, iterations, dropped })
        }
    }
}

/// Predictions from a fitted GLM: probabilities for binomial-logit,
/// linear predictions for gaussian-identity.
pub fn predict(fit: &GlmFit, covs: &CovariateSet) -> Result<Vec<f64>> {
    let p = fit.spec.len();
    let x = fit.spec.build_matrix(covs)?;
    let n = covs.n_rows();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let eta: f64 =
            x[i * p..(i + 1) * p].iter().zip(&fit.coefficients).map(|(a, b)| a * b).sum();
        out.push(match fit.family {
            Family::BinomialLogit => expit(eta),
            Family::GaussianIdentity => eta,
        });
    }
    Ok(out)
}

/// Max-norm of the weighted score vector `Σ wᵢ xᵢ (yᵢ − p̂ᵢ)`; used by tests
/// to verify the IRLS solution.
pub fn score_max_norm(
    fit: &GlmFit,
    covs: &CovariateSet,
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<f64> {
    let p = fit.spec.len();
    let x = fit.spec.build_matrix(covs)?;
    let mut score = vec![0.0; p];
    for i in 0..covs.n_rows() {
        let wi = weights.map_or(1.0, |w| w[i]);
        let xi = &x[i * p..(i + 1) * p];
        let eta: f64 = xi.iter().zip(&fit.coefficients).map(|(a, b)| a * b).sum();
        let mu = match fit.family {
            Family::BinomialLogit => expit(eta),
            Family::GaussianIdentity => eta,
        };
        for j in 0..p {
            score[j] += wi * xi[j] * (y[i] - mu);
        }
    }
    Ok(score
        .iter()
        .enumerate()
        .filter(|(j, _)| !fit.dropped.contains(j))
        .fold(0.0f64, |m, (_, s)| m.max(s.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_binomial_balanced() {
        let covs = CovariateSet::from_columns(&[("w", &[0.0; 10][..])]).unwrap();
        let y = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let fit = fit_glm(
            &DesignSpec::intercept_only(),
            Family::BinomialLogit,
            &covs,
            &y,
            None,
            None,
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-8, "logit(0.5) = 0");
    }

    #[test]
    fn gaussian_intercept_is_mean() {
        let covs = CovariateSet::from_columns(&[("w", &[0.0; 4][..])]).unwrap();
        let y = [1.0, 2.0, 3.0, 6.0];
        let fit = fit_glm(
            &DesignSpec::intercept_only(),
            Family::GaussianIdentity,
            &covs,
            &y,
            None,
            None,
        )
        .unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn predict_all_zero_coefficients_is_half() {
        let covs = CovariateSet::from_columns(&[("w", &[0.3, -2.0][..])]).unwrap();
        let fit = GlmFit {
            spec: DesignSpec::main_effects(&["w"]),
            family: Family::BinomialLogit,
            coefficients: vec![0.0, 0.0],
            converged: true,
            iterations: 1,
            dropped: vec![],
        };
        let p = predict(&fit, &covs).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn predict_matches_hand_computed_logit() {
        let covs = CovariateSet::from_columns(&[("w", &[0.0, 1.0, -1.0][..])]).unwrap();
        let fit = GlmFit {
            spec: DesignSpec::main_effects(&["w"]),
            family: Family::BinomialLogit,
            coefficients: vec![0.5, -1.25],
            converged: true,
            iterations: 1,
            dropped: vec![],
        };
        let p = predict(&fit, &covs).unwrap();
        for (pi, eta) in p.iter().zip([0.5, -0.75, 1.75]) {
            let want = 1.0 / (1.0 + (-eta as f64).exp());
            assert!((pi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_column_dropped() {
        // w2 = 2*w1 exactly.
        let w1 = [0.1, 0.4, 0.7, 0.9, 0.2, 0.6];
        let w2: Vec<f64> = w1.iter().map(|v| 2.0 * v).collect();
        let covs =
            CovariateSet::from_columns(&[("w1", &w1[..]), ("w2", &w2[..])]).unwrap();
        let y = [0.0, 1.0, 1.0, 1.0, 0.0, 1.0];
        let fit = fit_glm(
            &DesignSpec::main_effects(&["w1", "w2"]),
            Family::BinomialLogit,
            &covs,
            &y,
            None,
            None,
        )
        .unwrap();
        assert!(!fit.dropped.is_empty());
        let dropped = fit.dropped[0];
        assert_eq!(fit.coefficients[dropped], 0.0);
    }

    #[test]
    fn separation_clamps_and_flags() {
        // Perfectly separated data on a small covariate scale, so a finite
        // MLE would need coefficients beyond the cap.
        let w = [-0.50, -0.375, -0.25, 0.25, 0.375, 0.50];
        let covs = CovariateSet::from_columns(&[("w", &w[..])]).unwrap();
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = fit_glm(
            &DesignSpec::main_effects(&["w"]),
            Family::BinomialLogit,
            &covs,
            &y,
            None,
            None,
        )
        .unwrap();
        assert!(!fit.converged);
        assert!(fit.coefficients.iter().all(|b| b.abs() <= COEF_CAP));
    }

    #[test]
    fn offset_shifts_intercept() {
        let covs = CovariateSet::from_columns(&[("w", &[0.0; 8][..])]).unwrap();
        let y = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let offset = vec![0.7; 8];
        let with = fit_glm(
            &DesignSpec::intercept_only(),
            Family::BinomialLogit,
            &covs,
            &y,
            None,
            Some(&offset),
        )
        .unwrap();
        let without = fit_glm(
            &DesignSpec::intercept_only(),
            Family::BinomialLogit,
            &covs,
            &y,
            None,
            None,
        )
        .unwrap();
        assert!((with.coefficients[0] + 0.7 - without.coefficients[0]).abs() < 1e-6);
    }
}
