//! Cross-validated ensemble (Super Learner) over working GLMs and the mean.
//!
//! Candidate learners are fit per training fold, their held-out predictions
//! assembled, and convex ensemble weights chosen to minimize cross-validated
//! negative Bernoulli log-likelihood on the simplex.

use crate::error::{Error, Result};
use crate::learners::design::{CovariateSet, DesignSpec};
use crate::learners::folds::make_folds;
use crate::learners::glm::{fit_glm, predict, Family, GlmFit};

/// Prediction clipping bounds for the meta-learning loss.
const PRED_CLIP: (f64, f64) = (1e-6, 1.0 - 1e-6);
/// Objective-change convergence threshold for the weight solver.
const EG_TOL: f64 = 1e-10;
const EG_MAX_ITER: usize = 10_000;

/// A candidate learner.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    /// Empirical mean of the outcomes.
    Mean,
    /// Binomial-logit working GLM with the given design.
    Glm(DesignSpec),
}

impl Learner {
    pub fn describe(&self) -> String {
        match self {
            Learner::Mean => "mean".into(),
            Learner::Glm(spec) => format!("glm[{}]", spec.formula()),
        }
    }
}

/// A fitted candidate ready for prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateFit {
    Mean(f64),
    Glm(GlmFit),
}

impl CandidateFit {
    pub fn predict(&self, covs: &CovariateSet) -> Result<Vec<f64>> {
        match self {
            CandidateFit::Mean(m) => Ok(vec![*m; covs.n_rows()]),
            CandidateFit::Glm(fit) => predict(fit, covs),
        }
    }
}

/// The fitted ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperLearnerFit {
    pub learners: Vec<Learner>,
    /// Full-data refits, aligned with `learners`.
    pub candidates: Vec<CandidateFit>,
    /// Convex weights on the probability simplex, aligned with `learners`.
    pub weights: Vec<f64>,
    /// Per-candidate cross-validated risk (mean negative log-likelihood).
    pub cv_risk: Vec<f64>,
    pub folds: usize,
}

impl SuperLearnerFit {
    /// Ensemble predictions: the weighted combination of candidate
    /// predictions.
    pub fn predict(&self, covs: &CovariateSet) -> Result<Vec<f64>> {
        let mut out = vec![0.0; covs.n_rows()];
        for (w, cand) in self.weights.iter().zip(&self.candidates) {
            if *w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(cand.predict(covs)?) {
                *o += w * p;
            }
        }
        Ok(out)
    }

    /// Cross-validated risk of the weighted ensemble on the stored CV
    /// predictions (used to check the dominance property).
    pub fn ensemble_cv_risk(&self, cv_predictions: &[f64], outcomes: &[f64]) -> f64 {
        let m = self.weights.len();
        let n = outcomes.len();
        let combined: Vec<f64> = (0..n)
            .map(|i| {
                (0..m).map(|j| self.weights[j] * cv_predictions[i * m + j]).sum::<f64>()
            })
            .collect();
        neg_log_lik(&combined, outcomes)
    }
}

fn clip(p: f64) -> f64 {
    p.clamp(PRED_CLIP.0, PRED_CLIP.1)
}

fn neg_log_lik(pred: &[f64], y: &[f64]) -> f64 {
    let n = pred.len() as f64;
    pred.iter()
        .zip(y)
        .map(|(&p, &yi)| {
            let p = clip(p);
            -(yi * p.ln() + (1.0 - yi) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

fn fit_candidate(learner: &Learner, covs: &CovariateSet, y: &[f64]) -> CandidateFit {
    match learner {
        Learner::Mean => {
            CandidateFit::Mean(y.iter().sum::<f64>() / y.len().max(1) as f64)
        }
        Learner::Glm(spec) => {
            match fit_glm(spec, Family::BinomialLogit, covs, y, None, None) {
                Ok(fit) => CandidateFit::Glm(fit),
                // Degenerate training folds fall back to the mean.
                Err(_) => CandidateFit::Mean(y.iter().sum::<f64>() / y.len().max(1) as f64),
            }
        }
    }
}

/// Fit the Super Learner.
///
/// If the outcomes are constant the ensemble degenerates to the mean learner
/// with weight 1.
pub fn fit_super_learner(
    library: &[Learner],
    covs: &CovariateSet,
    y: &[f64],
    k: usize,
    seed: u64,
) -> Result<SuperLearnerFit> {
    let n = covs.n_rows();
    if y.len() != n {
        return Err(Error::Precondition("outcome length mismatch".into()));
    }
    if n < k {
        return Err(Error::Precondition(format!("n = {n} smaller than k = {k}")));
    }
    if library.is_empty() {
        return Err(Error::Precondition("empty learner library".into()));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Precondition("outcomes must be binary".into()));
    }

    let mean = y.iter().sum::<f64>() / n as f64;
    if y.iter().all(|&v| v == y[0]) {
        let fit = CandidateFit::Mean(mean);
        let risk = neg_log_lik(&vec![mean; n], y);
        return Ok(SuperLearnerFit {
            learners: vec![Learner::Mean],
            candidates: vec![fit],
            weights: vec![1.0],
            cv_risk: vec![risk],
            folds: k,
        });
    }

    let m = library.len();
    let folds = make_folds(n, k, seed)?;
    let mut cv_pred = vec![0.0; n * m];
    for fold in 0..k {
        let train = folds.training(fold);
        let valid = folds.validation(fold);
        let train_covs = covs.subset(&train);
        let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let valid_covs = covs.subset(&valid);
        for (j, learner) in library.iter().enumerate() {
            let cand = fit_candidate(learner, &train_covs, &train_y);
            let preds = cand.predict(&valid_covs)?;
            for (&i, p) in valid.iter().zip(preds) {
                cv_pred[i * m + j] = clip(p);
            }
        }
    }

    let weights = solve_simplex_weights(&cv_pred, n, m, y)?;
    let cv_risk: Vec<f64> = (0..m)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| cv_pred[i * m + j]).collect();
            neg_log_lik(&col, y)
        })
        .collect();
    let candidates: Vec<CandidateFit> =
        library.iter().map(|l| fit_candidate(l, covs, y)).collect();

    Ok(SuperLearnerFit { learners: library.to_vec(), candidates, weights, cv_risk, folds: k })
}

/// Minimize mean negative log-likelihood of convex-combined predictions over
/// the probability simplex by exponentiated gradient descent.
///
/// `predictions` is row-major n×m and must already be clipped inside (0, 1).
pub fn solve_simplex_weights(
    predictions: &[f64],
    n: usize,
    m: usize,
    outcomes: &[f64],
) -> Result<Vec<f64>> {
    if predictions.len() != n * m || outcomes.len() != n {
        return Err(Error::Precondition("prediction matrix shape mismatch".into()));
    }
    if m == 0 {
        return Err(Error::Precondition("no candidates".into()));
    }
    if m == 1 {
        return Ok(vec![1.0]);
    }

    let objective = |w: &[f64]| -> f64 {
        let mut total = 0.0;
        for i in 0..n {
            let q: f64 =
                (0..m).map(|j| w[j] * predictions[i * m + j]).sum::<f64>().clamp(
                    PRED_CLIP.0,
                    PRED_CLIP.1,
                );
            total -= outcomes[i] * q.ln() + (1.0 - outcomes[i]) * (1.0 - q).ln();
        }
        total / n as f64
    };

    let mut w = vec![1.0 / m as f64; m];
    let mut obj = objective(&w);
    let mut step = 1.0;
    for _ in 0..EG_MAX_ITER {
        let mut grad = vec![0.0; m];
        for i in 0..n {
            let q: f64 = (0..m)
                .map(|j| w[j] * predictions[i * m + j])
                .sum::<f64>()
                .clamp(PRED_CLIP.0, PRED_CLIP.1);
            let factor = (q - outcomes[i]) / (q * (1.0 - q));
            for j in 0..m {
                grad[j] += factor * predictions[i * m + j];
            }
        }
        for g in grad.iter_mut() {
            *g /= n as f64;
        }

        // Multiplicative update with backtracking on the step size.
        let mut improved = false;
        while step > 1e-12 {
            let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1e-12);
            let mut cand: Vec<f64> =
                w.iter().zip(&grad).map(|(wi, gi)| wi * (-step * gi / gmax).exp()).collect();
            let s: f64 = cand.iter().sum();
            for c in cand.iter_mut() {
                *c /= s;
            }
            let cand_obj = objective(&cand);
            if cand_obj <= obj {
                let done = (obj - cand_obj).abs() < EG_TOL;
                w = cand;
                obj = cand_obj;
                improved = true;
                if done {
                    step = 0.0; // force exit
                }
                break;
            }
            step *= 0.5;
        }
        if !improved || step == 0.0 {
            break;
        }
        step = (step * 1.2).min(4.0);
    }

    // The returned point must be at least as good as every vertex.
    let mut best_vertex = usize::MAX;
    let mut best_obj = obj;
    for j in 0..m {
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        let vo = objective(&v);
        if vo < best_obj {
            best_obj = vo;
            best_vertex = j;
        }
    }
    if best_vertex != usize::MAX {
        let mut v = vec![0.0; m];
        v[best_vertex] = 1.0;
        return Ok(v);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xorshift(state: &mut u64) -> f64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn single_candidate_gets_weight_one() {
        let covs = CovariateSet::from_columns(&[("w", &[0.1, 0.9, 0.4, 0.7][..])]).unwrap();
        let y = [0.0, 1.0, 0.0, 1.0];
        let fit = fit_super_learner(&[Learner::Mean], &covs, &y, 2, 9).unwrap();
        assert_eq!(fit.weights, vec![1.0]);
        let preds = fit.predict(&covs).unwrap();
        assert!(preds.iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn constant_outcome_degenerates_to_mean() {
        let covs = CovariateSet::from_columns(&[("w", &[0.1, 0.9, 0.4, 0.7][..])]).unwrap();
        let y = [1.0; 4];
        let fit = fit_super_learner(
            &[Learner::Mean, Learner::Glm(DesignSpec::main_effects(&["w"]))],
            &covs,
            &y,
            2,
            9,
        )
        .unwrap();
        assert_eq!(fit.weights, vec![1.0]);
        assert_eq!(fit.candidates, vec![CandidateFit::Mean(1.0)]);
    }

    #[test]
    fn weights_lie_on_simplex() {
        let mut st = 77u64;
        let n = 80;
        let w: Vec<f64> = (0..n).map(|_| xorshift(&mut st)).collect();
        let y: Vec<f64> =
            w.iter().map(|&wi| f64::from(xorshift(&mut st) < 0.2 + 0.6 * wi)).collect();
        let covs = CovariateSet::from_columns(&[("w", &w[..])]).unwrap();
        let fit = fit_super_learner(
            &[Learner::Mean, Learner::Glm(DesignSpec::main_effects(&["w"]))],
            &covs,
            &y,
            5,
            4,
        )
        .unwrap();
        let sum: f64 = fit.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert!(fit.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn identical_columns_objective_matches_single() {
        let n = 40;
        let mut st = 5u64;
        let y: Vec<f64> = (0..n).map(|_| f64::from(xorshift(&mut st) < 0.4)).collect();
        let p: Vec<f64> = (0..n).map(|_| 0.2 + 0.6 * xorshift(&mut st)).collect();
        let mut two_col = Vec::with_capacity(2 * n);
        for &pi in &p {
            two_col.push(pi);
            two_col.push(pi);
        }
        let w = solve_simplex_weights(&two_col, n, 2, &y).unwrap();
        let q: Vec<f64> = p.iter().map(|&pi| w[0] * pi + w[1] * pi).collect();
        assert!((neg_log_lik(&q, &y) - neg_log_lik(&p, &y)).abs() < 1e-12);
    }
}
