//! TMLE targeting step for the denominator (target-population prevalence).
//!
//! The initial outcome-regression predictions are updated on the logit scale
//! along the clever covariate `H = 1/g` so that the fitted values solve the
//! efficient-influence-function score equation among the measured.

use crate::error::{Error, Result};

const SCORE_TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-35.0, 35.0)).exp())
}

/// Neumaier-compensated sum; keeps the score residual near machine epsilon
/// even for very large clusters.
fn ksum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Fluctuate `qbar_init` along `H = 1/g` to maximize the Bernoulli likelihood
/// of `y1` among the measured; returns the targeted predictions for all
/// individuals and the fluctuation coefficient.
///
/// On return, `Σ_{Δ=1} (1/g)·(y1 − q̄*) ≈ 0` (one-dimensional Newton with a
/// bisection safeguard).
pub fn target_denominator(
    qbar_init: &[f64],
    g_hat: &[f64],
    delta: &[u8],
    y1: &[u8],
) -> Result<(Vec<f64>, f64)> {
    let n = qbar_init.len();
    if g_hat.len() != n || delta.len() != n || y1.len() != n {
        return Err(Error::Precondition("targeting inputs must be aligned".into()));
    }
    if delta.iter().all(|&d| d == 0) {
        return Err(Error::Precondition("no measured individuals to target on".into()));
    }
    for (i, (&q, &g)) in qbar_init.iter().zip(g_hat).enumerate() {
        if !(0.005..=0.995).contains(&q) {
            return Err(Error::Precondition(format!(
                "qbar_init[{i}] = {q} outside [0.005, 0.995]"
            )));
        }
        if !(0.025..=1.0).contains(&g) {
            return Err(Error::Precondition(format!("g_hat[{i}] = {g} outside [0.025, 1]")));
        }
    }

    let logit_q: Vec<f64> = qbar_init.iter().map(|&q| logit(q)).collect();
    let h: Vec<f64> = g_hat.iter().map(|&g| 1.0 / g).collect();

    let measured: Vec<usize> = (0..n).filter(|&i| delta[i] == 1).collect();
    let score = |eps: f64| -> f64 {
        ksum(measured.iter().map(|&i| {
            let q = expit(logit_q[i] + eps * h[i]);
            h[i] * (f64::from(y1[i]) - q)
        }))
    };
    let dscore = |eps: f64| -> f64 {
        -ksum(measured.iter().map(|&i| {
            let q = expit(logit_q[i] + eps * h[i]);
            h[i] * h[i] * q * (1.0 - q)
        }))
    };

    // Bracket the root: the score is strictly decreasing in epsilon.
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let s0 = score(0.0);
    if s0 > 0.0 {
        let mut step = 0.5;
        while score(lo + step) > 0.0 {
            step *= 2.0;
            if step > 1e6 {
                return Err(Error::NonConvergence {
                    context: "targeting bracket expansion".into(),
                    residual: score(lo + step),
                });
            }
        }
        hi = lo + step;
    } else {
        let mut step = 0.5;
        while score(hi - step) < 0.0 {
            step *= 2.0;
            if step > 1e6 {
                return Err(Error::NonConvergence {
                    context: "targeting bracket expansion".into(),
                    residual: score(hi - step),
                });
            }
        }
        lo = hi - step;
    }

    let mut eps = 0.0f64;
    let mut s = s0;
    let mut converged = s.abs() < SCORE_TOL;
    let scale_tol = 1e-8 * measured.len() as f64;
    for _ in 0..MAX_ITER {
        if converged {
            break;
        }
        // Maintain the bracket [lo, hi] with score(lo) > 0 > score(hi).
        if s > 0.0 {
            lo = eps;
        } else {
            hi = eps;
        }
        let d = dscore(eps);
        let mut next = if d < 0.0 { eps - s / d } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let step = (next - eps).abs();
        eps = next;
        s = score(eps);
        if s.abs() < SCORE_TOL {
            converged = true;
        } else if step < 1e-15 * (1.0 + eps.abs()) && s.abs() < scale_tol {
            // Step size has hit the floating-point floor; the residual is
            // rounding noise on this cluster size.
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            context: "denominator targeting".into(),
            residual: s,
        });
    }

    let qbar_star: Vec<f64> =
        (0..n).map(|i| expit(logit_q[i] + eps * h[i])).collect();
    Ok((qbar_star, eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn already_targeted_gives_zero_epsilon() {
        // Constant g and intercept-only qbar equal to the measured mean:
        // the score is already solved.
        let delta = [1u8, 1, 1, 1, 0, 0];
        let y1 = [1u8, 0, 1, 0, 0, 0];
        let qbar = vec![0.5; 6];
        let g = vec![0.8; 6];
        let (qstar, eps) = target_denominator(&qbar, &g, &delta, &y1).unwrap();
        assert!(eps.abs() < 1e-8, "eps = {eps}");
        for q in qstar {
            assert!((q - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn full_measurement_matches_mean() {
        let delta = [1u8; 5];
        let y1 = [1u8, 1, 0, 0, 0];
        let qbar = vec![0.3; 5];
        let g = vec![1.0; 5];
        let (qstar, _) = target_denominator(&qbar, &g, &delta, &y1).unwrap();
        let mean = qstar.iter().sum::<f64>() / 5.0;
        assert!((mean - 0.4).abs() < 1e-10);
    }

    #[test]
    fn score_solved_after_targeting() {
        let n = 60;
        let mut st = 42u64;
        let mut unif = || {
            st ^= st << 13;
            st ^= st >> 7;
            st ^= st << 17;
            (st >> 11) as f64 / (1u64 << 53) as f64
        };
        let delta: Vec<u8> = (0..n).map(|_| u8::from(unif() < 0.6)).collect();
        let y1: Vec<u8> =
            delta.iter().map(|&d| if d == 1 { u8::from(unif() < 0.4) } else { 0 }).collect();
        let qbar: Vec<f64> = (0..n).map(|_| (0.1 + 0.8 * unif()).clamp(0.005, 0.995)).collect();
        let g: Vec<f64> = (0..n).map(|_| (0.2 + 0.7 * unif()).clamp(0.025, 1.0)).collect();
        let (qstar, _) = target_denominator(&qbar, &g, &delta, &y1).unwrap();
        let score: f64 = (0..n)
            .filter(|&i| delta[i] == 1)
            .map(|i| (f64::from(y1[i]) - qstar[i]) / g[i])
            .sum();
        assert!(score.abs() < 1e-8 * n as f64, "score = {score}");
    }

    #[test]
    fn epsilon_matches_grid_search() {
        let n = 50;
        let mut st = 7u64;
        let mut unif = || {
            st ^= st << 13;
            st ^= st >> 7;
            st ^= st << 17;
            (st >> 11) as f64 / (1u64 << 53) as f64
        };
        let delta: Vec<u8> = (0..n).map(|_| u8::from(unif() < 0.7)).collect();
        let y1: Vec<u8> =
            delta.iter().map(|&d| if d == 1 { u8::from(unif() < 0.5) } else { 0 }).collect();
        let qbar: Vec<f64> = (0..n).map(|_| (0.2 + 0.6 * unif()).clamp(0.005, 0.995)).collect();
        let g: Vec<f64> = (0..n).map(|_| (0.3 + 0.6 * unif()).clamp(0.025, 1.0)).collect();
        let (_, eps) = target_denominator(&qbar, &g, &delta, &y1).unwrap();

        // Independent oracle: 1e-6-resolution grid over the fluctuation
        // log-likelihood among the measured.
        let loglik = |e: f64| -> f64 {
            (0..n)
                .filter(|&i| delta[i] == 1)
                .map(|i| {
                    let q = expit(logit(qbar[i]) + e / g[i]);
                    f64::from(y1[i]) * q.ln() + (1.0 - f64::from(y1[i])) * (1.0 - q).ln()
                })
                .sum()
        };
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut e = eps - 0.01;
        while e <= eps + 0.01 {
            let ll = loglik(e);
            if ll > best.0 {
                best = (ll, e);
            }
            e += 1e-6;
        }
        assert!((best.1 - eps).abs() < 2e-6, "grid {} vs newton {eps}", best.1);
    }

    #[test]
    fn all_unmeasured_is_an_error() {
        let delta = [0u8; 3];
        let y1 = [0u8; 3];
        let qbar = vec![0.5; 3];
        let g = vec![0.5; 3];
        assert!(target_denominator(&qbar, &g, &delta, &y1).is_err());
    }
}
