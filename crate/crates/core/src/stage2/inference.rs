//! Influence-curve variance with Student-t small-sample inference.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Result of `inference_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TInference {
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
}

/// Standard error, 95% CI and two-sided p-value from an estimated influence
/// curve, using the Student-t distribution with `df` degrees of freedom.
///
/// `se = sqrt(sampleVar(ic) / J)` where `J = ic.len()`.
pub fn inference_t(psi: f64, ic: &[f64], df: usize) -> Result<TInference> {
    if df < 1 {
        return Err(Error::Precondition("df must be at least 1".into()));
    }
    let j = ic.len();
    if j < 2 {
        return Err(Error::Precondition("influence curve needs at least 2 values".into()));
    }
    let mean = ic.iter().sum::<f64>() / j as f64;
    let var = ic.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (j as f64 - 1.0);
    let se = (var / j as f64).sqrt();

    if se == 0.0 {
        // Degenerate curve: point-mass interval, p by sign.
        return Ok(TInference {
            se,
            ci_lo: psi,
            ci_hi: psi,
            p_value: if psi == 0.0 { 1.0 } else { 0.0 },
        });
    }

    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::Computation(format!("t distribution: {e}")))?;
    let q = dist.inverse_cdf(0.975);
    let t_stat = psi / se;
    let p_value = 2.0 * (1.0 - dist.cdf(t_stat.abs()));
    Ok(TInference { se, ci_lo: psi - q * se, ci_hi: psi + q * se, p_value })
}

/// 0.975 quantile of the Student-t distribution (exposed for reporting).
pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_psi_has_p_one() {
        let ic = vec![1.0, -1.0, 0.5, -0.5];
        let r = inference_t(0.0, &ic, 2).unwrap();
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!((r.ci_lo + r.ci_hi).abs() < 1e-12, "CI symmetric about 0");
    }

    #[test]
    fn zero_variance_degenerates() {
        let ic = vec![0.0; 5];
        let r = inference_t(0.3, &ic, 3).unwrap();
        assert_eq!(r.se, 0.0);
        assert_eq!((r.ci_lo, r.ci_hi), (0.3, 0.3));
        assert_eq!(r.p_value, 0.0);
        assert_eq!(inference_t(0.0, &ic, 3).unwrap().p_value, 1.0);
    }

    #[test]
    fn table_row_ci_reproduced() {
        // pt 2.16%, se 0.0088, df 148 -> CI approximately (0.42, 3.89) in %.
        let q = t_quantile_975(148);
        let lo = 0.0216 - q * 0.0088;
        let hi = 0.0216 + q * 0.0088;
        assert!((lo - 0.0042).abs() < 5e-4, "lo = {lo}");
        assert!((hi - 0.0390).abs() < 5e-4, "hi = {hi}");
    }

    #[test]
    fn t_quantile_brackets() {
        let q = t_quantile_975(148);
        assert!(q > 1.976 && q < 1.977, "t_(148,0.975) = {q}");
    }
}
