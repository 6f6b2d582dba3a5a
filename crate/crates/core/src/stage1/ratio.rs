//! Delta-method influence curve for the ratio of two estimated means.

use crate::error::{Error, Result};

/// Combine numerator and denominator influence curves into the influence
/// curve of their ratio, with the corresponding standard error.
///
/// `ic[i] = (ic_num[i] − (num/den)·ic_den[i]) / den` and
/// `se = sqrt(sampleVar(ic)/N)`.
pub fn influence_curve_ratio(
    num: f64,
    den: f64,
    ic_num: &[f64],
    ic_den: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if den <= 0.0 {
        return Err(Error::Precondition(format!("denominator {den} must be positive")));
    }
    if ic_num.len() != ic_den.len() {
        return Err(Error::Precondition("influence curve length mismatch".into()));
    }
    let n = ic_num.len();
    if n == 0 {
        return Err(Error::Precondition("empty influence curves".into()));
    }
    let ratio = num / den;
    let ic: Vec<f64> =
        ic_num.iter().zip(ic_den).map(|(&a, &b)| (a - ratio * b) / den).collect();
    Ok((ic.clone(), se_from_ic(&ic)))
}

/// IC-based standard error: `sqrt(sampleVar(ic)/N)`.
pub fn se_from_ic(ic: &[f64]) -> f64 {
    let n = ic.len();
    if n < 2 {
        return 0.0;
    }
    let mean = ic.iter().sum::<f64>() / n as f64;
    let var = ic.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (var / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_denominator_reduces_to_scaled_numerator_ic() {
        let ic_num = vec![0.3, -0.1, 0.4, -0.6];
        let ic_den = vec![0.0; 4];
        let (ic, _) = influence_curve_ratio(0.25, 0.5, &ic_num, &ic_den).unwrap();
        for (a, b) in ic.iter().zip(&ic_num) {
            assert!((a - b / 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_numerator_kills_ratio_term() {
        let ic_num = vec![0.2, -0.2];
        let ic_den = vec![5.0, -5.0];
        let (ic, _) = influence_curve_ratio(0.0, 0.4, &ic_num, &ic_den).unwrap();
        assert!((ic[0] - 0.5).abs() < 1e-15);
        assert!((ic[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_denominator_errors() {
        assert!(influence_curve_ratio(0.1, 0.0, &[0.0], &[0.0]).is_err());
        assert!(influence_curve_ratio(0.1, -0.2, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn mean_zero_components_give_mean_zero_ratio_ic() {
        let ic_num = vec![0.5, -0.5, 0.25, -0.25];
        let ic_den = vec![0.1, 0.1, -0.1, -0.1];
        let (ic, _) = influence_curve_ratio(0.4, 0.8, &ic_num, &ic_den).unwrap();
        let mean: f64 = ic.iter().sum::<f64>() / ic.len() as f64;
        assert!(mean.abs() < 1e-10);
    }
}
