//! Sample moments and Kolmogorov distances.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Unbiased (`m − 1` denominator).
    pub variance: f64,
    /// Kolmogorov distance to the reference normal.
    pub ks_distance: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Pearson correlation of two equally long series.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// `sup |F_m − F|` for the empirical distribution of `values`.
pub fn ks_distance<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// Mean, variance, and Kolmogorov distance to `N(ref_mean, ref_var)`.
pub fn summarize(values: &[f64], ref_mean: f64, ref_var: f64) -> Result<Summary> {
    if values.len() < 2 {
        return Err(Error::Precondition(format!(
            "summaries need at least 2 values, got {}",
            values.len()
        )));
    }
    let normal = Normal::new(ref_mean, ref_var.sqrt())
        .map_err(|e| Error::ParameterDomain(format!("reference normal: {e}")))?;
    Ok(Summary {
        mean: mean(values),
        variance: variance(values),
        ks_distance: ks_distance(values, |x| normal.cdf(x)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_arithmetic() {
        let s = summarize(&[1.0, 1.0, 1.0, 3.0], 0.0, 1.0).unwrap();
        assert_eq!(s.mean, 1.5);
        assert_eq!(s.variance, 1.0);
    }

    #[test]
    fn too_few_values() {
        assert!(summarize(&[1.0], 0.0, 1.0).is_err());
        assert!(summarize(&[], 0.0, 1.0).is_err());
    }

    #[test]
    fn ks_of_point_mass() {
        // Two values at the median of N(0,1): the ECDF jumps from 0 to 1 there.
        let d = ks_distance(&[0.0, 0.0], |x| Normal::new(0.0, 1.0).unwrap().cdf(x));
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn correlation_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        let c = [4.0, 3.0, 2.0, 1.0];
        assert!((correlation(&a, &b) - 1.0).abs() < 1e-15);
        assert!((correlation(&a, &c) + 1.0).abs() < 1e-15);
    }
}
