//! Gaussian kernel density estimates with Silverman's rule-of-thumb bandwidth.

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn mean_sd(samples: &[f64]) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let ss = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, (ss / (m - 1.0)).sqrt())
}

/// `1.06 σ̂ m^{-1/5}` with σ̂ the sample standard deviation.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Precondition(format!(
            "kernel density estimation needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let (_, sd) = mean_sd(samples);
    let h = 1.06 * sd * (samples.len() as f64).powf(-0.2);
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Precondition(
            "samples are degenerate (zero spread); bandwidth would be zero".into(),
        ));
    }
    Ok(h)
}

/// Density estimate at every grid point.
pub fn kde_1d(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    let norm = 1.0 / ((2.0 * PI).sqrt() * samples.len() as f64 * h);
    Ok(grid
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// Density surface on the lattice `xs × ys`; `values[i][j]` is the estimate
/// at `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Product-Gaussian kernel with a Silverman bandwidth per axis.
pub fn kde_2d(samples: &[(f64, f64)], xs: &[f64], ys: &[f64]) -> Result<DensityGrid> {
    let first: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let second: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let hx = silverman_bandwidth(&first)?;
    let hy = silverman_bandwidth(&second)?;
    let norm = 2.0 * PI * samples.len() as f64 * (hx * hy);
    let kernel = |grid: &[f64], data: &[f64], h: f64| -> Vec<Vec<f64>> {
        grid.iter()
            .map(|&g| {
                data.iter()
                    .map(|&d| {
                        let u = (g - d) / h;
                        (-0.5 * u * u).exp()
                    })
                    .collect()
            })
            .collect()
    };
    let kx = kernel(xs, &first, hx);
    let ky = kernel(ys, &second, hy);
    let values = kx
        .iter()
        .map(|row_x| {
            ky.iter()
                .map(|row_y| row_x.iter().zip(row_y).map(|(a, b)| a * b).sum::<f64>() / norm)
                .collect()
        })
        .collect();
    Ok(DensityGrid {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        values,
    })
}

/// `count` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|i| lo + step * i as f64).collect()
        }
    }
}
