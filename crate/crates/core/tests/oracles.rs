//! Large-sample Monte Carlo oracles for the limit sampler, KDE and summaries.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spiked_fisher::experiments::summary::{summarize, variance};
use spiked_fisher::experiments::{kde_1d, kde_2d, linspace};
use spiked_fisher::spike_theory::{clt_constants, sample_limit_law, Spike, SpikeSpec};
use spiked_fisher::wachter_law::FisherParams;

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[test]
fn general_vector_variance_formula() {
    let params = FisherParams::new(0.2, 0.5).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let u = DMatrix::from_row_slice(
        4,
        4,
        &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, h, h, 0.0, 0.0, h, -h],
    );
    let spikes = vec![
        Spike { value: 20.0, multiplicity: 1 },
        Spike { value: 0.2, multiplicity: 2 },
        Spike { value: 0.1, multiplicity: 1 },
    ];
    let spec = SpikeSpec::new(spikes, u).unwrap();
    let v4 = 1.0;
    let k = clt_constants(&params, 0.1, v4).unwrap();
    let expected = (2.0 * k.theta + (v4 - 3.0) * k.omega * 0.5) / (k.delta * k.delta);
    assert!((expected - 0.004).abs() < 5e-4, "{expected}");

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| sample_limit_law(&mut rng, &params, &spec, v4).unwrap().blocks[2][0])
        .collect();
    let v = variance(&draws);
    assert!((v / expected - 1.0).abs() < 0.01, "{v} vs {expected}");
}

#[test]
fn kde_recovers_normal_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let grid = linspace(-3.0, 3.0, 61);
    let f = kde_1d(&xs, &grid).unwrap();
    let worst = grid
        .iter()
        .zip(&f)
        .map(|(x, v)| (v - normal_pdf(*x)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn kde_2d_recovers_product_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pts: Vec<(f64, f64)> = (0..100_000)
        .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let grid = linspace(-2.0, 2.0, 21);
    let g = kde_2d(&pts, &grid, &grid).unwrap();
    let mut worst: f64 = 0.0;
    for (i, x) in grid.iter().enumerate() {
        for (j, y) in grid.iter().enumerate() {
            worst = worst.max((g.values[i][j] - normal_pdf(*x) * normal_pdf(*y)).abs());
        }
    }
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn summary_of_normal_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let s = summarize(&xs, 0.0, 1.0).unwrap();
    assert!(s.ks_distance < 0.01, "{}", s.ks_distance);
    assert!(s.mean.abs() < 0.02 && (s.variance - 1.0).abs() < 0.02);
}
