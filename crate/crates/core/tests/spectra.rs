use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use spiked_fisher::experiments::summary::ks_distance;
use spiked_fisher::experiments::{run_clt_study, with_threads, Centering, CltStudyConfig};
use spiked_fisher::fisher_sampler::{sample_spectrum, EntryDistribution, ModelDims};
use spiked_fisher::linalg::{gram, pencil_eigenvalues, sort_descending};
use spiked_fisher::seeding::{replicate_rng, StreamDomain};
use spiked_fisher::spike_theory::{Spike, SpikeSpec};
use spiked_fisher::wachter_law::cdf;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

#[test]
fn pencil_matches_general_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(p, n, t) in &[(5, 12, 9), (20, 45, 60), (50, 110, 140)] {
        let s1 = gram(&gaussian(&mut rng, p, t));
        let s2 = gram(&gaussian(&mut rng, p, n));
        let sym = pencil_eigenvalues(&s1, &s2).unwrap();
        let direct = s2.clone().try_inverse().unwrap() * &s1;
        let mut general: Vec<f64> = direct.complex_eigenvalues().iter().map(|z| z.re).collect();
        sort_descending(&mut general);
        for (a, b) in sym.iter().zip(&general) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-12), "p={p}: {a} vs {b}");
        }
    }
}

#[test]
fn spectrum_invariant_under_noise_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in [3, 10, 20] {
        let s1 = gram(&gaussian(&mut rng, p, 3 * p));
        let s2 = gram(&gaussian(&mut rng, p, 2 * p + 5));
        let g = gaussian(&mut rng, p, p);
        let sigma = &g * g.transpose() + DMatrix::identity(p, p) * 0.5;
        let root = sigma.cholesky().unwrap().l();
        let t1 = &root * &s1 * root.transpose();
        let t2 = &root * &s2 * root.transpose();
        let a = pencil_eigenvalues(&s1, &s2).unwrap();
        let b = pencil_eigenvalues(&t1, &t2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "p={p}: {x} vs {y}");
        }
    }
}

#[test]
fn bulk_matches_limiting_law() {
    let dims = ModelDims::new(200, 400, 1000).unwrap();
    let params = dims.params().unwrap();
    let spec = SpikeSpec::diagonal(vec![]).unwrap();
    let mut rng = replicate_rng(3, StreamDomain::Spectrum, 0);
    let sample = sample_spectrum(&mut rng, dims, &spec, EntryDistribution::Gaussian).unwrap();
    let d = ks_distance(&sample.eigenvalues, |x| cdf(&params, x));
    assert!(d < 0.05, "KS {d}");
}

#[test]
fn spectrum_depends_only_on_omega() {
    // Rotating the eigenvectors of a repeated spike leaves Ω, hence the data, unchanged.
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let spikes = vec![Spike { value: 6.0, multiplicity: 2 }, Spike { value: 0.2, multiplicity: 1 }];
    let u = DMatrix::from_row_slice(3, 3, &[h, h, 0.0, h, -h, 0.0, 0.0, 0.0, 1.0]);
    let a = SpikeSpec::diagonal(spikes.clone()).unwrap();
    let b = SpikeSpec::new(spikes, u).unwrap();
    let dims = ModelDims::new(30, 60, 90).unwrap();
    let ea = sample_spectrum(&mut replicate_rng(4, StreamDomain::Spectrum, 0), dims, &a, EntryDistribution::Gaussian)
        .unwrap();
    let eb = sample_spectrum(&mut replicate_rng(4, StreamDomain::Spectrum, 0), dims, &b, EntryDistribution::Gaussian)
        .unwrap();
    for (x, y) in ea.eigenvalues.iter().zip(&eb.eigenvalues) {
        assert!((x - y).abs() <= 1e-10 * x.max(1.0));
    }
}

#[test]
fn studies_are_thread_count_independent() {
    let cfg = CltStudyConfig {
        dims: ModelDims::new(30, 60, 150).unwrap(),
        spec: SpikeSpec::diagonal(vec![Spike { value: 20.0, multiplicity: 1 }, Spike { value: 0.1, multiplicity: 1 }])
            .unwrap(),
        distribution: EntryDistribution::Rademacher,
        v4: None,
        replicates: 40,
        master_seed: 99,
        centering: Centering::Analytic,
    };
    let one = with_threads(1, || run_clt_study(&cfg)).unwrap().unwrap();
    let many = with_threads(4, || run_clt_study(&cfg)).unwrap().unwrap();
    assert_eq!(one, many);

    // Replicate r can be regenerated on its own.
    let mut rng = replicate_rng(99, StreamDomain::Spectrum, 17);
    let alone = sample_spectrum(&mut rng, cfg.dims, &cfg.spec, cfg.distribution).unwrap();
    let lambda = one.lambdas[0];
    let scaled = (30f64).sqrt() * (alone.eigenvalues[0] - lambda);
    assert_eq!(scaled.to_bits(), one.records[17].packets[0][0].to_bits());
}

#[test]
fn scaled_outliers_are_roughly_centred() {
    let cfg = CltStudyConfig {
        dims: ModelDims::new(100, 200, 500).unwrap(),
        spec: SpikeSpec::diagonal(vec![Spike { value: 20.0, multiplicity: 1 }]).unwrap(),
        distribution: EntryDistribution::Gaussian,
        v4: None,
        replicates: 100,
        master_seed: 7,
        centering: Centering::Analytic,
    };
    let study = run_clt_study(&cfg).unwrap();
    let sd = study.limit_variances[0].unwrap().sqrt();
    let z: Vec<f64> = study.empirical(0, 0).iter().map(|v| v / sd).collect();
    let n01 = Normal::new(0.0, 1.0).unwrap();
    assert!(ks_distance(&z, |x| n01.cdf(x)) < 0.2);
}
