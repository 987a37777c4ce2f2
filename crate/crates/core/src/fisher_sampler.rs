//! Finite-sample spiked Fisher matrices.
//!
//! `S₂ = ZZᵀ/n` from a `p × n` noise array and `S₁ = Σ^{1/2}(WWᵀ/T)Σ^{1/2}`
//! from a `p × T` array, where `Σ` equals `Ω_M = U diag(aᵢ) Uᵀ` on its first
//! `M` coordinates and the identity elsewhere. The spectrum of `S₂⁻¹S₁` is
//! taken from the symmetric-definite pencil `(S₁, S₂)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, pencil_eigenvalues};
use crate::spike_theory::SpikeSpec;
use crate::wachter_law::FisherParams;

/// Relative threshold below which pencil roots count as exact zeros.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;

/// Law of the i.i.d. entries of both data arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryDistribution {
    Gaussian,
    /// ±1 with probability 1/2 each.
    Rademacher,
}

impl EntryDistribution {
    /// Fourth moment `E x⁴`.
    pub fn v4(self) -> f64 {
        match self {
            EntryDistribution::Gaussian => 3.0,
            EntryDistribution::Rademacher => 1.0,
        }
    }

    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            EntryDistribution::Gaussian => rng.sample(StandardNormal),
            EntryDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// A `rows × cols` array of independent draws, filled column by column.
    pub fn draw_matrix<R: Rng + ?Sized>(self, rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.draw(rng)).collect();
        DMatrix::from_vec(rows, cols, data)
    }
}

/// Dimension `p`, second-sample size `n` and first-sample size `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDims", into = "RawDims")]
pub struct ModelDims {
    p: usize,
    n: usize,
    t: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDims {
    p: usize,
    n: usize,
    #[serde(alias = "T")]
    t: usize,
}

impl TryFrom<RawDims> for ModelDims {
    type Error = Error;
    fn try_from(r: RawDims) -> Result<Self> {
        ModelDims::new(r.p, r.n, r.t)
    }
}

impl From<ModelDims> for RawDims {
    fn from(d: ModelDims) -> Self {
        RawDims { p: d.p, n: d.n, t: d.t }
    }
}

impl ModelDims {
    /// Requires `1 ≤ p ≤ n` and `T ≥ 1`. Limiting formulas additionally need
    /// `p < n`, checked by [`ModelDims::params`].
    pub fn new(p: usize, n: usize, t: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if p == 0 {
            problems.push("p must be at least 1".to_string());
        }
        if t == 0 {
            problems.push("T must be at least 1".to_string());
        }
        if n < p {
            problems.push(format!("n = {n} must be at least p = {p} for S₂ to be invertible"));
        }
        if problems.is_empty() {
            Ok(Self { p, n, t })
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn c_p(&self) -> f64 {
        self.p as f64 / self.t as f64
    }

    pub fn y_p(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Finite-sample ratios `(p/T, p/n)`; fails when `p = n`.
    pub fn params(&self) -> Result<FisherParams> {
        FisherParams::from_dims(self.p, self.n, self.t)
    }
}

/// Identifies the stream a replicate was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateId {
    pub master_seed: u64,
    pub index: u64,
}

/// Sorted spectrum of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    /// Length `p`, decreasing, non-negative.
    pub eigenvalues: Vec<f64>,
    pub dims: ModelDims,
    pub seed: Option<ReplicateId>,
}

/// Replace rounding noise around structural zeros by exact zeros.
pub(crate) fn clamp_zero_roots(values: &mut [f64]) {
    let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = ZERO_EIGENVALUE_TOL * top;
    for v in values.iter_mut() {
        if v.abs() <= tol {
            *v = 0.0;
        }
    }
}

/// Draw `Z`, `W`, build the spiked pair `(S₁, S₂)` and return the sorted
/// roots of `det(S₁ − l S₂) = 0`.
pub fn sample_spectrum<R: Rng + ?Sized>(
    rng: &mut R,
    dims: ModelDims,
    spec: &SpikeSpec,
    dist: EntryDistribution,
) -> Result<SpectrumSample> {
    let (p, n, t) = (dims.p, dims.n, dims.t);
    let m = spec.rank();
    if m > p {
        return Err(Error::Contract(format!("spike rank {m} exceeds dimension {p}")));
    }
    let z = dist.draw_matrix(rng, p, n);
    let mut w = dist.draw_matrix(rng, p, t);
    if m > 0 {
        let mixed = spec.omega_sqrt() * w.rows(0, m);
        w.rows_mut(0, m).copy_from(&mixed);
    }
    let s2 = gram(&z);
    let s1 = gram(&w);
    let mut eigenvalues = pencil_eigenvalues(&s1, &s2)?;
    clamp_zero_roots(&mut eigenvalues);
    for v in eigenvalues.iter_mut() {
        // The pencil of two PSD matrices has no negative roots beyond rounding.
        *v = v.max(0.0);
    }
    Ok(SpectrumSample {
        eigenvalues,
        dims,
        seed: None,
    })
}

/// The packet of sample eigenvalues attached to each spike, keyed by spike
/// index: leading eigenvalues for spikes above 1, trailing ones below 1.
pub fn spectrum_packets(sample: &SpectrumSample, spec: &SpikeSpec) -> Result<BTreeMap<usize, Vec<f64>>> {
    let p = sample.eigenvalues.len();
    let sets = spec.index_sets(p)?;
    Ok(sets
        .into_iter()
        .enumerate()
        .map(|(i, range)| (i, sample.eigenvalues[range].to_vec()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike_theory::Spike;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_fisher_ratio() {
        let a = 5.0;
        let spec = SpikeSpec::diagonal(vec![Spike { value: a, multiplicity: 1 }]).unwrap();
        let dims = ModelDims::new(1, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sample = sample_spectrum(&mut rng, dims, &spec, EntryDistribution::Gaussian).unwrap();
        let mut replay = ChaCha8Rng::seed_from_u64(11);
        let z: f64 = replay.sample(StandardNormal);
        let w: f64 = replay.sample(StandardNormal);
        let expected = a * w * w / (z * z);
        assert!((sample.eigenvalues[0] - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn rank_deficiency_gives_exact_zeros() {
        let spec = SpikeSpec::diagonal(vec![]).unwrap();
        let dims = ModelDims::new(3, 6, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample_spectrum(&mut rng, dims, &spec, EntryDistribution::Gaussian).unwrap();
        assert_eq!(s.eigenvalues.iter().filter(|&&v| v == 0.0).count(), 1);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(s.eigenvalues[2], 0.0);
    }

    #[test]
    fn dims_validation() {
        assert!(ModelDims::new(10, 5, 20).is_err());
        assert!(ModelDims::new(0, 5, 0).is_err());
        let d = ModelDims::new(200, 400, 1000).unwrap();
        assert_eq!(d.c_p(), 0.2);
        assert_eq!(d.y_p(), 0.5);
        assert!(ModelDims::new(4, 4, 4).unwrap().params().is_err());
    }

    #[test]
    fn packets_follow_index_sets() {
        let spec = SpikeSpec::diagonal(vec![
            Spike { value: 20.0, multiplicity: 1 },
            Spike { value: 0.2, multiplicity: 2 },
            Spike { value: 0.1, multiplicity: 1 },
        ])
        .unwrap();
        let eigenvalues: Vec<f64> = (0..200).rev().map(|i| i as f64).collect();
        let sample = SpectrumSample {
            eigenvalues,
            dims: ModelDims::new(200, 400, 1000).unwrap(),
            seed: None,
        };
        let packets = spectrum_packets(&sample, &spec).unwrap();
        assert_eq!(packets[&0], vec![199.0]);
        assert_eq!(packets[&1], vec![2.0, 1.0]);
        assert_eq!(packets[&2], vec![0.0]);

        let single = SpikeSpec::diagonal(vec![Spike { value: 4.0, multiplicity: 1 }]).unwrap();
        assert_eq!(spectrum_packets(&sample, &single).unwrap()[&0], vec![199.0]);
        let none = SpikeSpec::diagonal(vec![]).unwrap();
        assert!(spectrum_packets(&sample, &none).unwrap().is_empty());
    }

    #[test]
    fn packets_reject_oversized_spec() {
        let spec = SpikeSpec::diagonal(vec![Spike { value: 4.0, multiplicity: 3 }]).unwrap();
        let sample = SpectrumSample {
            eigenvalues: vec![3.0, 1.0],
            dims: ModelDims::new(2, 4, 4).unwrap(),
            seed: None,
        };
        assert!(matches!(spectrum_packets(&sample, &spec), Err(Error::Contract(_))));
    }

    #[test]
    fn rademacher_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = EntryDistribution::Rademacher.draw_matrix(&mut rng, 10, 10);
        assert!(m.iter().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(EntryDistribution::Rademacher.v4(), 1.0);
        assert_eq!(EntryDistribution::Gaussian.v4(), 3.0);
    }
}
