//! Phase transition and outlier fluctuations of spiked Fisher matrices.
//!
//! A spike `a` (an eigenvalue of the perturbed block `Ω_M` of `Σ₁`) produces
//! sample eigenvalues that separate from the bulk exactly when it lies outside
//! the critical interval `γ(1 ± √(c+y−cy))`. Separated packets converge to
//! `φ(a)`; the rest stick to the nearer support edge. Around `φ(a)` the
//! `√p`-scaled packet fluctuates like the eigenvalues of `−UᵢᵀR Uᵢ / Δ`, with
//! `R` a symmetric Gaussian matrix whose entry variances are given by
//! [`CltConstants`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues_desc;
use crate::wachter_law::{is_separated, support_edges, FisherParams};

/// One distinct spike value with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub value: f64,
    pub multiplicity: usize,
}

/// Population spikes together with the orthogonal matrix `U` whose column
/// blocks span their eigenspaces.
///
/// Spikes above 1 come first in decreasing order, then spikes below 1, also
/// decreasing. `U` is `M × M` with `M` the total multiplicity; block `i` is
/// the next `nᵢ` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSpec {
    spikes: Vec<Spike>,
    eigenvectors: DMatrix<f64>,
}

const ORTHONORMAL_TOL: f64 = 1e-12;

impl SpikeSpec {
    /// Spikes with `U = I`.
    pub fn diagonal(spikes: Vec<Spike>) -> Result<Self> {
        let m: usize = spikes.iter().map(|s| s.multiplicity).sum();
        Self::new(spikes, DMatrix::identity(m, m))
    }

    pub fn new(spikes: Vec<Spike>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let mut problems = Vec::new();
        for (i, s) in spikes.iter().enumerate() {
            if !(s.value.is_finite() && s.value > 0.0) || s.value == 1.0 {
                problems.push(format!("spike {i}: value {} must be positive and ≠ 1", s.value));
            }
            if s.multiplicity == 0 {
                problems.push(format!("spike {i}: multiplicity must be at least 1"));
            }
        }
        for (i, w) in spikes.windows(2).enumerate() {
            // Above-one spikes descending, then below-one spikes descending:
            // the whole list is strictly decreasing.
            if !(w[1].value < w[0].value) {
                problems.push(format!(
                    "spikes {i} and {}: values must be strictly decreasing",
                    i + 1
                ));
            }
        }
        let m: usize = spikes.iter().map(|s| s.multiplicity).sum();
        if eigenvectors.nrows() != m || eigenvectors.ncols() != m {
            problems.push(format!(
                "eigenvector matrix must be {m}×{m}, got {}×{}",
                eigenvectors.nrows(),
                eigenvectors.ncols()
            ));
        } else {
            let defect = (eigenvectors.transpose() * &eigenvectors - DMatrix::identity(m, m)).amax();
            if defect > ORTHONORMAL_TOL {
                problems.push(format!("eigenvector matrix is not orthogonal (max |UᵀU − I| = {defect:.3e})"));
            }
        }
        if problems.is_empty() {
            Ok(Self { spikes, eigenvectors })
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Total multiplicity `M`.
    pub fn rank(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    /// Number of spikes above 1.
    pub fn count_above_one(&self) -> usize {
        self.spikes.iter().filter(|s| s.value > 1.0).count()
    }

    /// Column offset of block `i` within `U`.
    fn block_offset(&self, i: usize) -> usize {
        self.spikes[..i].iter().map(|s| s.multiplicity).sum()
    }

    /// `Uᵢ`, the `M × nᵢ` block of eigenvectors for spike `i`.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let start = self.block_offset(i);
        self.eigenvectors
            .columns(start, self.spikes[i].multiplicity)
            .into_owned()
    }

    /// `Ω_M^{1/2} = U diag(√aᵢ) Uᵀ`.
    pub fn omega_sqrt(&self) -> DMatrix<f64> {
        let roots: Vec<f64> = self
            .spikes
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.value.sqrt(), s.multiplicity))
            .collect();
        let u = &self.eigenvectors;
        u * DMatrix::from_diagonal(&DVector::from_vec(roots)) * u.transpose()
    }

    /// Zero-based sample-eigenvalue positions (descending order) associated
    /// with each spike in a dimension-`p` problem: spikes above 1 take the
    /// leading positions, spikes below 1 the trailing ones.
    pub fn index_sets(&self, p: usize) -> Result<Vec<std::ops::Range<usize>>> {
        if self.rank() > p {
            return Err(Error::Contract(format!(
                "total multiplicity {} exceeds dimension {p}",
                self.rank()
            )));
        }
        let mut sets = Vec::with_capacity(self.spikes.len());
        let mut top = 0;
        for s in self.spikes.iter().take_while(|s| s.value > 1.0) {
            sets.push(top..top + s.multiplicity);
            top += s.multiplicity;
        }
        let below = &self.spikes[sets.len()..];
        let mut tail: usize = below.iter().map(|s| s.multiplicity).sum();
        for s in below {
            let start = p - tail;
            sets.push(start..start + s.multiplicity);
            tail -= s.multiplicity;
        }
        Ok(sets)
    }
}

#[derive(Deserialize, Serialize)]
struct RawSpikeSpec {
    spikes: Vec<Spike>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eigenvectors: Option<Vec<Vec<f64>>>,
}

impl<'de> Deserialize<'de> for SpikeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSpikeSpec::deserialize(d)?;
        let spec = match raw.eigenvectors {
            None => SpikeSpec::diagonal(raw.spikes),
            Some(rows) => {
                let m = rows.len();
                if rows.iter().any(|r| r.len() != m) {
                    return Err(serde::de::Error::custom("eigenvectors must be a square matrix"));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                SpikeSpec::new(raw.spikes, DMatrix::from_row_slice(m, m, &flat))
            }
        };
        spec.map_err(serde::de::Error::custom)
    }
}

impl Serialize for SpikeSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let u = &self.eigenvectors;
        let rows = (0..u.nrows())
            .map(|i| u.row(i).iter().copied().collect())
            .collect();
        RawSpikeSpec {
            spikes: self.spikes.clone(),
            eigenvectors: Some(rows),
        }
        .serialize(s)
    }
}

/// The five limiting constants for one separated spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltConstants {
    /// Outlier limit `φ(a)`.
    pub lambda: f64,
    pub delta: f64,
    /// Off-diagonal variance of `R`.
    pub theta: f64,
    /// Fourth-moment coefficient of the diagonal variance.
    pub omega: f64,
    /// Variance of `√p(l − φ(a))` for a simple spike with a coordinate eigenvector.
    pub sigma_sq: f64,
}

impl CltConstants {
    /// Variance of the diagonal entries of `R`, `2θ + (v₄ − 3)ω`.
    pub fn diagonal_variance(&self, v4: f64) -> f64 {
        2.0 * self.theta + (v4 - 3.0) * self.omega
    }
}

/// One draw from the limiting law: the eigenvalues of `−UᵢᵀR(λᵢ)Uᵢ/Δ(λᵢ)`
/// for every block, each sorted in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSampleDraw {
    pub blocks: Vec<Vec<f64>>,
}

/// Spikes strictly outside `(low, high)` give outliers.
pub fn critical_interval(params: &FisherParams) -> (f64, f64) {
    let gamma = params.gamma();
    let r = params.root_kappa();
    (gamma * (1.0 - r), gamma * (1.0 + r))
}

/// `φ(a) = γ a (a − 1 + c) / (a − γ)`.
pub fn phi(params: &FisherParams, a: f64) -> Result<f64> {
    let gamma = params.gamma();
    if a == gamma {
        return Err(Error::Pole(format!("φ has a pole at γ = {gamma}")));
    }
    Ok(gamma * a * (a - 1.0 + params.c()) / (a - gamma))
}

/// Almost-sure limit of the sample eigenvalues attached to spike `a`.
pub fn spike_limit(params: &FisherParams, a: f64) -> Result<f64> {
    if !(a.is_finite() && a > 0.0) || a == 1.0 {
        return Err(Error::Precondition(format!(
            "spike must be positive and different from 1, got {a}"
        )));
    }
    if is_separated(params, a) {
        return phi(params, a);
    }
    let edges = support_edges(params);
    Ok(if a > 1.0 { edges.b } else { edges.b1 })
}

/// The `y → 0` limit of `φ`: `x + c x/(x − 1)`.
pub fn phi_small_y_reduction(c: f64, x: f64) -> Result<f64> {
    if x == 1.0 {
        return Err(Error::Pole("the reduced map has a pole at 1".into()));
    }
    Ok(x + c * x / (x - 1.0))
}

/// Limiting constants for a separated spike with common fourth moment `v4`.
pub fn clt_constants(params: &FisherParams, a: f64, v4: f64) -> Result<CltConstants> {
    if !(a.is_finite() && a > 0.0) || a == 1.0 {
        return Err(Error::Precondition(format!(
            "spike must be positive and different from 1, got {a}"
        )));
    }
    if !is_separated(params, a) {
        return Err(Error::Precondition(format!(
            "spike {a} is not outside the critical interval {:?}",
            critical_interval(params)
        )));
    }
    if !(v4.is_finite() && v4 >= 1.0) {
        return Err(Error::Precondition(format!(
            "fourth moment of a unit-variance variable must be ≥ 1, got {v4}"
        )));
    }
    let (c, y) = (params.c(), params.y());
    let q = -1.0 + 2.0 * a + c + a * a * (y - 1.0);
    let u = 1.0 + a * (y - 1.0);
    let acm1 = a + c - 1.0;
    let delta = (1.0 - a - c) * u * u / ((a - 1.0) * q);
    let lead = a * a * acm1 * acm1;
    let theta = lead * (c * y - c - y) / q;
    let omega = lead * (c + y) / (a - 1.0).powi(2);
    let u4 = u.powi(4);
    let sigma_sq = 2.0 * a * a * (c * y - c - y) * (a - 1.0).powi(2) * q / u4
        + (v4 - 3.0) * a * a * (c + y) * q * q / u4;
    Ok(CltConstants {
        lambda: phi(params, a)?,
        delta,
        theta,
        omega,
        sigma_sq,
    })
}

/// Symmetric `m × m` Gaussian matrix with independent entries: variance
/// `diag_var` on the diagonal and `off_var` above it.
pub fn draw_symmetric_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    diag_var: f64,
    off_var: f64,
) -> DMatrix<f64> {
    let (sd_diag, sd_off) = (diag_var.sqrt(), off_var.sqrt());
    let mut r = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let z: f64 = rng.sample(StandardNormal);
            let v = if i == j { sd_diag * z } else { sd_off * z };
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Eigenvalues of `−UᵢᵀRUᵢ/Δ`, largest first.
pub fn block_limit_eigenvalues(r: &DMatrix<f64>, block: &DMatrix<f64>, delta: f64) -> Vec<f64> {
    let mut projected = block.transpose() * r * block;
    projected /= -delta;
    symmetric_eigenvalues_desc(projected)
}

/// Draw once from the limiting joint law of all packets. Blocks are drawn
/// independently of one another.
pub fn sample_limit_law<R: Rng + ?Sized>(
    rng: &mut R,
    params: &FisherParams,
    spec: &SpikeSpec,
    v4: f64,
) -> Result<LimitSampleDraw> {
    let plan = limit_law_plan(params, spec, v4)?;
    Ok(draw_from_plan(rng, spec, &plan))
}

/// Per-block constants and diagonal variances, validated once so repeated
/// draws skip the checks.
pub(crate) fn limit_law_plan(
    params: &FisherParams,
    spec: &SpikeSpec,
    v4: f64,
) -> Result<Vec<(CltConstants, f64)>> {
    spec.spikes()
        .iter()
        .map(|s| {
            let k = clt_constants(params, s.value, v4)?;
            let d = k.diagonal_variance(v4);
            if d < 0.0 {
                return Err(Error::Precondition(format!(
                    "negative diagonal variance {d} for spike {} at v4 = {v4}",
                    s.value
                )));
            }
            Ok((k, d))
        })
        .collect()
}

pub(crate) fn draw_from_plan<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &SpikeSpec,
    plan: &[(CltConstants, f64)],
) -> LimitSampleDraw {
    let m = spec.rank();
    let blocks = plan
        .iter()
        .enumerate()
        .map(|(i, (k, diag_var))| {
            let r = draw_symmetric_gaussian(rng, m, *diag_var, k.theta);
            block_limit_eigenvalues(&r, &spec.block(i), k.delta)
        })
        .collect();
    LimitSampleDraw { blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference_params() -> FisherParams {
        FisherParams::new(0.2, 0.5).unwrap()
    }

    fn reference_spec() -> SpikeSpec {
        SpikeSpec::diagonal(vec![
            Spike { value: 20.0, multiplicity: 1 },
            Spike { value: 0.2, multiplicity: 2 },
            Spike { value: 0.1, multiplicity: 1 },
        ])
        .unwrap()
    }

    #[test]
    fn critical_interval_reference() {
        let (lo, hi) = critical_interval(&reference_params());
        assert!((lo - 0.45).abs() < 5e-3);
        assert!((hi - 3.55).abs() < 5e-3);
    }

    #[test]
    fn critical_interval_straddles_one() {
        for c in [0.01, 0.2, 1.0, 3.0, 50.0] {
            for y in [0.01, 0.3, 0.9, 0.999] {
                let (lo, hi) = critical_interval(&FisherParams::new(c, y).unwrap());
                assert!(lo < 1.0 && hi > 1.0, "c={c} y={y}: ({lo}, {hi})");
            }
        }
    }

    #[test]
    fn critical_interval_collapses() {
        let p = FisherParams::new(1e-12, 1e-12).unwrap();
        let (lo, hi) = critical_interval(&p);
        assert!((hi - lo) < 1e-5);
        assert!((lo - p.gamma()).abs() < 1e-5);
    }

    #[test]
    fn phi_reference_values() {
        let p = reference_params();
        assert!((phi(&p, 20.0).unwrap() - 42.67).abs() < 5e-3);
        assert!((phi(&p, 0.2).unwrap() - 0.13).abs() < 5e-3);
        assert!((phi(&p, 0.1).unwrap() - 0.07).abs() < 5e-3);
        assert!(matches!(phi(&p, 2.0), Err(Error::Pole(_))));
    }

    #[test]
    fn spike_limit_branches() {
        let p = reference_params();
        let e = support_edges(&p);
        assert_eq!(spike_limit(&p, 2.0).unwrap(), e.b);
        assert!((spike_limit(&p, 2.0).unwrap() - 12.597).abs() < 5e-4);
        assert_eq!(spike_limit(&p, 0.5).unwrap(), e.b1);
        assert!((spike_limit(&p, 20.0).unwrap() - 42.67).abs() < 5e-3);
        assert!(spike_limit(&p, 1.0).is_err());
    }

    #[test]
    fn spike_limit_continuous_at_boundary() {
        let p = reference_params();
        let (lo, hi) = critical_interval(&p);
        let e = support_edges(&p);
        assert!((phi(&p, hi).unwrap() - e.b).abs() < 1e-9);
        assert!((phi(&p, lo).unwrap() - e.b1).abs() < 1e-9);
        assert_eq!(spike_limit(&p, hi).unwrap(), e.b);
        assert_eq!(spike_limit(&p, lo).unwrap(), e.b1);
    }

    #[test]
    fn small_y_reduction() {
        assert!((phi_small_y_reduction(0.2, 20.0).unwrap() - (20.0 + 4.0 / 19.0)).abs() < 1e-14);
        assert!((phi_small_y_reduction(0.2, 2.0).unwrap() - 2.4).abs() < 1e-14);
        assert!(phi_small_y_reduction(0.2, 1.0).is_err());
        let tiny = FisherParams::new(0.2, 1e-6).unwrap();
        let d = phi(&tiny, 20.0).unwrap() - phi_small_y_reduction(0.2, 20.0).unwrap();
        assert!(d.abs() < 1e-4);
    }

    #[test]
    fn constants_reference_values() {
        let p = reference_params();
        let k3 = clt_constants(&p, 20.0, 3.0).unwrap();
        assert!(((k3.sigma_sq - 4246.8) / 4246.8).abs() < 1e-3, "{}", k3.sigma_sq);
        let k1 = clt_constants(&p, 20.0, 1.0).unwrap();
        assert!(((k1.sigma_sq - 2039.8) / 2039.8).abs() < 1e-3, "{}", k1.sigma_sq);
        let k = clt_constants(&p, 0.2, 3.0).unwrap();
        assert!((k.delta - 1.45).abs() < 5e-3, "{}", k.delta);
        assert!((k.theta - 0.02).abs() < 5e-3);
        assert!((k.omega - 0.016).abs() < 5e-3);
        let small = clt_constants(&p, 0.1, 1.0).unwrap();
        assert!((small.sigma_sq - 9e-4).abs() < 5e-5, "{}", small.sigma_sq);
    }

    #[test]
    fn constants_reject_bad_input() {
        let p = reference_params();
        assert!(matches!(clt_constants(&p, 2.0, 3.0), Err(Error::Precondition(_))));
        assert!(clt_constants(&p, 20.0, 0.5).is_err());
        let (_, hi) = critical_interval(&p);
        assert!(clt_constants(&p, hi, 3.0).is_err());
    }

    #[test]
    fn sigma_is_scaled_r_entry_variance() {
        for c in [0.1, 0.2, 0.7, 2.0] {
            for y in [0.1, 0.5, 0.8] {
                let p = FisherParams::new(c, y).unwrap();
                let (lo, hi) = critical_interval(&p);
                let grid = [hi * 1.01, hi * 2.0, hi * 10.0, lo * 0.99, lo * 0.5, lo * 0.1];
                for a in grid {
                    if a <= 0.0 || a == 1.0 {
                        continue;
                    }
                    for v4 in [1.0, 3.0, 9.0] {
                        let k = clt_constants(&p, a, v4).unwrap();
                        let alt = k.diagonal_variance(v4) / (k.delta * k.delta);
                        assert!(
                            (k.sigma_sq - alt).abs() <= 1e-9 * alt.abs().max(1.0),
                            "c={c} y={y} a={a} v4={v4}: {} vs {alt}",
                            k.sigma_sq
                        );
                        assert!(k.theta > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn phi_separates_beyond_interval() {
        let p = reference_params();
        let (lo, hi) = critical_interval(&p);
        let e = support_edges(&p);
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=20 {
            let a = hi + 0.5 * i as f64;
            let v = phi(&p, a).unwrap();
            assert!(v > e.b && v > prev);
            prev = v;
            let below = lo * i as f64 / 21.0;
            assert!(phi(&p, below).unwrap() < e.b1);
        }
    }

    #[test]
    fn index_sets_layout() {
        let spec = reference_spec();
        let sets = spec.index_sets(200).unwrap();
        assert_eq!(sets, vec![0..1, 197..199, 199..200]);
        assert!(spec.index_sets(3).is_err());
    }

    #[test]
    fn spec_validation_lists_every_problem() {
        let err = SpikeSpec::new(
            vec![
                Spike { value: 0.5, multiplicity: 1 },
                Spike { value: 3.0, multiplicity: 0 },
            ],
            DMatrix::identity(2, 2),
        )
        .unwrap_err();
        match err {
            Error::Config(v) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simple_blocks_reduce_to_scalar_normal() {
        let p = reference_params();
        let spec = reference_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| sample_limit_law(&mut rng, &p, &spec, 3.0).unwrap().blocks[0][0])
            .collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        let target = clt_constants(&p, 20.0, 3.0).unwrap().sigma_sq;
        assert!(((var - target) / target).abs() < 0.05, "{var} vs {target}");
    }

    #[test]
    fn block_sizes_match_multiplicities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_limit_law(&mut rng, &reference_params(), &reference_spec(), 1.0).unwrap();
        let sizes: Vec<usize> = d.blocks.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![1, 2, 1]);
        assert!(d.blocks[1][0] >= d.blocks[1][1]);
    }

    #[test]
    fn sampler_rejects_critical_spike() {
        let spec = SpikeSpec::diagonal(vec![Spike { value: 2.0, multiplicity: 1 }]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_limit_law(&mut rng, &reference_params(), &spec, 3.0).is_err());
    }
}
