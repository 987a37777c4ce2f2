//! Signal-count estimation with a noise-only calibration sample.
//!
//! Records follow `xᵢ = A sᵢ + eᵢ` with unit-covariance signals and noise of
//! arbitrary covariance `Σ₂`; a second, signal-free sample `zⱼ` shares the
//! noise law. The roots of `det(S₁ − l S₂) = 0` do not depend on `Σ₂`, so
//! they behave like a spiked Fisher spectrum with spikes `1 + eig(AᵀΣ₂⁻¹A)`.
//! The estimate counts roots above `b + d_n`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher_sampler::{clamp_zero_roots, EntryDistribution, ModelDims};
use crate::linalg::{gram, pencil_eigenvalues, symmetric_eigenvalues_desc};
use crate::spike_theory::critical_interval;
use crate::wachter_law::{support_edges, FisherParams};

/// Covariance `Σ₂` of the noise.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseCovariance {
    Identity(usize),
    Diagonal(Vec<f64>),
    /// Unit diagonal, every off-diagonal entry equal to `rho`.
    CompoundSymmetric { p: usize, rho: f64 },
    Dense(DMatrix<f64>),
}

impl NoiseCovariance {
    /// First half of the coordinates with variance `low`, the rest `high`.
    pub fn two_level(p: usize, low: f64, high: f64) -> Self {
        let half = p / 2;
        NoiseCovariance::Diagonal((0..p).map(|i| if i < half { low } else { high }).collect())
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseCovariance::Identity(p) => *p,
            NoiseCovariance::Diagonal(d) => d.len(),
            NoiseCovariance::CompoundSymmetric { p, .. } => *p,
            NoiseCovariance::Dense(m) => m.nrows(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            NoiseCovariance::Identity(p) => DMatrix::identity(*p, *p),
            NoiseCovariance::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            NoiseCovariance::CompoundSymmetric { p, rho } => {
                DMatrix::from_fn(*p, *p, |i, j| if i == j { 1.0 } else { *rho })
            }
            NoiseCovariance::Dense(m) => m.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            NoiseCovariance::Identity(p) => *p > 0,
            NoiseCovariance::Diagonal(d) => !d.is_empty() && d.iter().all(|&v| v.is_finite() && v > 0.0),
            NoiseCovariance::CompoundSymmetric { p, rho } => {
                let floor = if *p > 1 { -1.0 / (*p as f64 - 1.0) } else { f64::NEG_INFINITY };
                *p > 0 && rho.is_finite() && *rho < 1.0 && *rho > floor
            }
            NoiseCovariance::Dense(m) => {
                m.is_square()
                    && m.nrows() > 0
                    && (m - m.transpose()).amax() <= 1e-12 * m.amax()
                    && m.clone().cholesky().is_some()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterDomain("noise covariance is not positive definite".into()))
        }
    }

    /// Left-multiply `g` by a square root `R` of `Σ₂` (`RRᵀ = Σ₂`).
    pub fn apply_root(&self, g: &mut DMatrix<f64>) -> Result<()> {
        match self {
            NoiseCovariance::Identity(_) => {}
            NoiseCovariance::Diagonal(d) => {
                for (i, &v) in d.iter().enumerate() {
                    g.row_mut(i).scale_mut(v.sqrt());
                }
            }
            NoiseCovariance::CompoundSymmetric { p, rho } => {
                // (αI + β11ᵀ)² = (1−ρ)I + ρ11ᵀ with α = √(1−ρ).
                let pf = *p as f64;
                let alpha = (1.0 - rho).sqrt();
                let beta = (-alpha + (alpha * alpha + pf * rho).sqrt()) / pf;
                for mut col in g.column_iter_mut() {
                    let shift = beta * col.sum();
                    col.iter_mut().for_each(|v| *v = alpha * *v + shift);
                }
            }
            NoiseCovariance::Dense(m) => {
                let l = m
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::NumericalRank("noise covariance is not positive definite".into()))?
                    .l();
                *g = l * &*g;
            }
        }
        Ok(())
    }

    /// `L⁻¹ B` for the Cholesky factor `Σ₂ = LLᵀ`.
    fn whiten(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            NoiseCovariance::Identity(_) => Ok(b.clone()),
            NoiseCovariance::Diagonal(d) => {
                let mut out = b.clone();
                for (i, &v) in d.iter().enumerate() {
                    out.row_mut(i).scale_mut(1.0 / v.sqrt());
                }
                Ok(out)
            }
            _ => {
                let chol = self
                    .to_matrix()
                    .cholesky()
                    .ok_or_else(|| Error::NumericalRank("noise covariance is not positive definite".into()))?;
                chol.l()
                    .solve_lower_triangular(b)
                    .ok_or_else(|| Error::NumericalRank("triangular solve failed".into()))
            }
        }
    }
}

/// `xᵢ = A sᵢ + eᵢ` with `cov(sᵢ) = I`, `cov(eᵢ) = Σ₂`, and a noise-only
/// calibration sample of size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    mixing: DMatrix<f64>,
    noise: NoiseCovariance,
    dims: ModelDims,
}

impl SignalModel {
    pub fn new(mixing: DMatrix<f64>, noise: NoiseCovariance, dims: ModelDims) -> Result<Self> {
        let mut problems = Vec::new();
        if mixing.nrows() != dims.p() && mixing.ncols() > 0 {
            problems.push(format!("mixing matrix has {} rows, expected p = {}", mixing.nrows(), dims.p()));
        }
        if noise.dim() != dims.p() {
            problems.push(format!("noise covariance has dimension {}, expected p = {}", noise.dim(), dims.p()));
        }
        if let Err(e) = noise.validate() {
            problems.push(e.to_string());
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let mixing = if mixing.ncols() == 0 {
            DMatrix::zeros(dims.p(), 0)
        } else {
            mixing
        };
        Ok(Self { mixing, noise, dims })
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn noise(&self) -> &NoiseCovariance {
        &self.noise
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    /// Number of signals `k`.
    pub fn signals(&self) -> usize {
        self.mixing.ncols()
    }

    /// Draw signal-bearing records `X` (`p × T`) and noise records `Z`
    /// (`p × n`); signals and noise innovations both follow `dist`.
    pub fn draw_records<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        dist: EntryDistribution,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (p, n, t) = (self.dims.p(), self.dims.n(), self.dims.t());
        let k = self.signals();
        let signals = dist.draw_matrix(rng, k, t);
        let mut x = dist.draw_matrix(rng, p, t);
        self.noise.apply_root(&mut x)?;
        if k > 0 {
            x += &self.mixing * signals;
        }
        let mut z = dist.draw_matrix(rng, p, n);
        self.noise.apply_root(&mut z)?;
        Ok((x, z))
    }
}

/// `A = (√c₁ e₁, √c₂ (e₂+e₃)/√2, √c₂ (e₂−e₃)/√2)`: one strong signal and a
/// rank-two weaker pair.
pub fn standard_mixing(p: usize, strong: f64, weak: f64) -> Result<DMatrix<f64>> {
    if p < 3 {
        return Err(Error::ParameterDomain(format!("standard mixing needs p ≥ 3, got {p}")));
    }
    let mut a = DMatrix::zeros(p, 3);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    a[(0, 0)] = strong.sqrt();
    a[(1, 1)] = weak.sqrt() * h;
    a[(2, 1)] = weak.sqrt() * h;
    a[(1, 2)] = weak.sqrt() * h;
    a[(2, 2)] = -weak.sqrt() * h;
    Ok(a)
}

/// How the offset `d_n` above the right edge is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DnRule {
    /// `ln(ln p) / p^{2/3}`.
    #[default]
    LogLog,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DetectorConfig {
    #[serde(default)]
    pub dn: DnRule,
    /// Subtract per-variable means before forming `S₁`, `S₂` (no
    /// degrees-of-freedom correction).
    #[serde(default)]
    pub center: bool,
}

impl DetectorConfig {
    pub fn with_offset(d_n: f64) -> Self {
        Self {
            dn: DnRule::Fixed(d_n),
            center: false,
        }
    }

    pub fn offset(&self, p: usize) -> Result<f64> {
        let d = match self.dn {
            DnRule::Fixed(d) => d,
            DnRule::LogLog => (p as f64).ln().ln() / (p as f64).powf(2.0 / 3.0),
        };
        if d.is_finite() && d > 0.0 {
            Ok(d)
        } else {
            Err(Error::ParameterDomain(format!("threshold offset must be positive, got {d} (p = {p})")))
        }
    }
}

/// Number of leading eigenvalues at or above `b + d_n`.
pub fn estimate_count(eigenvalues: &[f64], params: &FisherParams, config: &DetectorConfig) -> Result<usize> {
    if eigenvalues.windows(2).any(|w| !(w[0] >= w[1])) {
        return Err(Error::Contract("eigenvalues must be sorted in decreasing order".into()));
    }
    let threshold = support_edges(params).b + config.offset(eigenvalues.len())?;
    Ok(eigenvalues.iter().take_while(|&&l| l >= threshold).count())
}

/// Outcome of [`detect_with_diagnostics`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub k_hat: usize,
    pub b: f64,
    pub d_n: f64,
    pub params: FisherParams,
    /// Full pencil spectrum, decreasing.
    pub eigenvalues: Vec<f64>,
}

fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    out
}

pub fn detect_with_diagnostics(
    x_records: &DMatrix<f64>,
    z_records: &DMatrix<f64>,
    config: &DetectorConfig,
) -> Result<Detection> {
    let p = x_records.nrows();
    if z_records.nrows() != p {
        return Err(Error::Contract(format!(
            "signal records have {p} variables but noise records have {}",
            z_records.nrows()
        )));
    }
    let (n, t) = (z_records.ncols(), x_records.ncols());
    if p == 0 || t == 0 {
        return Err(Error::Contract("record matrices must be non-empty".into()));
    }
    if p >= n {
        return Err(Error::NumericalRank(format!(
            "S₂ is singular in the limit: need p < n, got p = {p}, n = {n}"
        )));
    }
    let params = FisherParams::from_dims(p, n, t)?;
    let (s1, s2) = if config.center {
        (gram(&centered(x_records)), gram(&centered(z_records)))
    } else {
        (gram(x_records), gram(z_records))
    };
    let mut eigenvalues = pencil_eigenvalues(&s1, &s2)?;
    clamp_zero_roots(&mut eigenvalues);
    let k_hat = estimate_count(&eigenvalues, &params, config)?;
    Ok(Detection {
        k_hat,
        b: support_edges(&params).b,
        d_n: config.offset(p)?,
        params,
        eigenvalues,
    })
}

/// Estimated number of signals in `x_records` (`p × T`) given noise-only
/// `z_records` (`p × n`).
pub fn detect(x_records: &DMatrix<f64>, z_records: &DMatrix<f64>, config: &DetectorConfig) -> Result<usize> {
    detect_with_diagnostics(x_records, z_records, config).map(|d| d.k_hat)
}

/// Nonzero eigenvalues of `AAᵀΣ₂⁻¹`, decreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveSpikes {
    pub values: Vec<f64>,
    /// Number of mixing columns `k`; more than `values.len()` when `A` is
    /// rank deficient.
    pub signals: usize,
}

impl EffectiveSpikes {
    pub fn is_rank_deficient(&self) -> bool {
        self.values.len() < self.signals
    }

    /// Population spikes after whitening, `value + 1`.
    pub fn whitened(&self) -> Vec<f64> {
        self.values.iter().map(|v| v + 1.0).collect()
    }
}

pub fn effective_spikes(model: &SignalModel) -> Result<EffectiveSpikes> {
    let k = model.signals();
    if k == 0 {
        return Ok(EffectiveSpikes { values: vec![], signals: 0 });
    }
    // eig(AAᵀΣ₂⁻¹) \ {0} = eig(BᵀB) with B = L⁻¹A.
    let b = model.noise.whiten(&model.mixing)?;
    let all = symmetric_eigenvalues_desc(b.transpose() * b);
    let top = all.first().copied().unwrap_or(0.0).max(0.0);
    let values = all.into_iter().filter(|&v| v > 1e-10 * top && v > 0.0).collect();
    Ok(EffectiveSpikes { values, signals: k })
}

/// Number of effective spikes whose whitened value exceeds the upper
/// critical point `γ(1 + √(c+y−cy))`.
pub fn detectability(model: &SignalModel, params: &FisherParams) -> Result<usize> {
    let (_, high) = critical_interval(params);
    Ok(effective_spikes(model)?
        .whitened()
        .into_iter()
        .filter(|&a| a > high)
        .count())
}
