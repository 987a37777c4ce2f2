//! Seeded Monte Carlo studies: outlier fluctuations against their limiting
//! law, and detection frequencies along a dimension ladder.
//!
//! Replicate `r` always draws from its own stream (see [`crate::seeding`]),
//! and results are gathered in replicate order, so outputs are identical for
//! any thread count.

pub mod kde;
pub mod summary;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{detect, standard_mixing, DetectorConfig, NoiseCovariance, SignalModel};
use crate::error::{Error, Result};
use crate::fisher_sampler::{sample_spectrum, spectrum_packets, EntryDistribution, ModelDims, ReplicateId};
use crate::seeding::{replicate_rng, StreamDomain};
use crate::spike_theory::{draw_from_plan, limit_law_plan, LimitSampleDraw, SpikeSpec};

pub use kde::{kde_1d, kde_2d, linspace, silverman_bandwidth, DensityGrid};
pub use summary::{correlation, ks_distance, summarize, Summary};

/// Run `job` on a dedicated pool of `threads` workers (`0` = rayon default).
pub fn with_threads<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(vec![format!("cannot start worker pool: {e}")]))?;
    Ok(pool.install(job))
}

/// Where packet statistics are centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// `√p(l − φ(a))`.
    #[default]
    Analytic,
    /// `√p(l − mean l)`; diagnostics only.
    EmpiricalMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltStudyConfig {
    pub dims: ModelDims,
    pub spec: SpikeSpec,
    pub distribution: EntryDistribution,
    /// Defaults to the fourth moment of `distribution`.
    #[serde(default)]
    pub v4: Option<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub centering: Centering,
}

impl CltStudyConfig {
    pub fn v4(&self) -> f64 {
        self.v4.unwrap_or_else(|| self.distribution.v4())
    }

    /// Every problem with the configuration, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.spec.rank() > self.dims.p() {
            problems.push(format!(
                "total spike multiplicity {} exceeds p = {}",
                self.spec.rank(),
                self.dims.p()
            ));
        }
        match self.dims.params() {
            Err(e) => problems.push(e.to_string()),
            Ok(params) => {
                if let Err(e) = limit_law_plan(&params, &self.spec, self.v4()) {
                    problems.push(e.to_string());
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Scaled packet values of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub index: u64,
    /// `packets[i]` holds the `nᵢ` scaled values of spike `i`.
    pub packets: Vec<Vec<f64>>,
    pub k_hat: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltStudy {
    pub config: CltStudyConfig,
    /// `φ(aᵢ)` for each spike.
    pub lambdas: Vec<f64>,
    /// Limit variance `σᵢ²` of each packet entry for a simple spike with its
    /// given eigenvector (`(2θ + (v₄−3)ω Σ u⁴)/Δ²`); `None` for multiple spikes.
    pub limit_variances: Vec<Option<f64>>,
    pub records: Vec<ReplicateRecord>,
    pub limit_draws: Vec<LimitSampleDraw>,
}

impl CltStudy {
    /// Entry `j` of packet `i` across replicates.
    pub fn empirical(&self, packet: usize, entry: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.packets[packet][entry]).collect()
    }

    /// Entry `j` of block `i` across limit-law draws.
    pub fn limit(&self, packet: usize, entry: usize) -> Vec<f64> {
        self.limit_draws.iter().map(|d| d.blocks[packet][entry]).collect()
    }
}

/// Monte Carlo study of the `√p`-scaled outlier packets, paired with as many
/// draws from the limiting law.
pub fn run_clt_study(config: &CltStudyConfig) -> Result<CltStudy> {
    config.validate()?;
    let params = config.dims.params()?;
    let v4 = config.v4();
    let plan = limit_law_plan(&params, &config.spec, v4)?;
    let lambdas: Vec<f64> = plan.iter().map(|(k, _)| k.lambda).collect();
    let limit_variances = plan
        .iter()
        .enumerate()
        .map(|(i, (k, _))| {
            let u = config.spec.block(i);
            (u.ncols() == 1).then(|| {
                let quartic: f64 = u.iter().map(|v| v.powi(4)).sum();
                (2.0 * k.theta + (v4 - 3.0) * k.omega * quartic) / (k.delta * k.delta)
            })
        })
        .collect();
    let scale = (config.dims.p() as f64).sqrt();
    let seed = config.master_seed;

    let outcomes: Vec<Result<(ReplicateRecord, LimitSampleDraw)>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, StreamDomain::Spectrum, r);
            let mut sample = sample_spectrum(&mut rng, config.dims, &config.spec, config.distribution)?;
            sample.seed = Some(ReplicateId { master_seed: seed, index: r });
            let packets = spectrum_packets(&sample, &config.spec)?
                .into_iter()
                .map(|(i, vals)| vals.into_iter().map(|l| scale * (l - lambdas[i])).collect())
                .collect();
            let mut limit_rng = replicate_rng(seed, StreamDomain::LimitLaw, r);
            let draw = draw_from_plan(&mut limit_rng, &config.spec, &plan);
            Ok((ReplicateRecord { index: r, packets, k_hat: None }, draw))
        })
        .collect();
    let mut records = Vec::with_capacity(outcomes.len());
    let mut limit_draws = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let (rec, draw) = o?;
        records.push(rec);
        limit_draws.push(draw);
    }

    if config.centering == Centering::EmpiricalMean && !records.is_empty() {
        for (i, s) in config.spec.spikes().iter().enumerate() {
            for j in 0..s.multiplicity {
                let m = records.iter().map(|r| r.packets[i][j]).sum::<f64>() / records.len() as f64;
                records.iter_mut().for_each(|r| r.packets[i][j] -= m);
            }
        }
    }

    Ok(CltStudy {
        config: config.clone(),
        lambdas,
        limit_variances,
        records,
        limit_draws,
    })
}

/// Mixing matrix as a function of `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingFamily {
    /// No signal.
    None,
    /// See [`standard_mixing`].
    Standard { strong: f64, weak: f64 },
}

/// Noise covariance as a function of `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseFamily {
    Identity,
    /// First `p/2` variances `low`, the rest `high`.
    TwoLevel { low: f64, high: f64 },
    CompoundSymmetric { rho: f64 },
}

/// A signal model defined for every `p` of a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub mixing: MixingFamily,
    pub noise: NoiseFamily,
}

impl ModelFamily {
    /// Signals 10 and (5, 5) under diagonal noise with variances 1 and 2.
    pub fn model_one() -> Self {
        Self {
            mixing: MixingFamily::Standard { strong: 10.0, weak: 5.0 },
            noise: NoiseFamily::TwoLevel { low: 1.0, high: 2.0 },
        }
    }

    /// Same signals under compound-symmetric noise with correlation 0.1.
    pub fn model_two() -> Self {
        Self {
            mixing: MixingFamily::Standard { strong: 10.0, weak: 5.0 },
            noise: NoiseFamily::CompoundSymmetric { rho: 0.1 },
        }
    }

    pub fn null(noise: NoiseFamily) -> Self {
        Self {
            mixing: MixingFamily::None,
            noise,
        }
    }

    pub fn build(&self, dims: ModelDims) -> Result<SignalModel> {
        let p = dims.p();
        let mixing = match self.mixing {
            MixingFamily::None => DMatrix::zeros(p, 0),
            MixingFamily::Standard { strong, weak } => standard_mixing(p, strong, weak)?,
        };
        let noise = match self.noise {
            NoiseFamily::Identity => NoiseCovariance::Identity(p),
            NoiseFamily::TwoLevel { low, high } => NoiseCovariance::two_level(p, low, high),
            NoiseFamily::CompoundSymmetric { rho } => NoiseCovariance::CompoundSymmetric { p, rho },
        };
        SignalModel::new(mixing, noise, dims)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStudyConfig {
    pub ladder: Vec<ModelDims>,
    pub model: ModelFamily,
    pub distribution: EntryDistribution,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub detector: DetectorConfig,
}

impl DetectionStudyConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.ladder.is_empty() {
            problems.push("ladder must contain at least one (p, n, T) entry".to_string());
        }
        if self.replicates == 0 {
            problems.push("replicates must be at least 1".to_string());
        }
        for (i, d) in self.ladder.iter().enumerate() {
            if d.p() >= d.n() {
                problems.push(format!("ladder entry {i}: p = {} must be smaller than n = {}", d.p(), d.n()));
                continue;
            }
            if let Err(e) = self.model.build(*d) {
                problems.push(format!("ladder entry {i}: {e}"));
            }
            if let Err(e) = self.detector.offset(d.p()) {
                problems.push(format!("ladder entry {i}: {e}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Number of `k̂` bins: 0 through 4 and an overflow bin for `k̂ ≥ 5`.
pub const FREQUENCY_BINS: usize = 6;

/// Empirical distribution of `k̂` for each ladder entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    pub columns: Vec<ModelDims>,
    /// `counts[col][bin]`.
    pub counts: Vec<[u64; FREQUENCY_BINS]>,
    pub replicates: usize,
}

impl FrequencyTable {
    pub fn bin_label(bin: usize) -> String {
        if bin + 1 == FREQUENCY_BINS {
            format!("k_hat>={bin}")
        } else {
            format!("k_hat={bin}")
        }
    }

    pub fn frequency(&self, column: usize, bin: usize) -> f64 {
        self.counts[column][bin] as f64 / self.replicates as f64
    }

    pub fn frequencies(&self, column: usize) -> [f64; FREQUENCY_BINS] {
        std::array::from_fn(|b| self.frequency(column, b))
    }

    /// `P(k̂ = k)` in `column`; the overflow bin is returned for `k ≥ 5`.
    pub fn probability_of(&self, column: usize, k: usize) -> f64 {
        self.frequency(column, k.min(FREQUENCY_BINS - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionStudy {
    pub table: FrequencyTable,
    /// `k_hats[col][replicate]`.
    pub k_hats: Vec<Vec<usize>>,
}

pub fn run_detection_study(config: &DetectionStudyConfig) -> Result<DetectionStudy> {
    config.validate()?;
    let mut k_hats = Vec::with_capacity(config.ladder.len());
    for (col, dims) in config.ladder.iter().enumerate() {
        let model = config.model.build(*dims)?;
        let domain = StreamDomain::Detection(col as u32);
        let column: Result<Vec<usize>> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(config.master_seed, domain, r);
                let (x, z) = model.draw_records(&mut rng, config.distribution)?;
                detect(&x, &z, &config.detector)
            })
            .collect();
        k_hats.push(column?);
    }
    let counts = k_hats
        .iter()
        .map(|col| {
            let mut c = [0u64; FREQUENCY_BINS];
            for &k in col {
                c[k.min(FREQUENCY_BINS - 1)] += 1;
            }
            c
        })
        .collect();
    Ok(DetectionStudy {
        table: FrequencyTable {
            columns: config.ladder.clone(),
            counts,
            replicates: config.replicates,
        },
        k_hats,
    })
}

/// The `(p, n, T) = (50k, 100k, 250k)` ladder for `k = 1..=5`.
pub fn reference_ladder() -> Vec<ModelDims> {
    (1..=5)
        .map(|k| ModelDims::new(50 * k, 100 * k, 250 * k).expect("valid ladder entry"))
        .collect()
}
