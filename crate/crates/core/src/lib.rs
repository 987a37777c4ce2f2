//! Spiked Fisher matrices: the limiting spectral law of `S₂⁻¹S₁`, outlier
//! limits and their Gaussian fluctuations, seeded simulation of the spiked
//! model, and a consistent estimator of the number of signals in a
//! two-sample signal-plus-noise problem.
//!
//! ```
//! use spiked_fisher::{spike_theory::phi, wachter_law::FisherParams};
//!
//! let params = FisherParams::new(0.2, 0.5).unwrap();
//! let lambda = phi(&params, 20.0).unwrap();
//! assert!((lambda - 42.6667).abs() < 1e-3);
//! ```

pub mod detector;
pub mod error;
pub mod experiments;
pub mod fisher_sampler;
pub mod linalg;
pub mod quadrature;
pub mod seeding;
pub mod spike_theory;
pub mod wachter_law;

pub use detector::{detect, detect_with_diagnostics, estimate_count, DetectorConfig, DnRule, NoiseCovariance, SignalModel};
pub use error::{Error, Result};
pub use fisher_sampler::{sample_spectrum, EntryDistribution, ModelDims, SpectrumSample};
pub use spike_theory::{Spike, SpikeSpec};
pub use wachter_law::FisherParams;
