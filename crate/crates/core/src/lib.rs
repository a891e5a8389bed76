//! Simulation of stationary real harmonizable symmetric alpha-stable processes
//! and single-path estimation of their spectral density.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod freq_est;
pub mod io;
pub mod kde;
pub mod multipath;
pub mod nonergodic;
pub mod periodogram;
pub mod quadrature;
pub mod simulate;
pub mod spectra;
pub mod stable;

pub use error::{Error, Result};
pub use quadrature::QuadratureConfig;
pub use spectra::SpectralDensity;
pub use stable::{Alpha, ScaleParam, StableConstants};
pub use simulate::{HarmonizableModel, PathSample, TruncationRule};
pub use periodogram::Periodogram;
pub use freq_est::{FrequencyEstimates, PeakConfig};
pub use kde::{BandwidthRule, DensityEstimate, Kernel, SpectralEstimate};
pub use nonergodic::ObservableSpec;
pub use multipath::{EnsembleSample, StableFit};
