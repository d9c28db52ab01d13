//! Quantum illumination with Gaussian and non-Gaussian probes.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases below fix it to `f64`. Sweeps and output live in [`experiments`].

pub mod correlations;
pub mod discrimination;
pub mod error;
pub mod experiments;
pub mod probe;
pub mod scalar;
pub mod special;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use probe::ProbeOp;
pub use scalar::Real;
pub use state::BathModel;

pub type ProbeSpec = probe::ProbeSpec<f64>;
pub type FockVector = probe::FockVector<f64>;
pub type DensityMatrix = state::DensityMatrix<f64>;
pub type ChannelParams = state::ChannelParams<f64>;
pub type NoiseModel = state::NoiseModel<f64>;
pub type ProbeEnsemble = state::ProbeEnsemble<f64>;
pub type ChernoffResult = discrimination::ChernoffResult<f64>;
pub type AdvantageResult = discrimination::AdvantageResult<f64>;
pub type EfficiencyResult = discrimination::EfficiencyResult<f64>;
pub type CorrelationReport = correlations::CorrelationReport<f64>;
