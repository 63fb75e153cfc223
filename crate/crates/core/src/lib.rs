//! Security of reverse-reconciliation continuous-variable QKD.
//!
//! * [`gaussian`]: seeded block-parallel Gaussian sampling and empirical
//!   conditional variances.
//! * [`channel`]: Alice's source and the lossy, noisy Gaussian channel.
//! * [`security`]: closed-form conditional-variance bounds, security
//!   conditions and secret key rates.
//! * [`cloner`]: Monte Carlo entangling-cloner attack.
//! * [`protocol`]: sifting, parameter estimation and the abort decision.
//!
//! All variances are in shot-noise units and all rates in bits per symbol.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cloner;
pub mod config;
pub mod error;
pub mod gaussian;
pub mod protocol;
pub mod security;

pub use channel::{ChannelModel, ExcessNoise, Quadrature, SourceKind, SourceModel};
pub use cloner::{AttackAnalysis, ClonerSetup};
pub use error::{Error, Result};
pub use gaussian::{LinearEstimator, SampleBatch, ShotNoise};
pub use protocol::{EstimatedChannel, ProtocolOutcome, ProtocolRun, Realization};
pub use security::{ConditionalVarianceSet, KeyRateReport, Protocol, Verdict};
