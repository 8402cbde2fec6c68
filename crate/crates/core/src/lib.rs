//! Continuous photodetection: microscopic detector model, SD- and E-model
//! photocount and waiting-time statistics, and exact/stochastic oracles.
//!
//! Every numerical routine is generic over [`Real`] (`f32` or `f64`); the
//! `*F64` aliases below fix the scalar for the common case. The oracles and
//! the quadrature cross-check run in `f64` only.

pub mod detector;
pub mod emodel;
pub mod error;
pub mod fock;
pub mod kernels;
pub mod microdetector;
pub mod oracle;
pub mod scalar;
pub mod sdmodel;
pub mod special;

pub use detector::{CountStats, IdealizedDetector, Variant, WaitingTimeCurve};
pub use error::{Error, Result};
pub use fock::{PhotonDistribution, StateFamily};
pub use microdetector::{DetectorParams, FieldMode, QjsTable, SnrScan};
pub use scalar::Real;

pub type PhotonDistributionF64 = PhotonDistribution<f64>;
pub type PhotonDistributionF32 = PhotonDistribution<f32>;
pub type IdealizedDetectorF64 = IdealizedDetector<f64>;
pub type CountStatsF64 = CountStats<f64>;
pub type WaitingTimeCurveF64 = WaitingTimeCurve<f64>;
pub type DetectorParamsF64 = DetectorParams<f64>;
pub type DetectorParamsF32 = DetectorParams<f32>;
pub type FieldModeF64 = FieldMode<f64>;
pub type QjsTableF64 = QjsTable<f64>;
pub type SnrScanF64 = SnrScan<f64>;
