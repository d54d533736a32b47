//! Floating-point rounding attacks on certified robustness radii, and their
//! mitigation with rounded interval arithmetic.
//!
//! A certified radius computed in round-to-nearest arithmetic can be
//! slightly larger than the true one. [`attack`] finds inputs that exploit
//! this; [`certify::sound_radius_linear`] computes a radius with
//! [`interval`] arithmetic that cannot be exploited this way.

pub mod attack;
pub mod certify;
pub mod data_io;
pub mod error;
pub mod experiment;
pub mod fp;
pub mod interval;
pub mod models;
pub mod smoothing;
pub mod train;

pub use attack::{AttackBudget, AttackOutcome, AttackResult, Domain, ThresholdKind, Verdict};
pub use certify::CertificateReport;
pub use data_io::{Dataset, Model};
pub use error::{Error, Result};
pub use interval::Interval;
pub use models::{LinearModel, ReluNetwork};
pub use smoothing::SmoothingConfig;
