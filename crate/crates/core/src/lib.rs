//! Slot-based simulator and optimizer for RIS-assisted multi-user MIMO
//! computation offloading.
//!
//! Each slot the controller greedily minimizes a drift-plus-penalty bound:
//! RIS phases are updated by projected gradient steps, per-user uplink
//! covariances by water-filling, and edge CPU cycles by a ratio-greedy rule.
//! The harness drives the slotted queue dynamics and parameter sweeps.
//!
//! The numerical kernels (`channel`, `ris`, `precoder`, `scheduler`,
//! `queues`) are generic over [`Real`] so they run in `f32` or `f64`; the
//! controller and simulation harness are concrete in `f64`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod controller;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod precoder;
pub mod queues;
pub mod ris;
pub mod scalar;
pub mod scheduler;
pub mod selftest;
pub mod sim;
pub mod sweep;

pub use config::{KnowledgeMode, RisMode, SystemConfig};
pub use controller::{optimize_slot, SlotDecision, Strategy};
pub use error::{Error, Result};
pub use scalar::Real;
pub use sim::{run_simulation, MetricsLog, RunSummary};
pub use sweep::{Fig1Row, Fig2Row, SweepSpec};

/// Version string written into run manifests.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Complex scalar over `f64`.
pub type Cplx = num_complex::Complex<f64>;
/// Dense complex matrix over `f64`.
pub type CMatrix = linalg::CMat<f64>;
/// Dense complex column vector over `f64`.
pub type CVector = linalg::CVec<f64>;

pub type ChannelTriple64 = channel::ChannelTriple<f64>;
pub type EffectiveChannel64 = channel::EffectiveChannel<f64>;
pub type RisConfig64 = ris::RisConfig<f64>;
pub type QueueState64 = queues::QueueState<f64>;
pub type CovarianceResult64 = precoder::CovarianceResult<f64>;
pub type ComputeAllocation64 = scheduler::ComputeAllocation<f64>;

pub type ChannelTriple32 = channel::ChannelTriple<f32>;
pub type RisConfig32 = ris::RisConfig<f32>;
pub type QueueState32 = queues::QueueState<f32>;
