//! Hawkes order flows and the martingale price they imply.
//!
//! Buy and sell market orders arrive as two independent Hawkes processes.
//! Assuming the price is a martingale and permanent impact is linear in
//! volume, the price follows a propagator model whose kernel ζ is fixed by
//! the excitation kernel φ. This crate simulates such flows and builds ζ in
//! two independent ways. It also covers the near-critical limits of the
//! flow covariance and of metaorder impact.

pub mod error;
pub mod impact;
pub mod kernel;
pub mod longmemory;
pub mod manipulation;
pub mod numerics;
pub mod output;
pub mod price;
pub mod resolvent;
pub mod simulation;

pub use error::{Error, Result};
pub use impact::{ImpactCurve, PowerLawFit};
pub use kernel::{make_near_critical, KernelSpec, NearCriticalFamily, PowerTail};
pub use longmemory::{CovarianceCurve, GammaFit};
pub use manipulation::{ImpactModelSpec, ManipulationVerdict};
pub use resolvent::{
    check_martingale_identity, compute_resolvent, propagator_closed_form, propagator_from_resolvent,
    PropagatorKernel, ResolventGrid,
};
pub use simulation::{EventStream, Market, MarketConfig, MetaorderSpec, Side, SimulationMethod};
