//! Joint beamforming and RIS phase-shift optimization for secure downlink
//! transmission in RIS-aided cell-free networks.
//!
//! The crate is organized bottom-up:
//!
//! * [`scenario`] holds the deployment geometry and radio constants and
//!   synthesizes channels from a path-loss + Rician model.
//! * [`network`] stacks the per-link channels into the aggregated forms used
//!   by every solver and evaluates SINR and weighted sum secrecy rate (WSSR).
//! * [`bf_sca`] builds and solves the convex beamforming surrogate.
//! * [`phase_admm`] builds the phase quadratic and solves it by ADMM under a
//!   unit-modulus constraint, with optional discrete-phase projection.
//! * [`assign_lcr`] handles the RIS-to-user assignment via a lifted conic
//!   relaxation solved by a log-barrier method.
//! * [`driver`] runs the alternating-optimization loops, the two-timescale
//!   schedule and parameter sweeps.
//!
//! Rates are in nats throughout. Powers are linear watts.

pub mod assign_lcr;
pub mod bf_sca;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod network;
pub mod par;
pub mod phase_admm;
pub mod scenario;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
