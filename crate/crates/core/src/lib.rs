//! MSE-based transmit precoding and linear receiver design for two-tier
//! MIMO heterogeneous networks, with Monte Carlo evaluation.
//!
//! * [`channel`]: topology, pathloss, Rayleigh fading, effective gains, CSI errors
//! * [`sum_mse`]: sum-MSE objective and the RAO / UAON alternating designs
//! * [`separate_mse`]: block-diagonalized per-user designs with LP power allocation
//! * [`robust`]: the same designs against estimated gains
//! * [`montecarlo`]: QPSK link simulation, sweeps and learning curves
//! * [`container`]: JSON storage of channels and designs

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod container;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod rng;
pub mod robust;
pub mod separate_mse;
pub mod sum_mse;

pub use error::{Error, Result};
