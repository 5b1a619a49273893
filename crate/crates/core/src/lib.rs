//! Integrated sensing, computing and semantic communication for vehicular
//! networks.
//!
//! A roadside unit with a uniform linear array tracks vehicles with an
//! extended Kalman filter and, in every time slot, designs communication and
//! sensing covariances together with semantic extraction ratios. The design
//! maximizes a chance-constrained semantic secrecy margin and minimizes the
//! posterior Cramér–Rao bound on each vehicle's angle, under a joint budget
//! for transmit and semantic-computing power.
//!
//! The crate is organized bottom-up:
//!
//! - [`array`]: steering vectors and channel estimates,
//! - [`kinematics`]: the vehicle state model,
//! - [`tracking`]: EKF and particle filter,
//! - [`sensing`]: Fisher information and the posterior CRB,
//! - [`semantic`]: SINRs, semantic rates, secrecy rate and power accounting,
//! - [`opt`]: the conic program, alternating optimization and randomization,
//! - [`sim`]: scenario files, the slot loop and result files.

pub mod array;
pub mod error;
pub mod kinematics;
pub mod linalg;
pub mod opt;
pub mod semantic;
pub mod sensing;
pub mod sim;
pub mod tracking;

pub use error::{Error, Result};

// BLAS/LAPACK symbols for the conic solver come from the system OpenBLAS.
use openblas_src as _;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/arrays.md")]
    mod arrays {}
    #[doc = include_str!("../../../book/src/tracking.md")]
    mod tracking {}
    #[doc = include_str!("../../../book/src/sensing.md")]
    mod sensing {}
    #[doc = include_str!("../../../book/src/semantic.md")]
    mod semantic {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/outputs.md")]
    mod outputs {}
}
