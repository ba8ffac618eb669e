//! Meld-based switching feedback linearization for control-affine systems.
//!
//! The crate is `no_std` (with `alloc`). System evaluators are written once
//! over [`Scalar`] and differentiated by jet lifting.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod control;
pub mod coords;
pub mod dwell;
pub mod error;
pub mod estimate;
pub mod integrate;
pub mod jet;
pub mod lie;
pub mod linalg;
pub mod meld;
pub mod models;
pub mod reference;
pub mod sampling;
pub mod scalar;
pub mod schedule;
pub mod sim;
pub mod system;

pub use error::{Error, Result};
pub use jet::Jet;
pub use lie::LieOptions;
pub use scalar::Scalar;
pub use system::ControlAffineSystem;
