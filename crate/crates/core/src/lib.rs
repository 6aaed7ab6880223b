//! Achievable-rate optimization for RIS-aided MIMO links.

// parameter checks are written `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ao;
pub mod channel;
pub mod complexity;
pub mod error;
pub mod experiments;
pub mod fspl;
pub mod numerics;
pub mod objective;
pub mod optimizer;
pub mod pgm;
pub mod projections;
pub mod scenario;
pub mod trace;

pub use error::{Result, RisError};
