//! Precoder optimization for the multi-antenna broadcast channel with partial
//! transmitter-side channel knowledge.
//!
//! The crate covers linearly precoded and dirty paper coded transmission
//! strategies, with and without message splitting:
//!
//! * [`channel`] draws fading blocks, channel estimates and conditional samples
//!   used for sample average approximation of average rates.
//! * [`strategy`] describes every strategy as a [`strategy::StreamLayout`]:
//!   the streams, who decodes them, and in which order.
//! * [`rates`] evaluates instantaneous/average rates and the MMSE quantities.
//! * [`qcqp`] solves the convex per-iteration subproblem.
//! * [`optimizer`] runs the WMMSE alternating optimization per block.
//! * [`experiments`] sweeps blocks, SNR, CSIT quality and user weights.

// `!(x >= 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod linalg;
pub mod optimizer;
pub mod qcqp;
pub mod rates;
pub mod strategy;

pub use error::{Error, Result};
