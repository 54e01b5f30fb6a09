//! Link-level analysis and Monte Carlo simulation of packet delivery over
//! time-varying lognormal fading channels.
//!
//! The crate models a slotted link whose gain follows a stationary
//! log-domain AR(1) process, derives per-slot packet erasure probabilities
//! under fixed or channel-inverting power policies, and computes expected
//! delivery times for plain and network-coded transmission by backward
//! recursion over (packets remaining, channel slot). An event-driven
//! simulator reproduces every analytic quantity independently, and a small
//! linear-algebra layer supports correlated-packet error bounds and a
//! decorrelating precoder.
//!
//! Modules:
//! - [`channel`]: lognormal AR(1) process, traces, spectra, quantized chain.
//! - [`link`]: Q-functions, bit-error and erasure bounds, power policies,
//!   multidimensional orthant probabilities.
//! - [`delay`]: expected time to deliver N uncoded packets.
//! - [`coding`]: coded-round super-state recursion and optimizers.
//! - [`precode`]: correlation decomposition and decorrelating precoder.
//! - [`mcsim`]: the slot-by-slot Monte Carlo oracle and SNR sweeps.

// Validation guards are written as negated comparisons (`!(x > 0.0)`) so a
// NaN argument fails them too; matrix code indexes both sides of an
// assignment, which the range-loop lint dislikes.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod coding;
pub mod delay;
pub mod error;
pub mod link;
pub mod mcsim;
pub mod precode;

mod linalg;
mod numeric;

pub use error::{Error, Result};
