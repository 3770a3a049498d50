//! Traffic load estimation for sleeping small base stations (SBSs).
//!
//! A sleeping SBS reports no traffic, yet cell-switching decisions and the
//! network power budget both depend on its load. This crate estimates that
//! load from two directions:
//!
//! * spatially, from the loads of active neighbor cells ([`spatial`]) or from
//!   active cells sharing the same daily pattern ([`clustering`]);
//! * temporally, from the cell's own history with an LSTM ([`lstm`]).
//!
//! [`power`] converts loads to watts with the EARTH model and [`evaluation`]
//! scores estimators with MAPE over seeded Monte-Carlo sweeps.

pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod lstm;
pub mod power;
pub mod seed;
pub mod spatial;
pub mod traffic;

pub use error::{Error, Result};

/// Decimal float encoding used by every CSV this crate writes:
/// 13 significant digits in scientific notation, stable across platforms.
pub fn fmt_decimal(v: f64) -> String {
    format!("{v:.12e}")
}
