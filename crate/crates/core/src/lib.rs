//! Freeway performance measures (VMT, VHT, VHD) from single-loop detector
//! stations, optionally fused with third-party probe travel times.
//!
//! The crate is organised around the two estimation routes and the synthetic
//! corridor used to score them:
//!
//! * [`corridor`], [`grid`] and [`field`] hold the linear-referenced geometry,
//!   the time grid and dense space-time value arrays.
//! * [`detector`] turns per-lane counts and occupancies into point speeds with
//!   g-factors and an exponential filter, and calibrates the g-factors.
//! * [`conflate`] reconstructs detector fields at the evaluation points with
//!   adaptive kernel smoothing (GASM) and its confined variant (C-GASM).
//! * [`ttfuse`] spreads vendor link travel times over the cells.
//! * [`measures`] computes the performance measures and error metrics.
//! * [`sim`] is a cell-transmission corridor simulator that produces ground
//!   truth, emulated detectors and probe travel times.
//! * [`pipeline`] wires everything together for one scenario run.

pub mod config;
pub mod conflate;
pub mod corridor;
pub mod detector;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod measures;
pub mod pipeline;
pub mod sim;
pub mod ttfuse;
pub mod units;

pub use error::{Error, Result};
