//! Locality-preserving scan orders for 2D patch grids and a minimal selective
//! state-space scan.
//!
//! The crate is `no_std` and only needs `alloc`. It is organised around four
//! modules:
//!
//! - [`curves`]: Hilbert orders in four directions, linear baselines (raster,
//!   boustrophedon, Morton), the vertical shift and non-power-of-two adaptation.
//! - [`metrics`]: continuity, adjacent-index-gap and worst-case locality
//!   measures for any [`curves::ScanOrder`].
//! - [`ssm`]: zero-order-hold discretisation, the LTI recurrence and its
//!   convolution kernel, the selective (time-variant) scan and its gradients.
//! - [`block`]: serialises a patch grid along the four directional curves,
//!   scans each sequence and merges the results back onto the grid.
//!
//! File formats and the command-line front end live in the `fractscan` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod block;
pub mod curves;
mod error;
pub mod metrics;
pub mod ssm;

pub use error::{Error, Result};
