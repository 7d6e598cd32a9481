//! Contact-aware 3D human motion forecasting.
//!
//! Given a static scene point cloud and an observed human motion, this crate
//! computes per-joint scene contact maps, predicts future contact maps with a
//! point-voxel network over DCT-coded map histories, and forecasts global
//! translation plus local poses conditioned on extracted contact points.
//! A separate temporal refiner smooths jittery tracks by minimizing Chamfer
//! plus smoothness energies against per-frame observation clouds.

pub mod autodiff;
pub mod dct;
pub mod error;
pub mod geom;
pub mod io;
pub mod nets;
pub mod refine;
pub mod train;

pub use error::{Error, Result};
