//! Upwind generalized finite difference (GFDM) simulator for coupled
//! single-phase pressure and temperature transport in 2D porous media.

pub mod cloud;
pub mod config;
pub mod assembly;
pub mod error;
pub mod march;
pub mod output;
pub mod props;
pub mod sparse;
pub mod stencil;
pub mod verify;

pub use error::{Error, Result};
