//! Adaptive physical-layer network coding for the two-way relay channel with
//! M-PSK end nodes.

pub mod cli;
pub mod constellation;
pub mod error;
pub mod netcode_maps;
pub mod quantizer;
pub mod relay_sim;
pub mod singular_fades;

pub use error::{Error, Result};
