//! Simulation toolkit for GAN-based intrusion detection on IoT devices.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense feed-forward networks with cached forward passes,
//!   reverse-mode gradients, Adam, and the `DGW1` weight file format.
//! - [`gan`]: discriminator/generator wrappers, the batch losses, value
//!   function estimates and single-node (standalone or centralized) training.
//! - [`federation`]: the distributed protocol with one central generator,
//!   per-device discriminators and ring weight swapping.
//! - [`theory`]: discrete divergence oracles and closed-form optima used to
//!   check training runs against analytic predictions.
//! - [`data`]: dataset ingestion, splitting, partitioning, normalisation and
//!   synthetic mixtures.
//! - [`attack`]: false-data-injection attacks, the threshold detector and
//!   confusion-count metrics.
//!
//! All arithmetic is `f64`, logarithms are natural, and every random draw
//! comes from an explicitly seeded generator so runs are reproducible.

pub mod attack;
pub mod data;
mod error;
pub mod federation;
pub mod gan;
pub mod nn;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
