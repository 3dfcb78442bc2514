//! Simulator and analysis toolkit for post-selected linear-optical quantum
//! teleportation on a reconfigurable photonic chip.
//!
//! The crate models the full desk experiment: Fock-state propagation through
//! a characterized transfer matrix ([`fock`], [`circuit`]), realistic photon
//! sources ([`source`]), the teleportation protocol with Bell-measurement
//! corrections ([`protocol`]), maximum-likelihood state tomography
//! ([`tomography`]), element-wise circuit characterization
//! ([`characterization`]) and an end-to-end virtual experiment runner
//! ([`experiment`]).
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod characterization;
pub mod circuit;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod protocol;
pub mod rng;
pub mod source;
pub mod tomography;

pub use error::{Error, Result};
