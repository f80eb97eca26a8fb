//! Spiking network simulation with inference-time homeostasis.
//!
//! The crate is organised around a small feedforward simulator ([`snn`]) and
//! the adapters that plug into it at inference time ([`homeostasis`]):
//! BCM-style weight adaptation (DWAM and its literal biological variant
//! BioDWAM) and the BDETT dynamic firing threshold. [`degradation`] supplies
//! the input and weight perturbations used to stress a network, [`metrics`]
//! measures how far firing rates drift under them, and [`experiments`] ties
//! everything into reproducible scenarios.

pub mod degradation;
pub mod error;
pub mod experiments;
pub mod homeostasis;
pub mod metrics;
pub mod rng;
pub mod snn;
pub mod stats;

pub use error::{Error, Result};
