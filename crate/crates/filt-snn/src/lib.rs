//! Simulation and training engine for feedforward spiking networks that
//! classify by first output spike.
//!
//! Neurons follow a simplified spike response model evaluated in closed
//! form, inputs are images encoded into per-pixel spike latencies, and
//! learning combines a spike-time coincidence rule with a per-neuron
//! "desirability" signal propagated backwards through the weights.
//! The [`analysis`] module studies the single-neuron equilibria of the
//! rule; [`trainer`] runs the full MNIST pipeline.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod network;
pub mod neuron;
pub mod plasticity;
pub mod trainer;

pub use error::{Error, Result};
