//! Feedforward spiking network simulation.

pub mod network;
pub mod neuron;
pub mod spikes;
pub mod weights;

pub use network::{ForwardOutput, Network, NetworkTopology, ThresholdProvider};
pub use neuron::{
    fire, integrate, lif_step, srm_step, LayerState, LifConfig, NeuronModel, SrmConfig,
};
pub use spikes::{decode_rate, poisson_encode, SpikeTrain};
pub use weights::{Checkpoint, RandomInit, WeightMatrix};
