use serde::{Deserialize, Serialize};

use super::neuron::{fire, integrate, LayerState, NeuronModel};
use super::spikes::SpikeTrain;
use super::weights::{Checkpoint, WeightMatrix};
use crate::error::{Error, Result};
use crate::homeostasis::{AdapterConfig, AdapterState, BdettConfig, BdettState, RateTracker};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ThresholdProvider {
    #[default]
    Static,
    Bdett(BdettConfig),
}

/// Layer sizes, neuron model, and the per-layer threshold providers and
/// per-boundary weight adapters.
///
/// `thresholds` has one entry per non-input layer and `adapters` one per
/// layer boundary; either may be left empty to mean "static" / "none"
/// everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkTopology {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub neuron: NeuronModel,
    #[serde(default)]
    pub thresholds: Vec<ThresholdProvider>,
    #[serde(default)]
    pub adapters: Vec<Option<AdapterConfig>>,
}

impl NetworkTopology {
    pub fn new(layer_sizes: Vec<usize>, neuron: NeuronModel) -> Self {
        Self {
            layer_sizes,
            neuron,
            thresholds: Vec::new(),
            adapters: Vec::new(),
        }
    }

    pub fn boundaries(&self) -> usize {
        self.layer_sizes.len().saturating_sub(1)
    }

    pub fn with_adapter(mut self, boundary: usize, cfg: Option<AdapterConfig>) -> Self {
        if self.adapters.is_empty() {
            self.adapters = vec![None; self.boundaries()];
        }
        if boundary < self.adapters.len() {
            self.adapters[boundary] = cfg;
        }
        self
    }

    pub fn with_adapter_everywhere(mut self, cfg: Option<AdapterConfig>) -> Self {
        self.adapters = vec![cfg; self.boundaries()];
        self
    }

    /// `layer` counts non-input layers from zero.
    pub fn with_threshold(mut self, layer: usize, provider: ThresholdProvider) -> Self {
        if self.thresholds.is_empty() {
            self.thresholds = vec![ThresholdProvider::Static; self.boundaries()];
        }
        if layer < self.thresholds.len() {
            self.thresholds[layer] = provider;
        }
        self
    }

    pub fn with_threshold_everywhere(mut self, provider: ThresholdProvider) -> Self {
        self.thresholds = vec![provider; self.boundaries()];
        self
    }

    pub fn threshold(&self, layer: usize) -> ThresholdProvider {
        self.thresholds.get(layer).copied().unwrap_or_default()
    }

    pub fn adapter(&self, boundary: usize) -> Option<AdapterConfig> {
        self.adapters.get(boundary).copied().flatten()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Topology("a network needs at least 2 layers".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Topology("layer sizes must be positive".into()));
        }
        self.neuron.validate()?;
        let b = self.boundaries();
        if !self.thresholds.is_empty() && self.thresholds.len() != b {
            return Err(Error::Topology(format!(
                "{} threshold providers for {b} non-input layers",
                self.thresholds.len()
            )));
        }
        if !self.adapters.is_empty() && self.adapters.len() != b {
            return Err(Error::Topology(format!(
                "{} adapters for {b} layer boundaries",
                self.adapters.len()
            )));
        }
        for l in 0..b {
            if let ThresholdProvider::Bdett(cfg) = self.threshold(l) {
                cfg.validate()?;
                if self.layer_sizes[l + 1] < 2 {
                    return Err(Error::Topology(format!(
                        "BDETT layer {} needs at least 2 neurons",
                        l + 1
                    )));
                }
            }
            if let Some(cfg) = self.adapter(l) {
                cfg.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum ThresholdState {
    Static(Vec<f64>),
    Bdett(BdettState),
}

impl ThresholdState {
    fn current(&self) -> &[f64] {
        match self {
            ThresholdState::Static(th) => th,
            ThresholdState::Bdett(s) => s.thresholds(),
        }
    }
}

#[derive(Debug, Clone)]
struct AdapterSlot {
    state: AdapterState,
    /// Observe-only slots track thresholds but never write weights.
    writes_weights: bool,
}

/// Result of one [`Network::forward`] call.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub output: SpikeTrain,
    /// Spikes emitted during this call, per layer (input layer first).
    pub counts: Vec<Vec<u64>>,
    pub steps: usize,
}

impl ForwardOutput {
    /// Firing rate of every neuron over this call, per layer.
    pub fn layer_rates(&self) -> Result<Vec<Vec<f64>>> {
        if self.steps == 0 {
            return Err(Error::EmptyTrial);
        }
        let t = self.steps as f64;
        Ok(self
            .counts
            .iter()
            .map(|layer| layer.iter().map(|&c| c as f64 / t).collect())
            .collect())
    }
}

/// A feedforward network with its weights and all runtime state.
///
/// Each timestep propagates spikes layer by layer, then updates the rate
/// trackers, then the adapters' thresholds and weights. Weight changes made
/// on step `t` are first seen on step `t + 1`.
#[derive(Debug, Clone)]
pub struct Network {
    topology: NetworkTopology,
    weights: Vec<WeightMatrix>,
    states: Vec<LayerState>,
    thresholds: Vec<ThresholdState>,
    rates: Vec<RateTracker>,
    adapters: Vec<Option<AdapterSlot>>,
}

impl Network {
    pub fn new(topology: NetworkTopology, weights: Vec<WeightMatrix>) -> Result<Self> {
        topology.validate()?;
        let sizes = &topology.layer_sizes;
        if weights.len() != topology.boundaries() {
            return Err(Error::Topology(format!(
                "{} weight matrices for {} boundaries",
                weights.len(),
                topology.boundaries()
            )));
        }
        for (l, w) in weights.iter().enumerate() {
            if w.rows() != sizes[l + 1] || w.cols() != sizes[l] {
                return Err(Error::Topology(format!(
                    "boundary {l}: matrix is {}x{}, topology needs {}x{}",
                    w.rows(),
                    w.cols(),
                    sizes[l + 1],
                    sizes[l]
                )));
            }
            if matches!(topology.neuron, NeuronModel::Srm(_)) && w.bias().iter().any(|&b| b != 0.0)
            {
                return Err(Error::Topology(format!(
                    "boundary {l}: SRM layers do not take a bias"
                )));
            }
        }
        let base = topology.neuron.threshold();
        let states = sizes[1..]
            .iter()
            .map(|&n| LayerState::new(n, &topology.neuron))
            .collect();
        let thresholds = sizes[1..]
            .iter()
            .enumerate()
            .map(|(l, &n)| match topology.threshold(l) {
                ThresholdProvider::Static => ThresholdState::Static(vec![base; n]),
                ThresholdProvider::Bdett(cfg) => {
                    ThresholdState::Bdett(BdettState::new(n, base, cfg))
                }
            })
            .collect();
        let adapters = (0..topology.boundaries())
            .map(|l| {
                topology.adapter(l).map(|cfg| AdapterSlot {
                    state: AdapterState::new(sizes[l + 1], cfg),
                    writes_weights: true,
                })
            })
            .collect();
        let mut net = Self {
            rates: Vec::new(),
            topology,
            weights,
            states,
            thresholds,
            adapters,
        };
        net.rebuild_rate_trackers();
        Ok(net)
    }

    pub fn from_checkpoint(topology: NetworkTopology, checkpoint: &Checkpoint) -> Result<Self> {
        if checkpoint.layer_sizes() != topology.layer_sizes.as_slice() {
            return Err(Error::Topology(format!(
                "checkpoint layer sizes {:?} do not match topology {:?}",
                checkpoint.layer_sizes(),
                topology.layer_sizes
            )));
        }
        Self::new(topology, checkpoint.layers().to_vec())
    }

    fn rebuild_rate_trackers(&mut self) {
        let sizes = &self.topology.layer_sizes;
        self.rates = sizes
            .iter()
            .enumerate()
            .map(|(l, &n)| {
                let window = l
                    .checked_sub(1)
                    .and_then(|b| self.adapters[b].as_ref())
                    .map_or(0, |slot| slot.state.config().window);
                RateTracker::new(n, window)
            })
            .collect();
    }

    /// Tracks DWAM-style thresholds on `boundary` without modifying weights.
    /// Replaces any adapter already attached there.
    pub fn attach_monitor(&mut self, boundary: usize, cfg: AdapterConfig) -> Result<()> {
        cfg.validate()?;
        if boundary >= self.topology.boundaries() {
            return Err(Error::Topology(format!("no layer boundary {boundary}")));
        }
        self.adapters[boundary] = Some(AdapterSlot {
            state: AdapterState::new(self.topology.layer_sizes[boundary + 1], cfg),
            writes_weights: false,
        });
        self.rebuild_rate_trackers();
        Ok(())
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn weights(&self) -> &[WeightMatrix] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<WeightMatrix> {
        self.weights
    }

    /// Rate tracker for layer `layer` (input layer is 0).
    pub fn rates(&self, layer: usize) -> &RateTracker {
        &self.rates[layer]
    }

    pub fn adapter(&self, boundary: usize) -> Option<&AdapterState> {
        self.adapters[boundary].as_ref().map(|s| &s.state)
    }

    /// Thresholds used on the last step by non-input layer `layer`.
    pub fn thresholds(&self, layer: usize) -> &[f64] {
        self.thresholds[layer].current()
    }

    pub fn layer_state(&self, layer: usize) -> &LayerState {
        &self.states[layer]
    }

    pub fn layer_state_mut(&mut self, layer: usize) -> &mut LayerState {
        &mut self.states[layer]
    }

    /// Clears potentials, spike history, rates, adapter thresholds and BDETT
    /// state. Weights are kept.
    pub fn reset(&mut self) {
        self.states.iter_mut().for_each(LayerState::reset);
        for th in &mut self.thresholds {
            if let ThresholdState::Bdett(s) = th {
                s.reset();
            }
        }
        self.rates.iter_mut().for_each(RateTracker::reset);
        for slot in self.adapters.iter_mut().flatten() {
            slot.state.reset();
        }
    }

    pub fn forward(&mut self, inputs: &SpikeTrain) -> Result<ForwardOutput> {
        self.forward_observed(inputs, |_, _| {})
    }

    /// Like [`forward`](Self::forward), calling `observer(t, self)` after each
    /// completed timestep (t counts from 1).
    pub fn forward_observed<F>(
        &mut self,
        inputs: &SpikeTrain,
        mut observer: F,
    ) -> Result<ForwardOutput>
    where
        F: FnMut(usize, &Network),
    {
        let sizes = self.topology.layer_sizes.clone();
        if inputs.neurons() != sizes[0] {
            return Err(Error::Topology(format!(
                "{} input channels for an input layer of {}",
                inputs.neurons(),
                sizes[0]
            )));
        }
        let steps = inputs.steps();
        let out_size = *sizes.last().unwrap_or(&0);
        let mut output = SpikeTrain::zeros(out_size, steps);
        let mut counts: Vec<Vec<u64>> = sizes.iter().map(|&n| vec![0; n]).collect();

        for t in 0..steps {
            let input = inputs.step(t);
            self.step(input)?;
            for (c, &s) in counts[0].iter_mut().zip(input) {
                *c += s as u64;
            }
            for (l, state) in self.states.iter().enumerate() {
                for (c, &s) in counts[l + 1].iter_mut().zip(state.spikes()) {
                    *c += s as u64;
                }
            }
            if let Some(last) = self.states.last() {
                output.set_step(t, last.spikes());
            }
            observer(t + 1, self);
        }
        Ok(ForwardOutput {
            output,
            counts,
            steps,
        })
    }

    fn step(&mut self, input: &[u8]) -> Result<()> {
        let Self {
            topology,
            weights,
            states,
            thresholds,
            rates,
            adapters,
        } = self;

        for l in 0..states.len() {
            let (done, rest) = states.split_at_mut(l);
            let pre = if l == 0 { input } else { done[l - 1].spikes() };
            let state = &mut rest[0];
            integrate(state, pre, &weights[l], &topology.neuron)?;
            match &mut thresholds[l] {
                ThresholdState::Static(th) => fire(state, th)?,
                ThresholdState::Bdett(bdett) => {
                    let th = bdett.advance(state.potentials());
                    fire(state, th)?;
                }
            }
        }

        rates[0].update(input)?;
        for (l, state) in states.iter().enumerate() {
            rates[l + 1].update(state.spikes())?;
        }

        for (l, slot) in adapters.iter_mut().enumerate() {
            let Some(slot) = slot else { continue };
            if slot.writes_weights {
                slot.state.step(&rates[l + 1], &rates[l], &mut weights[l])?;
            } else {
                slot.state.update_thresholds(&rates[l + 1])?;
            }
        }
        Ok(())
    }
}
