//! LIF and SRM membrane dynamics.
//!
//! A step is split into [`integrate`] (compute potentials from incoming
//! spikes) and [`fire`] (compare against per-neuron thresholds). Dynamic
//! threshold providers sit between the two.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::weights::WeightMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifConfig {
    /// Carry factor applied to the previous potential when the neuron did
    /// not spike on the previous step.
    pub decay: f64,
    pub threshold: f64,
}

impl Default for LifConfig {
    fn default() -> Self {
        Self {
            decay: 0.75,
            threshold: 1.0,
        }
    }
}

impl LifConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!(
                "LIF decay {} not in (0, 1]",
                self.decay
            )));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::Config(format!(
                "LIF threshold {} must be positive",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrmConfig {
    pub tau_s: f64,
    pub tau_r: f64,
    pub threshold: f64,
    /// Kernel truncation horizon in timesteps.
    pub horizon: usize,
}

impl Default for SrmConfig {
    fn default() -> Self {
        Self {
            tau_s: 1.0,
            tau_r: 1.0,
            threshold: 1.0,
            horizon: 16,
        }
    }
}

impl SrmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s.is_finite()
            && self.tau_s > 0.0
            && self.tau_r.is_finite()
            && self.tau_r > 0.0)
        {
            return Err(Error::Config("SRM time constants must be positive".into()));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::Config(format!(
                "SRM threshold {} must be positive",
                self.threshold
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config(
                "SRM kernel horizon must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Alpha-shaped response kernel `(t/tau_s) e^(1 - t/tau_s)`, zero for t <= 0.
    pub fn response_kernel(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let x = t / self.tau_s;
        x * (1.0 - x).exp()
    }

    /// Refractory kernel `-2 theta e^(-t/tau_r)`, zero for t <= 0.
    pub fn refractory_kernel(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        -2.0 * self.threshold * (-t / self.tau_r).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NeuronModel {
    Lif(LifConfig),
    Srm(SrmConfig),
}

impl Default for NeuronModel {
    fn default() -> Self {
        NeuronModel::Lif(LifConfig::default())
    }
}

impl NeuronModel {
    pub fn threshold(&self) -> f64 {
        match self {
            NeuronModel::Lif(c) => c.threshold,
            NeuronModel::Srm(c) => c.threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NeuronModel::Lif(c) => c.validate(),
            NeuronModel::Srm(c) => c.validate(),
        }
    }
}

/// Spike history and sampled kernels for an SRM layer.
#[derive(Debug, Clone)]
pub struct SrmHistory {
    response: Vec<f64>,
    refractory: Vec<f64>,
    /// Most recent first; `inputs[k]` arrived `k + 1` steps ago.
    inputs: VecDeque<Vec<u8>>,
    outputs: VecDeque<Vec<u8>>,
    filtered: Vec<f64>,
}

impl SrmHistory {
    fn new(cfg: &SrmConfig) -> Self {
        let k = cfg.horizon;
        Self {
            response: (1..=k).map(|t| cfg.response_kernel(t as f64)).collect(),
            refractory: (1..=k).map(|t| cfg.refractory_kernel(t as f64)).collect(),
            inputs: VecDeque::with_capacity(k + 1),
            outputs: VecDeque::with_capacity(k + 1),
            filtered: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.inputs.len().max(self.outputs.len())
    }

    fn push(queue: &mut VecDeque<Vec<u8>>, spikes: &[u8], horizon: usize) {
        let mut buf = if queue.len() >= horizon {
            queue.pop_back().unwrap_or_default()
        } else {
            Vec::with_capacity(spikes.len())
        };
        buf.clear();
        buf.extend_from_slice(spikes);
        queue.push_front(buf);
    }
}

/// Membrane potentials and last emitted spikes for one layer.
#[derive(Debug, Clone)]
pub struct LayerState {
    potentials: Vec<f64>,
    spikes: Vec<u8>,
    srm: Option<SrmHistory>,
}

impl LayerState {
    pub fn new(neurons: usize, model: &NeuronModel) -> Self {
        Self {
            potentials: vec![0.0; neurons],
            spikes: vec![0; neurons],
            srm: match model {
                NeuronModel::Lif(_) => None,
                NeuronModel::Srm(cfg) => Some(SrmHistory::new(cfg)),
            },
        }
    }

    pub fn neurons(&self) -> usize {
        self.potentials.len()
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    /// Spikes emitted on the most recent step.
    pub fn spikes(&self) -> &[u8] {
        &self.spikes
    }

    pub fn srm_history(&self) -> Option<&SrmHistory> {
        self.srm.as_ref()
    }

    /// Sets the potential and previous-spike flag of one neuron; used to
    /// start a layer from a known state.
    pub fn set_neuron(&mut self, neuron: usize, potential: f64, spiked: bool) {
        self.potentials[neuron] = potential;
        self.spikes[neuron] = u8::from(spiked);
    }

    pub fn reset(&mut self) {
        self.potentials.fill(0.0);
        self.spikes.fill(0);
        if let Some(h) = &mut self.srm {
            h.inputs.clear();
            h.outputs.clear();
        }
    }
}

fn check_dims(state: &LayerState, input: &[u8], weights: &WeightMatrix) -> Result<()> {
    if weights.rows() != state.neurons() || weights.cols() != input.len() {
        return Err(Error::Topology(format!(
            "layer of {} neurons with {} inputs cannot use a {}x{} weight matrix",
            state.neurons(),
            input.len(),
            weights.rows(),
            weights.cols()
        )));
    }
    Ok(())
}

/// Updates the membrane potentials of `state` for one timestep.
pub fn integrate(
    state: &mut LayerState,
    input: &[u8],
    weights: &WeightMatrix,
    model: &NeuronModel,
) -> Result<()> {
    check_dims(state, input, weights)?;
    match model {
        NeuronModel::Lif(cfg) => {
            let prev = std::mem::take(&mut state.potentials);
            let mut v = vec![0.0; prev.len()];
            weights.spike_input(input, &mut v);
            for (i, vi) in v.iter_mut().enumerate() {
                let carry = if state.spikes[i] == 0 { cfg.decay } else { 0.0 };
                *vi += prev[i] * carry + weights.bias_at(i);
            }
            state.potentials = v;
        }
        NeuronModel::Srm(cfg) => {
            if weights.bias().iter().any(|&b| b != 0.0) {
                return Err(Error::Topology("SRM layers do not take a bias".into()));
            }
            let hist = state
                .srm
                .as_mut()
                .ok_or_else(|| Error::Topology("SRM layer state missing history".into()))?;
            // previous step's output joins the refractory history before use
            SrmHistory::push(&mut hist.outputs, &state.spikes, cfg.horizon);
            hist.filtered.clear();
            hist.filtered.resize(input.len(), 0.0);
            for (k, past) in hist.inputs.iter().enumerate() {
                let eps = hist.response[k];
                for (x, &s) in hist.filtered.iter_mut().zip(past) {
                    if s != 0 {
                        *x += eps;
                    }
                }
            }
            weights.matvec(&hist.filtered, &mut state.potentials);
            for (k, past) in hist.outputs.iter().enumerate() {
                let r = hist.refractory[k];
                for (v, &s) in state.potentials.iter_mut().zip(past) {
                    if s != 0 {
                        *v += r;
                    }
                }
            }
            SrmHistory::push(&mut hist.inputs, input, cfg.horizon);
        }
    }
    if state.potentials.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow(
            "membrane potential is not finite".into(),
        ));
    }
    Ok(())
}

/// Emits a spike wherever the potential reaches its threshold.
pub fn fire(state: &mut LayerState, thresholds: &[f64]) -> Result<()> {
    if thresholds.len() != state.neurons() {
        return Err(Error::Topology(format!(
            "{} thresholds for {} neurons",
            thresholds.len(),
            state.neurons()
        )));
    }
    for ((s, v), th) in state
        .spikes
        .iter_mut()
        .zip(&state.potentials)
        .zip(thresholds)
    {
        *s = u8::from(v >= th);
    }
    Ok(())
}

/// One LIF timestep; returns the emitted spikes.
pub fn lif_step<'a>(
    state: &'a mut LayerState,
    input: &[u8],
    weights: &WeightMatrix,
    thresholds: &[f64],
    cfg: &LifConfig,
) -> Result<&'a [u8]> {
    integrate(state, input, weights, &NeuronModel::Lif(*cfg))?;
    fire(state, thresholds)?;
    Ok(state.spikes())
}

/// One SRM timestep; returns the emitted spikes.
pub fn srm_step<'a>(
    state: &'a mut LayerState,
    input: &[u8],
    weights: &WeightMatrix,
    thresholds: &[f64],
    cfg: &SrmConfig,
) -> Result<&'a [u8]> {
    integrate(state, input, weights, &NeuronModel::Srm(*cfg))?;
    fire(state, thresholds)?;
    Ok(state.spikes())
}
