//! A single-output-neuron network driven towards a saturated firing rate.
//!
//! Input channels fire as Poisson trains at a fixed rate, a fully connected
//! hidden layer of LIF neurons relays them, and every hidden neuron excites
//! the lone output neuron. The weights are set by hand so that without any
//! adaptation the output neuron fires on nearly every step.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config_hash;
use crate::error::{Error, Result};
use crate::homeostasis::{AdapterConfig, AdapterKind};
use crate::rng::{stream_rng, Stream};
use crate::snn::{poisson_encode, Network, NetworkTopology, NeuronModel, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyAdapter {
    None,
    BioDwam,
    Dwam,
}

impl ToyAdapter {
    pub fn name(&self) -> &'static str {
        match self {
            ToyAdapter::None => "none",
            ToyAdapter::BioDwam => "biodwam",
            ToyAdapter::Dwam => "dwam",
        }
    }
}

impl std::str::FromStr for ToyAdapter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ToyAdapter::None),
            "biodwam" => Ok(ToyAdapter::BioDwam),
            "dwam" => Ok(ToyAdapter::Dwam),
            other => Err(Error::Config(format!(
                "unknown adapter {other:?}; expected none, biodwam or dwam"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyScenario {
    pub layer_sizes: Vec<usize>,
    pub neuron: NeuronModel,
    /// Firing probability of every input channel.
    pub input_rate: f64,
    /// Weight of every input-to-hidden synapse.
    pub hidden_weight: f64,
    /// Weight of every hidden-to-output synapse.
    pub output_weight: f64,
    pub steps: usize,
    pub adapter: ToyAdapter,
    /// Adapter hyperparameters; `kind` is overridden by `adapter`.
    pub adapter_params: AdapterConfig,
    /// Also adapt the input-to-hidden boundary, not just the output one.
    pub adapt_hidden: bool,
    /// Output-row weight indices recorded at every step.
    pub tracked_weights: Vec<usize>,
    pub seed: u64,
}

impl Default for ToyScenario {
    fn default() -> Self {
        Self {
            layer_sizes: vec![4, 16, 1],
            neuron: NeuronModel::default(),
            input_rate: 0.9,
            hidden_weight: 0.6,
            output_weight: 0.2,
            steps: 3000,
            adapter: ToyAdapter::None,
            adapter_params: AdapterConfig::dwam(),
            adapt_hidden: false,
            tracked_weights: vec![0, 1],
            seed: 0,
        }
    }
}

impl ToyScenario {
    pub fn with_adapter(mut self, adapter: ToyAdapter) -> Self {
        self.adapter = adapter;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "invalid toy layer sizes {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.last() != Some(&1) {
            return Err(Error::Config(
                "the toy output layer must have exactly one neuron".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.input_rate) {
            return Err(Error::Config(format!(
                "input_rate {} outside [0, 1]",
                self.input_rate
            )));
        }
        if !self.hidden_weight.is_finite() || !self.output_weight.is_finite() {
            return Err(Error::Config("toy weights must be finite".into()));
        }
        let penultimate = self.layer_sizes[self.layer_sizes.len() - 2];
        if let Some(&i) = self.tracked_weights.iter().find(|&&i| i >= penultimate) {
            return Err(Error::Config(format!(
                "tracked weight {i} outside an output row of {penultimate}"
            )));
        }
        self.neuron.validate()?;
        self.adapter_params.validate()
    }

    /// Hand-set weights: every synapse into the output layer carries
    /// `output_weight`, every other synapse `hidden_weight`.
    pub fn weights(&self) -> Vec<WeightMatrix> {
        let sizes = &self.layer_sizes;
        let last = sizes.len() - 2;
        (0..sizes.len() - 1)
            .map(|l| {
                let w = if l == last {
                    self.output_weight
                } else {
                    self.hidden_weight
                };
                WeightMatrix::filled(sizes[l + 1], sizes[l], w)
            })
            .collect()
    }

    fn adapter_config(&self) -> Option<AdapterConfig> {
        let kind = match self.adapter {
            ToyAdapter::None => return None,
            ToyAdapter::BioDwam => AdapterKind::BioDwam,
            ToyAdapter::Dwam => AdapterKind::Dwam,
        };
        Some(AdapterConfig {
            kind,
            ..self.adapter_params
        })
    }

    pub fn topology(&self) -> NetworkTopology {
        let mut topo = NetworkTopology::new(self.layer_sizes.clone(), self.neuron);
        let cfg = self.adapter_config();
        if self.adapt_hidden {
            topo = topo.with_adapter_everywhere(cfg);
        } else {
            let last = topo.boundaries() - 1;
            topo = topo.with_adapter(last, cfg);
        }
        topo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Cumulative firing rate of the output neuron.
    pub rate: f64,
    pub theta: f64,
    pub theta_m: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    pub adapter: ToyAdapter,
    pub seed: u64,
    pub config_hash: String,
    pub tracked_weights: Vec<usize>,
    pub steps: Vec<TraceStep>,
    pub final_weights: Vec<WeightMatrix>,
}

impl TraceLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_rate(&self) -> Option<f64> {
        self.steps.last().map(|s| s.rate)
    }

    /// Writes `step,neuron,rate,theta,theta_m,w<i>...` with one row per step.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec![
            "step".to_string(),
            "neuron".into(),
            "rate".into(),
            "theta".into(),
            "theta_m".into(),
        ];
        header.extend(self.tracked_weights.iter().map(|i| format!("w{i}")));
        wtr.write_record(&header)?;
        for s in &self.steps {
            let mut row = vec![
                s.step.to_string(),
                "0".into(),
                s.rate.to_string(),
                s.theta.to_string(),
                s.theta_m.to_string(),
            ];
            row.extend(s.weights.iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Runs the scenario and records the output neuron's rate and threshold at
/// every step.
///
/// Without an adapter the threshold column comes from a DWAM monitor that
/// observes the output rates but never writes a weight, so the recorded
/// trace can still be classified.
pub fn run_toy(scenario: &ToyScenario) -> Result<TraceLog> {
    scenario.validate()?;
    let hash = config_hash(scenario)?;
    let mut net = Network::new(scenario.topology(), scenario.weights())?;
    let out_boundary = net.topology().boundaries() - 1;
    if scenario.adapter == ToyAdapter::None {
        let monitor = AdapterConfig {
            kind: AdapterKind::Dwam,
            ..scenario.adapter_params
        };
        net.attach_monitor(out_boundary, monitor)?;
    }

    let mut rng = stream_rng(scenario.seed, Stream::Encode);
    let rates = vec![scenario.input_rate; scenario.layer_sizes[0]];
    let inputs = poisson_encode(&rates, scenario.steps, &mut rng)?;

    let out_layer = scenario.layer_sizes.len() - 1;
    let mut steps = Vec::with_capacity(scenario.steps);
    net.forward_observed(&inputs, |t, net| {
        let adapter = net
            .adapter(out_boundary)
            .expect("output boundary always has an adapter or monitor");
        let row = net.weights()[out_boundary].row(0);
        steps.push(TraceStep {
            step: t,
            rate: net.rates(out_layer).rate(0),
            theta: adapter.theta()[0],
            theta_m: adapter.theta_m()[0],
            weights: scenario.tracked_weights.iter().map(|&i| row[i]).collect(),
        });
    })?;

    Ok(TraceLog {
        adapter: scenario.adapter,
        seed: scenario.seed,
        config_hash: hash,
        tracked_weights: scenario.tracked_weights.clone(),
        steps,
        final_weights: net.into_weights(),
    })
}
