//! Base-versus-degraded evaluation.
//!
//! The "environment" is a fixed bank of synthetic observation vectors drawn
//! uniformly from `[0, 1]`. Trial `p` presents bank entry `p mod bank_size`
//! for `timesteps` steps. Every adapter setup runs the base condition and each
//! degraded condition on the same trials with the same per-trial seeds, so
//! base and degraded trials are paired by index.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compare::{compare, ComparisonTable};
use super::config_hash;
use crate::degradation::{perturb_input, InputPerturbation, WeightPerturbation};
use crate::error::{Error, Result};
use crate::homeostasis::AdapterConfig;
use crate::metrics::{build_report, MetricsReport, TrialRecord, BASE_CONDITION};
use crate::rng::{rng_from_seed, stream_rng, stream_seed, trial_seed, Stream};
use crate::snn::{
    poisson_encode, Checkpoint, Network, NetworkTopology, NeuronModel, SpikeTrain,
    ThresholdProvider, WeightMatrix,
};

/// One degraded condition. Either perturbation may be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub name: String,
    #[serde(default)]
    pub input: Option<InputPerturbation>,
    #[serde(default)]
    pub weights: Option<WeightPerturbation>,
}

/// A homeostasis configuration under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterSetup {
    pub name: String,
    /// Weight adapter attached to the selected boundaries.
    #[serde(default)]
    pub weight_adapter: Option<AdapterConfig>,
    /// Threshold provider for every non-input layer.
    #[serde(default)]
    pub threshold: ThresholdProvider,
    /// Boundaries that receive the weight adapter; all when absent.
    #[serde(default)]
    pub boundaries: Option<Vec<usize>>,
}

impl AdapterSetup {
    pub fn none() -> Self {
        Self {
            name: "none".into(),
            weight_adapter: None,
            threshold: ThresholdProvider::Static,
            boundaries: None,
        }
    }

    pub fn with_weight_adapter(name: &str, cfg: AdapterConfig) -> Self {
        Self {
            name: name.into(),
            weight_adapter: Some(cfg),
            ..Self::none()
        }
    }

    pub fn topology(&self, layer_sizes: &[usize], neuron: NeuronModel) -> Result<NetworkTopology> {
        let mut topo = NetworkTopology::new(layer_sizes.to_vec(), neuron)
            .with_threshold_everywhere(self.threshold);
        match &self.boundaries {
            None => topo = topo.with_adapter_everywhere(self.weight_adapter),
            Some(bs) => {
                topo = topo.with_adapter_everywhere(None);
                for &b in bs {
                    if b >= topo.boundaries() {
                        return Err(Error::Config(format!(
                            "adapter {:?}: no boundary {b}",
                            self.name
                        )));
                    }
                    topo = topo.with_adapter(b, self.weight_adapter);
                }
            }
        }
        topo.validate()?;
        Ok(topo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub neuron: NeuronModel,
    pub timesteps: usize,
    pub trials: usize,
    pub bank_size: usize,
    #[serde(default)]
    pub conditions: Vec<ConditionSpec>,
    pub adapters: Vec<AdapterSetup>,
    pub master_seed: u64,
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "invalid layer sizes {:?}",
                self.layer_sizes
            )));
        }
        if self.timesteps == 0 {
            return Err(Error::Config("timesteps must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.bank_size == 0 {
            return Err(Error::Config("bank_size must be positive".into()));
        }
        if self.adapters.is_empty() {
            return Err(Error::Config(
                "at least one adapter setup is required".into(),
            ));
        }
        self.neuron.validate()?;
        let mut seen = HashSet::new();
        for c in &self.conditions {
            if c.name == BASE_CONDITION {
                return Err(Error::Config(format!(
                    "condition name {BASE_CONDITION:?} is reserved"
                )));
            }
            if c.name.is_empty() || !seen.insert(c.name.as_str()) {
                return Err(Error::Config(format!(
                    "condition name {:?} is empty or repeated",
                    c.name
                )));
            }
            if let Some(p) = &c.input {
                p.validate(self.layer_sizes[0])?;
            }
            if let Some(p) = &c.weights {
                p.validate()?;
            }
        }
        let mut seen = HashSet::new();
        for a in &self.adapters {
            if a.name.is_empty() || !seen.insert(a.name.as_str()) {
                return Err(Error::Config(format!(
                    "adapter name {:?} is empty or repeated",
                    a.name
                )));
            }
            a.topology(&self.layer_sizes, self.neuron)?;
        }
        Ok(())
    }

    /// The fixed observation bank.
    pub fn input_bank(&self) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(stream_seed(self.master_seed, Stream::InputBank));
        (0..self.bank_size)
            .map(|_| {
                (0..self.layer_sizes[0])
                    .map(|_| rng.random::<f64>())
                    .collect()
            })
            .collect()
    }

    fn condition_names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(BASE_CONDITION).chain(self.conditions.iter().map(|c| c.name.as_str()))
    }
}

/// One neuron's rate in one trial, as written to the trials CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub adapter: String,
    pub condition: String,
    pub trial: usize,
    pub seed: u64,
    pub duration: u64,
    pub neuron: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config_hash: Option<String>,
    pub master_seed: Option<u64>,
    pub reports: Vec<MetricsReport>,
}

impl SuiteReport {
    pub fn report(&self, adapter: &str) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.adapter == adapter)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutput {
    pub rows: Vec<TrialRow>,
    pub report: SuiteReport,
    pub comparison: ComparisonTable,
}

impl SuiteOutput {
    /// Writes `trials.csv`, `report.json`, `metrics.csv` and
    /// `comparison.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_trials_csv(&self.rows, std::fs::File::create(dir.join("trials.csv"))?)?;
        std::fs::write(dir.join("report.json"), self.report.to_json()?)?;
        write_metrics_csv(
            &self.report.reports,
            std::fs::File::create(dir.join("metrics.csv"))?,
        )?;
        self.comparison
            .write_csv(std::fs::File::create(dir.join("comparison.csv"))?)?;
        Ok(())
    }
}

struct Task<'a> {
    adapter: &'a AdapterSetup,
    topology: NetworkTopology,
    condition: Option<&'a ConditionSpec>,
    trial: usize,
}

fn trial_inputs(
    task: &Task<'_>,
    cfg: &SuiteConfig,
    checkpoint: &Checkpoint,
    bank: &[Vec<f64>],
) -> Result<(SpikeTrain, Vec<WeightMatrix>)> {
    let seed = trial_seed(cfg.master_seed, task.trial as u64);
    let obs = &bank[task.trial % bank.len()];
    let weights: Vec<WeightMatrix> = match task.condition.and_then(|c| c.weights.as_ref()) {
        Some(p) => p.apply(
            checkpoint.layers(),
            &mut stream_rng(seed, Stream::WeightPerturbation),
        )?,
        None => checkpoint.layers().to_vec(),
    };
    let obs: Vec<f64> = match task.condition.and_then(|c| c.input.as_ref()) {
        Some(p) => perturb_input(obs, p, &mut stream_rng(seed, Stream::InputPerturbation))?
            .into_iter()
            .map(|x| x.clamp(0.0, 1.0))
            .collect(),
        None => obs.clone(),
    };
    let inputs = poisson_encode(&obs, cfg.timesteps, &mut stream_rng(seed, Stream::Encode))?;
    Ok((inputs, weights))
}

fn run_trial(
    task: &Task<'_>,
    cfg: &SuiteConfig,
    checkpoint: &Checkpoint,
    bank: &[Vec<f64>],
) -> Result<(u64, TrialRecord)> {
    let seed = trial_seed(cfg.master_seed, task.trial as u64);
    let (inputs, weights) = trial_inputs(task, cfg, checkpoint, bank)?;
    let mut net = Network::new(task.topology.clone(), weights)?;
    let out = net.forward(&inputs)?;
    let rates: Vec<f64> = out.layer_rates()?.into_iter().skip(1).flatten().collect();
    let name = task.condition.map_or(BASE_CONDITION, |c| c.name.as_str());
    Ok((
        seed,
        TrialRecord::new(task.trial, name, out.steps as u64, rates)?,
    ))
}

/// Runs every adapter setup on the base condition and every degraded
/// condition, `cfg.trials` times each.
///
/// `threads` caps the worker pool; `None` lets rayon decide. Results are
/// gathered in task order, so the output never depends on scheduling.
pub fn run_degradation_suite(
    cfg: &SuiteConfig,
    checkpoint: &Checkpoint,
    threads: Option<usize>,
) -> Result<SuiteOutput> {
    cfg.validate()?;
    if checkpoint.layer_sizes() != cfg.layer_sizes.as_slice() {
        return Err(Error::Topology(format!(
            "checkpoint layer sizes {:?} do not match config {:?}",
            checkpoint.layer_sizes(),
            cfg.layer_sizes
        )));
    }
    let bank = cfg.input_bank();

    let mut tasks = Vec::new();
    for adapter in &cfg.adapters {
        let topology = adapter.topology(&cfg.layer_sizes, cfg.neuron)?;
        let conditions = std::iter::once(None).chain(cfg.conditions.iter().map(Some));
        for condition in conditions {
            for trial in 0..cfg.trials {
                tasks.push(Task {
                    adapter,
                    topology: topology.clone(),
                    condition,
                    trial,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(u64, TrialRecord)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| run_trial(t, cfg, checkpoint, &bank))
            .collect::<Result<_>>()
    })?;

    let mut rows = Vec::new();
    for (task, (seed, rec)) in tasks.iter().zip(&results) {
        for (neuron, &rate) in rec.rates.iter().enumerate() {
            rows.push(TrialRow {
                adapter: task.adapter.name.clone(),
                condition: rec.condition.clone(),
                trial: rec.trial,
                seed: *seed,
                duration: rec.duration,
                neuron,
                rate,
            });
        }
    }

    let records: Vec<TrialRecord> = results.into_iter().map(|(_, r)| r).collect();
    let per_adapter = cfg.trials * (cfg.conditions.len() + 1);
    let mut reports = Vec::with_capacity(cfg.adapters.len());
    for (adapter, chunk) in cfg.adapters.iter().zip(records.chunks(per_adapter)) {
        let mut groups: Vec<(String, Vec<TrialRecord>)> = cfg
            .condition_names()
            .zip(chunk.chunks(cfg.trials))
            .map(|(name, trials)| (name.to_string(), trials.to_vec()))
            .collect();
        let (_, base) = groups.remove(0);
        reports.push(report_against_base(&adapter.name, base, groups)?);
    }

    let report = SuiteReport {
        config_hash: Some(config_hash(cfg)?),
        master_seed: Some(cfg.master_seed),
        reports,
    };
    let comparison = comparison_against_first(&report.reports);
    Ok(SuiteOutput {
        rows,
        report,
        comparison,
    })
}

/// One neuron's state after one step of a traced trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub layer: usize,
    pub neuron: usize,
    pub rate: f64,
    /// Effective BCM threshold when the layer's incoming weights are adapted.
    pub theta: Option<f64>,
    pub firing_threshold: f64,
}

/// Replays one trial of one adapter setup and condition step by step.
///
/// `condition` is `None` for the base condition. The replay uses the same
/// seeds as [`run_degradation_suite`], so its final rates match the trial's
/// recorded rates.
pub fn trace_trial(
    cfg: &SuiteConfig,
    checkpoint: &Checkpoint,
    adapter: &AdapterSetup,
    condition: Option<&ConditionSpec>,
    trial: usize,
) -> Result<Vec<TraceRow>> {
    let topology = adapter.topology(&cfg.layer_sizes, cfg.neuron)?;
    let task = Task {
        adapter,
        topology,
        condition,
        trial,
    };
    let (inputs, weights) = trial_inputs(&task, cfg, checkpoint, &cfg.input_bank())?;
    let mut net = Network::new(task.topology.clone(), weights)?;
    let mut rows = Vec::new();
    net.forward_observed(&inputs, |t, net| {
        for layer in 1..cfg.layer_sizes.len() {
            let theta = net.adapter(layer - 1).map(|a| a.theta());
            let rates = net.rates(layer).rates();
            let firing = net.thresholds(layer - 1);
            for (neuron, &rate) in rates.iter().enumerate() {
                rows.push(TraceRow {
                    step: t,
                    layer,
                    neuron,
                    rate,
                    theta: theta.map(|th| th[neuron]),
                    firing_threshold: firing[neuron],
                });
            }
        }
    })?;
    Ok(rows)
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Without degraded conditions the base trials are scored against
/// themselves, giving a single all-zero `base` row.
fn report_against_base(
    adapter: &str,
    base: Vec<TrialRecord>,
    mut groups: Vec<(String, Vec<TrialRecord>)>,
) -> Result<MetricsReport> {
    if groups.is_empty() {
        groups.push((BASE_CONDITION.to_string(), base.clone()));
    }
    build_report(adapter, &base, &groups)
}

/// Compares every report with the first one.
pub fn comparison_against_first(reports: &[MetricsReport]) -> ComparisonTable {
    let mut table = ComparisonTable::default();
    if let Some((first, rest)) = reports.split_first() {
        for r in rest {
            table.rows.extend(compare(first, r).rows);
        }
    }
    table
}

pub const TRIALS_HEADER: [&str; 7] = [
    "adapter",
    "condition",
    "trial",
    "seed",
    "duration",
    "neuron",
    "rate",
];

/// Writes one row per (adapter, condition, trial, neuron).
pub fn write_trials_csv<W: Write>(rows: &[TrialRow], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    wtr.write_record(TRIALS_HEADER)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: Read>(input: R) -> Result<Vec<TrialRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != TRIALS_HEADER {
        return Err(Error::Parse(format!(
            "unexpected trials CSV header {header:?}"
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Regroups trial rows into per-adapter metrics reports.
///
/// Adapters and conditions keep their first-appearance order; within a
/// condition, trials are ordered by index and neurons must be listed
/// `0..n` for every trial.
pub fn reports_from_rows(rows: &[TrialRow]) -> Result<Vec<MetricsReport>> {
    type Trials = BTreeMap<usize, (u64, Vec<(usize, f64)>)>;
    let mut adapters: Vec<(String, Vec<(String, Trials)>)> = Vec::new();
    for r in rows {
        let ai = match adapters.iter().position(|(a, _)| *a == r.adapter) {
            Some(i) => i,
            None => {
                adapters.push((r.adapter.clone(), Vec::new()));
                adapters.len() - 1
            }
        };
        let conds = &mut adapters[ai].1;
        let ci = match conds.iter().position(|(c, _)| *c == r.condition) {
            Some(i) => i,
            None => {
                conds.push((r.condition.clone(), BTreeMap::new()));
                conds.len() - 1
            }
        };
        let entry = conds[ci]
            .1
            .entry(r.trial)
            .or_insert((r.duration, Vec::new()));
        if entry.0 != r.duration {
            return Err(Error::Parse(format!(
                "{}/{} trial {}: inconsistent durations",
                r.adapter, r.condition, r.trial
            )));
        }
        entry.1.push((r.neuron, r.rate));
    }

    adapters
        .into_iter()
        .map(|(adapter, conds)| {
            let mut groups = Vec::with_capacity(conds.len());
            for (condition, trials) in conds {
                let records = trials
                    .into_iter()
                    .map(|(trial, (duration, mut neurons))| {
                        neurons.sort_by_key(|&(n, _)| n);
                        if neurons.iter().enumerate().any(|(i, &(n, _))| i != n) {
                            return Err(Error::Parse(format!(
                                "{adapter}/{condition} trial {trial}: neuron ids are not 0..n"
                            )));
                        }
                        TrialRecord::new(
                            trial,
                            condition.clone(),
                            duration,
                            neurons.into_iter().map(|(_, r)| r).collect(),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                groups.push((condition, records));
            }
            let base_idx = groups
                .iter()
                .position(|(c, _)| c == BASE_CONDITION)
                .ok_or_else(|| {
                    Error::Pairing(format!(
                        "adapter {adapter:?} has no {BASE_CONDITION:?} condition"
                    ))
                })?;
            let (_, base) = groups.remove(base_idx);
            report_against_base(&adapter, base, groups)
        })
        .collect()
}

pub const METRICS_HEADER: [&str; 9] = [
    "adapter",
    "condition",
    "hm_m",
    "hm_std",
    "fr_m_delta",
    "fr_std_m_delta",
    "fr_std_s_delta",
    "fr_m_base",
    "fr_m_degraded",
];

/// One flat row per (adapter, condition).
pub fn write_metrics_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(METRICS_HEADER)?;
    for r in reports {
        for c in &r.conditions {
            wtr.write_record([
                r.adapter.clone(),
                c.condition.clone(),
                c.hm_m.to_string(),
                c.hm_std.to_string(),
                c.legacy_delta.fr_m.to_string(),
                c.legacy_delta.fr_std_m.to_string(),
                c.legacy_delta.fr_std_s.to_string(),
                c.legacy_base.fr_m.to_string(),
                c.legacy_degraded.fr_m.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
