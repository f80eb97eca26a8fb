use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, Stream};

/// Dense weights for one layer boundary, `rows` post-neurons by `cols`
/// pre-neurons, stored row-major. `bias` is either empty or one entry per
/// post-neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeightMatrix", into = "RawWeightMatrix")]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeightMatrix {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    #[serde(default)]
    bias: Vec<f64>,
}

impl TryFrom<RawWeightMatrix> for WeightMatrix {
    type Error = Error;

    fn try_from(raw: RawWeightMatrix) -> Result<Self> {
        WeightMatrix::new(raw.rows, raw.cols, raw.weights, raw.bias)
    }
}

impl From<WeightMatrix> for RawWeightMatrix {
    fn from(m: WeightMatrix) -> Self {
        RawWeightMatrix {
            rows: m.rows,
            cols: m.cols,
            weights: m.weights,
            bias: m.bias,
        }
    }
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Topology(format!(
                "weight matrix {rows}x{cols} is empty"
            )));
        }
        if weights.len() != rows * cols {
            return Err(Error::Topology(format!(
                "weight matrix {rows}x{cols} given {} entries",
                weights.len()
            )));
        }
        if !bias.is_empty() && bias.len() != rows {
            return Err(Error::Topology(format!(
                "bias has {} entries for {rows} post-neurons",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(Error::Validation("weights must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            weights: vec![value; rows * cols],
            bias: Vec::new(),
        }
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != self.rows {
            return Err(Error::Topology(format!(
                "bias has {} entries for {} post-neurons",
                bias.len(),
                self.rows
            )));
        }
        self.bias = bias;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.weights[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.cols..(row + 1) * self.cols]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mutable access to the flat weight buffer. The shape cannot change
    /// through this handle.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_at(&self, row: usize) -> f64 {
        self.bias.get(row).copied().unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()))
    }

    /// `out[i] = sum_j w_ij * input[j]`, bias excluded.
    pub fn matvec(&self, input: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(input).map(|(w, x)| w * x).sum();
        }
    }

    /// Weighted sum of a binary spike vector; skips silent inputs.
    pub fn spike_input(&self, spikes: &[u8], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            *o = spikes
                .iter()
                .zip(row)
                .filter(|(&s, _)| s != 0)
                .map(|(_, w)| w)
                .sum();
        }
    }
}

const CHECKPOINT_FORMAT: &str = "homeostat-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Layer sizes plus one [`WeightMatrix`] per layer boundary.
///
/// On disk this is a JSON object:
///
/// ```text
/// {
///   "format": "homeostat-checkpoint",
///   "version": 1,
///   "layer_sizes": [24, 256, 256, 256, 2],
///   "layers": [
///     { "rows": 256, "cols": 24, "weights": [ ...row-major... ], "bias": [ ... ] },
///     ...
///   ]
/// }
/// ```
///
/// `bias` may be omitted or empty. Floats are written in shortest round-trip
/// form, so save/load is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
    layers: Vec<WeightMatrix>,
}

/// Parameters for generating a synthetic checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInit {
    /// Weights are drawn from N(mean_gain / fan_in, gain / sqrt(fan_in)).
    pub gain: f64,
    pub mean_gain: f64,
    /// Constant bias per post-neuron; `None` leaves biases empty.
    pub bias: Option<f64>,
}

impl Default for RandomInit {
    fn default() -> Self {
        Self {
            gain: 1.0,
            mean_gain: 1.0,
            bias: Some(0.0),
        }
    }
}

impl Checkpoint {
    pub fn new(layer_sizes: Vec<usize>, layers: Vec<WeightMatrix>) -> Result<Self> {
        let ck = Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layer_sizes,
            layers,
        };
        ck.validate()?;
        Ok(ck)
    }

    pub fn random(layer_sizes: &[usize], seed: u64, init: &RandomInit) -> Result<Self> {
        let mut rng = derived_rng(seed, 0, Stream::Checkpoint);
        let mut layers = Vec::with_capacity(layer_sizes.len().saturating_sub(1));
        for pair in layer_sizes.windows(2) {
            let (fan_in, rows) = (pair[0], pair[1]);
            let mean = init.mean_gain / fan_in as f64;
            let std = init.gain / (fan_in as f64).sqrt();
            let dist = Normal::new(mean, std).map_err(|e| Error::Config(e.to_string()))?;
            let weights = (0..rows * fan_in).map(|_| dist.sample(&mut rng)).collect();
            let bias = init.bias.map(|b| vec![b; rows]).unwrap_or_default();
            layers.push(WeightMatrix::new(rows, fan_in, weights, bias)?);
        }
        Self::new(layer_sizes.to_vec(), layers)
    }

    fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!(
                "unknown checkpoint format '{}'",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        if self.layer_sizes.len() < 2 {
            return Err(Error::Topology("a network needs at least 2 layers".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Topology("layer sizes must be positive".into()));
        }
        if self.layers.len() != self.layer_sizes.len() - 1 {
            return Err(Error::Topology(format!(
                "{} layer sizes need {} weight matrices, found {}",
                self.layer_sizes.len(),
                self.layer_sizes.len() - 1,
                self.layers.len()
            )));
        }
        for (l, (m, pair)) in self
            .layers
            .iter()
            .zip(self.layer_sizes.windows(2))
            .enumerate()
        {
            if m.rows != pair[1] || m.cols != pair[0] {
                return Err(Error::Topology(format!(
                    "boundary {l}: matrix is {}x{}, topology needs {}x{}",
                    m.rows, m.cols, pair[1], pair[0]
                )));
            }
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[WeightMatrix] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [WeightMatrix] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<WeightMatrix> {
        self.layers
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Draws `count` weights uniformly from `[-scale, scale]`; used by tests and
/// property checks that need arbitrary layers.
pub fn uniform_layer<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    scale: f64,
    rng: &mut R,
) -> WeightMatrix {
    let weights = (0..rows * cols)
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    WeightMatrix {
        rows,
        cols,
        weights,
        bias: Vec::new(),
    }
}
