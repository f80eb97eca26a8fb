//! Input and weight perturbations used to build degraded conditions.
//!
//! Every stochastic operator draws only from the generator it is handed, so
//! the output is a pure function of `(input, seed)`.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Min,
    Max,
}

fn default_sentinel() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputPerturbation {
    /// Overwrites fixed channels with a constant reading.
    FixChannels { indices: Vec<usize>, value: f64 },
    /// Adds independent N(0, sigma^2) noise to every channel.
    GaussianObs { sigma: f64 },
    /// Replaces one uniformly chosen channel with `-sentinel` (min) or
    /// `+sentinel` (max).
    ReplaceRandomDim {
        extreme: Extreme,
        #[serde(default = "default_sentinel")]
        sentinel: f64,
    },
}

impl InputPerturbation {
    /// Beams 3, 9 and 15 forced to a near reading.
    pub fn near_beams(value: f64) -> Self {
        InputPerturbation::FixChannels {
            indices: vec![2, 8, 14],
            value,
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        match self {
            InputPerturbation::FixChannels { indices, value } => {
                if let Some(&bad) = indices.iter().find(|&&i| i >= channels) {
                    return Err(Error::Config(format!(
                        "channel index {bad} out of range for {channels} channels"
                    )));
                }
                if !value.is_finite() {
                    return Err(Error::Config("fixed channel value must be finite".into()));
                }
            }
            InputPerturbation::GaussianObs { sigma } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::Config(format!("noise sigma {sigma} must be >= 0")));
                }
            }
            InputPerturbation::ReplaceRandomDim { sentinel, .. } => {
                if !sentinel.is_finite() {
                    return Err(Error::Config("sentinel must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

pub fn perturb_input<R: Rng + ?Sized>(
    obs: &[f64],
    p: &InputPerturbation,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if obs.is_empty() {
        return Err(Error::Config("cannot perturb an empty observation".into()));
    }
    p.validate(obs.len())?;
    let mut out = obs.to_vec();
    match p {
        InputPerturbation::FixChannels { indices, value } => {
            for &i in indices {
                out[i] = *value;
            }
        }
        InputPerturbation::GaussianObs { sigma } => {
            if *sigma > 0.0 {
                let noise = Normal::new(0.0, *sigma).map_err(|e| Error::Config(e.to_string()))?;
                for x in &mut out {
                    *x += noise.sample(rng);
                }
            }
        }
        InputPerturbation::ReplaceRandomDim { extreme, sentinel } => {
            let i = rng.random_range(0..out.len());
            out[i] = match extreme {
                Extreme::Min => -sentinel,
                Extreme::Max => *sentinel,
            };
        }
    }
    Ok(out)
}

fn default_weight_sigma() -> f64 {
    0.05
}

fn default_fraction() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightPerturbation {
    /// Symmetric per-layer 8-bit quantisation.
    Loihi8Bit,
    GaussianWeights {
        #[serde(default = "default_weight_sigma")]
        sigma: f64,
    },
    ZeroFraction {
        #[serde(default = "default_fraction")]
        fraction: f64,
    },
}

impl WeightPerturbation {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightPerturbation::Loihi8Bit => Ok(()),
            WeightPerturbation::GaussianWeights { sigma } if *sigma >= 0.0 && sigma.is_finite() => {
                Ok(())
            }
            WeightPerturbation::GaussianWeights { sigma } => Err(Error::Config(format!(
                "weight noise sigma {sigma} must be >= 0"
            ))),
            WeightPerturbation::ZeroFraction { fraction } if (0.0..=1.0).contains(fraction) => {
                Ok(())
            }
            WeightPerturbation::ZeroFraction { fraction } => Err(Error::Config(format!(
                "zero fraction {fraction} not in [0, 1]"
            ))),
        }
    }

    /// Applies the perturbation to every layer in order.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        layers: &[WeightMatrix],
        rng: &mut R,
    ) -> Result<Vec<WeightMatrix>> {
        self.validate()?;
        layers
            .iter()
            .map(|w| match self {
                WeightPerturbation::Loihi8Bit => Ok(quantize_loihi8(w)),
                WeightPerturbation::GaussianWeights { sigma } => gn_weights(w, *sigma, rng),
                WeightPerturbation::ZeroFraction { fraction } => zero_mask(w, *fraction, rng),
            })
            .collect()
    }
}

const LOIHI_LEVELS: f64 = 127.0;

/// Quantisation step for a layer whose largest magnitude is `max_abs`.
///
/// The step is nudged by at most a few ulps so that re-quantising an already
/// quantised layer derives the same step again.
fn loihi_step(max_abs: f64) -> f64 {
    let mut step = max_abs / LOIHI_LEVELS;
    for _ in 0..8 {
        let again = (LOIHI_LEVELS * step) / LOIHI_LEVELS;
        if again == step {
            break;
        }
        step = again;
    }
    step
}

/// Per-layer symmetric quantisation to the signed range [-127, 127] with
/// round-half-away-from-zero. Biases are not touched.
pub fn quantize_loihi8(weights: &WeightMatrix) -> WeightMatrix {
    let max_abs = weights.max_abs();
    let mut out = weights.clone();
    if max_abs == 0.0 {
        return out;
    }
    let step = loihi_step(max_abs);
    for w in out.weights_mut() {
        let code = (*w / step).round().clamp(-LOIHI_LEVELS, LOIHI_LEVELS);
        *w = code * step;
    }
    out
}

/// Adds independent N(0, sigma^2) noise to each weight; biases untouched.
pub fn gn_weights<R: Rng + ?Sized>(
    weights: &WeightMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<WeightMatrix> {
    let mut out = weights.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    for w in out.weights_mut() {
        *w += noise.sample(rng);
    }
    Ok(out)
}

/// Zeroes exactly `floor(fraction * count)` distinct weights, chosen
/// uniformly without replacement.
pub fn zero_mask<R: Rng + ?Sized>(
    weights: &WeightMatrix,
    fraction: f64,
    rng: &mut R,
) -> Result<WeightMatrix> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "zero fraction {fraction} not in [0, 1]"
        )));
    }
    let n = weights.len();
    let amount = ((fraction * n as f64).floor() as usize).min(n);
    let mut out = weights.clone();
    let flat = out.weights_mut();
    for i in index::sample(rng, n, amount) {
        flat[i] = 0.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn test_fix_channels() {
        let obs: Vec<f64> = (0..18).map(|i| i as f64 / 20.0).collect();
        let mut rng = rng_from_seed(0);
        let out = perturb_input(&obs, &InputPerturbation::near_beams(0.2), &mut rng).unwrap();
        for i in 0..18 {
            if [2, 8, 14].contains(&i) {
                assert_eq!(out[i], 0.2);
            } else {
                assert_eq!(out[i], obs[i]);
            }
        }
    }

    #[test]
    fn test_fix_channels_out_of_range() {
        let mut rng = rng_from_seed(0);
        let p = InputPerturbation::FixChannels {
            indices: vec![3],
            value: 0.0,
        };
        assert!(matches!(
            perturb_input(&[0.1; 3], &p, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn test_zero_sigma_obs_is_identity() {
        let obs = [0.1, 0.4, 0.9];
        let mut rng = rng_from_seed(0);
        let out = perturb_input(
            &obs,
            &InputPerturbation::GaussianObs { sigma: 0.0 },
            &mut rng,
        )
        .unwrap();
        assert_eq!(out, obs);
    }

    #[test]
    fn test_replace_random_dim_replays() {
        let obs = [0.5; 17];
        let p = InputPerturbation::ReplaceRandomDim {
            extreme: Extreme::Min,
            sentinel: 1.0,
        };
        let a = perturb_input(&obs, &p, &mut rng_from_seed(12)).unwrap();
        let b = perturb_input(&obs, &p, &mut rng_from_seed(12)).unwrap();
        assert_eq!(a, b);
        let changed: Vec<usize> = (0..17).filter(|&i| a[i] != 0.5).collect();
        assert_eq!(changed.len(), 1);
        assert_eq!(a[changed[0]], -1.0);
    }

    #[test]
    fn test_quantize_hand_values() {
        let w = WeightMatrix::new(1, 3, vec![-1.0, 0.5, 0.003], vec![]).unwrap();
        let q = quantize_loihi8(&w);
        let s = 1.0 / 127.0;
        assert_eq!(q.get(0, 0), -1.0);
        // 0.5 * 127 = 63.5 sits on the half-way point and rounds away from zero
        assert_abs_diff_eq!(q.get(0, 1), 64.0 * s, epsilon = 1e-15);
        assert_abs_diff_eq!(q.get(0, 1), 0.503937, epsilon = 1e-6);
        assert_eq!(q.get(0, 2), 0.0);
        for (a, b) in w.weights().iter().zip(q.weights()) {
            assert!((a - b).abs() <= s / 2.0);
        }
        assert_eq!(quantize_loihi8(&q), q);
    }

    #[test]
    fn test_quantize_zero_layer_and_bias() {
        let w = WeightMatrix::filled(2, 2, 0.0);
        assert_eq!(quantize_loihi8(&w), w);
        let w = WeightMatrix::new(1, 2, vec![0.3, -0.1], vec![0.123456789]).unwrap();
        assert_eq!(quantize_loihi8(&w).bias(), &[0.123456789]);
    }

    #[test]
    fn test_gn_weights() {
        let w = WeightMatrix::new(1, 3, vec![0.1, 0.2, 0.3], vec![0.5]).unwrap();
        assert_eq!(gn_weights(&w, 0.0, &mut rng_from_seed(1)).unwrap(), w);
        let a = gn_weights(&w, 0.05, &mut rng_from_seed(1)).unwrap();
        let b = gn_weights(&w, 0.05, &mut rng_from_seed(1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, w);
        assert_eq!(a.bias(), w.bias());
    }

    #[test]
    fn test_gn_weights_empirical_sigma() {
        let w = WeightMatrix::filled(1000, 1000, 0.25);
        let noisy = gn_weights(&w, 0.05, &mut rng_from_seed(99)).unwrap();
        let d: Vec<f64> = noisy.weights().iter().map(|x| x - 0.25).collect();
        let n = d.len() as f64;
        let mu = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n).sqrt();
        assert!((sd - 0.05).abs() / 0.05 < 0.01, "sd {sd}");
    }

    #[test]
    fn test_zero_mask() {
        let w = WeightMatrix::filled(2, 5, 0.7);
        assert_eq!(zero_mask(&w, 0.0, &mut rng_from_seed(1)).unwrap(), w);
        let all = zero_mask(&w, 1.0, &mut rng_from_seed(1)).unwrap();
        assert!(all.weights().iter().all(|&x| x == 0.0));
        let a = zero_mask(&w, 0.3, &mut rng_from_seed(4)).unwrap();
        let b = zero_mask(&w, 0.3, &mut rng_from_seed(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights().iter().filter(|&&x| x == 0.0).count(), 3);
        assert!(zero_mask(&w, 1.5, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn test_perturbation_config_json() {
        let p: WeightPerturbation = serde_json::from_str(r#"{"kind": "zero_fraction"}"#).unwrap();
        assert_eq!(p, WeightPerturbation::ZeroFraction { fraction: 0.3 });
        let p: InputPerturbation =
            serde_json::from_str(r#"{"kind": "replace_random_dim", "extreme": "max"}"#).unwrap();
        assert_eq!(
            p,
            InputPerturbation::ReplaceRandomDim {
                extreme: Extreme::Max,
                sentinel: 1.0
            }
        );
        assert!(serde_json::from_str::<InputPerturbation>(
            r#"{"kind": "gaussian_obs", "sigma": 1, "mu": 0}"#
        )
        .is_err());
    }
}
