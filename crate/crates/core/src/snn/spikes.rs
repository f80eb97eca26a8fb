use rand::Rng;

use crate::error::{Error, Result};

/// Binary spike events for a group of neurons over `steps` timesteps.
///
/// Stored time-major: all neurons for step 0, then step 1, and so on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    neurons: usize,
    steps: usize,
    events: Vec<u8>,
}

impl SpikeTrain {
    pub fn zeros(neurons: usize, steps: usize) -> Self {
        Self {
            neurons,
            steps,
            events: vec![0; neurons * steps],
        }
    }

    pub fn from_events(neurons: usize, steps: usize, events: Vec<u8>) -> Result<Self> {
        if events.len() != neurons * steps {
            return Err(Error::Validation(format!(
                "spike train holds {} events, expected {} neurons x {} steps",
                events.len(),
                neurons,
                steps
            )));
        }
        if let Some(bad) = events.iter().find(|&&e| e > 1) {
            return Err(Error::Validation(format!(
                "spike event {bad} is not binary"
            )));
        }
        Ok(Self {
            neurons,
            steps,
            events,
        })
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self, t: usize) -> &[u8] {
        &self.events[t * self.neurons..(t + 1) * self.neurons]
    }

    pub(crate) fn set_step(&mut self, t: usize, spikes: &[u8]) {
        self.events[t * self.neurons..(t + 1) * self.neurons].copy_from_slice(spikes);
    }

    pub fn get(&self, t: usize, neuron: usize) -> u8 {
        self.events[t * self.neurons + neuron]
    }

    /// Spike count per neuron over the whole train.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.neurons];
        for t in 0..self.steps {
            for (c, &s) in counts.iter_mut().zip(self.step(t)) {
                *c += s as u64;
            }
        }
        counts
    }
}

/// Rate-codes `values` into independent Bernoulli spike trains, one channel
/// per value. Values must already be normalised into [0, 1].
pub fn poisson_encode<R: Rng + ?Sized>(
    values: &[f64],
    steps: usize,
    rng: &mut R,
) -> Result<SpikeTrain> {
    if let Some((channel, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::InputRange { channel, value });
    }
    let mut events = Vec::with_capacity(values.len() * steps);
    for _ in 0..steps {
        for &p in values {
            events.push(u8::from(rng.random::<f64>() < p));
        }
    }
    Ok(SpikeTrain {
        neurons: values.len(),
        steps,
        events,
    })
}

/// Spike count divided by train length, per neuron.
pub fn decode_rate(train: &SpikeTrain) -> Result<Vec<f64>> {
    if train.steps == 0 {
        return Err(Error::EmptyTrial);
    }
    let t = train.steps as f64;
    Ok(train.counts().into_iter().map(|c| c as f64 / t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn test_zero_rate_is_silent() {
        let mut rng = rng_from_seed(1);
        let train = poisson_encode(&[0.0], 100, &mut rng).unwrap();
        assert_eq!(train.counts(), vec![0]);
    }

    #[test]
    fn test_unit_rate_is_saturated() {
        let mut rng = rng_from_seed(1);
        let train = poisson_encode(&[1.0], 100, &mut rng).unwrap();
        assert_eq!(train.counts(), vec![100]);
    }

    #[test]
    fn test_half_rate_converges() {
        let mut rng = rng_from_seed(42);
        let train = poisson_encode(&[0.5], 10_000, &mut rng).unwrap();
        // count directly rather than through decode_rate
        let ones = (0..train.steps()).filter(|&t| train.get(t, 0) == 1).count();
        let rate = ones as f64 / 10_000.0;
        assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn test_rejects_out_of_range() {
        let mut rng = rng_from_seed(1);
        let err = poisson_encode(&[0.2, 1.5], 10, &mut rng).unwrap_err();
        assert!(matches!(err, Error::InputRange { channel: 1, .. }));
        assert!(poisson_encode(&[-0.1], 10, &mut rng).is_err());
        assert!(poisson_encode(&[f64::NAN], 10, &mut rng).is_err());
    }

    #[test]
    fn test_decode_rate() {
        let zeros = SpikeTrain::zeros(1, 10);
        assert_eq!(decode_rate(&zeros).unwrap(), vec![0.0]);
        let ones = SpikeTrain::from_events(1, 10, vec![1; 10]).unwrap();
        assert_eq!(decode_rate(&ones).unwrap(), vec![1.0]);
        let three = SpikeTrain::from_events(1, 8, vec![1, 0, 0, 1, 0, 0, 1, 0]).unwrap();
        assert_eq!(decode_rate(&three).unwrap(), vec![0.375]);
        assert!(matches!(
            decode_rate(&SpikeTrain::zeros(3, 0)),
            Err(Error::EmptyTrial)
        ));
    }

    #[test]
    fn test_non_binary_rejected() {
        assert!(SpikeTrain::from_events(1, 2, vec![0, 2]).is_err());
        assert!(SpikeTrain::from_events(2, 2, vec![0, 1, 1]).is_err());
    }
}
