use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Cumulative firing rate per neuron plus a bounded window of recent rates.
///
/// `rate(i)` is always `count_i / steps`; the window holds the rate vector
/// recorded after each of the last `capacity` updates.
#[derive(Debug, Clone)]
pub struct RateTracker {
    counts: Vec<u64>,
    steps: u64,
    rates: Vec<f64>,
    window: VecDeque<Vec<f64>>,
    capacity: usize,
}

impl RateTracker {
    pub fn new(neurons: usize, capacity: usize) -> Self {
        Self {
            counts: vec![0; neurons],
            steps: 0,
            rates: vec![0.0; neurons],
            window: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn neurons(&self) -> usize {
        self.counts.len()
    }

    pub fn update(&mut self, spikes: &[u8]) -> Result<()> {
        if spikes.len() != self.counts.len() {
            return Err(Error::Topology(format!(
                "rate tracker for {} neurons given {} spikes",
                self.counts.len(),
                spikes.len()
            )));
        }
        self.steps += 1;
        let t = self.steps as f64;
        for ((count, rate), &s) in self.counts.iter_mut().zip(&mut self.rates).zip(spikes) {
            *count += s as u64;
            *rate = *count as f64 / t;
        }
        if self.capacity > 0 {
            let mut slot = if self.window.len() >= self.capacity {
                self.window.pop_front().unwrap_or_default()
            } else {
                Vec::with_capacity(self.rates.len())
            };
            slot.clear();
            slot.extend_from_slice(&self.rates);
            self.window.push_back(slot);
        }
        Ok(())
    }

    pub fn rate(&self, neuron: usize) -> f64 {
        self.rates[neuron]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn window_full(&self) -> bool {
        self.capacity > 0 && self.window.len() >= self.capacity
    }

    /// Recent rates of one neuron, oldest first.
    pub fn window_of(&self, neuron: usize) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().map(move |r| r[neuron])
    }

    pub fn reset(&mut self) {
        self.counts.fill(0);
        self.rates.fill(0.0);
        self.steps = 0;
        self.window.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_always_firing() {
        let mut r = RateTracker::new(1, 5);
        for _ in 0..10 {
            r.update(&[1]).unwrap();
        }
        assert_eq!(r.rate(0), 1.0);
    }

    #[test]
    fn test_silent() {
        let mut r = RateTracker::new(1, 5);
        for _ in 0..10 {
            r.update(&[0]).unwrap();
        }
        assert_eq!(r.rate(0), 0.0);
    }

    #[test]
    fn test_alternating() {
        let mut r = RateTracker::new(1, 5);
        for s in [1, 0, 1, 0] {
            r.update(&[s]).unwrap();
        }
        assert_eq!(r.rate(0), 0.5);
        let w: Vec<f64> = r.window_of(0).collect();
        assert_eq!(w, vec![1.0, 0.5, 2.0 / 3.0, 0.5]);
    }

    #[test]
    fn test_window_bounded() {
        let mut r = RateTracker::new(2, 3);
        for t in 0..20u64 {
            r.update(&[1, (t % 2) as u8]).unwrap();
            assert!(r.window_len() <= 3);
            assert_eq!(r.rate(0), 1.0);
            assert_eq!(r.rate(1), r.counts()[1] as f64 / r.steps() as f64);
        }
        assert!(r.window_full());
    }

    #[test]
    fn test_dimension_mismatch() {
        let mut r = RateTracker::new(2, 3);
        assert!(r.update(&[1]).is_err());
    }
}
