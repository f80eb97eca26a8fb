use serde::{Deserialize, Serialize};

use super::bcm::{
    blend, coefficient_of_variation, dwam_weight_update, mixing_coefficient, phi, theta_bio_update,
};
use super::rate::RateTracker;
use crate::error::{Error, Result};
use crate::snn::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    /// Threshold is the moving average of `c^2` alone.
    BioDwam,
    /// Threshold blends the moving average with the current rate by CV.
    Dwam,
}

impl AdapterKind {
    pub fn name(&self) -> &'static str {
        match self {
            AdapterKind::BioDwam => "biodwam",
            AdapterKind::Dwam => "dwam",
        }
    }
}

/// Bounds on the DWAM mixing coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixClamp {
    pub lo: f64,
    pub hi: f64,
}

impl Default for MixClamp {
    fn default() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterConfig {
    pub kind: AdapterKind,
    #[serde(default = "defaults::psi_scale")]
    pub psi_scale: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::zeta_cv")]
    pub zeta_cv: f64,
    /// Number of recent rates used for the coefficient of variation.
    #[serde(default = "defaults::window")]
    pub window: usize,
    #[serde(default)]
    pub clamp: MixClamp,
}

mod defaults {
    pub fn psi_scale() -> f64 {
        0.00005
    }
    pub fn alpha() -> f64 {
        0.5
    }
    pub fn zeta_cv() -> f64 {
        2.0
    }
    pub fn window() -> usize {
        5
    }
}

impl AdapterConfig {
    pub fn new(kind: AdapterKind) -> Self {
        Self {
            kind,
            psi_scale: defaults::psi_scale(),
            alpha: defaults::alpha(),
            zeta_cv: defaults::zeta_cv(),
            window: defaults::window(),
            clamp: MixClamp::default(),
        }
    }

    pub fn dwam() -> Self {
        Self::new(AdapterKind::Dwam)
    }

    pub fn biodwam() -> Self {
        Self::new(AdapterKind::BioDwam)
    }

    /// HalfCheetah-style scaling.
    pub fn with_psi_scale(mut self, psi_scale: f64) -> Self {
        self.psi_scale = psi_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi_scale.is_finite() && self.psi_scale > 0.0) {
            return Err(Error::Config(format!(
                "psi_scale {} must be positive",
                self.psi_scale
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if !(self.zeta_cv.is_finite() && self.zeta_cv > 0.0) {
            return Err(Error::Config(format!(
                "zeta_cv {} must be positive",
                self.zeta_cv
            )));
        }
        if self.window == 0 {
            return Err(Error::Config(
                "CV window must hold at least one rate".into(),
            ));
        }
        let MixClamp { lo, hi } = self.clamp;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!(
                "mixing clamp [{lo}, {hi}] must lie within [0, 1]"
            )));
        }
        Ok(())
    }
}

/// Sliding thresholds for the postsynaptic neurons of one layer boundary.
#[derive(Debug, Clone)]
pub struct AdapterState {
    cfg: AdapterConfig,
    theta_m: Vec<f64>,
    theta: Vec<f64>,
    phi: Vec<f64>,
    scratch: Vec<f64>,
}

impl AdapterState {
    pub fn new(neurons: usize, cfg: AdapterConfig) -> Self {
        Self {
            cfg,
            theta_m: vec![0.0; neurons],
            theta: vec![0.0; neurons],
            phi: vec![0.0; neurons],
            scratch: Vec::with_capacity(cfg.window),
        }
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.cfg
    }

    pub fn theta_m(&self) -> &[f64] {
        &self.theta_m
    }

    /// Effective threshold fed to the modification function on the last step.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn reset(&mut self) {
        self.theta_m.fill(0.0);
        self.theta.fill(0.0);
        self.phi.fill(0.0);
    }

    /// Updates `theta_m` and `theta` from the current postsynaptic rates
    /// without touching any weights.
    pub fn update_thresholds(&mut self, post: &RateTracker) -> Result<()> {
        if post.neurons() != self.theta_m.len() {
            return Err(Error::Topology(format!(
                "adapter for {} neurons given rates for {}",
                self.theta_m.len(),
                post.neurons()
            )));
        }
        // until the window is full DWAM runs as BioDWAM
        let warm = post.window_len() >= self.cfg.window;
        for i in 0..self.theta_m.len() {
            let c = post.rate(i);
            self.theta_m[i] = theta_bio_update(self.theta_m[i], c, self.cfg.alpha);
            self.theta[i] = match self.cfg.kind {
                AdapterKind::BioDwam => self.theta_m[i],
                AdapterKind::Dwam if !warm => self.theta_m[i],
                AdapterKind::Dwam => {
                    self.scratch.clear();
                    self.scratch
                        .extend(post.window_of(i).skip(post.window_len() - self.cfg.window));
                    let cv = coefficient_of_variation(&self.scratch).unwrap_or(0.0);
                    let m = mixing_coefficient(cv, self.cfg.zeta_cv, self.cfg.clamp);
                    blend(self.theta_m[i], c, m)
                }
            };
            self.phi[i] = phi(c, self.theta[i]);
        }
        Ok(())
    }

    /// One adapter step: thresholds from `post`, then every weight of the
    /// boundary moves according to `phi` and the presynaptic rates.
    pub fn step(
        &mut self,
        post: &RateTracker,
        pre: &RateTracker,
        weights: &mut WeightMatrix,
    ) -> Result<()> {
        self.update_thresholds(post)?;
        dwam_weight_update(weights, &self.phi, pre.rates(), self.cfg.psi_scale)
    }
}
