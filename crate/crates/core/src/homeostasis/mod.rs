//! Inference-time homeostasis adapters.
//!
//! Two independent mechanisms plug into a running network:
//!
//! * weight adaptation ([`adapter`]): each postsynaptic neuron's firing rate is
//!   compared with a sliding modification threshold, and every incoming weight
//!   moves by `phi(c_post, theta) * c_pre * |w| * psi_scale`. BioDWAM uses the
//!   exponential moving average of `c^2` as the threshold; DWAM blends that
//!   average with the current rate according to the coefficient of variation
//!   of recent rates, so steady neurons stop adapting.
//! * threshold adaptation ([`bdett`]): per-neuron firing thresholds derived
//!   from the layer's membrane-potential statistics and each neuron's recent
//!   depolarisation.
//!
//! Both may run on the same network.

pub mod adapter;
pub mod bcm;
pub mod bdett;
pub mod rate;

pub use adapter::{AdapterConfig, AdapterKind, AdapterState, MixClamp};
pub use bcm::{
    coefficient_of_variation, dwam_theta, dwam_weight_update, mixing_coefficient, phi,
    theta_bio_update,
};
pub use bdett::{bdett_det, bdett_dtt, bdett_threshold, BdettConfig, BdettState};
pub use rate::RateTracker;
