//! BCM-derived update rules.

use crate::error::{Error, Result};
use crate::snn::WeightMatrix;

use super::adapter::MixClamp;

/// Exponential moving average of the squared rate:
/// `(1 - alpha) * theta_m + alpha * c^2`.
pub fn theta_bio_update(theta_m: f64, c: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * theta_m + alpha * c * c
}

/// Population `sigma / mu` of recent rates.
///
/// Returns `None` for an empty window (adaptation must wait) and `0` when the
/// window is constant or silent.
pub fn coefficient_of_variation(window: &[f64]) -> Option<f64> {
    let first = *window.first()?;
    if window.iter().all(|&r| r == first) {
        return Some(0.0);
    }
    let n = window.len() as f64;
    let mu = window.iter().sum::<f64>() / n;
    if mu == 0.0 {
        return Some(0.0);
    }
    let var = window.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / n;
    Some(var.sqrt() / mu)
}

/// Weight of the sliding threshold in the DWAM blend.
pub fn mixing_coefficient(cv: f64, zeta_cv: f64, clamp: MixClamp) -> f64 {
    (zeta_cv * cv).clamp(clamp.lo, clamp.hi)
}

/// DWAM correction threshold: `m * theta_m + (1 - m) * c` with
/// `m = clamp(zeta_cv * cv, 0, 1)`.
pub fn dwam_theta(theta_m: f64, c: f64, cv: f64, zeta_cv: f64) -> f64 {
    blend(
        theta_m,
        c,
        mixing_coefficient(cv, zeta_cv, MixClamp::default()),
    )
}

/// Convex blend; the endpoints are returned exactly and the result never
/// leaves `[min(theta_m, c), max(theta_m, c)]`.
pub(crate) fn blend(theta_m: f64, c: f64, m: f64) -> f64 {
    if m >= 1.0 {
        return theta_m;
    }
    if m <= 0.0 {
        return c;
    }
    let (lo, hi) = if theta_m <= c {
        (theta_m, c)
    } else {
        (c, theta_m)
    };
    (m * theta_m + (1.0 - m) * c).clamp(lo, hi)
}

/// Modification function `c_post * (c_post - theta)`.
pub fn phi(c_post: f64, theta: f64) -> f64 {
    c_post * (c_post - theta)
}

/// Applies `w_ij += phi_i * c_pre_j * |w_ij| * psi_scale` to every weight.
///
/// All reads come from the pre-update matrix. On a non-finite result the
/// matrix is left untouched.
pub fn dwam_weight_update(
    weights: &mut WeightMatrix,
    phi: &[f64],
    c_pre: &[f64],
    psi_scale: f64,
) -> Result<()> {
    if phi.len() != weights.rows() || c_pre.len() != weights.cols() {
        return Err(Error::Topology(format!(
            "weight update for {}x{} matrix given {} post and {} pre rates",
            weights.rows(),
            weights.cols(),
            phi.len(),
            c_pre.len()
        )));
    }
    let cols = weights.cols();
    let delta = |i: usize, j: usize, w: f64| phi[i] * c_pre[j] * w.abs() * psi_scale;
    let overflow = weights
        .weights()
        .iter()
        .enumerate()
        .any(|(k, &w)| !(w + delta(k / cols, k % cols, w)).is_finite());
    if overflow {
        return Err(Error::NumericOverflow(
            "weight update produced a non-finite weight".into(),
        ));
    }
    for (k, w) in weights.weights_mut().iter_mut().enumerate() {
        *w += delta(k / cols, k % cols, *w);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn test_theta_bio_update() {
        assert_abs_diff_eq!(theta_bio_update(0.2, 0.6, 0.5), 0.28, epsilon = 1e-15);
        assert_eq!(theta_bio_update(0.25, 0.5, 0.5), 0.25);
        let mut th = 0.8;
        for _ in 0..200 {
            th = theta_bio_update(th, 0.0, 0.5);
        }
        assert!(th < 1e-50);
    }

    #[test]
    fn test_cv() {
        assert_eq!(coefficient_of_variation(&[0.5; 5]), Some(0.0));
        assert_eq!(coefficient_of_variation(&[0.0; 5]), Some(0.0));
        assert_eq!(coefficient_of_variation(&[]), None);
        // sigma = sqrt(0.016) = 0.126491..., mu = 0.4
        let cv = coefficient_of_variation(&[0.2, 0.4, 0.6, 0.4, 0.4]).unwrap();
        assert_abs_diff_eq!(cv, 0.016f64.sqrt() / 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(cv, 0.316228, epsilon = 1e-6);
    }

    #[test]
    fn test_dwam_theta() {
        assert_eq!(dwam_theta(0.36, 0.6, 0.0, 2.0), 0.6);
        assert_eq!(dwam_theta(0.36, 0.6, 0.5, 2.0), 0.36);
        assert_eq!(dwam_theta(0.36, 0.6, 3.0, 2.0), 0.36);
        assert_abs_diff_eq!(dwam_theta(0.36, 0.6, 0.25, 2.0), 0.48, epsilon = 1e-15);
    }

    #[test]
    fn test_phi() {
        assert_eq!(phi(0.5, 0.5), 0.0);
        assert_eq!(phi(0.0, 0.7), 0.0);
        assert_abs_diff_eq!(phi(0.8, 0.5), 0.24, epsilon = 1e-15);
    }

    #[test]
    fn test_weight_update_hand_value() {
        let mut w = WeightMatrix::filled(1, 1, 0.5);
        dwam_weight_update(&mut w, &[0.24], &[1.0], 0.00005).unwrap();
        assert_abs_diff_eq!(w.get(0, 0), 0.500006, epsilon = 1e-15);
    }

    #[test]
    fn test_weight_update_fixed_points() {
        let orig = WeightMatrix::new(2, 3, vec![0.5, -0.2, 0.0, 1.5, 0.0, -0.7], vec![]).unwrap();
        let mut w = orig.clone();
        dwam_weight_update(&mut w, &[0.3, -0.1], &[0.0, 0.0, 0.0], 0.1).unwrap();
        assert_eq!(w, orig);

        let mut w = orig.clone();
        for _ in 0..100 {
            dwam_weight_update(&mut w, &[0.2, -0.2], &[1.0, 0.5, 0.9], 0.5).unwrap();
        }
        assert_eq!(w.get(0, 2), 0.0);
        assert_eq!(w.get(1, 1), 0.0);
    }

    #[test]
    fn test_weight_update_overflow_leaves_matrix() {
        let orig = WeightMatrix::new(1, 2, vec![1e308, 1.0], vec![]).unwrap();
        let mut w = orig.clone();
        let err = dwam_weight_update(&mut w, &[1.0], &[1.0, 1.0], 10.0).unwrap_err();
        assert!(matches!(err, Error::NumericOverflow(_)));
        assert_eq!(w, orig);
    }

    #[test]
    fn test_weight_update_dims() {
        let mut w = WeightMatrix::filled(2, 2, 1.0);
        assert!(dwam_weight_update(&mut w, &[0.1], &[1.0, 1.0], 0.1).is_err());
        assert!(dwam_weight_update(&mut w, &[0.1, 0.1], &[1.0], 0.1).is_err());
    }
}
