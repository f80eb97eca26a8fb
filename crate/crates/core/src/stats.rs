//! Population statistics shared by the adapters and the metrics.
//!
//! All standard deviations divide by `n`. Values are summed in sorted order so
//! that any permutation of the same multiset yields bit-identical results.

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sorted_sum(values, |v| v) / values.len() as f64
}

/// Returns `(mean, population std)`; `(0, 0)` for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mu = sorted.iter().sum::<f64>() / n;
    let mut sq: Vec<f64> = sorted.iter().map(|v| (v - mu) * (v - mu)).collect();
    sq.sort_by(f64::total_cmp);
    let var = sq.iter().sum::<f64>() / n;
    (mu, var.sqrt())
}

fn sorted_sum(values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut mapped: Vec<f64> = values.iter().map(|&v| f(v)).collect();
    mapped.sort_by(f64::total_cmp);
    mapped.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_population_std() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn test_permutation_invariance() {
        let a = [0.3, 0.5, 0.5, 0.7, 0.1, 0.9];
        let b = [0.9, 0.7, 0.5, 0.1, 0.5, 0.3];
        assert_eq!(mean_std(&a), mean_std(&b));
        assert_eq!(mean(&a), mean(&b));
    }

    #[test]
    fn test_empty() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
    }
}
