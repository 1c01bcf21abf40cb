//! Small descriptive statistics helpers.

/// Arithmetic mean, computed around the first sample so that a run of
/// identical readings returns that reading exactly.
pub fn mean(values: &[f64]) -> Option<f64> {
    let (&first, rest) = values.split_first()?;
    let shift: f64 = rest.iter().map(|v| v - first).sum();
    Some(first + shift / values.len() as f64)
}

/// Standard deviation with the `n - 1` denominator.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_identical_values_is_exact() {
        let x = 213_070.666_666_666_7;
        assert_eq!(mean(&[x; 100]), Some(x));
        assert_eq!(mean(&[]), None);
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let s = sample_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(sample_std(&[1.0]), None);
    }
}
