use super::AnalyticsError;

/// Straight-line distance between two equal-length vectors.
pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::DimensionMismatch(x.len(), y.len()));
    }
    Ok(squared_distance(x, y).sqrt())
}

/// Sum of squared coordinate differences, left to right. Callers check
/// lengths.
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[], &[]).unwrap(), 0.0);
        assert!(matches!(
            euclidean_distance(&[1.0], &[1.0, 2.0]),
            Err(AnalyticsError::DimensionMismatch(1, 2))
        ));
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..20).prop_flat_map(|d| {
            let v = || prop::collection::vec(-100.0f64..100.0, d);
            (v(), v(), v())
        })
    }

    proptest! {
        #[test]
        fn metric_axioms((x, y, z) in pair()) {
            let d = |a: &[f64], b: &[f64]| euclidean_distance(a, b).unwrap();
            prop_assert!(d(&x, &y) >= 0.0);
            prop_assert_eq!(d(&x, &y), d(&y, &x));
            prop_assert_eq!(d(&x, &x), 0.0);
            prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
        }
    }
}
