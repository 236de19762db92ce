use ddns_core::metrics::{mean, sample_std};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Mean and Student-t confidence half-width at `level` (e.g. 0.95).
pub fn mean_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::data(format!("confidence interval needs >= 2 samples, got {}", samples.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("confidence level must be in (0, 1), got {level}")));
    }
    let m = mean(samples)?;
    let s = sample_std(samples)?;
    let n = samples.len() as f64;
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::data(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    Ok((m, t * s / n.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let (m, h) = mean_ci(&[1.0, 2.0, 3.0], 0.95).unwrap();
        assert_eq!(m, 2.0);
        // t(0.975, 2) = 4.302653; s = 1
        assert!((h - 4.302652729911275 / 3f64.sqrt()).abs() < 1e-9);
        assert!((h - 2.484).abs() < 1e-3);
        assert_eq!(mean_ci(&[4.0; 5], 0.95).unwrap(), (4.0, 0.0));
        assert!(mean_ci(&[1.0], 0.95).is_err());
    }

    #[test]
    fn doubling_n_shrinks_by_sqrt2() {
        let a: Vec<f64> = (0..2000).map(|i| (i % 2) as f64).collect();
        let b: Vec<f64> = (0..4000).map(|i| (i % 2) as f64).collect();
        let ratio = mean_ci(&a, 0.95).unwrap().1 / mean_ci(&b, 0.95).unwrap().1;
        assert!((ratio - 2f64.sqrt()).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn contains_mean(xs in prop::collection::vec(-1e3..1e3f64, 2..50)) {
            let (m, h) = mean_ci(&xs, 0.95).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(m - h <= m && m <= m + h);
        }
    }
}
