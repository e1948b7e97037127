//! Least-squares convergence-order fits.

use crate::error::{Error, Result};

/// Slope of `log(gap)` against `log(h)` by least squares.
///
/// ```
/// use burgerslab::harness::measure_order;
/// let p = measure_order(&[1.0, 0.5, 0.25], &[1.0, 0.25, 0.0625]).unwrap();
/// assert!((p - 2.0).abs() < 1e-12);
/// ```
pub fn measure_order(h: &[f64], gaps: &[f64]) -> Result<f64> {
    if h.len() != gaps.len() {
        return Err(Error::LengthMismatch { expected: h.len(), found: gaps.len() });
    }
    if h.len() < 3 {
        return Err(Error::TooFewResolutions(h.len()));
    }
    if let Some(&bad) = h.iter().chain(gaps).find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveGap(bad));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::config("resolutions", "all equal; slope undefined"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exact_geometric_sequences() {
        let h = [1.0, 0.5, 0.25];
        assert!((measure_order(&h, &[1.0, 0.5, 0.25]).unwrap() - 1.0).abs() < 1e-12);
        assert!((measure_order(&h, &[1.0, 0.25, 1.0 / 16.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_gaps_stay_close() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h: Vec<f64> = (0..4).map(|j| 0.5f64.powi(j)).collect();
        for _ in 0..200 {
            let gaps: Vec<f64> = h.iter().map(|x| x * x * (1.0 + rng.gen_range(-0.1..0.1))).collect();
            assert!((measure_order(&h, &gaps).unwrap() - 2.0).abs() < 0.2);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(measure_order(&[1.0, 0.5], &[1.0, 0.5]), Err(Error::TooFewResolutions(2))));
        assert!(matches!(measure_order(&[1.0, 0.5, 0.25], &[1.0, 0.0, 0.1]), Err(Error::NonPositiveGap(_))));
        assert!(matches!(measure_order(&[1.0, 0.5, 0.25], &[1.0, -1.0, 0.1]), Err(Error::NonPositiveGap(_))));
        assert!(measure_order(&[1.0, 0.5, 0.25], &[1.0]).is_err());
    }
}
