//! Distances between Gaussian labels and test-set error metrics.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::Prediction;

/// A univariate normal label `N(mean, std)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLabel {
    pub mean: f64,
    pub std: f64,
}

impl GaussianLabel {
    pub fn new(mean: f64, std: f64) -> Self {
        debug_assert!(!(std < 0.0), "standard deviation must be >= 0");
        Self { mean, std }
    }
}

/// Closed-form squared 2-Wasserstein distance between two univariate normals:
/// `(a_p - a_q)² + (σ_p - σ_q)²`.
pub fn w2_squared(p: GaussianLabel, q: GaussianLabel) -> f64 {
    let dm = p.mean - q.mean;
    let ds = p.std - q.std;
    dm * dm + ds * ds
}

/// The Gaussian `w2` label distance used by the objective and by MWD. It is
/// the squared 2-Wasserstein distance; see [`w2_squared`].
pub fn w2_gaussian(p: GaussianLabel, q: GaussianLabel) -> f64 {
    w2_squared(p, q)
}

fn test_indices<'a>(
    prediction: &Prediction,
    truth: ArrayView1<'a, f64>,
    test_mask: &'a [bool],
) -> Result<impl Iterator<Item = usize> + 'a> {
    let n = prediction.len();
    if truth.len() != n || test_mask.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "prediction has {n} points, truth {}, mask {}",
            truth.len(),
            test_mask.len()
        )));
    }
    if !test_mask.iter().any(|&t| t) {
        return Err(Error::EmptyTestSet);
    }
    Ok(test_mask.iter().enumerate().filter(|(_, t)| **t).map(|(i, _)| i))
}

fn mean_over_test<F>(prediction: &Prediction, truth: ArrayView1<f64>, test_mask: &[bool], f: F) -> Result<f64>
where
    F: Fn(usize) -> f64,
{
    let (sum, count) = test_indices(prediction, truth, test_mask)?
        .fold((0.0, 0usize), |(s, c), i| (s + f(i), c + 1));
    Ok(sum / count as f64)
}

/// Mean Wasserstein distance to exact ground truth over the test points:
/// `mean[(y_i - a*_i)² + σ*_i²]`.
pub fn mwd(prediction: &Prediction, truth: ArrayView1<f64>, test_mask: &[bool]) -> Result<f64> {
    mean_over_test(prediction, truth, test_mask, |i| {
        w2_squared(GaussianLabel::new(truth[i], 0.0), prediction.distribution(i))
    })
}

pub fn mae(prediction: &Prediction, truth: ArrayView1<f64>, test_mask: &[bool]) -> Result<f64> {
    mean_over_test(prediction, truth, test_mask, |i| (truth[i] - prediction.a_star[i]).abs())
}

/// Mean squared error of `a*` alone.
pub fn mse(prediction: &Prediction, truth: ArrayView1<f64>, test_mask: &[bool]) -> Result<f64> {
    mean_over_test(prediction, truth, test_mask, |i| (truth[i] - prediction.a_star[i]).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    fn pred(a: Vec<f64>, s: Vec<f64>) -> Prediction {
        Prediction {
            a_star: Array1::from(a),
            sigma_star: Array1::from(s),
        }
    }

    #[test]
    fn w2_examples() {
        let n01 = GaussianLabel::new(0.0, 1.0);
        assert_eq!(w2_gaussian(n01, n01), 0.0);
        let p = GaussianLabel::new(1.0, 0.5);
        let q = GaussianLabel::new(3.0, 1.5);
        assert_eq!(w2_gaussian(p, q), 5.0);
    }

    #[test]
    fn mwd_examples() {
        let p = pred(vec![1.0, 2.0], vec![0.0, 0.0]);
        assert_eq!(mwd(&p, array![1.0, 2.0].view(), &[true, true]).unwrap(), 0.0);
        let p = pred(vec![2.0, 9.0], vec![1.0, 0.0]);
        assert_eq!(mwd(&p, array![1.0, 0.0].view(), &[true, false]).unwrap(), 2.0);
    }

    #[test]
    fn mae_examples() {
        let p = pred(vec![1.0, 2.0], vec![0.0, 0.0]);
        assert_eq!(mae(&p, array![1.0, 2.0].view(), &[true, true]).unwrap(), 0.0);
        assert_eq!(mae(&p, array![0.0, 3.0].view(), &[true, true]).unwrap(), 1.0);
    }

    #[test]
    fn loop_oracles() {
        let n = 37;
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos().abs()).collect();
        let y: Array1<f64> = (0..n).map(|i| (i as f64 * 0.5).cos()).collect();
        let mask: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let p = pred(a.clone(), s.clone());
        let (mut sw, mut sa, mut c) = (0.0, 0.0, 0.0);
        for i in 0..n {
            if mask[i] {
                sw += (y[i] - a[i]).powi(2) + s[i] * s[i];
                sa += (y[i] - a[i]).abs();
                c += 1.0;
            }
        }
        assert!((mwd(&p, y.view(), &mask).unwrap() - sw / c).abs() <= 1e-12);
        assert!((mae(&p, y.view(), &mask).unwrap() - sa / c).abs() <= 1e-12);
    }

    #[test]
    fn errors() {
        let p = pred(vec![1.0], vec![0.0]);
        assert!(matches!(mwd(&p, array![1.0].view(), &[false]), Err(Error::EmptyTestSet)));
        assert!(matches!(mae(&p, array![1.0, 2.0].view(), &[true]), Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn w2_symmetric_and_translation_invariant(
            a in -1e3..1e3f64, b in -1e3..1e3f64,
            s in 0.0..10.0f64, t in 0.0..10.0f64, c in -1e3..1e3f64,
        ) {
            let p = GaussianLabel::new(a, s);
            let q = GaussianLabel::new(b, t);
            prop_assert_eq!(w2_gaussian(p, q), w2_gaussian(q, p));
            prop_assert_eq!(w2_gaussian(p, p), 0.0);
            let shifted = w2_gaussian(GaussianLabel::new(a + c, s), GaussianLabel::new(b + c, t));
            prop_assert!((shifted - w2_gaussian(p, q)).abs() <= 1e-9 * (1.0 + shifted));
        }

        #[test]
        fn mwd_dominates_mse(
            rows in proptest::collection::vec((-5.0..5.0f64, 0.0..2.0f64, -5.0..5.0f64), 1..40),
        ) {
            let p = pred(rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect());
            let y: Array1<f64> = rows.iter().map(|r| r.2).collect();
            let mask = vec![true; rows.len()];
            let w = mwd(&p, y.view(), &mask).unwrap();
            let e = mse(&p, y.view(), &mask).unwrap();
            prop_assert!(w >= e - 1e-12);
            let any_sigma = rows.iter().any(|r| r.1 > 0.0);
            prop_assert_eq!(w > e, any_sigma);
        }
    }
}
