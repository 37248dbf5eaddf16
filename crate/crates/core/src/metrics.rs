//! Evaluation quantities: NMSE in dB, sign consistency, and Monte Carlo
//! aggregation.

use nalgebra::DMatrix;

use crate::dictlearn::Dictionary;
use crate::error::{Error, Result};
use crate::model::{sgn, SignMeasurements, SparseCodes};

/// Outcome of one Monte Carlo trial for one method.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub nmse_db: f64,
    pub cost_trace: Vec<f64>,
    pub sign_consistency: f64,
    pub wall_time: f64,
}

/// Aggregate over trials; exact-reconstruction sentinels are excluded
/// and counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmseAverage {
    pub mean_db: f64,
    pub trials_used: usize,
    pub sentinels_excluded: usize,
}

/// NMSE in decibels: 20 log10( ||X - X_hat||_F / ||X||_F ). Returns
/// negative infinity as a sentinel for an exact reconstruction.
pub fn nmse(x: &DMatrix<f64>, x_hat: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::dims(format!(
            "signal matrices are {:?} vs {:?}",
            x.shape(),
            x_hat.shape()
        )));
    }
    let denom = x.norm();
    if denom == 0.0 {
        return Err(Error::invalid("X", "reference signal matrix is zero"));
    }
    let num = (x - x_hat).norm();
    if num == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (num / denom).log10())
}

/// Fraction of measurement entries whose sign is reproduced by the
/// current estimate.
pub fn sign_consistency(y: &SignMeasurements, d: &Dictionary, s_hat: &SparseCodes) -> Result<f64> {
    if d.atoms() != s_hat.atoms() || y.nrows() != d.measurements() || y.ncols() != s_hat.signals()
    {
        return Err(Error::dims(format!(
            "shapes: Y {:?}, D {:?}, S {:?}",
            y.shape(),
            d.data.shape(),
            s_hat.data.shape()
        )));
    }
    let z = &d.data * &s_hat.data;
    let matches = z
        .iter()
        .zip(y.iter())
        .filter(|(&zi, &yi)| sgn(zi) == yi)
        .count();
    Ok(matches as f64 / (y.nrows() * y.ncols()) as f64)
}

/// Mean NMSE across trials, computed in the dB domain.
pub fn average_nmse(results: &[TrialResult]) -> Result<NmseAverage> {
    if results.is_empty() {
        return Err(Error::invalid("results", "cannot average an empty trial list"));
    }
    let finite: Vec<f64> = results
        .iter()
        .map(|r| r.nmse_db)
        .filter(|v| v.is_finite())
        .collect();
    let sentinels = results.len() - finite.len();
    if finite.is_empty() {
        return Err(Error::invalid(
            "results",
            "every trial reported an exact-reconstruction sentinel",
        ));
    }
    Ok(NmseAverage {
        mean_db: finite.iter().sum::<f64>() / finite.len() as f64,
        trials_used: finite.len(),
        sentinels_excluded: sentinels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn trial(nmse_db: f64) -> TrialResult {
        TrialResult {
            nmse_db,
            cost_trace: vec![],
            sign_consistency: 1.0,
            wall_time: 0.0,
        }
    }

    #[test]
    fn nmse_anchor_values() {
        let x = dmatrix![1.0, 2.0; 3.0, 4.0];
        let zero = DMatrix::zeros(2, 2);
        assert_relative_eq!(nmse(&x, &zero).unwrap(), 0.0, epsilon = 1e-12);
        let scaled = &x * 0.9;
        assert_relative_eq!(nmse(&x, &scaled).unwrap(), -20.0, epsilon = 1e-10);
        assert_eq!(nmse(&x, &x).unwrap(), f64::NEG_INFINITY);
        assert!(nmse(&zero, &x).is_err());
    }

    #[test]
    fn nmse_column_permutation_invariance() {
        let x = dmatrix![1.0, -2.0, 0.5; 0.1, 3.0, -1.0];
        let x_hat = dmatrix![0.9, -2.2, 0.4; 0.2, 2.8, -1.1];
        let perm = [2usize, 0, 1];
        let px = DMatrix::from_fn(2, 3, |i, j| x[(i, perm[j])]);
        let px_hat = DMatrix::from_fn(2, 3, |i, j| x_hat[(i, perm[j])]);
        assert_relative_eq!(
            nmse(&x, &x_hat).unwrap(),
            nmse(&px, &px_hat).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn sign_consistency_counts() {
        let d = Dictionary::new(dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0; 1.0, -1.0]);
        let s = SparseCodes::new(dmatrix![1.0, -1.0; 0.5, 0.5]);
        let z = &d.data * &s.data;
        let y = z.map(crate::model::sgn);
        assert_eq!(sign_consistency(&y, &d, &s).unwrap(), 1.0);
        let flipped = y.map(|v: f64| -v);
        assert_eq!(sign_consistency(&flipped, &d, &s).unwrap(), 0.0);
        // hand count: flip exactly three of the eight entries
        let mut partial = y.clone();
        partial[(0, 0)] *= -1.0;
        partial[(2, 1)] *= -1.0;
        partial[(3, 0)] *= -1.0;
        assert_relative_eq!(sign_consistency(&partial, &d, &s).unwrap(), 5.0 / 8.0);
    }

    #[test]
    fn average_nmse_cases() {
        let avg = average_nmse(&[trial(-10.0), trial(-20.0)]).unwrap();
        assert_eq!(avg.mean_db, -15.0);
        assert_eq!(avg.trials_used, 2);
        assert_eq!(average_nmse(&[trial(-7.5)]).unwrap().mean_db, -7.5);
        let fifty: Vec<TrialResult> = (0..50).map(|_| trial(-3.25)).collect();
        assert_eq!(average_nmse(&fifty).unwrap().mean_db, -3.25);
        // sentinel excluded and reported
        let avg = average_nmse(&[trial(-10.0), trial(f64::NEG_INFINITY)]).unwrap();
        assert_eq!(avg.mean_db, -10.0);
        assert_eq!(avg.sentinels_excluded, 1);
        assert!(average_nmse(&[]).is_err());
    }
}
