//! Binary iterative hard thresholding: one-bit sparse recovery with a
//! fixed dictionary, the first step of each alternation round.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::sgn;

/// BIHT solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BihtConfig {
    pub iterations: usize,
    /// Step scale tau; the gradient step is (tau / 2) * D^T (y - sign(D s)).
    pub tau: f64,
    /// Hard-threshold level K_s.
    pub sparsity: usize,
    pub normalize_output: bool,
}

impl Default for BihtConfig {
    fn default() -> Self {
        BihtConfig {
            iterations: 20,
            tau: 1.0,
            sparsity: 3,
            normalize_output: true,
        }
    }
}

impl BihtConfig {
    pub fn validate(&self, atoms: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if self.sparsity == 0 || self.sparsity > atoms {
            return Err(Error::invalid(
                "sparsity",
                format!("must be in 1..={atoms}, got {}", self.sparsity),
            ));
        }
        Ok(())
    }
}

/// Recovered code plus a degeneracy flag for the all-zero outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BihtResult {
    pub code: DVector<f64>,
    /// True when every iterate thresholded to zero; returned as-is.
    pub degenerate: bool,
}

/// Keep the `k` largest-magnitude entries, zero the rest. Ties keep the
/// lowest index.
pub fn hard_threshold(v: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    if k == 0 || k > v.len() {
        return Err(Error::invalid(
            "k",
            format!("threshold level must be in 1..={}, got {k}", v.len()),
        ));
    }
    if k == v.len() {
        return Ok(v.clone());
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    // Stable sort by descending magnitude keeps the lowest index on ties.
    // total_cmp keeps this panic-free if a NaN slips in from an
    // overflowing caller; divergence is detected downstream.
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    let mut out = DVector::zeros(v.len());
    for &i in &idx[..k] {
        out[i] = v[i];
    }
    Ok(out)
}

/// Recover a sparse code from sign measurements:
/// s <- HT_k( s + (tau/2) * D^T (y - sign(D s)) ), starting from s = 0.
pub fn biht_recover(y: &DVector<f64>, d: &DMatrix<f64>, cfg: &BihtConfig) -> Result<BihtResult> {
    let (n, k_atoms) = d.shape();
    cfg.validate(k_atoms)?;
    if y.len() != n {
        return Err(Error::dims(format!(
            "y has length {}, dictionary has {n} rows",
            y.len()
        )));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("y", "entries must be in {-1, +1}"));
    }

    let step = 0.5 * cfg.tau;
    let mut s: DVector<f64> = DVector::zeros(k_atoms);
    let mut support: Vec<usize> = Vec::with_capacity(cfg.sparsity);
    let mut ds: DVector<f64> = DVector::zeros(n);
    let mut residual: DVector<f64> = DVector::zeros(n);
    for _ in 0..cfg.iterations {
        // D s touches only the current support.
        ds.fill(0.0);
        for &j in &support {
            ds.axpy(s[j], &d.column(j), 1.0);
        }
        for i in 0..n {
            residual[i] = y[i] - sgn(ds[i]);
        }
        let mut a = s.clone();
        a.gemv_tr(step, d, &residual, 1.0);
        s = hard_threshold(&a, cfg.sparsity)?;
        support.clear();
        support.extend(s.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i));
    }

    let norm = s.norm();
    let degenerate = norm == 0.0;
    if cfg.normalize_output && !degenerate {
        s.scale_mut(1.0 / norm);
    }
    Ok(BihtResult { code: s, degenerate })
}
