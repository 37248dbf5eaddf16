//! Smoothed one-bit dictionary learning: the per-row steepest-descent
//! update, the alternation with BIHT, and the recovery of the sparse
//! domain and signals from the learned dictionary.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::biht::{biht_recover, BihtConfig};
use crate::error::{Error, Result};
use crate::kernels::{s_shape, s_shape_deriv, IndicatorVariant};
use crate::model::{sgn, SignMeasurements, SparseCodes};

/// n x K dictionary D = A Phi. Rows are the independent unknowns of the
/// steepest-descent subproblems.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub data: DMatrix<f64>,
}

impl Dictionary {
    pub fn new(data: DMatrix<f64>) -> Self {
        Dictionary { data }
    }

    pub fn measurements(&self) -> usize {
        self.data.nrows()
    }

    pub fn atoms(&self) -> usize {
        self.data.ncols()
    }
}

impl From<DMatrix<f64>> for Dictionary {
    fn from(data: DMatrix<f64>) -> Self {
        Dictionary { data }
    }
}

/// Alternation parameters. `variant` picks DL-BIHT-L1 or DL-BIHT-L2.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub variant: IndicatorVariant,
    pub mu: f64,
    pub outer_iterations: usize,
    /// Steepest-descent steps per dictionary update (one per the
    /// alternation count in the reference experiments).
    pub inner_steps: usize,
    pub biht: BihtConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            variant: IndicatorVariant::L2,
            mu: 1.0,
            outer_iterations: 40,
            inner_steps: 1,
            biht: BihtConfig::default(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) {
            return Err(Error::invalid("mu", format!("must be nonnegative, got {}", self.mu)));
        }
        if self.outer_iterations == 0 {
            return Err(Error::invalid("outer_iterations", "must be at least 1"));
        }
        if self.inner_steps == 0 {
            return Err(Error::invalid("inner_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Result of a learning run: final dictionary, last code estimate, and
/// the per-iteration smoothed L2 cost trace.
#[derive(Debug, Clone)]
pub struct LearnState {
    pub dictionary: Dictionary,
    pub s_hat: SparseCodes,
    pub cost_history: Vec<f64>,
    pub iterations: usize,
}

fn check_dims(d: &DMatrix<f64>, s: &SparseCodes, y: &SignMeasurements) -> Result<()> {
    let (n, k) = d.shape();
    if s.atoms() != k {
        return Err(Error::dims(format!(
            "codes have {} atoms, dictionary has {k}",
            s.atoms()
        )));
    }
    if y.nrows() != n || y.ncols() != s.signals() {
        return Err(Error::dims(format!(
            "measurements are {}x{}, expected {n}x{}",
            y.nrows(),
            y.ncols(),
            s.signals()
        )));
    }
    Ok(())
}

/// Smoothed consistency cost J(D) = sum_i || y_i - S(D s_i) ||_2^2.
pub fn cost_l2(d: &Dictionary, s: &SparseCodes, y: &SignMeasurements) -> Result<f64> {
    check_dims(&d.data, s, y)?;
    let z = &d.data * &s.data;
    Ok(z.iter()
        .zip(y.iter())
        .map(|(&zi, &yi)| {
            let e = yi - s_shape(zi);
            e * e
        })
        .sum())
}

/// Smoothed consistency cost Q(D) = sum_i || y_i - S(D s_i) ||_1.
pub fn cost_l1(d: &Dictionary, s: &SparseCodes, y: &SignMeasurements) -> Result<f64> {
    check_dims(&d.data, s, y)?;
    let z = &d.data * &s.data;
    Ok(z.iter()
        .zip(y.iter())
        .map(|(&zi, &yi)| (yi - s_shape(zi)).abs())
        .sum())
}

/// One steepest-descent step on row k of the dictionary:
/// d_k + mu * sum_i s_i S'(d_k^T s_i) w_ik, where w_ik is the residual
/// e_ik = y_ik - S(d_k^T s_i) for L2 and sign(e_ik) for L1. The literal
/// L2 recursion absorbs the indicator's factor 2 into mu.
pub fn update_row(
    d_k: &DVector<f64>,
    k: usize,
    s: &SparseCodes,
    y: &SignMeasurements,
    mu: f64,
    variant: IndicatorVariant,
) -> Result<DVector<f64>> {
    if d_k.len() != s.atoms() {
        return Err(Error::dims(format!(
            "row has length {}, codes have {} atoms",
            d_k.len(),
            s.atoms()
        )));
    }
    if k >= y.nrows() || y.ncols() != s.signals() {
        return Err(Error::dims(format!(
            "row index {k} / measurement shape {}x{} do not match codes",
            y.nrows(),
            y.ncols()
        )));
    }
    if !(mu >= 0.0) {
        return Err(Error::invalid("mu", format!("must be nonnegative, got {mu}")));
    }
    if mu == 0.0 {
        return Ok(d_k.clone());
    }

    // z = S^T d_k, one inner product per training signal.
    let z = s.data.tr_mul(d_k);
    let mut weights = DVector::zeros(s.signals());
    for i in 0..s.signals() {
        let e = y[(k, i)] - s_shape(z[i]);
        let w = match variant {
            IndicatorVariant::L2 => e,
            IndicatorVariant::L1 => sgn(e),
        };
        weights[i] = s_shape_deriv(z[i]) * w;
    }
    let mut out = d_k.clone();
    out.gemv(mu, &s.data, &weights, 1.0);
    Ok(out)
}

/// One steepest-descent step on every row of the dictionary. The n row
/// subproblems are independent and run in parallel.
pub fn dict_update(
    d: &Dictionary,
    s: &SparseCodes,
    y: &SignMeasurements,
    mu: f64,
    variant: IndicatorVariant,
) -> Result<Dictionary> {
    check_dims(&d.data, s, y)?;
    let rows: Vec<DVector<f64>> = (0..d.measurements())
        .into_par_iter()
        .map(|k| {
            let d_k = DVector::from_iterator(d.atoms(), d.data.row(k).iter().copied());
            update_row(&d_k, k, s, y, mu, variant)
        })
        .collect::<Result<_>>()?;
    let mut out = d.data.clone();
    for (k, row) in rows.iter().enumerate() {
        out.row_mut(k).copy_from(&row.transpose());
    }
    Ok(Dictionary::new(out))
}

/// Full alternation: BIHT code re-estimation with the current dictionary,
/// then a dictionary descent step, for `outer_iterations` rounds. The L2
/// cost J(D) is recorded after each dictionary update.
pub fn learn(y: &SignMeasurements, d_init: Dictionary, cfg: &LearnConfig) -> Result<LearnState> {
    cfg.validate()?;
    let t = y.ncols();
    if y.nrows() != d_init.measurements() {
        return Err(Error::dims(format!(
            "measurements have {} rows, dictionary has {}",
            y.nrows(),
            d_init.measurements()
        )));
    }
    cfg.biht.validate(d_init.atoms())?;

    let mut d = d_init;
    let mut cost_history = Vec::with_capacity(cfg.outer_iterations);
    let mut s_hat = SparseCodes::new(DMatrix::zeros(d.atoms(), t));
    for iteration in 0..cfg.outer_iterations {
        // Step 1: per-signal one-bit recovery with the current dictionary.
        let codes: Vec<DVector<f64>> = (0..t)
            .into_par_iter()
            .map(|i| {
                let yi = DVector::from_iterator(y.nrows(), y.column(i).iter().copied());
                biht_recover(&yi, &d.data, &cfg.biht).map(|r| r.code)
            })
            .collect::<Result<_>>()?;
        for (i, code) in codes.iter().enumerate() {
            s_hat.data.column_mut(i).copy_from(code);
        }

        // Step 2: dictionary descent.
        for _ in 0..cfg.inner_steps {
            d = dict_update(&d, &s_hat, y, cfg.mu, cfg.variant)?;
        }

        let cost = cost_l2(&d, &s_hat, y)?;
        if !cost.is_finite() || d.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDivergence { iteration });
        }
        cost_history.push(cost);
    }

    Ok(LearnState {
        dictionary: d,
        iterations: cost_history.len(),
        cost_history,
        s_hat,
    })
}

/// Map the learned dictionary back to the sparse domain through the
/// least-squares solution of A Phi = D (the left inverse of A when
/// well-conditioned).
pub fn recover_phi(a: &DMatrix<f64>, d: &Dictionary) -> Result<DMatrix<f64>> {
    let (n, m) = a.shape();
    if d.measurements() != n {
        return Err(Error::dims(format!(
            "dictionary has {} rows, sensing matrix has {n}",
            d.measurements()
        )));
    }
    if n < m {
        return Err(Error::RankDeficient(format!(
            "sensing matrix is {n}x{m}; a left inverse needs n >= m"
        )));
    }
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if max_sv == 0.0 || min_sv / max_sv < 1e-10 {
        return Err(Error::RankDeficient(format!(
            "condition estimate {:.3e} exceeds bound",
            max_sv / min_sv.max(f64::MIN_POSITIVE)
        )));
    }
    svd.solve(&d.data, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))
}

/// Signal reconstruction X_hat = Phi_hat S_hat.
pub fn reconstruct_signals(phi_hat: &DMatrix<f64>, s_hat: &SparseCodes) -> Result<DMatrix<f64>> {
    if phi_hat.ncols() != s_hat.atoms() {
        return Err(Error::dims(format!(
            "domain estimate has {} columns, codes have {} atoms",
            phi_hat.ncols(),
            s_hat.atoms()
        )));
    }
    Ok(phi_hat * &s_hat.data)
}
