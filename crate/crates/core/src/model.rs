//! Synthetic generative model: Bernoulli-Gaussian sparse codes, Gaussian
//! sensing and sparse-domain matrices, and noisy sign measurements
//! Y = sign(D S + V) with D = A Phi.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::rng::RngStream;

/// Matrix with entries in {-1, +1}, stored as f64.
pub type SignMeasurements = DMatrix<f64>;

/// K x T matrix of Bernoulli-Gaussian sparse coefficient columns, each
/// scaled to unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes {
    pub data: DMatrix<f64>,
}

impl SparseCodes {
    pub fn new(data: DMatrix<f64>) -> Self {
        SparseCodes { data }
    }

    /// Atom count K.
    pub fn atoms(&self) -> usize {
        self.data.nrows()
    }

    /// Training-signal count T.
    pub fn signals(&self) -> usize {
        self.data.ncols()
    }
}

/// One fully populated synthetic problem instance.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    /// Sensing matrix, n x m.
    pub a: DMatrix<f64>,
    /// Sparse-domain matrix with unit-norm columns, m x K.
    pub phi: DMatrix<f64>,
    /// Dictionary D = A Phi, n x K.
    pub d: DMatrix<f64>,
    /// True sparse codes, K x T.
    pub s: SparseCodes,
    /// True signals X = Phi S, m x T.
    pub x: DMatrix<f64>,
    /// Measurement noise, n x T.
    pub v: DMatrix<f64>,
    /// Sign measurements Y = sign(D S + V), n x T.
    pub y: SignMeasurements,
}

/// Sign with the fixed convention sign(0) = +1.
pub fn sign_scalar(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(sgn(x))
}

#[inline]
pub(crate) fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Entrywise sign of a matrix, sign(0) = +1.
pub fn sign_matrix(m: &DMatrix<f64>) -> SignMeasurements {
    m.map(sgn)
}

/// Draw Bernoulli-Gaussian sparse codes: each entry active with
/// probability `p`, active values Normal(0, sigma_r^2), every column
/// normalized to unit norm. All-zero columns are resampled.
pub fn gen_sparse_codes(
    k: usize,
    t: usize,
    p: f64,
    sigma_r: f64,
    rng: RngStream,
) -> Result<SparseCodes> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("activity must be in (0,1), got {p}")));
    }
    if !(sigma_r > 0.0) {
        return Err(Error::invalid("sigma_r", format!("must be positive, got {sigma_r}")));
    }
    if k == 0 || t == 0 {
        return Err(Error::invalid("K/T", "counts must be at least 1"));
    }
    let mut rng = rng.rng();
    Ok(SparseCodes::new(bg_columns(k, t, p, sigma_r, &mut rng)))
}

fn bg_columns(
    k: usize,
    t: usize,
    p: f64,
    sigma_r: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> DMatrix<f64> {
    let active = Normal::new(0.0, sigma_r).expect("validated by caller");
    let mut data = DMatrix::zeros(k, t);
    for j in 0..t {
        loop {
            let mut any = false;
            for i in 0..k {
                data[(i, j)] = if rng.random::<f64>() < p {
                    any = true;
                    active.sample(rng)
                } else {
                    0.0
                };
            }
            if any {
                break;
            }
        }
        let norm = data.column(j).norm();
        data.column_mut(j).scale_mut(1.0 / norm);
    }
    data
}

/// Standard Gaussian matrix, optionally with unit-norm columns.
pub fn gen_gaussian_matrix(
    rows: usize,
    cols: usize,
    rng: RngStream,
    normalize_columns: bool,
) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("rows/cols", "matrix sizes must be at least 1"));
    }
    let mut rng = rng.rng();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut m = DMatrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng));
    if normalize_columns {
        for j in 0..cols {
            let norm = m.column(j).norm();
            m.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    Ok(m)
}

/// Build a complete instance: A, Phi (unit-norm columns), D = A Phi,
/// S, X = Phi S, noise V, and Y = sign(D S + V).
///
/// Draw order is fixed (A, Phi, S, V) so a given stream always produces
/// the same instance.
pub fn synthesize(cfg: &ExperimentConfig, rng: RngStream) -> Result<ModelInstance> {
    cfg.validate()?;
    let mut r = rng.rng();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let a = DMatrix::from_fn(cfg.n, cfg.m, |_, _| normal.sample(&mut r));
    let mut phi = DMatrix::from_fn(cfg.m, cfg.k, |_, _| normal.sample(&mut r));
    for j in 0..cfg.k {
        let norm = phi.column(j).norm();
        phi.column_mut(j).scale_mut(1.0 / norm);
    }

    let s = bg_columns(cfg.k, cfg.t, cfg.p, cfg.sigma_r, &mut r);

    let v = if cfg.sigma_n > 0.0 {
        let vn = Normal::new(0.0, cfg.sigma_n).expect("validated");
        DMatrix::from_fn(cfg.n, cfg.t, |_, _| vn.sample(&mut r))
    } else {
        DMatrix::zeros(cfg.n, cfg.t)
    };

    let d = &a * &phi;
    let x = &phi * &s;
    let y = sign_matrix(&(&d * &s + &v));

    Ok(ModelInstance {
        a,
        phi,
        d,
        s: SparseCodes::new(s),
        x,
        v,
        y,
    })
}
