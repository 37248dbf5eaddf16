//! Scalar smoothing kernels: the S-shaped sign surrogate, its first two
//! derivatives, the mismatch indicators, and the curvature term behind the
//! convexity of the smoothed one-bit cost.
//!
//! All functions branch on the sign of `x` and evaluate in the decaying
//! exponential, so they saturate cleanly instead of overflowing.

use std::str::FromStr;

/// Selects the mismatch indicator: `|x|` (L1) or `x^2` (L2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndicatorVariant {
    L1,
    L2,
}

impl IndicatorVariant {
    pub fn label(&self) -> &'static str {
        match self {
            IndicatorVariant::L1 => "l1",
            IndicatorVariant::L2 => "l2",
        }
    }
}

impl FromStr for IndicatorVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(IndicatorVariant::L1),
            "l2" => Ok(IndicatorVariant::L2),
            other => Err(format!("unknown variant `{other}` (expected l1 or l2)")),
        }
    }
}

/// Smooth sign surrogate S(x) = (1 - e^-x) / (1 + e^-x), i.e. tanh(x/2).
#[inline]
pub fn s_shape(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        (1.0 - e) / (1.0 + e)
    } else {
        let e = x.exp();
        (e - 1.0) / (e + 1.0)
    }
}

/// S'(x) = 2 e^-x / (1 + e^-x)^2.
#[inline]
pub fn s_shape_deriv(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let d = 1.0 + e;
    2.0 * e / (d * d)
}

/// S''(x) = -2 e^-x (1 - e^-x) / (1 + e^-x)^3.
#[inline]
pub fn s_shape_second(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        let d = 1.0 + e;
        -2.0 * e * (1.0 - e) / (d * d * d)
    } else {
        let e = x.exp();
        let d = 1.0 + e;
        2.0 * e * (1.0 - e) / (d * d * d)
    }
}

/// Mismatch indicator I(x).
#[inline]
pub fn indicator(v: IndicatorVariant, x: f64) -> f64 {
    match v {
        IndicatorVariant::L1 => x.abs(),
        IndicatorVariant::L2 => x * x,
    }
}

/// I'(x). For L1 the subgradient at 0 is fixed to +1, matching the
/// sign(0) = +1 convention of the measurement model.
#[inline]
pub fn indicator_deriv(v: IndicatorVariant, x: f64) -> f64 {
    match v {
        IndicatorVariant::L1 => {
            if x >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        IndicatorVariant::L2 => 2.0 * x,
    }
}

/// Per-sample curvature of the smoothed L2 cost:
/// S''(x)(-y + S(x)) + S'(x)^2, i.e. half the second derivative of
/// (y - S(x))^2.
///
/// Algebraically this reduces to 4e^-2x(2 - e^-x) / (1 + e^-x)^4 for
/// y = +1 and 4e^-x(2e^-x - 1) / (1 + e^-x)^4 for y = -1. It is positive
/// near the origin but turns negative once x saturates against the wrong
/// sign of y (x < -ln 2 with y = +1, x > ln 2 with y = -1): the squared
/// sigmoid loss is convex only locally.
#[inline]
pub fn curvature_term(x: f64, y: f64) -> f64 {
    debug_assert!(y == 1.0 || y == -1.0);
    // Reduced forms, evaluated in the decaying exponential.
    if x >= 0.0 {
        let e = (-x).exp();
        let d = 1.0 + e;
        let d4 = d * d * d * d;
        if y > 0.0 {
            4.0 * e * e * (2.0 - e) / d4
        } else {
            4.0 * e * (2.0 * e - 1.0) / d4
        }
    } else {
        let u = x.exp();
        let d = 1.0 + u;
        let d4 = d * d * d * d;
        if y > 0.0 {
            4.0 * u * (2.0 * u - 1.0) / d4
        } else {
            4.0 * u * u * (2.0 - u) / d4
        }
    }
}
