//! Univariate standard normal and Student's t distribution functions.
//!
//! These feed the copula transforms (`u -> quantile(u)`) and the samplers
//! (`x -> cdf(x)`). Tail accuracy matters: heavily dependent samples put mass
//! close to 0 and 1, and `nu` goes down to 1/2.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MarginError {
    #[error("argument {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("argument {0} must be positive")]
    NonPositive(f64),
    #[error("degrees of freedom must be positive and finite, got {0}")]
    InvalidDof(f64),
}

/// Degrees of freedom of a Student's t distribution.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Dof(f64);

impl Dof {
    pub fn new(nu: f64) -> Result<Self, MarginError> {
        if nu > 0.0 && nu.is_finite() {
            Ok(Self(nu))
        } else {
            Err(MarginError::InvalidDof(nu))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Dof {
    type Error = MarginError;

    fn try_from(nu: f64) -> Result<Self, Self::Error> {
        Dof::new(nu)
    }
}

impl From<Dof> for f64 {
    fn from(nu: Dof) -> f64 {
        nu.0
    }
}

// ---------------------------------------------------------------------------
// Gamma and beta functions
// ---------------------------------------------------------------------------

/// Stirling-series remainder `lnΓ(x) - [(x - 1/2) ln x - x + ln√(2π)]`,
/// accurate to double precision for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in COEF.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64, MarginError> {
    if !(x > 0.0) {
        return Err(MarginError::NonPositive(x));
    }
    Ok(log_gamma_unchecked(x))
}

fn log_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    // shift into the Stirling range, accumulating the product as a log sum
    let mut z = x;
    let mut shift = 0.0;
    while z < 10.0 {
        shift += z.ln();
        z += 1.0;
    }
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + stirling_correction(z) - shift
}

/// `lnΓ(a) - lnΓ(a + b)` without cancellation when `a` is large.
pub(crate) fn log_gamma_ratio(a: f64, b: f64) -> f64 {
    if a >= 10.0 {
        let ab = a + b;
        -b * a.ln() - (ab - 0.5) * (b / a).ln_1p() + b + stirling_correction(a)
            - stirling_correction(ab)
    } else {
        log_gamma_unchecked(a) - log_gamma_unchecked(a + b)
    }
}

/// `ln B(a, b)`.
fn log_beta(a: f64, b: f64) -> f64 {
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    log_gamma_unchecked(small) + log_gamma_ratio(big, small)
}

/// Continued fraction for the regularized incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_TERMS: usize = 100_000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`; the caller passes both `x` and
/// `1 - x` so the complement never has to be formed by subtraction.
fn inc_beta(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * one_minus_x.ln() - log_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, one_minus_x) / b
    }
}

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// `erfc(z)` for `z >= 2` by its continued fraction.
fn erfc_continued_fraction(z: f64) -> f64 {
    // erfc(z) = exp(-z^2)/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = z + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = z + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-z * z - LN_SQRT_PI).exp() / f
}

/// `erf(z)` for `0 <= z < 2` by the series `2/√π e^{-z²} Σ 2^k z^{2k+1}/(2k+1)!!`,
/// whose terms are all positive.
fn erf_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= 2.0 * z2 / (2.0 * k + 1.0);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    2.0 / PI.sqrt() * (-z2).exp() * sum
}

/// Lower-tail probability `Φ(x)` for `x <= 0`, accurate in relative terms.
fn norm_lower_tail(x: f64) -> f64 {
    let z = -x * FRAC_1_SQRT_2;
    if z < 2.0 {
        0.5 * (1.0 - erf_series(z))
    } else {
        0.5 * erfc_continued_fraction(z)
    }
}

/// Standard normal distribution function `Φ(x)`.
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        norm_lower_tail(x)
    } else {
        1.0 - norm_lower_tail(-x)
    }
}

/// Acklam's rational approximation for `p <= 0.5` (relative error ~1e-9).
fn acklam_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        let x = (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
        -x.abs()
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Standard normal quantile `Φ⁻¹(u)`.
///
/// Acklam's approximation followed by two Halley steps against the
/// relative-accurate lower tail, so the result is good to full precision
/// down to `u = 1e-300`.
pub fn norm_quantile(u: f64) -> Result<f64, MarginError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(MarginError::ProbabilityOutOfRange(u));
    }
    if u == 0.5 {
        return Ok(0.0);
    }
    // 1 - u is exact for u >= 0.5
    let (p, sign) = if u < 0.5 { (u, 1.0) } else { (1.0 - u, -1.0) };
    let mut x = acklam_lower(p);
    for _ in 0..2 {
        let e = norm_lower_tail(x) - p;
        let r = e * SQRT_2PI * (0.5 * x * x).exp();
        x -= r / (1.0 + 0.5 * x * r);
    }
    Ok(sign * x)
}

// ---------------------------------------------------------------------------
// Student's t
// ---------------------------------------------------------------------------

/// Upper tail `P(T > t)` for `t >= 0`.
fn t_upper_tail(t: f64, nu: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let denom = nu + t2;
    0.5 * inc_beta(0.5 * nu, 0.5, nu / denom, t2 / denom)
}

/// Student's t density.
pub fn t_pdf(x: f64, nu: Dof) -> f64 {
    let nu = nu.get();
    let ln_norm = -log_gamma_ratio(0.5 * nu, 0.5) - 0.5 * (nu * PI).ln();
    (ln_norm - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()).exp()
}

/// Student's t distribution function, via the regularized incomplete beta.
pub fn t_cdf(x: f64, nu: Dof) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let tail = t_upper_tail(x.abs(), nu.get());
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Student's t quantile.
///
/// Solves `P(T > t) = p` with `p = min(u, 1 - u)` by bracketed Newton.
/// Moderate tails are solved in `t`; small tail probabilities are solved in
/// `ln t`, where the heavy power-law tail is close to linear.
pub fn t_quantile(u: f64, nu: Dof) -> Result<f64, MarginError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(MarginError::ProbabilityOutOfRange(u));
    }
    if u == 0.5 {
        return Ok(0.0);
    }
    let (p, sign) = if u < 0.5 { (u, -1.0) } else { (1.0 - u, 1.0) };
    let start = -norm_quantile(p)?;
    let t = if p > 0.25 {
        solve_linear_scale(p, nu, start)
    } else {
        solve_log_scale(p, nu, start)
    };
    Ok(sign * t)
}

/// Newton on `f(t) = tail(t) - p`, `t >= 0`, with bisection fallback.
fn solve_linear_scale(p: f64, nu: Dof, start: f64) -> f64 {
    let nu_f = nu.get();
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut t = start;
    for _ in 0..200 {
        let f = t_upper_tail(t, nu_f) - p;
        if f == 0.0 {
            return t;
        }
        if f > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
        let mut next = t + f / t_pdf(t, nu);
        if !(next > lo && next < hi) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * t.max(1.0) };
        }
        if (next - t).abs() <= 1e-15 * next.abs() {
            return next;
        }
        t = next;
    }
    t
}

/// Newton on `g(y) = ln tail(e^y) - ln p`, with bisection fallback.
fn solve_log_scale(p: f64, nu: Dof, start: f64) -> f64 {
    let nu_f = nu.get();
    let ln_p = p.ln();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut y = start.ln();
    for _ in 0..300 {
        let t = y.exp();
        let tail = t_upper_tail(t, nu_f);
        let g = tail.ln() - ln_p;
        if g == 0.0 {
            return t;
        }
        if g > 0.0 {
            lo = lo.max(y);
        } else {
            hi = hi.min(y);
        }
        let slope = -t * t_pdf(t, nu) / tail;
        let mut next = y - g / slope;
        if !next.is_finite() {
            next = if g > 0.0 { y + 5.0 } else { y - 5.0 };
        }
        next = next.clamp(y - 5.0, y + 5.0);
        if !(next > lo && next < hi) {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 5.0,
                (false, true) => hi - 5.0,
                (false, false) => unreachable!("bracket updated above"),
            };
        }
        if (next - y).abs() <= 1e-15 * next.abs().max(1.0) {
            return next.exp();
        }
        y = next;
    }
    y.exp()
}
