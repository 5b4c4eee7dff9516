//! Adaptive Gauss-Kronrod quadrature for complex-valued integrands.
//!
//! This is the independent reference used to validate the special
//! functions and the integral forms of the gain kernels. It deliberately
//! shares nothing with the series and continued-fraction code paths other
//! than the double-double helpers used to evaluate large phases exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use super::dd::DoubleDouble;

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const DEFAULT_MAX_INTERVALS: usize = 200_000;
const ROUNDOFF_FACTOR: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("integration limits must be finite (got [{a}, {b}])")]
    NonFiniteLimits { a: f64, b: f64 },
    #[error("integrand returned a non-finite value at t = {t}")]
    NonFiniteIntegrand { t: f64 },
    #[error(
        "quadrature did not converge after {intervals} subintervals: \
         value {value}, estimated error {abs_error:e}"
    )]
    NonConvergence {
        value: Complex64,
        abs_error: f64,
        intervals: usize,
    },
}

/// Stopping rule: accept once the estimated error is below
/// `max(abs, rel * |integral|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: DEFAULT_MAX_INTERVALS,
        }
    }

    pub fn absolute(abs: f64) -> Self {
        Self::new(abs, 0.0)
    }

    pub fn relative(rel: f64) -> Self {
        Self::new(0.0, rel)
    }

    pub fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-300, 1e-14)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub abs_error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

/// Integrands known to the oracle, by identifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    /// Identically zero.
    Zero,
    /// `e^{t^2}` on the real line.
    Gaussian,
    /// `z e^{z^2 s^2}` over `s`; on `[0, 1]` it integrates to `(sqrt(pi)/2) erfi(z)`.
    ErfiPath { z: Complex64 },
    /// `cos(pi t^2 / 2)`.
    FresnelCos,
    /// `sin(pi t^2 / 2)`.
    FresnelSin,
    /// `cos(t^2)`.
    UnitFresnelCos,
    /// `sin(t^2)`.
    UnitFresnelSin,
    /// `e^{j c u^2 + 2 w u}`: the lossy chirp whose magnitude over
    /// `[-1/2, 1/2]` gives the range-mismatch kernel.
    LossyChirp { c: f64, w: f64 },
}

impl Integrand {
    pub fn eval(&self, t: f64) -> Complex64 {
        match *self {
            Integrand::Zero => Complex64::new(0.0, 0.0),
            Integrand::Gaussian => Complex64::new((t * t).exp(), 0.0),
            Integrand::ErfiPath { z } => z * exp_of_square_scaled(z, t, 0.0),
            Integrand::FresnelCos => Complex64::new(cos_half_pi_square(t), 0.0),
            Integrand::FresnelSin => Complex64::new(sin_half_pi_square(t), 0.0),
            Integrand::UnitFresnelCos => Complex64::new((t * t).cos(), 0.0),
            Integrand::UnitFresnelSin => Complex64::new((t * t).sin(), 0.0),
            Integrand::LossyChirp { c, w } => Complex64::new(2.0 * w * t, c * t * t).exp(),
        }
    }
}

/// Integrate a known integrand over `[a, b]`.
pub fn quadrature_oracle(
    integrand: &Integrand,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<QuadratureResult, QuadratureError> {
    integrate(|t| integrand.eval(t), a, b, tol)
}

/// `e^{(z s)^2 - shift}` with the exponent formed in double-double so that
/// large phases (|z|^2 up to ~1e3) are reduced without losing digits.
fn exp_of_square_scaled(z: Complex64, s: f64, shift: f64) -> Complex64 {
    let s2 = DoubleDouble::mul_exact(s, s);
    let xx = DoubleDouble::mul_exact(z.re, z.re);
    let yy = DoubleDouble::mul_exact(z.im, z.im);
    let xy = DoubleDouble::mul_exact(z.re, z.im).mul_f64(2.0);
    let re = (xx - yy) * s2;
    let im = xy * s2;
    let modulus = (re.hi - shift).exp() * (1.0 + re.lo);
    let (sin, cos) = im.sin_cos();
    Complex64::new(modulus * cos, modulus * sin)
}

/// `t^2 / 2` reduced modulo 2, exactly.
fn half_square_mod_two(t: f64) -> DoubleDouble {
    let q = DoubleDouble::mul_exact(t, t).mul_f64(0.5);
    let k = q.mul_f64(0.5).round();
    q - DoubleDouble::from_f64(2.0 * k)
}

fn cos_half_pi_square(t: f64) -> f64 {
    let q = half_square_mod_two(t);
    let (s, c) = (PI * q.hi).sin_cos();
    c - s * PI * q.lo
}

fn sin_half_pi_square(t: f64) -> f64 {
    let q = half_square_mod_two(t);
    let (s, c) = (PI * q.hi).sin_cos();
    s + c * PI * q.lo
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    abs_integral: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F>(f: &F, a: f64, b: f64) -> Result<Segment, QuadratureError>
where
    F: Fn(f64) -> Complex64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |t: f64| {
        let v = f(t);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFiniteIntegrand { t })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = fc * WGK[10];
    let mut abs_sum = fc.norm() * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for (j, &x) in XGK.iter().enumerate().take(10) {
        let dx = half * x;
        let (lo, hi) = (eval(center - dx)?, eval(center + dx)?);
        let pair = lo + hi;
        kronrod += pair * WGK[j];
        abs_sum += (lo.norm() + hi.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Ok(Segment {
        a,
        b,
        value,
        error,
        abs_integral: abs_sum * half.abs(),
    })
}

/// Adaptive bisection driven by the interval with the largest error.
///
/// The per-interval error is the plain |K21 - G10| difference, which is a
/// pessimistic bound for smooth integrands. The requested tolerance is
/// floored at `ROUNDOFF_FACTOR * eps * int |f|`, below which the estimate
/// is dominated by rounding noise.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64) -> Complex64,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(QuadratureError::NonFiniteLimits { a, b });
    }
    if a == b {
        return Ok(QuadratureResult {
            value: Complex64::new(0.0, 0.0),
            abs_error: 0.0,
            intervals: 0,
            evaluations: 0,
        });
    }

    let mut heap = BinaryHeap::new();
    let first = gauss_kronrod(&f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut total_abs = first.abs_integral;
    heap.push(first);
    let mut evaluations = 21;

    loop {
        let target = tol
            .abs
            .max(tol.rel * total.norm())
            .max(ROUNDOFF_FACTOR * f64::EPSILON * total_abs);
        if total_err <= target {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(QuadratureError::NonConvergence {
                value: total,
                abs_error: total_err,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval at machine resolution; cannot refine further
            return Err(QuadratureError::NonConvergence {
                value: total,
                abs_error: total_err,
                intervals: heap.len() + 1,
            });
        }
        let left = gauss_kronrod(&f, worst.a, mid)?;
        let right = gauss_kronrod(&f, mid, worst.b)?;
        evaluations += 42;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_abs += left.abs_integral + right.abs_integral - worst.abs_integral;
        heap.push(left);
        heap.push(right);

        // Periodically resum to stop drift in the running totals.
        if heap.len() % 256 == 0 {
            total = compensated_sum(heap.iter().map(|s| s.value));
            total_err = heap.iter().map(|s| s.error).sum();
            total_abs = heap.iter().map(|s| s.abs_integral).sum();
        }
    }

    let value = compensated_sum(heap.iter().map(|s| s.value));
    Ok(QuadratureResult {
        value,
        abs_error: total_err,
        intervals: heap.len(),
        evaluations,
    })
}

fn compensated_sum(values: impl Iterator<Item = Complex64>) -> Complex64 {
    let (mut re, mut im) = (DoubleDouble::ZERO, DoubleDouble::ZERO);
    for v in values {
        re = re + DoubleDouble::from_f64(v.re);
        im = im + DoubleDouble::from_f64(v.im);
    }
    Complex64::new(re.to_f64(), im.to_f64())
}

/// `erfi(z)` from its defining integral along the ray `t = z s`.
///
/// Near the overflow threshold the integrand is integrated with a constant
/// factor `e^{-shift}` taken out, so the oracle stays finite wherever
/// `erfi` itself is.
pub fn erfi_by_quadrature(z: Complex64, tol: Tolerance) -> Result<QuadratureResult, QuadratureError> {
    let shift = ((z * z).re - 600.0).max(0.0).floor();
    let mut res = integrate(|s| z * exp_of_square_scaled(z, s, shift), 0.0, 1.0, tol)?;
    let scale = 2.0 / PI.sqrt() * shift.exp();
    res.value *= scale;
    res.abs_error *= scale;
    Ok(res)
}

/// `C(x) + j S(x)` in the `pi t^2 / 2` convention from the defining integrals.
pub fn fresnel_by_quadrature(x: f64, tol: Tolerance) -> Result<(f64, f64), QuadratureError> {
    let c = quadrature_oracle(&Integrand::FresnelCos, 0.0, x, tol)?;
    let s = quadrature_oracle(&Integrand::FresnelSin, 0.0, x, tol)?;
    Ok((c.value.re, s.value.re))
}
