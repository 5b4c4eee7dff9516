//! Special functions for the range-mismatch gain kernels: the imaginary
//! error function of complex argument and the Fresnel integrals.
//!
//! # Evaluation regimes
//!
//! `erfi(z) = -j erf(jz) = (2/sqrt(pi)) * sum_k z^(2k+1) / (k! (2k+1))`.
//!
//! * Inside [`ERFI_SERIES_RADIUS`], and in the strip `|Im z| < `[`SERIES_STRIP_HALF_WIDTH`]
//!   out to [`CONTINUED_FRACTION_RADIUS`], the Maclaurin series is summed in
//!   double-double arithmetic. The cancellation factor of the series is at
//!   most `e^36` in the disc and `e^(2 Im(z)^2) <= e^32` in the strip, both
//!   well inside the 106-bit working precision.
//! * Everywhere else `erfi` is obtained from the Faddeeva function
//!   `w(z) = e^{-z^2} erfc(-jz)` through `erfi(z) = j (e^{z^2} w(-z) - 1)`
//!   with `Im z <= 0`, and `w` is evaluated with the Laplace continued
//!   fraction (modified Lentz).
//!
//! The Fresnel integrals use a double-double power series up to
//! [`FRESNEL_SERIES_LIMIT`] and the auxiliary-function form
//! `C + jS = (1+j)/2 (1 - e^{j pi x^2/2} w(sqrt(pi)(1+j)x/2))` beyond it.
//!
//! All functions are pure and thread-safe.

mod dd;
pub mod quadrature;

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use dd::{ComplexDD, DoubleDouble, HALF_PI, TWO_OVER_SQRT_PI};

/// Below this modulus `erfi` always uses the double-double series.
pub const ERFI_SERIES_RADIUS: f64 = 6.0;
/// Half-width of the strip around the real axis where the series is still
/// used out to [`CONTINUED_FRACTION_RADIUS`].
pub const SERIES_STRIP_HALF_WIDTH: f64 = 4.0;
/// Beyond this modulus the continued fraction is used everywhere.
pub const CONTINUED_FRACTION_RADIUS: f64 = 10.0;
/// Fresnel integrals switch from the series to the auxiliary form here.
pub const FRESNEL_SERIES_LIMIT: f64 = 5.0;

const LENTZ_TINY: f64 = 1e-300;
const LENTZ_MAX_ITER: usize = 5000;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SpecFunError {
    #[error("argument is not finite")]
    NonFinite,
    #[error("result overflows the double-precision range at z = {z}")]
    Overflow { z: Complex64 },
}

/// Which scaling of the Fresnel integrals to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FresnelConvention {
    /// `C(x) = int_0^x cos(pi t^2 / 2) dt` (the default).
    #[default]
    HalfPi,
    /// `C(x) = int_0^x cos(t^2) dt`.
    Unit,
}

fn check_finite(z: Complex64) -> Result<(), SpecFunError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(SpecFunError::NonFinite)
    }
}

/// Imaginary error function `erfi(z) = -j erf(jz)`.
///
/// Returns [`SpecFunError::Overflow`] when `|erfi(z)|` exceeds the largest
/// finite double, which happens once `Re(z^2)` is a little above 709.
pub fn erfi(z: Complex64) -> Result<Complex64, SpecFunError> {
    check_finite(z)?;
    if z.re == 0.0 && z.im == 0.0 {
        return Ok(z);
    }
    let r = z.norm();
    if r <= ERFI_SERIES_RADIUS || (r < CONTINUED_FRACTION_RADIUS && z.im.abs() < SERIES_STRIP_HALF_WIDTH) {
        return Ok(erfi_series(z).to_c64());
    }

    // erfi is odd; work with Im z <= 0 so that -z lies in the upper half-plane.
    let (zz, sign) = if z.im > 0.0 { (-z, -1.0) } else { (z, 1.0) };
    let w = faddeeva_upper(-zz);
    let z2 = ComplexDD::square_exact(zz);

    if z2.re.hi + w.norm().ln() > f64::MAX.ln() {
        return Err(SpecFunError::Overflow { z });
    }
    let (s, c) = (z2.im + DoubleDouble::from_f64(w.arg())).sin_cos();
    // split the exponent so that e^{Re z^2} alone cannot overflow
    let shift = if z2.re.hi > 600.0 { 600.0 } else { 0.0 };
    let m = (z2.re.hi - shift).exp() * w.norm() * (1.0 + z2.re.lo) * shift.exp();
    let e = Complex64::new(m * c, m * s);
    let out = Complex64::i() * (e - 1.0) * sign;
    if out.re.is_finite() && out.im.is_finite() {
        Ok(out)
    } else {
        Err(SpecFunError::Overflow { z })
    }
}

/// Maclaurin series of `erfi`, summed in double-double.
fn erfi_series(z: Complex64) -> ComplexDD {
    let z2 = ComplexDD::square_exact(z);
    let mut term = ComplexDD::from_c64(z);
    let mut sum = term;
    let r2 = z.norm_sqr();
    let mut k = 1usize;
    loop {
        term = (term * z2).div_f64(k as f64);
        let contrib = term.div_f64((2 * k + 1) as f64);
        sum = sum + contrib;
        if k as f64 > r2 && contrib.norm_hi() <= 1e-34 * sum.norm_hi() {
            break;
        }
        k += 1;
    }
    sum.scale(TWO_OVER_SQRT_PI)
}

/// Faddeeva function `w(z) = e^{-z^2} erfc(-jz)` for `Im z >= 0`.
pub(crate) fn faddeeva_upper(z: Complex64) -> Complex64 {
    debug_assert!(z.im >= 0.0, "faddeeva_upper needs Im z >= 0, got {z}");
    if z.im >= SERIES_STRIP_HALF_WIDTH || z.norm() >= CONTINUED_FRACTION_RADIUS {
        faddeeva_continued_fraction(z)
    } else {
        faddeeva_series(z)
    }
}

/// `w(z) = e^{-z^2} (1 + j erfi(z))`, with the bracket formed in
/// double-double before the final scaling.
fn faddeeva_series(z: Complex64) -> Complex64 {
    let bracket = erfi_series(z).mul_i() + ComplexDD::from_c64(Complex64::new(1.0, 0.0));
    let z2 = ComplexDD::square_exact(z);
    let m = (-z2.re.hi).exp() * (1.0 - z2.re.lo);
    let (s, c) = (-z2.im).sin_cos();
    Complex64::new(m * c, m * s) * bracket.to_c64()
}

/// Laplace continued fraction
/// `w(z) = (j/sqrt(pi)) / (z - (1/2)/(z - 1/(z - (3/2)/(z - ...))))`,
/// valid for `Im z > 0` and, asymptotically, for large real `z`.
fn faddeeva_continued_fraction(z: Complex64) -> Complex64 {
    let tiny = Complex64::new(LENTZ_TINY, 0.0);
    let mut f = if z == Complex64::new(0.0, 0.0) { tiny } else { z };
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for n in 1..=LENTZ_MAX_ITER {
        let a = -(n as f64) * 0.5;
        d = z + d * a;
        if d.norm_sqr() == 0.0 {
            d = tiny;
        }
        c = z + a / c;
        if c.norm_sqr() == 0.0 {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    Complex64::i() * FRAC_1_SQRT_PI / f
}

/// `(C(x), S(x))` in the requested convention.
pub fn fresnel(x: f64, convention: FresnelConvention) -> Result<(f64, f64), SpecFunError> {
    if !x.is_finite() {
        return Err(SpecFunError::NonFinite);
    }
    match convention {
        FresnelConvention::HalfPi => Ok(fresnel_half_pi(x)),
        FresnelConvention::Unit => {
            // int_0^x cos(t^2) dt = sqrt(pi/2) C(x sqrt(2/pi))
            let scale = (PI / 2.0).sqrt();
            let (c, s) = fresnel_half_pi(x / scale);
            Ok((scale * c, scale * s))
        }
    }
}

/// Fresnel cosine integral, `pi t^2 / 2` convention.
pub fn fresnel_c(x: f64) -> Result<f64, SpecFunError> {
    fresnel(x, FresnelConvention::HalfPi).map(|(c, _)| c)
}

/// Fresnel sine integral, `pi t^2 / 2` convention.
pub fn fresnel_s(x: f64) -> Result<f64, SpecFunError> {
    fresnel(x, FresnelConvention::HalfPi).map(|(_, s)| s)
}

fn fresnel_half_pi(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (c, s) = if ax == 0.0 {
        (0.0, 0.0)
    } else if ax <= FRESNEL_SERIES_LIMIT {
        fresnel_series(ax)
    } else {
        fresnel_auxiliary(ax)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

/// `C + jS = x * sum_m (j a)^m / (m! (2m+1))` with `a = pi x^2 / 2`.
fn fresnel_series(x: f64) -> (f64, f64) {
    let a = DoubleDouble::mul_exact(x, x) * HALF_PI;
    let mut term = ComplexDD::from_c64(Complex64::new(1.0, 0.0));
    let mut sum = term;
    let mut m = 1usize;
    loop {
        // term *= j a / m
        term = ComplexDD::new(-(term.im * a), term.re * a).div_f64(m as f64);
        let contrib = term.div_f64((2 * m + 1) as f64);
        sum = sum + contrib;
        if m as f64 > a.hi && contrib.norm_hi() <= 1e-34 * sum.norm_hi() {
            break;
        }
        m += 1;
    }
    (sum.re.mul_f64(x).to_f64(), sum.im.mul_f64(x).to_f64())
}

fn fresnel_auxiliary(x: f64) -> (f64, f64) {
    let half_sqrt_pi = 0.5 * PI.sqrt();
    let w = faddeeva_upper(Complex64::new(half_sqrt_pi * x, half_sqrt_pi * x));
    // pi x^2 / 2 reduced modulo 2 pi through x^2 / 2 modulo 2
    let q = DoubleDouble::mul_exact(x, x).mul_f64(0.5);
    let q = q - DoubleDouble::from_f64(2.0 * q.mul_f64(0.5).round());
    let (s, c) = (PI * q.hi).sin_cos();
    let phase = Complex64::new(c - s * PI * q.lo, s + c * PI * q.lo);
    let v = Complex64::new(0.5, 0.5) * (1.0 - phase * w);
    (v.re, v.im)
}

#[cfg(test)]
mod tests {
    use super::quadrature::{erfi_by_quadrature, fresnel_by_quadrature, Tolerance};
    use super::*;

    fn rel_err(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn erfi_at_origin_is_zero() {
        assert_eq!(erfi(Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn erfi_is_odd() {
        let z = Complex64::new(1.3, 0.7);
        let a = erfi(z).unwrap();
        let b = erfi(-z).unwrap();
        assert!((a + b).norm() <= 1e-15 * a.norm());
    }

    #[test]
    fn erfi_one_matches_gaussian_integral() {
        // erfi(1) = (2/sqrt(pi)) int_0^1 e^{t^2} dt
        let q = quadrature::quadrature_oracle(&quadrature::Integrand::Gaussian, 0.0, 1.0, Tolerance::new(0.0, 1e-15))
            .unwrap();
        let expected = 2.0 / PI.sqrt() * q.value.re;
        let got = erfi(Complex64::new(1.0, 0.0)).unwrap();
        assert!((got.re - expected).abs() < 1e-14 * expected);
        assert_eq!(got.im, 0.0);
        // Cross-check against a reference value.
        assert!((got.re - 1.650_425_758_797_542_8).abs() < 1e-15);
    }

    #[test]
    fn erfi_on_imaginary_axis_is_j_erf() {
        // erfi(j y) = j erf(y); erf(2) = 0.9953222650189527
        let v = erfi(Complex64::new(0.0, 2.0)).unwrap();
        assert!(v.re.abs() < 1e-16);
        assert!((v.im - 0.995_322_265_018_952_7).abs() < 1e-15);
        let v = erfi(Complex64::new(0.0, 12.0)).unwrap();
        assert!((v.im - 1.0).abs() < 1e-15);
    }

    #[test]
    fn erfi_conjugate_symmetry() {
        for &(re, im) in &[(0.4, 0.9), (3.0, -2.0), (7.5, 5.0), (-11.0, 14.0)] {
            let z = Complex64::new(re, im);
            let a = erfi(z.conj()).unwrap();
            let b = erfi(z).unwrap().conj();
            assert!(rel_err(a, b) < 1e-15, "z = {z}");
        }
    }

    #[test]
    fn erfi_regimes_agree_at_switch_boundaries() {
        // The series is accurate out to |z| = 10 in the strip; compare with
        // the continued-fraction route just inside that radius.
        for &z in &[
            Complex64::new(6.5, 4.2),
            Complex64::new(-4.6, 4.6),
            Complex64::new(9.0, -3.5),
            Complex64::new(2.0, 6.2),
        ] {
            let series = erfi_series(z).to_c64();
            let zz = if z.im > 0.0 { -z } else { z };
            let sign = if z.im > 0.0 { -1.0 } else { 1.0 };
            let w = faddeeva_continued_fraction(-zz);
            let cf = Complex64::i() * ((zz * zz).exp() * w - 1.0) * sign;
            assert!(rel_err(cf, series) < 1e-12, "z = {z}: {cf} vs {series}");
        }
    }

    #[test]
    fn faddeeva_branches_agree_in_overlap() {
        for &z in &[
            Complex64::new(0.5, 4.1),
            Complex64::new(3.0, 4.5),
            Complex64::new(10.5, 0.2),
            Complex64::new(-10.2, 1.0),
            Complex64::new(8.0, 3.9),
        ] {
            let a = faddeeva_series(z);
            let b = faddeeva_continued_fraction(z);
            assert!(rel_err(a, b) < 1e-13, "z = {z}: {a} vs {b}");
        }
    }

    #[test]
    fn faddeeva_known_values() {
        // w(j) = e erfc(1) = 0.4275835761558070
        let v = faddeeva_upper(Complex64::new(0.0, 1.0));
        assert!((v.re - 0.427_583_576_155_807).abs() < 1e-15);
        assert!(v.im.abs() < 1e-16);
        // Large argument: w(z) ~ j / (sqrt(pi) z)
        let z = Complex64::new(1e6, 1e6);
        let v = faddeeva_upper(z);
        let approx = Complex64::i() * FRAC_1_SQRT_PI / z;
        assert!(rel_err(v, approx) < 1e-12);
    }

    #[test]
    fn erfi_overflow_is_signalled() {
        let err = erfi(Complex64::new(27.0, 0.0)).unwrap_err();
        assert!(matches!(err, SpecFunError::Overflow { .. }));
        // Large modulus with bounded Re(z^2) stays finite.
        assert!(erfi(Complex64::new(21.0, 20.0)).is_ok());
        // Just below the limit: Re(z^2) = 705.
        assert!(erfi(Complex64::new(705f64.sqrt(), 0.0)).is_ok());
    }

    #[test]
    fn erfi_rejects_non_finite() {
        assert_eq!(erfi(Complex64::new(f64::NAN, 0.0)), Err(SpecFunError::NonFinite));
        assert_eq!(fresnel_c(f64::INFINITY), Err(SpecFunError::NonFinite));
    }

    #[test]
    fn erfi_matches_quadrature_on_fixed_points() {
        for &(re, im) in &[
            (0.3, 0.2),
            (2.5, -1.5),
            (5.0, 3.0),
            (8.0, 1.0),
            (-12.0, 9.0),
            (20.0, -15.0),
            (3.0, 25.0),
            (18.0, 18.5),
        ] {
            let z = Complex64::new(re, im);
            let got = erfi(z).unwrap();
            let oracle = erfi_by_quadrature(z, Tolerance::new(0.0, 1e-15)).unwrap().value;
            assert!(rel_err(got, oracle) < 1e-12, "z = {z}: {got} vs {oracle}");
        }
    }

    #[test]
    fn fresnel_zero_and_odd() {
        assert_eq!(fresnel_c(0.0).unwrap(), 0.0);
        assert_eq!(fresnel_s(0.0).unwrap(), 0.0);
        assert_eq!(fresnel_c(-0.8).unwrap(), -fresnel_c(0.8).unwrap());
        assert_eq!(fresnel_s(-7.3).unwrap(), -fresnel_s(7.3).unwrap());
    }

    #[test]
    fn fresnel_at_one_matches_quadrature() {
        let (c, s) = fresnel(1.0, FresnelConvention::HalfPi).unwrap();
        let (qc, qs) = fresnel_by_quadrature(1.0, Tolerance::new(0.0, 1e-15)).unwrap();
        assert!((c - qc).abs() < 1e-14 * qc);
        assert!((s - qs).abs() < 1e-14 * qs);
        // Tabulated: C(1) = 0.7798934003768228, S(1) = 0.4382591473903548
        assert!((c - 0.779_893_400_376_822_8).abs() < 1e-15);
        assert!((s - 0.438_259_147_390_354_8).abs() < 1e-15);
    }

    #[test]
    fn fresnel_small_argument_limits() {
        for &x in &[1e-8, 1e-5, 1e-3, 1e-2] {
            let (c, s) = fresnel(x, FresnelConvention::HalfPi).unwrap();
            assert!((c / x - 1.0).abs() < 1e-3 * x.max(1e-6));
            // S(x) ~ pi x^3 / 6
            assert!((s / x.powi(3) - PI / 6.0).abs() < 1e-2);
        }
    }

    #[test]
    fn fresnel_large_argument_approaches_half() {
        let (c, s) = fresnel(1e4, FresnelConvention::HalfPi).unwrap();
        assert!((c - 0.5).abs() < 1e-4);
        assert!((s - 0.5).abs() < 1e-4);
    }

    #[test]
    fn fresnel_branches_agree_at_switch() {
        for &x in &[4.6, 4.9, 5.0] {
            let a = fresnel_series(x);
            let b = fresnel_auxiliary(x);
            assert!((a.0 - b.0).abs() < 1e-14, "C at {x}");
            assert!((a.1 - b.1).abs() < 1e-14, "S at {x}");
        }
    }

    #[test]
    fn unit_convention_matches_its_integrals() {
        let x = 1.7;
        let (c, s) = fresnel(x, FresnelConvention::Unit).unwrap();
        let tol = Tolerance::new(0.0, 1e-15);
        let qc = quadrature::quadrature_oracle(&quadrature::Integrand::UnitFresnelCos, 0.0, x, tol).unwrap();
        let qs = quadrature::quadrature_oracle(&quadrature::Integrand::UnitFresnelSin, 0.0, x, tol).unwrap();
        assert!((c - qc.value.re).abs() < 1e-13);
        assert!((s - qs.value.re).abs() < 1e-13);
    }
}
