//! Minimal double-double arithmetic (about 106 significant bits).
//!
//! Only the handful of operations needed by the series expansions are
//! provided. The exponent range is that of `f64`.

use std::ops::{Add, Mul, Neg, Sub};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

pub(crate) const TWO_PI: DoubleDouble = DoubleDouble::new(std::f64::consts::TAU, 2.449_293_598_294_706_4e-16);
pub(crate) const HALF_PI: DoubleDouble = DoubleDouble::new(std::f64::consts::FRAC_PI_2, 6.123_233_995_736_766e-17);
/// 2 / sqrt(pi)
pub(crate) const TWO_OVER_SQRT_PI: DoubleDouble =
    DoubleDouble::new(std::f64::consts::FRAC_2_SQRT_PI, 1.533_545_961_316_588e-17);

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    /// Exact product of two doubles.
    pub fn mul_exact(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = self.lo.mul_add(b, e);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self - Self::mul_exact(q1, b);
        let q2 = r.hi / b;
        let r = r - Self::mul_exact(q2, b);
        let q3 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::from_f64(q3)
    }

    /// `(sin, cos)` of the value, reducing modulo 2*pi in double-double so
    /// that phases of several thousand radians keep full relative accuracy.
    pub fn sin_cos(self) -> (f64, f64) {
        let k = (self.hi / TWO_PI.hi).round();
        let r = self - TWO_PI.mul_f64(k);
        let (s, c) = r.hi.sin_cos();
        (s + c * r.lo, c - s * r.lo)
    }

    /// Nearest integer of the value, as a double.
    pub fn round(self) -> f64 {
        let r = self.hi.round();
        if r == self.hi {
            // hi is integral; the low word decides ties and carries.
            let lo = self.lo.round();
            r + lo
        } else if (r - self.hi).abs() == 0.5 {
            // exact tie on hi alone; the low word breaks it
            if self.lo > 0.0 {
                self.hi.ceil()
            } else if self.lo < 0.0 {
                self.hi.floor()
            } else {
                r
            }
        } else {
            r
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

/// Complex number with double-double components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct ComplexDD {
    pub re: DoubleDouble,
    pub im: DoubleDouble,
}

impl ComplexDD {
    pub const fn new(re: DoubleDouble, im: DoubleDouble) -> Self {
        Self { re, im }
    }

    pub fn from_c64(z: num_complex::Complex64) -> Self {
        Self {
            re: DoubleDouble::from_f64(z.re),
            im: DoubleDouble::from_f64(z.im),
        }
    }

    /// `z * z` for a double-precision `z`, computed exactly.
    pub fn square_exact(z: num_complex::Complex64) -> Self {
        let xx = DoubleDouble::mul_exact(z.re, z.re);
        let yy = DoubleDouble::mul_exact(z.im, z.im);
        let xy = DoubleDouble::mul_exact(z.re, z.im);
        Self {
            re: xx - yy,
            im: xy.mul_f64(2.0),
        }
    }

    pub fn to_c64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    /// Cheap modulus estimate from the high words.
    pub fn norm_hi(self) -> f64 {
        self.re.hi.hypot(self.im.hi)
    }

    pub fn scale(self, s: DoubleDouble) -> Self {
        Self {
            re: self.re * s,
            im: self.im * s,
        }
    }

    pub fn div_f64(self, d: f64) -> Self {
        Self {
            re: self.re.div_f64(d),
            im: self.im.div_f64(d),
        }
    }

    /// Multiply by the imaginary unit.
    pub fn mul_i(self) -> Self {
        Self {
            re: -self.im,
            im: self.re,
        }
    }
}

impl Add for ComplexDD {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        Self {
            re: self.re + b.re,
            im: self.im + b.im,
        }
    }
}

impl Mul for ComplexDD {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        Self {
            re: self.re * b.re - self.im * b.im,
            im: self.re * b.im + self.im * b.re,
        }
    }
}
