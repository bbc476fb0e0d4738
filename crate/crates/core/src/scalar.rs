//! Field abstraction shared by the real and complex propagation paths.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub};

use num_complex::Complex64;

/// Scalars the transfer-matrix machinery can run over: `f64` for real
/// parameters and `Complex64` for complexified phases or energies.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + MulAssign
{
    /// `true` for `f64`.
    const IS_REAL: bool;

    fn from_re(x: f64) -> Self;
    fn zero() -> Self {
        Self::from_re(0.0)
    }
    fn one() -> Self {
        Self::from_re(1.0)
    }
    fn modulus(self) -> f64;
    fn norm_sqr(self) -> f64 {
        let m = self.modulus();
        m * m
    }
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn conj(self) -> Self;
    fn scale(self, k: f64) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn to_complex(self) -> Complex64 {
        Complex64::new(self.re(), self.im())
    }

    /// `a d − b c`
    #[inline]
    fn det2(a: Self, b: Self, c: Self, d: Self) -> Self {
        a * d - b * c
    }

    /// `amp * exp(2πi (c0 + c1 t))`, with the real part of the phase reduced
    /// mod 1 before the trigonometric evaluation.
    fn fourier_mode(amp: Complex64, c0: Self, c1: Self, t: f64) -> Self;
}

impl Scalar for f64 {
    const IS_REAL: bool = true;

    #[inline]
    fn from_re(x: f64) -> Self {
        x
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    /// Kahan's FMA form: accurate to a few ulps even under cancellation.
    #[inline]
    fn det2(a: f64, b: f64, c: f64, d: f64) -> f64 {
        let w = b * c;
        let e = (-b).mul_add(c, w);
        let f = a.mul_add(d, -w);
        f + e
    }

    /// Real part of the mode only; conjugate partners are folded by the caller.
    #[inline]
    fn fourier_mode(amp: Complex64, c0: f64, c1: f64, t: f64) -> f64 {
        let phase = c1.mul_add(t, c0);
        let phase = phase - phase.floor();
        let (s, c) = (std::f64::consts::TAU * phase).sin_cos();
        amp.re * c - amp.im * s
    }
}

impl Scalar for Complex64 {
    const IS_REAL: bool = false;

    #[inline]
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline]
    fn ln(self) -> Self {
        Complex64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        Complex64::exp(self)
    }

    #[inline]
    fn fourier_mode(amp: Complex64, c0: Complex64, c1: Complex64, t: f64) -> Complex64 {
        let phase = c0 + c1 * t;
        let re = phase.re - phase.re.floor();
        let arg = std::f64::consts::TAU * re;
        let damp = (-std::f64::consts::TAU * phase.im).exp();
        let (s, c) = arg.sin_cos();
        amp * Complex64::new(c * damp, s * damp)
    }
}
