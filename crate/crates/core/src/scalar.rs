//! Scalar abstractions shared by every numerical routine.
//!
//! `Real` covers the two IEEE float widths; `Scalar` adds the complex
//! counterparts so that factorizations and inner products are written once.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::Neg;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point type the library is generic over.
pub trait Real:
    Scalar<Real = Self>
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field element: a real or complex number over a [`Real`] base.
pub trait Scalar: Copy + PartialEq + Debug + NumAssign + Neg<Output = Self> + Sum + Send + Sync + 'static {
    type Real: Real;

    fn from_real(r: Self::Real) -> Self;
    fn modulus(self) -> Self::Real;
    fn conj(self) -> Self;
    fn re(self) -> Self::Real;
    fn finite(self) -> bool;

    /// Unit-modulus phase of `self`; `1` for zero.
    fn unit_phase(self) -> Self;

    fn scale(self, r: Self::Real) -> Self {
        self * Self::from_real(r)
    }

    /// Complex embedding.
    fn to_complex(self) -> Complex<Self::Real>;
}

macro_rules! impl_real_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            type Real = $t;
            fn from_real(r: $t) -> Self {
                r
            }
            fn modulus(self) -> $t {
                self.abs()
            }
            fn conj(self) -> Self {
                self
            }
            fn re(self) -> $t {
                self
            }
            fn finite(self) -> bool {
                <$t>::is_finite(self)
            }
            fn unit_phase(self) -> Self {
                if self < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            fn to_complex(self) -> Complex<$t> {
                Complex::new(self, 0.0)
            }
        }
    };
}

impl<T: Real> Scalar for Complex<T> {
    type Real = T;
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    fn modulus(self) -> T {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex::conj(&self)
    }
    fn re(self) -> T {
        self.re
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn unit_phase(self) -> Self {
        let r = self.norm();
        if r == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            self / r
        }
    }
    fn to_complex(self) -> Complex<T> {
        self
    }
}

impl_real_scalar!(f32);
impl_real_scalar!(f64);

/// `e^{iθ}`.
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Imaginary unit.
pub fn im<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

pub fn cx<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signum_is_unit_phase() {
        let z = Complex::new(3.0f64, -4.0);
        assert!((Scalar::unit_phase(z).norm() - 1.0).abs() < 1e-15);
        assert_eq!(Scalar::unit_phase(0.0f32), 1.0);
        assert_eq!(Scalar::unit_phase(-2.0f64), -1.0);
    }

    #[test]
    fn literals_roundtrip() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::lit(1e-10).to_f64_lossy(), 1e-10);
    }
}
