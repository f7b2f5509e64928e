//! Scalar abstraction: every numeric routine in this crate is generic over a
//! real floating-point type. `f64` is the working precision; `f32` builds are
//! supported for quick smoke runs.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::{Product, Sum};

/// Real scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Product
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lift a literal into the scalar type. Panics only if the literal cannot
    /// be represented at all, which no finite constant in this crate triggers.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("literal out of range for scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex value over the crate scalar.
pub type C<R> = Complex<R>;

pub fn c_zero<R: Real>() -> C<R> {
    Complex::new(R::zero(), R::zero())
}

pub fn c_one<R: Real>() -> C<R> {
    Complex::new(R::one(), R::zero())
}

pub fn c_i<R: Real>() -> C<R> {
    Complex::new(R::zero(), R::one())
}

/// i^k for k taken mod 4.
pub fn i_pow<R: Real>(k: u32) -> C<R> {
    match k % 4 {
        0 => Complex::new(R::one(), R::zero()),
        1 => Complex::new(R::zero(), R::one()),
        2 => Complex::new(-R::one(), R::zero()),
        _ => Complex::new(R::zero(), -R::one()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_lift_round_trips() {
        assert_eq!(f64::of(0.25), 0.25);
        assert_eq!(f32::of(0.25), 0.25f32);
        assert_eq!(0.25f64.as_f64(), 0.25);
    }

    #[test]
    fn i_powers_cycle() {
        let i = c_i::<f64>();
        for k in 0..8u32 {
            let expect = (0..k).fold(c_one::<f64>(), |acc, _| acc * i);
            assert_eq!(i_pow::<f64>(k), expect);
        }
    }
}
