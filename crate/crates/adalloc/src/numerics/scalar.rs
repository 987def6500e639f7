//! The scalar abstraction shared by plain floats and AD carriers.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_traits::{One, Zero};
use thiserror::Error;

/// A primitive operation hit an argument outside its domain.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{primitive}: {detail}")]
pub struct DomainError {
    /// Name of the offending primitive (`ln`, `sqrt`, `div`, ...).
    pub primitive: &'static str,
    pub detail: String,
}

impl DomainError {
    pub fn new(primitive: &'static str, detail: impl Into<String>) -> Self {
        Self {
            primitive,
            detail: detail.into(),
        }
    }
}

/// Field-like scalar with the elementary functions the plant models and
/// allocation objectives are built from.
///
/// Implemented by `f32`/`f64` (via `num_traits::Float`) and by [`crate::Dual2`],
/// which carries first and second derivatives through every operation. Model
/// code written against this trait is therefore differentiable for free.
///
/// Domain-sensitive primitives (`ln`, `sqrt`, `try_div`) return a
/// [`DomainError`] naming themselves instead of silently producing NaN.
/// `sqrt` at exactly zero succeeds for plain floats but fails for AD carriers,
/// where the derivative does not exist.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + AddAssign
    + SubAssign
{
    /// Lift a plain constant into the scalar type (zero derivatives).
    fn from_real(x: f64) -> Self;
    /// The underlying value, used for branching and diagnostics.
    fn value(&self) -> f64;

    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tanh(&self) -> Self;
    fn exp(&self) -> Self;
    fn atan2(&self, den: &Self) -> Self;
    fn powi(&self, n: i32) -> Self;
    /// |x|, with derivative sign(x) and zero at the origin (subgradient).
    fn abs(&self) -> Self;

    fn ln(&self) -> Result<Self, DomainError>;
    fn sqrt(&self) -> Result<Self, DomainError>;
    fn try_div(&self, den: &Self) -> Result<Self, DomainError>;
}

macro_rules! impl_scalar_for_float {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_real(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn value(&self) -> f64 {
                *self as f64
            }
            #[inline]
            fn sin(&self) -> Self {
                <$t>::sin(*self)
            }
            #[inline]
            fn cos(&self) -> Self {
                <$t>::cos(*self)
            }
            #[inline]
            fn tanh(&self) -> Self {
                <$t>::tanh(*self)
            }
            #[inline]
            fn exp(&self) -> Self {
                <$t>::exp(*self)
            }
            #[inline]
            fn atan2(&self, den: &Self) -> Self {
                <$t>::atan2(*self, *den)
            }
            #[inline]
            fn powi(&self, n: i32) -> Self {
                <$t>::powi(*self, n)
            }
            #[inline]
            fn abs(&self) -> Self {
                <$t>::abs(*self)
            }

            fn ln(&self) -> Result<Self, DomainError> {
                if *self <= 0.0 {
                    Err(DomainError::new("ln", format!("non-positive argument {self}")))
                } else {
                    Ok(<$t>::ln(*self))
                }
            }

            fn sqrt(&self) -> Result<Self, DomainError> {
                if *self < 0.0 {
                    Err(DomainError::new("sqrt", format!("negative argument {self}")))
                } else {
                    Ok(<$t>::sqrt(*self))
                }
            }

            fn try_div(&self, den: &Self) -> Result<Self, DomainError> {
                if *den == 0.0 {
                    Err(DomainError::new("div", "division by zero"))
                } else {
                    Ok(self / den)
                }
            }
        }
    };
}

impl_scalar_for_float!(f32);
impl_scalar_for_float!(f64);
