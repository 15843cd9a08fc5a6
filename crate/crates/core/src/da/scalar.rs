use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use super::poly::TaylorPoly;
use super::DaError;

/// Arithmetic shared by plain floats and Taylor polynomials, so dynamics,
/// controllers and event functions are written once and run in both modes.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// Zero-order part (the value itself for floats).
    fn constant(&self) -> f64;
    /// A constant living in the same algebra as `self`.
    fn lift(&self, v: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn tanh(&self) -> Self;
    fn sqrt(&self) -> Result<Self, DaError>;
    fn recip(&self) -> Result<Self, DaError>;
    fn is_finite(&self) -> bool;
    /// Magnitude used by step-size control: the zero-order value, or the
    /// largest coefficient when `full` is set.
    fn magnitude(&self, full: bool) -> f64;

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }

    fn div(&self, other: &Self) -> Result<Self, DaError> {
        Ok(self.clone() * other.recip()?)
    }
}

impl Scalar for f64 {
    fn constant(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> Self {
        v
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn sqrt(&self) -> Result<Self, DaError> {
        if *self < 0.0 {
            Err(DaError::Domain { function: "sqrt", constant: *self })
        } else {
            Ok(f64::sqrt(*self))
        }
    }
    fn recip(&self) -> Result<Self, DaError> {
        if *self == 0.0 {
            Err(DaError::Domain { function: "reciprocal", constant: 0.0 })
        } else {
            Ok(1.0 / *self)
        }
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn magnitude(&self, _full: bool) -> f64 {
        self.abs()
    }
}

impl Scalar for TaylorPoly {
    fn constant(&self) -> f64 {
        self.constant_term()
    }
    fn lift(&self, v: f64) -> Self {
        TaylorPoly::constant(self.space(), v)
    }
    fn sin(&self) -> Self {
        TaylorPoly::sin(self)
    }
    fn cos(&self) -> Self {
        TaylorPoly::cos(self)
    }
    fn exp(&self) -> Self {
        TaylorPoly::exp(self)
    }
    fn tanh(&self) -> Self {
        TaylorPoly::tanh(self)
    }
    fn sqrt(&self) -> Result<Self, DaError> {
        TaylorPoly::sqrt(self)
    }
    fn recip(&self) -> Result<Self, DaError> {
        TaylorPoly::recip(self)
    }
    fn is_finite(&self) -> bool {
        TaylorPoly::is_finite(self)
    }
    fn magnitude(&self, full: bool) -> f64 {
        if full {
            self.max_abs()
        } else {
            self.constant_term().abs()
        }
    }
}
