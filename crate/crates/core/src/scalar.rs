//! Numeric abstractions shared by the pipeline.
//!
//! Continuous computations (normalization, histograms, eigenvectors) are
//! written against [`Scalar`], which covers `f32` and `f64`. Spanning-tree
//! construction only compares and adds edge weights, so it is written against
//! the weaker [`Weight`] bound and also runs on exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the type cannot hold it.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Edge weight of a similarity graph. Anything ordered with ring arithmetic.
pub trait Weight: Copy + PartialOrd + Num + Neg<Output = Self> + Debug + Send + Sync {}

impl<T> Weight for T where T: Copy + PartialOrd + Num + Neg<Output = T> + Debug + Send + Sync {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
