//! Floating-point abstraction for the geometric core.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the kinematic and geometric routines are written against.
///
/// Implemented for `f32` and `f64`; the runtime pipeline uses `f64`
/// through the aliases at the crate root.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
