use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point type the analytical formulas are evaluated in.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("representable")
    }

    fn of_f64(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
