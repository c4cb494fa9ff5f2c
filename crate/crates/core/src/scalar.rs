//! Scalar abstraction for the market's taste model.
//!
//! Ledger state is integer-only; floating point appears only when a buyer
//! scores phenotypes. That scoring is written once over [`Scalar`] and used
//! with `f64` in simulations (`f32` works too, e.g. for bulk gallery ranking).

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive};

pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Nearest representable value of an exact rational.
    fn from_ratio(r: &Ratio<i64>) -> Self {
        let n = Self::from_i64(*r.numer()).expect("i64 fits any float");
        let d = Self::from_i64(*r.denom()).expect("i64 fits any float");
        n / d
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("u64 fits any float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
