use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the policy, rewards and objectives are computed in.
///
/// Implemented for `f32` and `f64`. Gradient checks and checkpoints that must
/// round-trip exactly are expected to run in `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, panicking only if the value is not representable
    /// at all (which never happens for the finite constants used in this crate).
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_round_trip() {
        assert_eq!(<f64 as Scalar>::of(0.5), 0.5);
        assert_eq!(<f32 as Scalar>::of(0.25), 0.25f32);
        assert_eq!(Scalar::as_f64(0.5f32), 0.5);
    }
}
