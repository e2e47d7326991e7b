//! Scalar abstraction shared by the predictor, metric and boosting code.
//!
//! Everything that touches predictions is written against [`Scalar`] so the
//! same code runs on `f64`, `f32`, or an exact rational type.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num + Signed + PartialOrd + Clone + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Converts an `f64` constant. Panics only for non-finite input.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }

    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn clip01(self) -> Self {
        if self < Self::zero() {
            Self::zero()
        } else if self > Self::one() {
            Self::one()
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Num + Signed + PartialOrd + Clone + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation with a fixed split order, so results are
/// bit-stable regardless of how the caller schedules work.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    if values.len() <= PAIRWISE_BLOCK {
        values.iter().cloned().fold(T::zero(), |acc, v| acc + v)
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Pairwise sum of `f(i)` for `i` in `0..len`.
pub fn pairwise_sum_by<T: Scalar>(len: usize, f: &impl Fn(usize) -> T) -> T {
    fn go<T: Scalar>(lo: usize, hi: usize, f: &impl Fn(usize) -> T) -> T {
        if hi - lo <= PAIRWISE_BLOCK {
            (lo..hi).fold(T::zero(), |acc, i| acc + f(i))
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    go(0, len, f)
}

pub fn sign<T: Scalar>(x: &T) -> T {
    if *x > T::zero() {
        T::one()
    } else if *x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn pairwise_matches_naive_on_exact_type() {
        let xs: Vec<Ratio<i64>> = (1..=20).map(|i| Ratio::new(1, i)).collect();
        let naive = xs.iter().cloned().fold(Ratio::from_integer(0), |a, b| a + b);
        assert_eq!(pairwise_sum(&xs), naive);
        assert_eq!(pairwise_sum_by(xs.len(), &|i| xs[i]), naive);
    }

    #[test]
    fn clip() {
        assert_eq!(1.3f64.clip01(), 1.0);
        assert_eq!((-0.1f64).clip01(), 0.0);
        assert_eq!(0.25f32.clip01(), 0.25);
    }
}
