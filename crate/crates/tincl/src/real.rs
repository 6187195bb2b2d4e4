//! Scalar abstraction for the numeric core.
//!
//! All math in this crate is written against [`Real`] so the same code runs
//! in `f32` or `f64`. The crate-root aliases fix `f64`, which is what the
//! file formats and the training pipeline use.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::distributions::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub trait Real:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + SampleUniform
    + Sum
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Draw from Exponential(mean 1).
    fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn from_f64(x: f64) -> Self {
                x as $t
            }

            fn to_f64(self) -> f64 {
                self as f64
            }

            fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
