//! Floating-point scalar abstraction.
//!
//! All simulation math is written against [`Scalar`], which is implemented for
//! `f32` and `f64`. Random draws that depend on the float width (normal, gamma,
//! uniform) live on the trait so generic code never has to spell out
//! `rand_distr` bounds.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

/// Real number type the simulator is generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for finite input.
    fn lit(x: f64) -> Self;

    /// Converts a count or index.
    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64;

    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from the open interval (0, 1).
    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from Gamma(shape, scale) (shape–scale parameterization, mean = shape·scale).
    fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self;

    /// Natural log of a Gamma(shape, 1) draw, stable for tiny shapes.
    ///
    /// Uses `G(a) = G(a + 1) · U^(1/a)` so the power never has to be evaluated
    /// outside log space.
    fn ln_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: Self) -> Self {
        if shape >= Self::one() {
            Self::gamma(rng, shape, Self::one()).ln()
        } else {
            let boosted = Self::gamma(rng, shape + Self::one(), Self::one()).ln();
            let u = Self::open01(rng);
            boosted + u.ln() / shape
        }
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }

            #[inline]
            fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <Open01 as Distribution<$t>>::sample(&Open01, rng)
            }

            fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
                Gamma::<$t>::new(shape, scale)
                    .expect("gamma parameters must be positive and finite")
                    .sample(rng)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
