//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the transport and diffusion solvers are generic over.
///
/// Implemented for `f32` and `f64`. Sampling and statistics draw in `f64`
/// and convert through [`Real::lit`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this type.
    fn lit(x: f64) -> Self;

    /// Lossy conversion back to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
}

/// |new - old| relative to the larger magnitude; zero when both are zero.
#[inline]
pub(crate) fn relative_change<T: Real>(new: T, old: T) -> T {
    let scale = new.abs().max(old.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (new - old).abs() / scale
    }
}

/// Source-iteration stopping test on the history of max relative changes.
///
/// The last change must be below `tol`, and so must the remaining error it
/// implies, `r·ρ/(1−ρ)` with ρ the ratio of the last two changes. With a
/// spectral radius near one a small change alone does not mean a small error.
pub(crate) fn iteration_converged(history: &[f64], tol: f64) -> bool {
    let Some(&r) = history.last() else {
        return false;
    };
    if r == 0.0 {
        return true;
    }
    if !(r < tol) || history.len() < 2 {
        return false;
    }
    let rho = r / history[history.len() - 2];
    rho < 1.0 && r * rho / (1.0 - rho) < tol
}
