//! Structured-grid linear algebra: stencil operators, geometric multigrid
//! and Krylov solvers over real or complex scalars.

pub mod dense;
pub mod krylov;
pub mod multigrid;
pub mod stencil;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

pub use krylov::{bicgstab, pcg, KrylovOptions, SolveStats};
pub use multigrid::{Hierarchy, MgOptions, VCycle};
pub use stencil::{AxisKind, AxisLayout, Layout, StencilOp};

/// Field scalar for the solvers. Coefficient tensors stay real.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + Default
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + 'static
{
    const IS_REAL: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn from_c64(z: Complex64) -> Self;
    fn to_c64(self) -> Complex64;
    fn conj(self) -> Self;
    fn abs2(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn abs(self) -> f64 {
        self.abs2().sqrt()
    }
}

impl Scalar for f64 {
    const IS_REAL: bool = true;
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn from_c64(z: Complex64) -> Self {
        debug_assert!(z.im == 0.0);
        z.re
    }
    #[inline]
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl Scalar for Complex64 {
    const IS_REAL: bool = false;
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn from_c64(z: Complex64) -> Self {
        z
    }
    #[inline]
    fn to_c64(self) -> Complex64 {
        self
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// `Σ conj(x_i) y_i`.
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a.conj() * b).sum()
}

/// `Σ x_i y_i` without conjugation.
pub fn dot_unconj<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
}

/// `y += a x`.
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Remove the per-component mean of a node-major vector with `m` components.
pub fn project_mean<T: Scalar>(x: &mut [T], m: usize) {
    let n = x.len() / m;
    for a in 0..m {
        let mut s = T::zero();
        for i in 0..n {
            s += x[i * m + a];
        }
        let mean = s.scale(1.0 / n as f64);
        for i in 0..n {
            x[i * m + a] -= mean;
        }
    }
}

/// Per-component means of a node-major vector.
pub fn component_means<T: Scalar>(x: &[T], m: usize) -> Vec<T> {
    let n = x.len() / m;
    (0..m)
        .map(|a| {
            let mut s = T::zero();
            for i in 0..n {
                s += x[i * m + a];
            }
            s.scale(1.0 / n as f64)
        })
        .collect()
}
