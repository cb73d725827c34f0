//! Complex vector kernels, sparse storage, dense Hermitian factorizations and
//! Krylov eigenvalue estimation.

mod cg;
mod chebyshev;
mod dense;
mod lanczos;
mod sparse;

pub use cg::{jacobi, pcg, CgOutcome};
pub use chebyshev::{chebyshev_bound, chebyshev_degree_for, Chebyshev};
pub use dense::{dense_generalized_eig, dense_hermitian_eigvals, DenseHermitianFactor, DEFAULT_DENSE_CAP};
pub use lanczos::{lanczos_extreme, LanczosEstimate};
pub use sparse::{BlockAssembler, CsrMatrix};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Sesquilinear product `x^H y`.
#[inline]
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
}

#[inline]
pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += a x`
#[inline]
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: f64, x: &mut [C64]) {
    for v in x.iter_mut() {
        *v *= a;
    }
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Vector with independent standard complex Gaussian-like entries (uniform
/// real and imaginary parts in [-1, 1]).
pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}
