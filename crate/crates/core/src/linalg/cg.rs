//! Preconditioned conjugate gradients for Hermitian positive definite
//! operators.

use super::{axpy, dot, norm, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// final preconditioned residual norm relative to the initial one
    pub relative_residual: f64,
}

/// Solves `A x = b` from `x = 0` until `‖r‖_{P} <= tol ‖b‖_{P}`.
pub fn pcg<FA, FP>(mut apply_a: FA, mut apply_p: FP, b: &[C64], tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    FA: FnMut(&[C64]) -> Vec<C64>,
    FP: FnMut(&[C64]) -> Vec<C64>,
{
    let n = b.len();
    let mut x = vec![C64::new(0.0, 0.0); n];
    if norm(b) == 0.0 {
        return Ok(CgOutcome { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut z = apply_p(&r);
    let mut rz = dot(&r, &z).re;
    let rz0 = rz;
    let mut d = z.clone();
    for k in 0..max_iter {
        if rz <= tol * tol * rz0 {
            return Ok(CgOutcome { x, iterations: k, relative_residual: (rz / rz0).sqrt() });
        }
        let ad = apply_a(&d);
        let dad = dot(&d, &ad).re;
        if !(dad > 0.0) {
            return Err(Error::NotHpd);
        }
        let alpha = rz / dad;
        axpy(C64::new(alpha, 0.0), &d, &mut x);
        axpy(C64::new(-alpha, 0.0), &ad, &mut r);
        z = apply_p(&r);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + *di * beta;
        }
    }
    if rz <= tol * tol * rz0 {
        Ok(CgOutcome { x, iterations: max_iter, relative_residual: (rz / rz0).sqrt() })
    } else {
        Err(Error::MaxIterations { iterations: max_iter, residual: (rz / rz0).sqrt() })
    }
}

/// Inverse of the diagonal of a sparse Hermitian matrix as a preconditioner.
pub fn jacobi(m: &super::CsrMatrix) -> Vec<f64> {
    (0..m.nrows()).map(|i| 1.0 / m.get(i, i).re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_vector, CsrMatrix};
    use rand::SeedableRng;

    #[test]
    fn solves_laplacian_like_system() {
        let n = 60;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, C64::new(2.5, 0.0)));
            if i + 1 < n {
                trip.push((i, i + 1, C64::new(-1.0, 0.3)));
                trip.push((i + 1, i, C64::new(-1.0, -0.3)));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &trip);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let b = random_vector(n, &mut rng);
        let dinv = jacobi(&a);
        let out = pcg(|x| a.mul_vec(x), |r| r.iter().zip(&dinv).map(|(v, d)| v * d).collect(), &b, 1e-12, 500).unwrap();
        let res = crate::linalg::sub(&a.mul_vec(&out.x), &b);
        assert!(norm(&res) < 1e-10 * norm(&b));
    }
}
