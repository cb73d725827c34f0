//! Dense Hermitian factorizations and eigen-solves backed by nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::C64;
use crate::error::{Error, Result};

/// Default upper bound on the dimension of dense oracle computations.
pub const DEFAULT_DENSE_CAP: usize = 3000;

/// Cholesky factor `A = L L^H` of a dense Hermitian positive definite matrix.
#[derive(Clone, Debug)]
pub struct DenseHermitianFactor {
    chol: Cholesky<C64, Dyn>,
}

impl DenseHermitianFactor {
    pub fn new(a: DMatrix<C64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::NotHpd);
        }
        // nalgebra reads the lower triangle only; a negative or tiny pivot is
        // reported as failure
        let chol = Cholesky::new(a).ok_or(Error::NotHpd)?;
        let l = chol.l_dirty();
        for i in 0..l.nrows() {
            // a negative pivot shows up as an (almost) imaginary square root
            let d = l[(i, i)];
            if !(d.re.is_finite() && d.re > 0.0 && d.im.abs() <= 1e-8 * d.re) {
                return Err(Error::NotHpd);
            }
        }
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = DVector::from_column_slice(b);
        self.chol.solve_mut(&mut x);
        x.as_slice().to_vec()
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let mut x = DVector::from_column_slice(b);
        self.chol.solve_mut(&mut x);
        b.copy_from_slice(x.as_slice());
    }

    /// `log det A`
    pub fn logdet(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
    }

    /// Lower-triangular factor `L`.
    pub fn l(&self) -> DMatrix<C64> {
        self.chol.l()
    }

    pub fn inverse(&self) -> DMatrix<C64> {
        self.chol.inverse()
    }
}

/// Eigenvalues of a dense Hermitian matrix, ascending.
pub fn dense_hermitian_eigvals(a: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Eigenvalues of the Hermitian pencil `A x = λ M x` with `M` HPD, ascending.
///
/// Reduces to the standard problem `L^{-1} A L^{-H}` with `M = L L^H`.
pub fn dense_generalized_eig(a: &DMatrix<C64>, m: &DMatrix<C64>, cap: usize) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n > cap {
        return Err(Error::DimCapExceeded { dim: n, cap });
    }
    if m.nrows() != n || a.ncols() != n || m.ncols() != n {
        return Err(Error::NotHpd);
    }
    let f = DenseHermitianFactor::new(m.clone())?;
    let l = f.l();
    // C = L^{-1} A L^{-H}
    let mut y = a.clone();
    if !l.solve_lower_triangular_mut(&mut y) {
        return Err(Error::NotHpd);
    }
    let mut c = y.adjoint();
    if !l.solve_lower_triangular_mut(&mut c) {
        return Err(Error::NotHpd);
    }
    // symmetrize against roundoff before the Hermitian eigensolver
    let c = (&c + c.adjoint()) * C64::new(0.5, 0.0);
    Ok(dense_hermitian_eigvals(&c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pencil_with_itself_is_unit() {
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(3.0, 0.0)]);
        let ev = dense_generalized_eig(&m, &m, 10).unwrap();
        for e in ev {
            assert!((e - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn diagonal_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(4.0, 0.0), c(1.0, 0.0)]));
        let ev = dense_generalized_eig(&a, &DMatrix::identity(2, 2), 10).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_oracle() {
        // Hermitian 3x3 with M = I: eigenvalues are the roots of the characteristic
        // cubic, solved here by the trigonometric formula.
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[c(2.0, 0.0), c(1.0, 1.0), c(0.0, 0.5), c(1.0, -1.0), c(-1.0, 0.0), c(0.3, 0.0), c(0.0, -0.5), c(0.3, 0.0), c(0.5, 0.0)],
        );
        let tr = 2.0 - 1.0 + 0.5;
        let mut minors = 0.0;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            minors += a[(i, i)].re * a[(j, j)].re - a[(i, j)].norm_sqr();
        }
        let det = a.determinant().re;
        // t^3 - tr t^2 + minors t - det = 0
        let q = tr / 3.0;
        let p = minors - tr * tr / 3.0;
        let r = -2.0 * q * q * q + minors * q - det;
        // depressed cubic s^3 + p s + r = 0 with t = s + q
        let m = 2.0 * (-p / 3.0).sqrt();
        let phi = ((3.0 * r / (p * m)).clamp(-1.0, 1.0)).acos() / 3.0;
        let mut roots: Vec<f64> = (0..3).map(|k| q + m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos()).collect();
        roots.sort_by(|x, y| x.total_cmp(y));
        let ev = dense_generalized_eig(&a, &DMatrix::identity(3, 3), 10).unwrap();
        for (e, r) in ev.iter().zip(&roots) {
            assert!((e - r).abs() < 1e-10, "{ev:?} vs {roots:?}");
        }
    }

    #[test]
    fn rejects_indefinite_mass() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(matches!(dense_generalized_eig(&m, &m, 10), Err(Error::NotHpd)));
        assert!(matches!(dense_generalized_eig(&m, &m, 1), Err(Error::DimCapExceeded { .. })));
    }

    #[test]
    fn factor_solves_and_logdet() {
        let a = DMatrix::from_row_slice(2, 2, &[c(4.0, 0.0), c(1.0, 2.0), c(1.0, -2.0), c(6.0, 0.0)]);
        let f = DenseHermitianFactor::new(a.clone()).unwrap();
        let b = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let x = f.solve(&b);
        let r = &a * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.norm() < 1e-14);
        assert!((f.logdet() - (24.0f64 - 5.0).ln()).abs() < 1e-13);
    }
}
