//! Fixed-degree Chebyshev polynomial approximations of an inverse.

use super::{C64, ZERO};
use crate::error::{Error, Result};

/// Chebyshev polynomial of the first kind evaluated at `x ≥ 1`.
fn cheb_t(m: usize, x: f64) -> f64 {
    (m as f64 * x.acosh()).cosh()
}

/// Deviation bound `ε_k` such that a degree-`k` Chebyshev approximation `q`
/// of the inverse on `[a, b]` satisfies `|1 - t q(t)| ≤ ε_k` there.
pub fn chebyshev_bound(a: f64, b: f64, k: usize) -> f64 {
    1.0 / cheb_t(k + 1, (b + a) / (b - a))
}

/// Smallest degree whose deviation bound does not exceed `target`.
pub fn chebyshev_degree_for(a: f64, b: f64, target: f64) -> usize {
    let mut k = 0;
    while chebyshev_bound(a, b, k) > target && k < 10_000 {
        k += 1;
    }
    k
}

/// `q(A) r` with `q` the degree-`k` polynomial of the Chebyshev iteration on
/// `[a, b]` started from zero. The map is linear in `r` and independent of it,
/// so it is a valid fixed preconditioner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chebyshev {
    pub a: f64,
    pub b: f64,
    pub degree: usize,
}

impl Chebyshev {
    pub fn new(a: f64, b: f64, degree: usize) -> Result<Self> {
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Err(Error::BadInterval { a, b });
        }
        Ok(Self { a, b, degree })
    }

    pub fn epsilon(&self) -> f64 {
        chebyshev_bound(self.a, self.b, self.degree)
    }

    pub fn apply<F>(&self, mut apply_a: F, rhs: &[C64]) -> Vec<C64>
    where
        F: FnMut(&[C64]) -> Vec<C64>,
    {
        let theta = 0.5 * (self.a + self.b);
        let delta = 0.5 * (self.b - self.a);
        let sigma = theta / delta;
        let mut rho = 1.0 / sigma;
        let mut x = vec![ZERO; rhs.len()];
        let mut r = rhs.to_vec();
        let mut d: Vec<C64> = r.iter().map(|v| v / theta).collect();
        for it in 0..=self.degree {
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
            if it == self.degree {
                break;
            }
            let ad = apply_a(&d);
            for (ri, adi) in r.iter_mut().zip(&ad) {
                *ri -= adi;
            }
            let rho_next = 1.0 / (2.0 * sigma - rho);
            for (di, ri) in d.iter_mut().zip(&r) {
                *di = *di * (rho_next * rho) + ri * (2.0 * rho_next / delta);
            }
            rho = rho_next;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_apply(d: &[f64]) -> impl FnMut(&[C64]) -> Vec<C64> + '_ {
        move |x: &[C64]| x.iter().zip(d).map(|(v, s)| v * *s).collect()
    }

    #[test]
    fn degree_zero_is_richardson() {
        let ch = Chebyshev::new(1.0, 3.0, 0).unwrap();
        let d = [1.0, 2.0, 3.0];
        let y = ch.apply(diag_apply(&d), &[C64::new(1.0, 0.0); 3]);
        for v in y {
            assert!((v.re - 0.5).abs() < 1e-15);
        }
        assert!((ch.epsilon() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scalar_operator_inverted_exactly() {
        let c = 2.5;
        let ch = Chebyshev::new(0.95 * c, 1.05 * c, 0).unwrap();
        let d = [c; 4];
        let rhs: Vec<C64> = (0..4).map(|k| C64::new(k as f64, 1.0)).collect();
        let y = ch.apply(diag_apply(&d), &rhs);
        for (yi, ri) in y.iter().zip(&rhs) {
            assert!((yi * c - ri).norm() < 1e-14);
        }
    }

    #[test]
    fn spectrum_within_bound() {
        let d: Vec<f64> = (0..50).map(|k| 1.0 + 9.0 * k as f64 / 49.0).collect();
        let k = chebyshev_degree_for(1.0, 10.0, 0.1);
        let ch = Chebyshev::new(1.0, 10.0, k).unwrap();
        assert!(ch.epsilon() <= 0.1);
        if k > 0 {
            assert!(chebyshev_bound(1.0, 10.0, k - 1) > 0.1);
        }
        // the operator q(A) A is diagonal here; read it off column by column
        for i in 0..50 {
            let mut e = vec![ZERO; 50];
            e[i] = C64::new(1.0, 0.0);
            let y = ch.apply(diag_apply(&d), &e);
            let lam = y[i].re * d[i];
            assert!((lam - 1.0).abs() <= ch.epsilon() + 1e-12, "{lam}");
        }
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(Chebyshev::new(0.0, 1.0, 2).is_err());
        assert!(Chebyshev::new(2.0, 1.0, 2).is_err());
    }
}
