//! Gauss rules on the unit interval and the reference triangle.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[0, 1]` with `n` points, exact for
/// polynomials of degree `2n - 1`. Nodes are ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        // t decreases with i; weights 2/((1-t^2) P'^2) halved by the map to [0, 1]
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    // exact symmetry about 1/2
    for i in 0..n / 2 {
        let xs = 0.5 * (x[i] + 1.0 - x[n - 1 - i]);
        x[i] = xs;
        x[n - 1 - i] = 1.0 - xs;
        let ws = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = ws;
        w[n - 1 - i] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.5;
    }
    (x, w)
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Quadrature on the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Clone, Debug)]
pub struct TriangleQuadrature {
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleQuadrature {
    /// Collapsed (Duffy) tensor Gauss rule exact for total degree `degree`.
    pub fn new(degree: usize) -> Self {
        let nu = (degree + 2).div_ceil(2);
        let nv = (degree + 1).div_ceil(2).max(1);
        let (xu, wu) = gauss_legendre(nu);
        let (xv, wv) = gauss_legendre(nv);
        let mut points = Vec::with_capacity(nu * nv);
        let mut weights = Vec::with_capacity(nu * nv);
        for (u, a) in xu.iter().zip(&wu) {
            for (v, b) in xv.iter().zip(&wv) {
                points.push([*u, v * (1.0 - u)]);
                weights.push(a * b * (1.0 - u));
            }
        }
        Self { degree, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss rule on `[0, 1]` exact for degree `degree`.
#[derive(Clone, Debug)]
pub struct EdgeQuadrature {
    pub degree: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EdgeQuadrature {
    pub fn new(degree: usize) -> Self {
        let (points, weights) = gauss_legendre((degree + 1).div_ceil(2).max(1));
        Self { degree, points, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn gauss_weights_and_moments() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!(w.iter().all(|&v| v > 0.0));
            for d in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(t, v)| v * t.powi(d as i32)).sum();
                assert!((q - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn triangle_monomials() {
        // ∫ x^a y^b over the reference triangle = a! b! / (a+b+2)!
        for deg in 0..16 {
            let q = TriangleQuadrature::new(deg);
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for a in 0..=deg {
                for b in 0..=deg - a {
                    let num: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!(((num - exact) / exact).abs() < 1e-13, "deg={deg} a={a} b={b}");
                }
            }
        }
    }
}
