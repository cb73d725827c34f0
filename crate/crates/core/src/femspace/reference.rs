//! Reference Lagrange and Raviart–Thomas elements on `(0,0), (1,0), (0,1)`.
//!
//! Both bases are obtained by inverting the generalized Vandermonde matrix of
//! the degrees of freedom applied to a monomial spanning set.

use nalgebra::DMatrix;

use super::quadrature::{gauss_legendre, TriangleQuadrature};

pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Point at parameter `t` on local edge `i` (from vertex `i+1` to `i+2`).
pub fn ref_edge_point(i: usize, t: f64) -> [f64; 2] {
    let a = REF_VERTICES[(i + 1) % 3];
    let b = REF_VERTICES[(i + 2) % 3];
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Unnormalized outward normal `|e| n` of local edge `i`.
pub fn ref_edge_normal(i: usize) -> [f64; 2] {
    let a = REF_VERTICES[(i + 1) % 3];
    let b = REF_VERTICES[(i + 2) % 3];
    [b[1] - a[1], -(b[0] - a[0])]
}

/// Monomials are centered at the barycenter for conditioning.
const CENTER: f64 = 1.0 / 3.0;

/// Table `pw[k] = (x - 1/3)^k` for `k <= p + 1`.
fn powers(x: f64, p: usize) -> Vec<f64> {
    let x = x - CENTER;
    let mut v = Vec::with_capacity(p + 2);
    let mut c = 1.0;
    for _ in 0..p + 2 {
        v.push(c);
        c *= x;
    }
    v
}

fn monomial_exponents(p: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for d in 0..=p {
        for b in 0..=d {
            e.push((d - b, b));
        }
    }
    e
}

fn invert(mut d: DMatrix<f64>, what: &str) -> DMatrix<f64> {
    let n = d.nrows();
    d = d.try_inverse().unwrap_or_else(|| panic!("{what}: degrees of freedom are not unisolvent"));
    debug_assert_eq!(d.nrows(), n);
    d
}

/// Lagrange element of degree `p >= 1` with equispaced nodes: the three
/// vertices, then `p - 1` nodes per local edge in local direction, then the
/// interior nodes.
#[derive(Clone, Debug)]
pub struct LagrangeRef {
    p: usize,
    nodes: Vec<[f64; 2]>,
    exps: Vec<(usize, usize)>,
    /// column `j` holds the monomial coefficients of basis function `j`
    coef: DMatrix<f64>,
}

impl LagrangeRef {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1, "Lagrange degree must be at least 1");
        let pf = p as f64;
        let mut nodes = REF_VERTICES.to_vec();
        for i in 0..3 {
            for k in 1..p {
                nodes.push(ref_edge_point(i, k as f64 / pf));
            }
        }
        for j in 1..p {
            for i in 1..p - j {
                nodes.push([i as f64 / pf, j as f64 / pf]);
            }
        }
        let exps = monomial_exponents(p);
        let n = exps.len();
        assert_eq!(nodes.len(), n);
        let d = DMatrix::from_fn(n, n, |r, c| {
            let (a, b) = exps[c];
            powers(nodes[r][0], p)[a] * powers(nodes[r][1], p)[b]
        });
        let coef = invert(d, "Lagrange");
        Self { p, nodes, exps, coef }
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn n_local(&self) -> usize {
        self.exps.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Local index of the `k`-th interior node of edge `i` (local direction).
    pub fn edge_node(&self, i: usize, k: usize) -> usize {
        3 + i * (self.p - 1) + k
    }

    pub fn n_interior(&self) -> usize {
        (self.p - 1) * (self.p.saturating_sub(2)) / 2
    }

    pub fn interior_start(&self) -> usize {
        3 + 3 * (self.p - 1)
    }

    /// Basis values at `x`.
    pub fn eval(&self, x: [f64; 2]) -> Vec<f64> {
        let (px, py) = (powers(x[0], self.p), powers(x[1], self.p));
        let m: Vec<f64> = self.exps.iter().map(|&(a, b)| px[a] * py[b]).collect();
        (0..self.n_local()).map(|j| m.iter().enumerate().map(|(r, v)| v * self.coef[(r, j)]).sum()).collect()
    }

    /// Basis gradients at `x`.
    pub fn grad(&self, x: [f64; 2]) -> Vec<[f64; 2]> {
        let (px, py) = (powers(x[0], self.p), powers(x[1], self.p));
        let mx: Vec<f64> = self.exps.iter().map(|&(a, b)| if a == 0 { 0.0 } else { a as f64 * px[a - 1] * py[b] }).collect();
        let my: Vec<f64> = self.exps.iter().map(|&(a, b)| if b == 0 { 0.0 } else { b as f64 * px[a] * py[b - 1] }).collect();
        (0..self.n_local())
            .map(|j| {
                let mut g = [0.0; 2];
                for r in 0..self.exps.len() {
                    g[0] += mx[r] * self.coef[(r, j)];
                    g[1] += my[r] * self.coef[(r, j)];
                }
                g
            })
            .collect()
    }

    /// Local indices of the `p + 1` nodes on local edge `i`, ordered start
    /// vertex, interior nodes, end vertex.
    pub fn edge_trace_dofs(&self, i: usize) -> Vec<usize> {
        let mut d = vec![(i + 1) % 3];
        d.extend((0..self.p - 1).map(|k| self.edge_node(i, k)));
        d.push((i + 2) % 3);
        d
    }
}

#[derive(Clone, Copy, Debug)]
enum RtSpan {
    /// `(x^a y^b, 0)`
    X(usize, usize),
    /// `(0, x^a y^b)`
    Y(usize, usize),
    /// `x^a y^b (x, y)` with `a + b = p` (all in centered coordinates)
    R(usize, usize),
}

/// Raviart–Thomas element of index `p` (normal traces of degree `p`,
/// dimension `(p+1)(p+3)`). The first `3(p+1)` degrees of freedom are normal
/// fluxes `v · n |e|` at the Gauss points of each local edge (local
/// direction); the rest are moments against `P_{p-1}^2`.
#[derive(Clone, Debug)]
pub struct RtRef {
    p: usize,
    span: Vec<RtSpan>,
    gauss: Vec<f64>,
    moments: Vec<Moment>,
    coef: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Moment {
    a: usize,
    b: usize,
    comp: usize,
    scale: f64,
}

impl RtRef {
    pub fn new(p: usize) -> Self {
        let mut span = Vec::new();
        for (a, b) in monomial_exponents(p) {
            span.push(RtSpan::X(a, b));
            span.push(RtSpan::Y(a, b));
        }
        for b in 0..=p {
            span.push(RtSpan::R(p - b, b));
        }
        let n = span.len();
        assert_eq!(n, (p + 1) * (p + 3));
        let (gauss, _) = gauss_legendre(p + 1);
        let mut d = DMatrix::<f64>::zeros(n, n);
        let mut row = 0;
        for i in 0..3 {
            let nrm = ref_edge_normal(i);
            for &t in &gauss {
                let x = ref_edge_point(i, t);
                for (c, s) in span.iter().enumerate() {
                    let v = span_value(*s, x, p);
                    d[(row, c)] = v[0] * nrm[0] + v[1] * nrm[1];
                }
                row += 1;
            }
        }
        // moments against centered monomials, each functional normalized so
        // that its row has unit maximum (keeps the dual basis well scaled)
        let mut moments = Vec::new();
        if p >= 1 {
            let q = TriangleQuadrature::new(2 * p + 1);
            for (a, b) in monomial_exponents(p - 1) {
                for comp in 0..2 {
                    for (c, s) in span.iter().enumerate() {
                        d[(row, c)] =
                            q.points.iter().zip(&q.weights).map(|(x, w)| w * span_value(*s, *x, p)[comp] * powers(x[0], p)[a] * powers(x[1], p)[b]).sum();
                    }
                    let mx = d.row(row).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    for c in 0..n {
                        d[(row, c)] /= mx;
                    }
                    moments.push(Moment { a, b, comp, scale: 1.0 / mx });
                    row += 1;
                }
            }
        }
        assert_eq!(row, n);
        let coef = invert(d, "Raviart-Thomas");
        Self { p, span, gauss, moments, coef }
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn n_local(&self) -> usize {
        self.span.len()
    }

    /// Gauss parameters of the edge degrees of freedom on `[0, 1]`.
    pub fn edge_parameters(&self) -> &[f64] {
        &self.gauss
    }

    pub fn edge_dof(&self, i: usize, k: usize) -> usize {
        i * (self.p + 1) + k
    }

    pub fn interior_start(&self) -> usize {
        3 * (self.p + 1)
    }

    /// Weight `q_m(x̂)` of the `m`-th interior functional `v̂ ↦ ∫ v̂ · q_m`.
    pub fn moment_weight(&self, m: usize, x: [f64; 2]) -> [f64; 2] {
        let mo = self.moments[m];
        let w = mo.scale * powers(x[0], self.p)[mo.a] * powers(x[1], self.p)[mo.b];
        let mut out = [0.0; 2];
        out[mo.comp] = w;
        out
    }

    /// Basis values at `x`.
    pub fn eval(&self, x: [f64; 2]) -> Vec<[f64; 2]> {
        let s: Vec<[f64; 2]> = self.span.iter().map(|s| span_value(*s, x, self.p)).collect();
        (0..self.n_local())
            .map(|j| {
                let mut v = [0.0; 2];
                for (r, sv) in s.iter().enumerate() {
                    v[0] += sv[0] * self.coef[(r, j)];
                    v[1] += sv[1] * self.coef[(r, j)];
                }
                v
            })
            .collect()
    }

    /// Basis divergences at `x`.
    pub fn div(&self, x: [f64; 2]) -> Vec<f64> {
        let s: Vec<f64> = self.span.iter().map(|s| span_div(*s, x, self.p)).collect();
        (0..self.n_local()).map(|j| s.iter().enumerate().map(|(r, v)| v * self.coef[(r, j)]).sum()).collect()
    }
}

fn span_value(s: RtSpan, x: [f64; 2], p: usize) -> [f64; 2] {
    let (px, py) = (powers(x[0], p + 1), powers(x[1], p + 1));
    match s {
        RtSpan::X(a, b) => [px[a] * py[b], 0.0],
        RtSpan::Y(a, b) => [0.0, px[a] * py[b]],
        RtSpan::R(a, b) => [px[a + 1] * py[b], px[a] * py[b + 1]],
    }
}

fn span_div(s: RtSpan, x: [f64; 2], p: usize) -> f64 {
    let (px, py) = (powers(x[0], p + 1), powers(x[1], p + 1));
    match s {
        RtSpan::X(a, b) => {
            if a == 0 {
                0.0
            } else {
                a as f64 * px[a - 1] * py[b]
            }
        }
        RtSpan::Y(a, b) => {
            if b == 0 {
                0.0
            } else {
                b as f64 * px[a] * py[b - 1]
            }
        }
        RtSpan::R(a, b) => (a + b + 2) as f64 * px[a] * py[b],
    }
}

/// Reference basis data tabulated at the points of a triangle rule.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub quad: TriangleQuadrature,
    /// `lag[q][i]`
    pub lag: Vec<Vec<f64>>,
    pub lag_grad: Vec<Vec<[f64; 2]>>,
    pub rt: Vec<Vec<[f64; 2]>>,
    pub rt_div: Vec<Vec<f64>>,
}

impl Tabulation {
    pub fn new(lag: &LagrangeRef, rt: Option<&RtRef>, quad: TriangleQuadrature) -> Self {
        let pts = quad.points.clone();
        Self {
            lag: pts.iter().map(|x| lag.eval(*x)).collect(),
            lag_grad: pts.iter().map(|x| lag.grad(*x)).collect(),
            rt: rt.map_or_else(Vec::new, |r| pts.iter().map(|x| r.eval(*x)).collect()),
            rt_div: rt.map_or_else(Vec::new, |r| pts.iter().map(|x| r.div(*x)).collect()),
            quad,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_nodal_and_partition_of_unity() {
        for p in 1..=6 {
            let l = LagrangeRef::new(p);
            assert_eq!(l.n_local(), (p + 1) * (p + 2) / 2);
            assert_eq!(l.interior_start() + l.n_interior(), l.n_local());
            for (i, x) in l.nodes().iter().enumerate() {
                let v = l.eval(*x);
                for (j, vj) in v.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - e).abs() < 1e-10, "p={p}");
                }
            }
            let x = [0.21, 0.37];
            let s: f64 = l.eval(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-11);
            let g = l.grad(x).iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
            assert!(g[0].abs() < 1e-9 && g[1].abs() < 1e-9);
            // sum_i x_i phi_i = x reproduces linears
            let lin: f64 = l.eval(x).iter().zip(l.nodes()).map(|(v, n)| v * n[0]).sum();
            assert!((lin - x[0]).abs() < 1e-11);
        }
    }

    #[test]
    fn lagrange_gradient_matches_finite_difference() {
        let l = LagrangeRef::new(4);
        let x = [0.3, 0.2];
        let h = 1e-6;
        let g = l.grad(x);
        let fx = l.eval([x[0] + h, x[1]]);
        let bx = l.eval([x[0] - h, x[1]]);
        let fy = l.eval([x[0], x[1] + h]);
        let by = l.eval([x[0], x[1] - h]);
        for j in 0..l.n_local() {
            assert!((g[j][0] - (fx[j] - bx[j]) / (2.0 * h)).abs() < 1e-6);
            assert!((g[j][1] - (fy[j] - by[j]) / (2.0 * h)).abs() < 1e-6);
        }
    }

    #[test]
    fn rt_dual_basis() {
        for p in 0..=5 {
            let r = RtRef::new(p);
            assert_eq!(r.n_local(), (p + 1) * (p + 3));
            // edge fluxes of the basis are Kronecker deltas
            for i in 0..3 {
                let nrm = ref_edge_normal(i);
                for (k, &t) in r.edge_parameters().iter().enumerate() {
                    let v = r.eval(ref_edge_point(i, t));
                    for (j, vj) in v.iter().enumerate() {
                        let f = vj[0] * nrm[0] + vj[1] * nrm[1];
                        let e = if j == r.edge_dof(i, k) { 1.0 } else { 0.0 };
                        assert!((f - e).abs() < 1e-9, "p={p} i={i} k={k} j={j}: {f}");
                    }
                }
            }
        }
    }

    #[test]
    fn rt_normal_trace_has_degree_p() {
        // the normal flux on an edge is a polynomial of degree p in t: it is
        // reproduced by its Lagrange interpolant at the p + 1 Gauss points
        let p = 3;
        let r = RtRef::new(p);
        let nrm = ref_edge_normal(0);
        let g = r.edge_parameters().to_vec();
        let flux = |t: f64| -> Vec<f64> { r.eval(ref_edge_point(0, t)).iter().map(|v| v[0] * nrm[0] + v[1] * nrm[1]).collect() };
        let t = 0.123;
        let vals = flux(t);
        for j in 0..r.n_local() {
            let interp: f64 = (0..=p)
                .map(|k| {
                    let lk: f64 = (0..=p).filter(|&m| m != k).map(|m| (t - g[m]) / (g[k] - g[m])).product();
                    flux(g[k])[j] * lk
                })
                .sum();
            assert!((interp - vals[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn rt_divergence_matches_finite_difference() {
        let r = RtRef::new(2);
        let x = [0.25, 0.4];
        let h = 1e-6;
        let d = r.div(x);
        let fx = r.eval([x[0] + h, x[1]]);
        let bx = r.eval([x[0] - h, x[1]]);
        let fy = r.eval([x[0], x[1] + h]);
        let by = r.eval([x[0], x[1] - h]);
        for j in 0..r.n_local() {
            let fd = (fx[j][0] - bx[j][0] + fy[j][1] - by[j][1]) / (2.0 * h);
            assert!((d[j] - fd).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }
}
