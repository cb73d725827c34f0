//! Assembly of the saddle system `[[M_V, B], [B^H, 0]] [v; u] = [q; 0]`.
//!
//! `M_V[i][j] = ⟨B'ψ_j, B'ψ_i⟩_U`, `B[i][j] = ⟨φ_j, B'ψ_i⟩_U`, `q_i = q(ψ_i)`
//! for constrained test functions `ψ_i` and rescaled trial functions `φ_j`.
//! Element matrices are computed in the unconstrained local basis and
//! transformed by the local constraint map, so the global matrices equal
//! `Ξ^H M̂ Ξ` and `Ξ^H B̂` without forming the unconstrained matrices.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::femspace::reference::ref_edge_point;
use crate::femspace::{EdgeQuadrature, ElementGeometry, Tabulation, TestSpace, TrialSpace, TriangleQuadrature};
use crate::linalg::{BlockAssembler, CsrMatrix, C64};
use crate::mesh::Triangulation;
use crate::problem::ProblemData;

/// Cap on the number of Gauss points per edge for oscillatory data.
pub const EDGE_POINT_CAP: usize = 512;

/// Complex Hermitian saddle system.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub m_v: CsrMatrix,
    pub b: CsrMatrix,
    pub q: Vec<C64>,
    /// trial Gram matrix `⟨φ_j, φ_i⟩_U`
    pub m_u: CsrMatrix,
    pub kappa: f64,
}

impl SaddleSystem {
    pub fn n_test(&self) -> usize {
        self.m_v.nrows()
    }

    pub fn n_trial(&self) -> usize {
        self.b.ncols()
    }

    pub fn dim(&self) -> usize {
        self.n_test() + self.n_trial()
    }

    /// `K [v; u]`
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let (v, u) = x.split_at(self.n_test());
        let mut top = self.m_v.mul_vec(v);
        for (t, b) in top.iter_mut().zip(self.b.mul_vec(u)) {
            *t += b;
        }
        let mut out = top;
        out.extend(self.b.adjoint_mul_vec(v));
        out
    }

    pub fn rhs(&self) -> Vec<C64> {
        let mut r = self.q.clone();
        r.resize(self.dim(), C64::new(0.0, 0.0));
        r
    }

    /// Dense `K` (small systems only).
    pub fn to_dense(&self) -> DMatrix<C64> {
        let (nv, n) = (self.n_test(), self.dim());
        let mut k = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for (i, j, v) in self.m_v.triplets() {
            k[(i, j)] = v;
        }
        for (i, j, v) in self.b.triplets() {
            k[(i, nv + j)] = v;
            k[(nv + j, i)] = v.conj();
        }
        k
    }

    /// Writes `M_V`, `B` and `q` in coordinate format (`row col re im`, one
    /// entry per line, zero-based) into `dir`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, m) in [("m_v.coo", &self.m_v), ("b.coo", &self.b), ("m_u.coo", &self.m_u)] {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
            writeln!(f, "% {} {} {}", m.nrows(), m.ncols(), m.nnz())?;
            for (i, j, v) in m.triplets() {
                writeln!(f, "{i} {j} {:e} {:e}", v.re, v.im)?;
            }
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("q.coo"))?);
        writeln!(f, "% {} 1 {}", self.q.len(), self.q.len())?;
        for (i, v) in self.q.iter().enumerate() {
            writeln!(f, "{i} 0 {:e} {:e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Reference tables shared by all elements for one quadrature degree.
#[derive(Clone, Debug)]
pub struct ElementKernel {
    pub kappa: f64,
    pub test_tab: Tabulation,
    /// trial Lagrange values `trial_vals[q][i]` (unscaled)
    pub trial_vals: Vec<Vec<f64>>,
}

impl ElementKernel {
    /// Without a trial space only the test tables are built.
    pub fn new(trial: Option<&TrialSpace>, test: &TestSpace, kappa: f64, degree: usize) -> Self {
        let quad = TriangleQuadrature::new(degree);
        let trial_vals = match trial {
            Some(tr) => quad.points.iter().map(|x| tr.scalar().reference().eval(*x)).collect(),
            None => Vec::new(),
        };
        let test_tab = Tabulation::new(test.lagrange().reference(), Some(test.rt().reference()), quad);
        Self { kappa, test_tab, trial_vals }
    }

    /// Kernel for bilinear forms: exact for all products of degree `2 p̃`.
    pub fn for_forms(trial: Option<&TrialSpace>, test: &TestSpace, kappa: f64) -> Self {
        Self::new(trial, test, kappa, 2 * test.degree() + 2)
    }

    pub fn n_points(&self) -> usize {
        self.test_tab.quad.len()
    }

    /// `w_q |det J|` for element geometry `g`.
    pub fn weights(&self, g: &ElementGeometry) -> Vec<f64> {
        self.test_tab.quad.weights.iter().map(|w| w * g.det.abs()).collect()
    }

    pub fn points(&self, g: &ElementGeometry) -> Vec<[f64; 2]> {
        self.test_tab.quad.points.iter().map(|x| g.map(*x)).collect()
    }

    /// `B'` of the local reference test basis of element `t`:
    /// row `3 q + c` holds component `c` at point `q`, column `a` the basis
    /// function. Components are `(−η − div v/κ, ∇η/κ − v)`.
    pub fn badjoint(&self, mesh: &Triangulation, test: &TestSpace, t: usize) -> DMatrix<f64> {
        let g = ElementGeometry::new(mesh, t);
        let nl = test.lagrange().n_local();
        let nr = test.rt().n_local();
        let nq = self.n_points();
        let k = self.kappa;
        let mut a = DMatrix::<f64>::zeros(3 * nq, nl + nr);
        for q in 0..nq {
            for i in 0..nl {
                let gr = g.grad(self.test_tab.lag_grad[q][i]);
                a[(3 * q, i)] = -self.test_tab.lag[q][i];
                a[(3 * q + 1, i)] = gr[0] / k;
                a[(3 * q + 2, i)] = gr[1] / k;
            }
            for j in 0..nr {
                let v = g.piola(self.test_tab.rt[q][j]);
                let div = self.test_tab.rt_div[q][j] / g.det;
                a[(3 * q, nl + j)] = -div / k;
                a[(3 * q + 1, nl + j)] = -v[0];
                a[(3 * q + 2, nl + j)] = -v[1];
            }
        }
        a
    }

    /// Scaled trial values on element `t`: `(q, i) ↦ s_i φ_i(x_q)`.
    pub fn trial_values(&self, trial: &TrialSpace, t: usize) -> DMatrix<f64> {
        let dofs = trial.scalar().dofs(t);
        DMatrix::from_fn(self.n_points(), dofs.len(), |q, i| self.trial_vals[q][i] * trial.scale()[dofs[i]])
    }
}

/// Local constraint matrix of element `t` as a dense complex matrix.
pub fn local_xi(test: &TestSpace, t: usize) -> DMatrix<C64> {
    let m = test.element_free_dofs(t).len();
    let n = test.lagrange().n_local() + test.rt().n_local();
    DMatrix::from_row_slice(n, m, &test.local_xi(t))
}

fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|v| C64::new(v, 0.0))
}

fn row_major(a: &DMatrix<C64>) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

/// Element contributions `M_K = X^H Â^T W Â X` with `Â = B'` table, made
/// exactly Hermitian.
fn element_gram(kernel: &ElementKernel, mesh: &Triangulation, test: &TestSpace, t: usize) -> (DMatrix<f64>, DMatrix<C64>) {
    let g = ElementGeometry::new(mesh, t);
    let mut a = kernel.badjoint(mesh, test, t);
    for (q, w) in kernel.weights(&g).into_iter().enumerate() {
        let s = w.sqrt();
        for c in 0..3 {
            for col in 0..a.ncols() {
                a[(3 * q + c, col)] *= s;
            }
        }
    }
    let mhat = a.transpose() * &a;
    let x = local_xi(test, t);
    let mk = x.adjoint() * to_complex(&mhat) * &x;
    let herm = (&mk + mk.adjoint()) * C64::new(0.5, 0.0);
    (a, herm)
}

/// Test Gram matrix `M_V` alone (used on coarse levels).
pub fn assemble_test_gram(mesh: &Triangulation, test: &TestSpace, kappa: f64) -> CsrMatrix {
    let kernel = ElementKernel::for_forms(None, test, kappa);
    let n = test.dim();
    let sets: Vec<&[usize]> = (0..mesh.n_triangles()).map(|t| test.element_free_dofs(t)).collect();
    let mut asm = BlockAssembler::new(n, n, sets.iter().map(|s| (*s, *s)));
    for t in 0..mesh.n_triangles() {
        let (_, mk) = element_gram(&kernel, mesh, test, t);
        asm.add(sets[t], sets[t], &row_major(&mk));
    }
    asm.finish(true)
}

/// Trial Gram matrix `M^U` (three identical scalar blocks).
pub fn assemble_trial_gram(mesh: &Triangulation, trial: &TrialSpace) -> CsrMatrix {
    let p = trial.degree();
    let quad = TriangleQuadrature::new(2 * p);
    let lref = trial.scalar().reference();
    let vals: Vec<Vec<f64>> = quad.points.iter().map(|x| lref.eval(*x)).collect();
    let ns = trial.n_scalar();
    let blocks: Vec<Vec<usize>> = (0..mesh.n_triangles())
        .flat_map(|t| {
            let d = trial.scalar().dofs(t);
            (0..3).map(move |c| d.iter().map(|&i| c * ns + i).collect::<Vec<_>>())
        })
        .collect();
    let mut asm = BlockAssembler::new(3 * ns, 3 * ns, blocks.iter().map(|b| (&b[..], &b[..])));
    for t in 0..mesh.n_triangles() {
        let det = ElementGeometry::new(mesh, t).det.abs();
        let d = trial.scalar().dofs(t);
        let nl = d.len();
        let mut loc = vec![C64::new(0.0, 0.0); nl * nl];
        for i in 0..nl {
            for j in 0..nl {
                let s: f64 = quad.weights.iter().zip(&vals).map(|(w, v)| w * v[i] * v[j]).sum();
                loc[i * nl + j] = C64::new(s * det * trial.scale()[d[i]] * trial.scale()[d[j]], 0.0);
            }
        }
        for c in 0..3 {
            let b = &blocks[3 * t + c];
            asm.add(b, b, &loc);
        }
    }
    asm.finish(true)
}

/// Trial dof indices (all three components) of element `t`.
pub fn trial_element_dofs(trial: &TrialSpace, t: usize) -> Vec<usize> {
    let ns = trial.n_scalar();
    let d = trial.scalar().dofs(t);
    (0..3).flat_map(|c| d.iter().map(move |&i| c * ns + i)).collect()
}

/// Unconstrained load vector `q̂`: boundary terms `∫ g η̄` on Neumann and
/// Robin edges and `−∫ g_D v̄·n` on Dirichlet edges, integrated with Gauss
/// rules whose point count doubles until the local vector changes by less
/// than `1e-12` (relative).
pub fn assemble_load_unconstrained(mesh: &Triangulation, test: &TestSpace, data: &ProblemData) -> Result<Vec<C64>> {
    use crate::mesh::BoundaryTag;
    let nl_glob = test.lagrange().n_dofs();
    let mut qhat = vec![C64::new(0.0, 0.0); test.n_unconstrained()];
    let lref = test.lagrange().reference();
    let rref = test.rt().reference();
    let p = test.degree();
    for e in 0..mesh.n_edges() {
        let Some(tag) = mesh.boundary_tag(e) else { continue };
        let t = mesh.edge_triangles(e)[0].expect("boundary edge has a triangle");
        let i = (0..3).find(|&i| mesh.triangle_edges(t)[i] == e).expect("edge of its triangle");
        let g = ElementGeometry::new(mesh, t);
        let tri = mesh.coords(t);
        let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n_out = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
        let local = |npts: usize| -> Vec<C64> {
            let (xs, ws) = crate::femspace::gauss_legendre(npts);
            match tag {
                BoundaryTag::Dirichlet => {
                    let mut out = vec![C64::new(0.0, 0.0); rref.n_local()];
                    for (s, w) in xs.iter().zip(&ws) {
                        let xh = ref_edge_point(i, *s);
                        let gd = data.boundary(tag, g.map(xh), n_out);
                        for (j, v) in rref.eval(xh).into_iter().enumerate() {
                            let vp = g.piola(v);
                            let vn = vp[0] * n_out[0] + vp[1] * n_out[1];
                            out[j] -= gd * (w * len * vn);
                        }
                    }
                    out
                }
                BoundaryTag::Neumann | BoundaryTag::Robin => {
                    let mut out = vec![C64::new(0.0, 0.0); lref.n_local()];
                    for (s, w) in xs.iter().zip(&ws) {
                        let xh = ref_edge_point(i, *s);
                        let gv = data.boundary(tag, g.map(xh), n_out);
                        for (j, v) in lref.eval(xh).into_iter().enumerate() {
                            out[j] += gv * (w * len * v);
                        }
                    }
                    out
                }
            }
        };
        let mut npts = EdgeQuadrature::new(2 * p + 2).points.len();
        let mut prev = local(npts);
        loop {
            if 2 * npts > EDGE_POINT_CAP {
                return Err(Error::QuadratureNonConvergent { element: t, cap: EDGE_POINT_CAP });
            }
            npts *= 2;
            let next = local(npts);
            let scale = next.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let diff = next.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prev = next;
            if diff <= 1e-12 * scale || scale == 0.0 {
                break;
            }
        }
        match tag {
            BoundaryTag::Dirichlet => {
                let signs = test.rt().signs(t);
                for (j, &d) in test.rt().dofs(t).iter().enumerate() {
                    qhat[nl_glob + d] += prev[j] * signs[j];
                }
            }
            _ => {
                for (j, &d) in test.lagrange().dofs(t).iter().enumerate() {
                    qhat[d] += prev[j];
                }
            }
        }
    }
    Ok(qhat)
}

/// Assembles the full saddle system on one mesh.
pub fn assemble_system(mesh: &Triangulation, trial: &TrialSpace, test: &TestSpace, data: &ProblemData) -> Result<SaddleSystem> {
    check_spaces(mesh, trial, test)?;
    let kernel = ElementKernel::for_forms(Some(trial), test, data.kappa);
    let (nv, nu) = (test.dim(), trial.dim());
    let sets: Vec<&[usize]> = (0..mesh.n_triangles()).map(|t| test.element_free_dofs(t)).collect();
    let tdofs: Vec<Vec<usize>> = (0..mesh.n_triangles()).map(|t| trial_element_dofs(trial, t)).collect();
    let mut masm = BlockAssembler::new(nv, nv, sets.iter().map(|s| (*s, *s)));
    let mut basm = BlockAssembler::new(nv, nu, sets.iter().zip(&tdofs).map(|(s, d)| (*s, &d[..])));
    for t in 0..mesh.n_triangles() {
        let (a, mk) = element_gram(&kernel, mesh, test, t);
        masm.add(sets[t], sets[t], &row_major(&mk));
        // trial table with the same weights: C[(q, c), (c, i)] = sqrt(w) s_i φ_i
        let g = ElementGeometry::new(mesh, t);
        let tv = kernel.trial_values(trial, t);
        let ntl = tv.ncols();
        let mut c = DMatrix::<f64>::zeros(a.nrows(), 3 * ntl);
        for (q, w) in kernel.weights(&g).into_iter().enumerate() {
            let s = w.sqrt();
            for comp in 0..3 {
                for i in 0..ntl {
                    c[(3 * q + comp, comp * ntl + i)] = s * tv[(q, i)];
                }
            }
        }
        let bhat = a.transpose() * c;
        let x = local_xi(test, t);
        let bk = x.adjoint() * to_complex(&bhat);
        basm.add(sets[t], &tdofs[t], &row_major(&bk));
    }
    let qhat = assemble_load_unconstrained(mesh, test, data)?;
    let q = test.xi().adjoint_mul_vec(&qhat);
    Ok(SaddleSystem { m_v: masm.finish(true), b: basm.finish(false), q, m_u: assemble_trial_gram(mesh, trial), kappa: data.kappa })
}

/// Local values `B'v` of a free test coefficient vector on element `t` at
/// the kernel's quadrature points (row `3 q + c`).
pub fn local_badjoint_values(kernel: &ElementKernel, mesh: &Triangulation, test: &TestSpace, t: usize, v: &[C64]) -> Vec<C64> {
    let a = kernel.badjoint(mesh, test, t);
    let x = local_xi(test, t);
    let local: Vec<C64> = test.element_free_dofs(t).iter().map(|&f| v[f]).collect();
    let coeff = x * nalgebra::DVector::from_vec(local);
    (to_complex(&a) * coeff).iter().copied().collect()
}

/// Squared element indicators `‖B'v‖²_{L2(K)}` of a free test coefficient
/// vector. They sum to `v^H M_V v`.
pub fn element_indicators(mesh: &Triangulation, test: &TestSpace, kappa: f64, v: &[C64]) -> Vec<f64> {
    let kernel = ElementKernel::for_forms(None, test, kappa);
    (0..mesh.n_triangles())
        .map(|t| {
            let w = kernel.weights(&ElementGeometry::new(mesh, t));
            let vals = local_badjoint_values(&kernel, mesh, test, t, v);
            w.iter().enumerate().map(|(q, wq)| wq * (0..3).map(|c| vals[3 * q + c].norm_sqr()).sum::<f64>()).sum()
        })
        .collect()
}

fn check_spaces(mesh: &Triangulation, trial: &TrialSpace, test: &TestSpace) -> Result<()> {
    let nt = mesh.n_triangles();
    let ok = trial.scalar().dofs(nt.saturating_sub(1)).len() == trial.scalar().n_local()
        && test.lagrange().n_dofs() == crate::femspace::LagrangeSpace::new(mesh, test.degree()).n_dofs()
        && trial.scalar().n_dofs() == crate::femspace::LagrangeSpace::new(mesh, trial.degree()).n_dofs();
    if ok {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}
