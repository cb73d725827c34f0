//! Transfer between nested spaces on a coarse mesh and its refinement.
//!
//! Every fine degree of freedom is a functional (nodal value, edge flux at a
//! Gauss point, interior moment) that can be applied to a coarse basis
//! function, which lives on the parent element. This gives the exact
//! representation of coarse functions in the fine basis.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, C64};
use crate::mesh::Triangulation;

use super::dofs::ElementGeometry;
use super::quadrature::TriangleQuadrature;
use super::reference::ref_edge_point;
use super::spaces::{TestSpace, TrialSpace};
use super::LagrangeSpace;

const DROP: f64 = 1e-14;

fn parent_of(fine: &Triangulation, t: usize, n_coarse: usize) -> Result<usize> {
    match fine.parent(t) {
        Some(p) if p < n_coarse => Ok(p),
        _ => Err(Error::NonNestedMeshes),
    }
}

/// Scalar Lagrange transfer (fine dofs × coarse dofs).
fn lagrange_transfer(coarse: &Triangulation, fine: &Triangulation, lc: &LagrangeSpace, lf: &LagrangeSpace) -> Result<Vec<(usize, usize, C64)>> {
    let mut done = vec![false; lf.n_dofs()];
    let mut trip = Vec::new();
    for t in 0..fine.n_triangles() {
        let p = parent_of(fine, t, coarse.n_triangles())?;
        let (gf, gc) = (ElementGeometry::new(fine, t), ElementGeometry::new(coarse, p));
        for (i, &d) in lf.dofs(t).iter().enumerate() {
            if std::mem::replace(&mut done[d], true) {
                continue;
            }
            let xc = gc.inverse_map(gf.map(lf.reference().nodes()[i]));
            for (j, v) in lc.reference().eval(xc).into_iter().enumerate() {
                if v.abs() > DROP {
                    trip.push((d, lc.dofs(p)[j], C64::new(v, 0.0)));
                }
            }
        }
    }
    Ok(trip)
}

/// Prolongation of trial coefficients (fine × coarse), including the
/// rescaling of both bases.
pub fn trial_prolongation(coarse: &Triangulation, fine: &Triangulation, tc: &TrialSpace, tf: &TrialSpace) -> Result<CsrMatrix> {
    if tc.degree() != tf.degree() {
        return Err(Error::DegreeMismatch("trial degrees differ between levels".into()));
    }
    let base = lagrange_transfer(coarse, fine, tc.scalar(), tf.scalar())?;
    let (nc, nf) = (tc.n_scalar(), tf.n_scalar());
    let mut trip = Vec::with_capacity(3 * base.len());
    for c in 0..3 {
        for &(i, j, v) in &base {
            trip.push((c * nf + i, c * nc + j, v * (tc.scale()[j] / tf.scale()[i])));
        }
    }
    Ok(CsrMatrix::from_triplets(3 * nf, 3 * nc, &trip))
}

/// Unconstrained test-space transfer `T` (fine unconstrained × coarse
/// unconstrained).
pub fn test_transfer(coarse: &Triangulation, fine: &Triangulation, sc: &TestSpace, sf: &TestSpace) -> Result<CsrMatrix> {
    if sc.degree() != sf.degree() {
        return Err(Error::DegreeMismatch("test degrees differ between levels".into()));
    }
    let mut trip = lagrange_transfer(coarse, fine, sc.lagrange(), sf.lagrange())?;
    let (nlc, nlf) = (sc.lagrange().n_dofs(), sf.lagrange().n_dofs());
    let (rc, rf) = (sc.rt(), sf.rt());
    let rref = rf.reference();
    let p = sf.degree();
    let quad = TriangleQuadrature::new(2 * p + 1);
    let mut done = vec![false; rf.n_dofs()];
    for t in 0..fine.n_triangles() {
        let par = parent_of(fine, t, coarse.n_triangles())?;
        let (gf, gc) = (ElementGeometry::new(fine, t), ElementGeometry::new(coarse, par));
        let cdofs = rc.dofs(par);
        let csigns = rc.signs(par);
        let coarse_vals = |x: [f64; 2]| -> Vec<[f64; 2]> {
            let xc = gc.inverse_map(x);
            rc.reference().eval(xc).into_iter().map(|v| gc.piola(v)).collect()
        };
        let fdofs = rf.dofs(t);
        let fsigns = rf.signs(t);
        let fine_tri = fine.coords(t);
        let push_row = |li: usize, vals: Vec<f64>, trip: &mut Vec<(usize, usize, C64)>| {
            for (j, v) in vals.into_iter().enumerate() {
                let w = v * fsigns[li] * csigns[j];
                if w.abs() > DROP {
                    trip.push((nlf + fdofs[li], nlc + cdofs[j], C64::new(w, 0.0)));
                }
            }
        };
        for i in 0..3 {
            let (a, b) = (fine_tri[(i + 1) % 3], fine_tri[(i + 2) % 3]);
            let rot = [b[1] - a[1], -(b[0] - a[0])];
            for (k, &s) in rref.edge_parameters().iter().enumerate() {
                let li = rref.edge_dof(i, k);
                if std::mem::replace(&mut done[fdofs[li]], true) {
                    continue;
                }
                let x = gf.map(ref_edge_point(i, s));
                let vals = coarse_vals(x).iter().map(|v| v[0] * rot[0] + v[1] * rot[1]).collect();
                push_row(li, vals, &mut trip);
            }
        }
        let n_int = rref.n_local() - rref.interior_start();
        if n_int > 0 {
            // pulled-back coarse functions at the quadrature points of the fine element
            let pulled: Vec<Vec<[f64; 2]>> = quad
                .points
                .iter()
                .map(|xh| {
                    coarse_vals(gf.map(*xh))
                        .into_iter()
                        .map(|v| {
                            // v̂ = det J^{-1} v
                            let jt = gf.jinv_t;
                            [gf.det * (jt[0][0] * v[0] + jt[1][0] * v[1]), gf.det * (jt[0][1] * v[0] + jt[1][1] * v[1])]
                        })
                        .collect()
                })
                .collect();
            for m in 0..n_int {
                let li = rref.interior_start() + m;
                let vals = (0..cdofs.len())
                    .map(|j| {
                        quad.points
                            .iter()
                            .zip(&quad.weights)
                            .zip(&pulled)
                            .map(|((xh, w), pv)| {
                                let q = rref.moment_weight(m, *xh);
                                w * (pv[j][0] * q[0] + pv[j][1] * q[1])
                            })
                            .sum()
                    })
                    .collect();
                push_row(li, vals, &mut trip);
            }
        }
    }
    Ok(CsrMatrix::from_triplets(sf.n_unconstrained(), sc.n_unconstrained(), &trip))
}

/// Inclusion of the coarse constrained space into the fine one in free
/// coordinates, `I = R_free T Ξ_c`. Fails with `NonNestedSpaces` when
/// `Ξ_f I` differs from `T Ξ_c`, i.e. when coarse test functions violate
/// the fine constraints.
pub fn test_inclusion(coarse: &Triangulation, fine: &Triangulation, sc: &TestSpace, sf: &TestSpace) -> Result<CsrMatrix> {
    let t = test_transfer(coarse, fine, sc, sf)?;
    let txc = t.matmul(sc.xi());
    let mut trip = Vec::new();
    for u in 0..sf.n_unconstrained() {
        if let Some(f) = sf.free_index(u) {
            let (cols, vals) = txc.row(u);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((f, c, v));
            }
        }
    }
    let inc = CsrMatrix::from_triplets(sf.dim(), sc.dim(), &trip);
    let lhs = sf.xi().matmul(&inc);
    let scale = txc.max_abs().max(1.0);
    let mut residual = 0.0f64;
    for u in 0..sf.n_unconstrained() {
        let (c1, v1) = lhs.row(u);
        let (c2, v2) = txc.row(u);
        let mut diff: std::collections::BTreeMap<usize, C64> = std::collections::BTreeMap::new();
        for (&c, &v) in c1.iter().zip(v1) {
            *diff.entry(c).or_default() += v;
        }
        for (&c, &v) in c2.iter().zip(v2) {
            *diff.entry(c).or_default() -= v;
        }
        for v in diff.values() {
            residual = residual.max(v.norm() / scale);
        }
    }
    if residual > 1e-9 {
        return Err(Error::NonNestedSpaces { residual });
    }
    Ok(inc)
}
