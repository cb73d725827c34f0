//! Element maps and global degree-of-freedom numbering.

use crate::mesh::{Point, Triangulation};

use super::reference::{LagrangeRef, RtRef};

/// Affine map `x = v0 + J x̂` of a triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub v0: Point,
    /// columns are `v1 - v0` and `v2 - v0`
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub jinv_t: [[f64; 2]; 2],
}

impl ElementGeometry {
    pub fn new(mesh: &Triangulation, t: usize) -> Self {
        let [a, b, c] = mesh.coords(t);
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let jinv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        Self { v0: a, jac, det, jinv_t }
    }

    pub fn map(&self, x: [f64; 2]) -> Point {
        [self.v0[0] + self.jac[0][0] * x[0] + self.jac[0][1] * x[1], self.v0[1] + self.jac[1][0] * x[0] + self.jac[1][1] * x[1]]
    }

    /// Reference coordinates of a physical point.
    pub fn inverse_map(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.v0[0], x[1] - self.v0[1]];
        // J^{-1} = (J^{-T})^T
        [self.jinv_t[0][0] * d[0] + self.jinv_t[1][0] * d[1], self.jinv_t[0][1] * d[0] + self.jinv_t[1][1] * d[1]]
    }

    /// Physical gradient `J^{-T} ĝ`.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.jinv_t[0][0] * g[0] + self.jinv_t[0][1] * g[1], self.jinv_t[1][0] * g[0] + self.jinv_t[1][1] * g[1]]
    }

    /// Contravariant Piola map `J v̂ / det J`.
    pub fn piola(&self, v: [f64; 2]) -> [f64; 2] {
        [(self.jac[0][0] * v[0] + self.jac[0][1] * v[1]) / self.det, (self.jac[1][0] * v[0] + self.jac[1][1] * v[1]) / self.det]
    }
}

/// Whether local edge `i` of triangle `t` runs in the global (ascending id)
/// direction.
pub fn edge_is_forward(mesh: &Triangulation, t: usize, i: usize) -> bool {
    let tri = mesh.triangles()[t];
    tri[(i + 1) % 3] < tri[(i + 2) % 3]
}

/// Continuous Lagrange space of degree `p`. Global numbering: vertices, then
/// `p - 1` nodes per edge in ascending-id direction, then element interiors.
#[derive(Clone, Debug)]
pub struct LagrangeSpace {
    reference: LagrangeRef,
    n_vertices: usize,
    n_edges: usize,
    n_dofs: usize,
    elem_dofs: Vec<usize>,
}

impl LagrangeSpace {
    pub fn new(mesh: &Triangulation, p: usize) -> Self {
        let reference = LagrangeRef::new(p);
        let nl = reference.n_local();
        let ni = reference.n_interior();
        let (nv, ne, nt) = (mesh.n_vertices(), mesh.n_edges(), mesh.n_triangles());
        let cell0 = nv + ne * (p - 1);
        let mut elem_dofs = Vec::with_capacity(nt * nl);
        for t in 0..nt {
            let tri = mesh.triangles()[t];
            elem_dofs.extend_from_slice(&tri);
            let te = mesh.triangle_edges(t);
            for i in 0..3 {
                let fwd = edge_is_forward(mesh, t, i);
                for k in 0..p - 1 {
                    let kg = if fwd { k } else { p - 2 - k };
                    elem_dofs.push(nv + te[i] * (p - 1) + kg);
                }
            }
            for m in 0..ni {
                elem_dofs.push(cell0 + t * ni + m);
            }
        }
        Self { reference, n_vertices: nv, n_edges: ne, n_dofs: cell0 + nt * ni, elem_dofs }
    }

    pub fn degree(&self) -> usize {
        self.reference.degree()
    }

    pub fn reference(&self) -> &LagrangeRef {
        &self.reference
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.reference.n_local()
    }

    pub fn dofs(&self, t: usize) -> &[usize] {
        let nl = self.n_local();
        &self.elem_dofs[t * nl..(t + 1) * nl]
    }

    /// Global dofs on edge `e = (a, b)`, `a < b`, ordered `a`, interior, `b`.
    pub fn edge_dofs(&self, mesh: &Triangulation, e: usize) -> Vec<usize> {
        let p = self.degree();
        let [a, b] = mesh.edges()[e];
        let mut d = vec![a];
        d.extend((0..p - 1).map(|k| self.n_vertices + e * (p - 1) + k));
        d.push(b);
        d
    }

    /// Whether the dof is an element-interior node.
    pub fn is_cell_dof(&self, g: usize) -> bool {
        g >= self.n_vertices + self.n_edges * (self.degree() - 1)
    }

    pub fn is_vertex_dof(&self, g: usize) -> bool {
        g < self.n_vertices
    }
}

/// Raviart–Thomas space. Global numbering: `p + 1` flux dofs per edge at the
/// Gauss points in ascending-id direction with the normal rotated clockwise
/// from that direction, then element interiors.
#[derive(Clone, Debug)]
pub struct RtSpace {
    reference: RtRef,
    n_edges: usize,
    n_dofs: usize,
    elem_dofs: Vec<usize>,
    elem_signs: Vec<f64>,
}

impl RtSpace {
    pub fn new(mesh: &Triangulation, p: usize) -> Self {
        let reference = RtRef::new(p);
        let nl = reference.n_local();
        let ni = nl - 3 * (p + 1);
        let (ne, nt) = (mesh.n_edges(), mesh.n_triangles());
        let cell0 = ne * (p + 1);
        let mut elem_dofs = Vec::with_capacity(nt * nl);
        let mut elem_signs = Vec::with_capacity(nt * nl);
        for t in 0..nt {
            let te = mesh.triangle_edges(t);
            for i in 0..3 {
                let fwd = edge_is_forward(mesh, t, i);
                for k in 0..=p {
                    let kg = if fwd { k } else { p - k };
                    elem_dofs.push(te[i] * (p + 1) + kg);
                    elem_signs.push(if fwd { 1.0 } else { -1.0 });
                }
            }
            for m in 0..ni {
                elem_dofs.push(cell0 + t * ni + m);
                elem_signs.push(1.0);
            }
        }
        Self { reference, n_edges: ne, n_dofs: cell0 + nt * ni, elem_dofs, elem_signs }
    }

    pub fn degree(&self) -> usize {
        self.reference.degree()
    }

    pub fn reference(&self) -> &RtRef {
        &self.reference
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.reference.n_local()
    }

    pub fn dofs(&self, t: usize) -> &[usize] {
        let nl = self.n_local();
        &self.elem_dofs[t * nl..(t + 1) * nl]
    }

    /// `+1` when the local basis function equals the global one, `-1` when
    /// it is its negative.
    pub fn signs(&self, t: usize) -> &[f64] {
        let nl = self.n_local();
        &self.elem_signs[t * nl..(t + 1) * nl]
    }

    /// Global dofs on edge `e`, in Gauss point order.
    pub fn edge_dofs(&self, e: usize) -> std::ops::Range<usize> {
        let p = self.degree();
        e * (p + 1)..(e + 1) * (p + 1)
    }

    pub fn is_cell_dof(&self, g: usize) -> bool {
        g >= self.n_edges * (self.degree() + 1)
    }

    /// Edge carrying a flux dof.
    pub fn dof_edge(&self, g: usize) -> Option<usize> {
        (!self.is_cell_dof(g)).then(|| g / (self.degree() + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_initial_mesh, Domain};

    #[test]
    fn counts_on_unit_square() {
        let m = build_initial_mesh(Domain::UnitSquare).unwrap().refine_uniform().unwrap();
        // 9 vertices, 16 edges, 8 triangles
        assert_eq!((m.n_vertices(), m.n_edges(), m.n_triangles()), (9, 16, 8));
        for p in 1..=4 {
            let l = LagrangeSpace::new(&m, p);
            let expected = 9 + 16 * (p - 1) + 8 * (p - 1) * (p.saturating_sub(2)) / 2;
            assert_eq!(l.n_dofs(), expected);
            let r = RtSpace::new(&m, p);
            assert_eq!(r.n_dofs(), 16 * (p + 1) + 8 * p * (p + 1));
        }
    }

    #[test]
    fn every_dof_is_used_and_shared_nodes_coincide() {
        let m = build_initial_mesh(Domain::NonTrapping).unwrap().refine_uniform().unwrap();
        let p = 3;
        let l = LagrangeSpace::new(&m, p);
        let mut pos = vec![None::<Point>; l.n_dofs()];
        for t in 0..m.n_triangles() {
            let g = ElementGeometry::new(&m, t);
            for (i, &d) in l.dofs(t).iter().enumerate() {
                let x = g.map(l.reference().nodes()[i]);
                if let Some(y) = pos[d] {
                    assert!((x[0] - y[0]).abs() < 1e-13 && (x[1] - y[1]).abs() < 1e-13);
                }
                pos[d] = Some(x);
            }
        }
        assert!(pos.iter().all(|x| x.is_some()));
        let r = RtSpace::new(&m, p);
        let mut used = vec![0; r.n_dofs()];
        for t in 0..m.n_triangles() {
            for &d in r.dofs(t) {
                used[d] += 1;
            }
        }
        for (d, &u) in used.iter().enumerate() {
            let expected = match r.dof_edge(d) {
                Some(e) => m.edge_triangles(e).iter().flatten().count(),
                None => 1,
            };
            assert_eq!(u, expected);
        }
    }

    #[test]
    fn geometry_round_trip() {
        let m = build_initial_mesh(Domain::Trapping).unwrap();
        for t in 0..m.n_triangles() {
            let g = ElementGeometry::new(&m, t);
            assert!(g.det > 0.0);
            assert!((g.det / 2.0 - m.area(t)).abs() < 1e-14);
            let x = g.map([0.2, 0.3]);
            let y = g.inverse_map(x);
            assert!((y[0] - 0.2).abs() < 1e-12 && (y[1] - 0.3).abs() < 1e-12);
        }
    }
}
