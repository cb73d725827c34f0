//! Trial space (rescaled Lagrange triple) and constrained test space.

use crate::linalg::{CsrMatrix, C64, I, ONE};
use crate::mesh::{BoundaryTag, Triangulation};

use super::dofs::{edge_is_forward, LagrangeSpace, RtSpace};

/// Trial space `(P_p)^3` for `(φ, u)`, stored component-major. Basis
/// function `c * n + i` is `s_i` times the `i`-th Lagrange function in
/// component `c`, with `s_i = (Σ_{K ⊂ supp} 2|K|)^{-1/2}`.
#[derive(Clone, Debug)]
pub struct TrialSpace {
    lag: LagrangeSpace,
    scale: Vec<f64>,
}

impl TrialSpace {
    pub fn new(mesh: &Triangulation, p: usize) -> Self {
        let lag = LagrangeSpace::new(mesh, p);
        let mut acc = vec![0.0; lag.n_dofs()];
        for t in 0..mesh.n_triangles() {
            for &d in lag.dofs(t) {
                acc[d] += 2.0 * mesh.area(t);
            }
        }
        let scale = acc.iter().map(|a| 1.0 / a.sqrt()).collect();
        Self { lag, scale }
    }

    pub fn degree(&self) -> usize {
        self.lag.degree()
    }

    pub fn scalar(&self) -> &LagrangeSpace {
        &self.lag
    }

    pub fn n_scalar(&self) -> usize {
        self.lag.n_dofs()
    }

    pub fn dim(&self) -> usize {
        3 * self.lag.n_dofs()
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Global index of the scalar dof `i` in component `c`.
    pub fn index(&self, c: usize, i: usize) -> usize {
        c * self.lag.n_dofs() + i
    }
}

/// Role of a free test dof with respect to static condensation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofKind {
    /// supported on one element and not coupled through the constraints
    Interior(usize),
    Skeleton,
}

/// Test space `{(η, v) ∈ P_p × RT_p : η = 0 on Γ_D, v·n = 0 on Γ_N,
/// v·n + iη = 0 on Γ_R}`.
///
/// Unconstrained coordinates list the Lagrange dofs of `η` followed by the
/// RT dofs of `v`. The free coordinates are the unconstrained ones that are
/// not eliminated; `xi` maps free to unconstrained coefficients.
#[derive(Clone, Debug)]
pub struct TestSpace {
    lag: LagrangeSpace,
    rt: RtSpace,
    free_of_unc: Vec<Option<usize>>,
    unc_of_free: Vec<usize>,
    xi: CsrMatrix,
    /// per element, the sorted free dofs not vanishing there
    elem_free: Vec<Vec<usize>>,
    kinds: Vec<DofKind>,
}

impl TestSpace {
    pub fn new(mesh: &Triangulation, p: usize) -> Self {
        let lag = LagrangeSpace::new(mesh, p);
        let rt = RtSpace::new(mesh, p);
        let nl = lag.n_dofs();
        let n_unc = nl + rt.n_dofs();

        let mut eliminated = vec![false; n_unc];
        let mut robin_edges = Vec::new();
        for e in 0..mesh.n_edges() {
            match mesh.boundary_tag(e) {
                Some(BoundaryTag::Dirichlet) => {
                    for d in lag.edge_dofs(mesh, e) {
                        eliminated[d] = true;
                    }
                }
                Some(BoundaryTag::Neumann) => {
                    for d in rt.edge_dofs(e) {
                        eliminated[nl + d] = true;
                    }
                }
                Some(BoundaryTag::Robin) => {
                    for d in rt.edge_dofs(e) {
                        eliminated[nl + d] = true;
                    }
                    robin_edges.push(e);
                }
                None => {}
            }
        }
        let mut free_of_unc = vec![None; n_unc];
        let mut unc_of_free = Vec::new();
        for (u, &el) in eliminated.iter().enumerate() {
            if !el {
                free_of_unc[u] = Some(unc_of_free.len());
                unc_of_free.push(u);
            }
        }

        // rows of Ξ
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n_unc];
        for (u, f) in free_of_unc.iter().enumerate() {
            if let Some(f) = f {
                rows[u].push((*f, ONE));
            }
        }
        let gauss = rt.reference().edge_parameters().to_vec();
        let lag_ref = lag.reference();
        for &e in &robin_edges {
            let t = mesh.edge_triangles(e)[0].expect("boundary edge has a triangle");
            let i = (0..3).find(|&i| mesh.triangle_edges(t)[i] == e).expect("edge of its triangle");
            let s_out = if edge_is_forward(mesh, t, i) { 1.0 } else { -1.0 };
            let len = mesh.edge_length(e);
            let trace = lag.edge_dofs(mesh, e);
            // edge trace of the Lagrange basis in ascending-id direction: use
            // local edge 2 of the reference element, which runs 0 -> 1
            let local = lag_ref.edge_trace_dofs(2);
            for (k, d) in rt.edge_dofs(e).enumerate() {
                let vals = lag_ref.eval([gauss[k], 0.0]);
                let u = nl + d;
                for (j, &gd) in trace.iter().enumerate() {
                    let w = vals[local[j]];
                    if w == 0.0 {
                        continue;
                    }
                    if let Some(f) = free_of_unc[gd] {
                        rows[u].push((f, -I * (s_out * len * w)));
                    }
                }
            }
        }
        let mut trip = Vec::new();
        for (u, r) in rows.iter().enumerate() {
            for &(f, v) in r {
                trip.push((u, f, v));
            }
        }
        let xi = CsrMatrix::from_triplets(n_unc, unc_of_free.len(), &trip);

        let mut elem_free = Vec::with_capacity(mesh.n_triangles());
        let mut n_elems_of = vec![0usize; unc_of_free.len()];
        let mut coupled = vec![false; unc_of_free.len()];
        for t in 0..mesh.n_triangles() {
            let mut set: Vec<usize> = Vec::new();
            let uncs = lag.dofs(t).iter().copied().chain(rt.dofs(t).iter().map(|d| nl + d));
            for u in uncs {
                let (cols, _) = xi.row(u);
                if cols.len() > 1 || (cols.len() == 1 && free_of_unc[u] != Some(cols[0])) {
                    for &c in cols {
                        coupled[c] = true;
                    }
                }
                set.extend_from_slice(cols);
            }
            set.sort_unstable();
            set.dedup();
            for &f in &set {
                n_elems_of[f] += 1;
            }
            elem_free.push(set);
        }
        let mut kinds = vec![DofKind::Skeleton; unc_of_free.len()];
        for (f, &u) in unc_of_free.iter().enumerate() {
            let cell = if u < nl { lag.is_cell_dof(u) } else { rt.is_cell_dof(u - nl) };
            if cell && !coupled[f] && n_elems_of[f] == 1 {
                kinds[f] = DofKind::Interior(usize::MAX);
            }
        }
        for (t, set) in elem_free.iter().enumerate() {
            for &f in set {
                if let DofKind::Interior(k) = &mut kinds[f] {
                    *k = t;
                }
            }
        }

        Self { lag, rt, free_of_unc, unc_of_free, xi, elem_free, kinds }
    }

    pub fn degree(&self) -> usize {
        self.lag.degree()
    }

    pub fn lagrange(&self) -> &LagrangeSpace {
        &self.lag
    }

    pub fn rt(&self) -> &RtSpace {
        &self.rt
    }

    pub fn n_unconstrained(&self) -> usize {
        self.lag.n_dofs() + self.rt.n_dofs()
    }

    pub fn dim(&self) -> usize {
        self.unc_of_free.len()
    }

    /// Constraint map Ξ (unconstrained × free).
    pub fn xi(&self) -> &CsrMatrix {
        &self.xi
    }

    pub fn free_index(&self, u: usize) -> Option<usize> {
        self.free_of_unc[u]
    }

    pub fn unconstrained_index(&self, f: usize) -> usize {
        self.unc_of_free[f]
    }

    /// Unconstrained coordinates of element `t`: Lagrange then RT, local order.
    pub fn local_unconstrained(&self, t: usize) -> Vec<usize> {
        let nl = self.lag.n_dofs();
        self.lag.dofs(t).iter().copied().chain(self.rt.dofs(t).iter().map(|d| nl + d)).collect()
    }

    /// Local sign of each unconstrained coordinate of element `t`.
    pub fn local_signs(&self, t: usize) -> Vec<f64> {
        std::iter::repeat_n(1.0, self.lag.n_local()).chain(self.rt.signs(t).iter().copied()).collect()
    }

    /// Free dofs whose basis functions do not vanish on element `t` (sorted).
    pub fn element_free_dofs(&self, t: usize) -> &[usize] {
        &self.elem_free[t]
    }

    /// Local constraint matrix of element `t`, row-major
    /// `n_local × element_free_dofs(t).len()`: local basis functions
    /// expressed through the free basis restricted to `t`.
    pub fn local_xi(&self, t: usize) -> Vec<C64> {
        let free = &self.elem_free[t];
        let uncs = self.local_unconstrained(t);
        let signs = self.local_signs(t);
        let m = free.len();
        let mut x = vec![C64::new(0.0, 0.0); uncs.len() * m];
        for (i, (&u, &s)) in uncs.iter().zip(&signs).enumerate() {
            let (cols, vals) = self.xi.row(u);
            for (&c, &v) in cols.iter().zip(vals) {
                let j = free.binary_search(&c).expect("free dof of element");
                x[i * m + j] = v * s;
            }
        }
        x
    }

    pub fn kind(&self, f: usize) -> DofKind {
        self.kinds[f]
    }

    pub fn kinds(&self) -> &[DofKind] {
        &self.kinds
    }

    /// Unconstrained coefficients of a free coefficient vector.
    pub fn expand(&self, y: &[C64]) -> Vec<C64> {
        self.xi.mul_vec(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femspace::dofs::ElementGeometry;
    use crate::femspace::reference::ref_edge_point;
    use crate::mesh::{build_initial_mesh, Domain};

    #[test]
    fn trial_scaling_normalizes_hat_mass() {
        let m = build_initial_mesh(Domain::UnitSquare).unwrap();
        let tr = TrialSpace::new(&m, 1);
        assert_eq!(tr.dim(), 15);
        // center vertex touches all four triangles of area 1/4
        assert!((tr.scale()[4] - 0.5f64.powf(0.5) / 1.0).abs() < 1e-14);
        assert!((tr.scale()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dims_with_all_robin() {
        let m = build_initial_mesh(Domain::UnitSquare).unwrap().refine_uniform().unwrap();
        for p in 1..=4 {
            let ts = TestSpace::new(&m, p);
            let n_bdry_edges = 8;
            assert_eq!(ts.dim(), ts.n_unconstrained() - n_bdry_edges * (p + 1));
        }
    }

    #[test]
    fn robin_constraint_holds_at_edge_points() {
        // a random free vector gives v·n + iη = 0 along each Robin edge
        use rand::SeedableRng;
        let m = build_initial_mesh(Domain::NonTrapping).unwrap();
        let p = 3;
        let ts = TestSpace::new(&m, p);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let y = crate::linalg::random_vector(ts.dim(), &mut rng);
        let w = ts.expand(&y);
        let mut checked = 0;
        for t in 0..m.n_triangles() {
            let g = ElementGeometry::new(&m, t);
            let uncs = ts.local_unconstrained(t);
            let signs = ts.local_signs(t);
            for i in 0..3 {
                let e = m.triangle_edges(t)[i];
                let tag = m.boundary_tag(e);
                if tag.is_none() {
                    continue;
                }
                let tri = m.coords(t);
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let n_out = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
                for s in [0.0, 0.17, 0.5, 0.93, 1.0] {
                    let xh = ref_edge_point(i, s);
                    let lv = ts.lagrange().reference().eval(xh);
                    let rv = ts.rt().reference().eval(xh);
                    let mut eta = C64::new(0.0, 0.0);
                    let mut vn = C64::new(0.0, 0.0);
                    for (j, &u) in uncs.iter().enumerate() {
                        if j < lv.len() {
                            eta += w[u] * lv[j];
                        } else {
                            let v = g.piola(rv[j - lv.len()]);
                            vn += w[u] * signs[j] * (v[0] * n_out[0] + v[1] * n_out[1]);
                        }
                    }
                    match tag.unwrap() {
                        BoundaryTag::Robin => assert!((vn + I * eta).norm() < 1e-10, "{vn} {eta}"),
                        BoundaryTag::Dirichlet => assert!(eta.norm() < 1e-12),
                        BoundaryTag::Neumann => assert!(vn.norm() < 1e-12),
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn xi_is_identity_on_free_rows() {
        let m = build_initial_mesh(Domain::Trapping).unwrap();
        let ts = TestSpace::new(&m, 2);
        for f in 0..ts.dim() {
            let u = ts.unconstrained_index(f);
            let (c, v) = ts.xi().row(u);
            assert_eq!(c, &[f]);
            assert_eq!(v[0], ONE);
        }
    }

    #[test]
    fn interior_dofs_belong_to_one_element() {
        let m = build_initial_mesh(Domain::NonTrapping).unwrap();
        let ts = TestSpace::new(&m, 4);
        let mut n_int = 0;
        for f in 0..ts.dim() {
            if let DofKind::Interior(t) = ts.kind(f) {
                n_int += 1;
                for k in 0..m.n_triangles() {
                    assert_eq!(ts.element_free_dofs(k).contains(&f), k == t);
                }
            }
        }
        // per element: 3 Lagrange interior nodes and 20 RT moments
        assert_eq!(n_int, m.n_triangles() * (3 + 20));
    }
}
