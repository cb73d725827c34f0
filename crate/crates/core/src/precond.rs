//! Block preconditioner for the saddle system: a multilevel successive
//! subspace correction for the test Gram matrix and a fixed approximation of
//! the inverse trial Gram matrix for the Schur complement.
//!
//! The test-space preconditioner is a variable V-cycle whose smoother on each
//! level visits vertex patches once forward and once backward, so the induced
//! operator is Hermitian and `λ_max(Q^{-1} M_V) = 1`. The coarsest level of
//! the tree is solved exactly.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::assembly::assemble_test_gram;
use crate::error::{Error, Result};
use crate::femspace::{test_inclusion, DofKind, TestSpace};
use crate::linalg::{chebyshev_degree_for, lanczos_extreme, BlockAssembler, Chebyshev, CsrMatrix, DenseHermitianFactor, C64, ZERO};
use crate::mesh::{MeshHierarchy, Triangulation, VertexPatch};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleMode {
    /// V-cycle over the whole hierarchy.
    #[default]
    Multigrid,
    /// Smoother on the finest level, exact solve on the next coarser one.
    TwoGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrecondOptions {
    pub mode: CycleMode,
    /// Smoothing steps per hierarchy level; missing entries mean one step.
    pub m_schedule: Vec<usize>,
    /// Static condensation of element interiors; `None` enables it for test
    /// degree at least 4.
    pub condense: Option<bool>,
    /// Visit only patches around vertices touched by refinement on levels
    /// above the coarsest.
    pub restrict_patches: bool,
}

impl Default for PrecondOptions {
    fn default() -> Self {
        Self { mode: CycleMode::Multigrid, m_schedule: Vec::new(), condense: None, restrict_patches: true }
    }
}

impl PrecondOptions {
    pub fn smoothing_steps(&self, level: usize) -> usize {
        self.m_schedule.get(level).copied().unwrap_or(1)
    }

    pub fn condense_for(&self, p_test: usize) -> bool {
        self.condense.unwrap_or(p_test >= 4)
    }
}

#[derive(Clone, Debug)]
struct Patch {
    vertex: usize,
    dofs: Vec<usize>,
    factor: DenseHermitianFactor,
}

/// Static condensation data of one level: element-interior factors, the
/// sparse Schur complement on skeleton dofs and patch factorizations of it.
#[derive(Clone, Debug)]
struct Condensed {
    /// interior dofs and factor of `M_KK` per element (`None` without
    /// interior dofs)
    interior: Vec<Option<(Vec<usize>, DenseHermitianFactor)>>,
    /// elements covered by the visited patches
    union: Vec<usize>,
    /// global ids of the skeleton dofs
    skel: Vec<usize>,
    /// position of a dof in `skel` (`usize::MAX` for interior dofs)
    skel_pos: Vec<usize>,
    s: CsrMatrix,
    /// patches in skeleton numbering
    patches: Vec<Patch>,
}

#[derive(Clone, Debug)]
enum Smoother {
    Exact(DenseHermitianFactor),
    Plain(Vec<Patch>),
    Condensed(Condensed),
}

#[derive(Clone, Debug)]
struct Level {
    hierarchy_level: usize,
    m: CsrMatrix,
    /// inclusion of the next coarser tree level
    prolong: Option<CsrMatrix>,
    steps: usize,
    smoother: Smoother,
}

/// Multilevel preconditioner state for the test Gram matrix.
#[derive(Debug)]
pub struct PrecondTree {
    levels: Vec<Level>,
    options: PrecondOptions,
    condense: bool,
    visits: AtomicU64,
}

impl Clone for PrecondTree {
    fn clone(&self) -> Self {
        Self {
            levels: self.levels.clone(),
            options: self.options.clone(),
            condense: self.condense,
            visits: AtomicU64::new(self.visits.load(Ordering::Relaxed)),
        }
    }
}

/// Free dofs of a patch: those whose support lies in the patch of the vertex.
fn patch_dofs(mesh: &Triangulation, space: &TestSpace) -> Vec<Vec<usize>> {
    let mut per_vertex: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    let mut common: Vec<Option<Vec<usize>>> = vec![None; space.dim()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[t];
        for &f in space.element_free_dofs(t) {
            match &mut common[f] {
                slot @ None => *slot = Some(tri.to_vec()),
                Some(vs) => vs.retain(|v| tri.contains(v)),
            }
        }
    }
    for (f, vs) in common.into_iter().enumerate() {
        for v in vs.expect("every free dof has a support") {
            per_vertex[v].push(f);
        }
    }
    per_vertex
}

fn factor_patch(m: &CsrMatrix, vertex: usize, dofs: Vec<usize>) -> Result<Patch> {
    let factor = DenseHermitianFactor::new(m.principal_submatrix(&dofs)).map_err(|_| Error::SingularPatch { vertex })?;
    Ok(Patch { vertex, dofs, factor })
}

fn build_plain(mesh: &Triangulation, space: &TestSpace, m: &CsrMatrix, patches: &[VertexPatch]) -> Result<Vec<Patch>> {
    let dofs = patch_dofs(mesh, space);
    patches.iter().filter(|p| !dofs[p.vertex].is_empty()).map(|p| factor_patch(m, p.vertex, dofs[p.vertex].clone())).collect()
}

fn build_condensed(mesh: &Triangulation, space: &TestSpace, m: &CsrMatrix, patches: &[VertexPatch]) -> Result<Condensed> {
    let n = space.dim();
    let nt = mesh.n_triangles();
    let mut interior_dofs: Vec<Vec<usize>> = vec![Vec::new(); nt];
    let mut skel = Vec::new();
    let mut skel_pos = vec![usize::MAX; n];
    for f in 0..n {
        match space.kind(f) {
            DofKind::Interior(e) => interior_dofs[e].push(f),
            DofKind::Skeleton => {
                skel_pos[f] = skel.len();
                skel.push(f);
            }
        }
    }
    let mut interior = Vec::with_capacity(nt);
    let mut elem_skel: Vec<Vec<usize>> = Vec::with_capacity(nt);
    for t in 0..nt {
        let sk: Vec<usize> = space.element_free_dofs(t).iter().filter(|&&f| skel_pos[f] != usize::MAX).map(|&f| skel_pos[f]).collect();
        elem_skel.push(sk);
        let dofs = std::mem::take(&mut interior_dofs[t]);
        if dofs.is_empty() {
            interior.push(None);
        } else {
            let factor = DenseHermitianFactor::new(m.principal_submatrix(&dofs))?;
            interior.push(Some((dofs, factor)));
        }
    }
    // S = M_SS − Σ_K M_SK M_KK^{-1} M_KS
    let mut asm = BlockAssembler::new(skel.len(), skel.len(), elem_skel.iter().map(|s| (&s[..], &s[..])));
    for (i, &g) in skel.iter().enumerate() {
        let (cols, vals) = m.row(g);
        for (&c, &v) in cols.iter().zip(vals) {
            if skel_pos[c] != usize::MAX {
                asm.add(&[i], &[skel_pos[c]], &[v]);
            }
        }
    }
    for t in 0..nt {
        let Some((dofs, factor)) = &interior[t] else { continue };
        let sk_global: Vec<usize> = elem_skel[t].iter().map(|&k| skel[k]).collect();
        let msk = m.submatrix(&sk_global, dofs);
        let mut block = vec![ZERO; sk_global.len() * sk_global.len()];
        // columns of M_KK^{-1} M_KS
        for (b, _) in sk_global.iter().enumerate() {
            let col: Vec<C64> = (0..dofs.len()).map(|k| msk[(b, k)].conj()).collect();
            let y = factor.solve(&col);
            for a in 0..sk_global.len() {
                let s: C64 = (0..dofs.len()).map(|k| msk[(a, k)] * y[k]).sum();
                block[a * sk_global.len() + b] -= s;
            }
        }
        asm.add(&elem_skel[t], &elem_skel[t], &block);
    }
    let s = asm.finish(true).hermitian_part();
    let dofs = patch_dofs(mesh, space);
    let mut in_union = vec![false; nt];
    let mut cpatches = Vec::new();
    for p in patches {
        for &t in &p.triangles {
            in_union[t] = true;
        }
        let sk: Vec<usize> = dofs[p.vertex].iter().filter(|&&f| skel_pos[f] != usize::MAX).map(|&f| skel_pos[f]).collect();
        if !sk.is_empty() {
            cpatches.push(factor_patch(&s, p.vertex, sk)?);
        }
    }
    let union = (0..nt).filter(|&t| in_union[t]).collect();
    Ok(Condensed { interior, union, skel, skel_pos, s, patches: cpatches })
}

fn exact_level(hierarchy_level: usize, m: CsrMatrix, prolong: Option<CsrMatrix>) -> Result<Level> {
    let factor = DenseHermitianFactor::new(m.to_dense())?;
    Ok(Level { hierarchy_level, m, prolong, steps: 0, smoother: Smoother::Exact(factor) })
}

impl PrecondTree {
    /// Builds the tree for the finest level of `hier`. `spaces[l]` is the
    /// test space on hierarchy level `l`; `finest_gram` may pass the already
    /// assembled finest Gram matrix. With `previous`, levels built for the
    /// same hierarchy prefix are reused (multigrid mode only).
    pub fn build(
        hier: &MeshHierarchy,
        spaces: &[TestSpace],
        kappa: f64,
        finest_gram: Option<&CsrMatrix>,
        options: &PrecondOptions,
        previous: Option<PrecondTree>,
    ) -> Result<Self> {
        let nl = hier.n_levels();
        if spaces.len() != nl {
            return Err(Error::MeshMismatch);
        }
        let condense = options.condense_for(spaces[0].degree());
        let gram = |l: usize| -> CsrMatrix {
            match finest_gram {
                Some(m) if l + 1 == nl => m.clone(),
                _ => assemble_test_gram(&hier.levels()[l], &spaces[l], kappa),
            }
        };
        let first = match options.mode {
            CycleMode::Multigrid => 0,
            CycleMode::TwoGrid => nl.saturating_sub(2),
        };
        let mut levels: Vec<Level> = Vec::with_capacity(nl - first);
        if let Some(prev) = previous {
            let compatible = options.mode == CycleMode::Multigrid
                && prev.options == *options
                && prev.levels.len() < nl
                && prev.levels.iter().enumerate().all(|(i, l)| l.hierarchy_level == i && l.m.nrows() == spaces[i].dim());
            if compatible {
                levels = prev.levels;
            }
        }
        for l in first + levels.len()..nl {
            let m = gram(l);
            if levels.is_empty() {
                levels.push(exact_level(l, m, None)?);
                continue;
            }
            let mesh = &hier.levels()[l];
            let prolong = test_inclusion(&hier.levels()[l - 1], mesh, &spaces[l - 1], &spaces[l])?;
            let patches = hier.vertex_patches(l, options.restrict_patches)?;
            let smoother = if condense {
                Smoother::Condensed(build_condensed(mesh, &spaces[l], &m, &patches)?)
            } else {
                Smoother::Plain(build_plain(mesh, &spaces[l], &m, &patches)?)
            };
            levels.push(Level { hierarchy_level: l, m, prolong: Some(prolong), steps: options.smoothing_steps(l), smoother });
        }
        Ok(Self { levels, options: options.clone(), condense, visits: AtomicU64::new(0) })
    }

    /// Exact solve with a given Gram matrix (single-level tree).
    pub fn exact(m: &CsrMatrix) -> Result<Self> {
        Ok(Self { levels: vec![exact_level(0, m.clone(), None)?], options: PrecondOptions::default(), condense: false, visits: AtomicU64::new(0) })
    }

    pub fn dim(&self) -> usize {
        self.levels.last().expect("tree has a level").m.nrows()
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn is_condensed(&self) -> bool {
        self.condense
    }

    pub fn options(&self) -> &PrecondOptions {
        &self.options
    }

    /// Dimensions of the patch problems per tree level.
    pub fn patch_sizes(&self) -> Vec<Vec<usize>> {
        self.levels
            .iter()
            .map(|l| match &l.smoother {
                Smoother::Exact(_) => Vec::new(),
                Smoother::Plain(p) => p.iter().map(|p| p.dofs.len()).collect(),
                Smoother::Condensed(c) => c.patches.iter().map(|p| p.dofs.len()).collect(),
            })
            .collect()
    }

    /// Vertices whose patches are visited on each tree level.
    pub fn patch_vertices(&self) -> Vec<Vec<usize>> {
        self.levels
            .iter()
            .map(|l| match &l.smoother {
                Smoother::Exact(_) => Vec::new(),
                Smoother::Plain(p) => p.iter().map(|p| p.vertex).collect(),
                Smoother::Condensed(c) => c.patches.iter().map(|p| p.vertex).collect(),
            })
            .collect()
    }

    /// Total number of patch unknowns solved for since the last reset.
    pub fn patch_visits(&self) -> u64 {
        self.visits.load(Ordering::Relaxed)
    }

    pub fn reset_visits(&self) {
        self.visits.store(0, Ordering::Relaxed);
    }

    /// `Q^{-1} f` by one variable V-cycle.
    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        assert_eq!(f.len(), self.dim(), "preconditioner dimension mismatch");
        self.cycle(self.levels.len() - 1, f)
    }

    fn cycle(&self, l: usize, f: &[C64]) -> Vec<C64> {
        let lev = &self.levels[l];
        if let Smoother::Exact(factor) = &lev.smoother {
            return factor.solve(f);
        }
        let mut x = vec![ZERO; f.len()];
        let mut r = f.to_vec();
        for _ in 0..lev.steps {
            self.smooth(lev, &mut x, &mut r, false);
        }
        let p = lev.prolong.as_ref().expect("non-exact level has a coarser level");
        let xc = self.cycle(l - 1, &p.adjoint_mul_vec(&r));
        let dx = p.mul_vec(&xc);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        let mdx = lev.m.mul_vec(&dx);
        for (ri, d) in r.iter_mut().zip(&mdx) {
            *ri -= d;
        }
        for _ in 0..lev.steps {
            self.smooth(lev, &mut x, &mut r, true);
        }
        x
    }

    fn smooth(&self, lev: &Level, x: &mut [C64], r: &mut [C64], reverse: bool) {
        match &lev.smoother {
            Smoother::Exact(_) => unreachable!("exact levels are not smoothed"),
            Smoother::Plain(patches) => {
                let mut visit = |p: &Patch| {
                    let c = p.factor.solve(&p.dofs.iter().map(|&d| r[d]).collect::<Vec<_>>());
                    correct(&lev.m, &p.dofs, &c, x, r);
                    self.visits.fetch_add(p.dofs.len() as u64, Ordering::Relaxed);
                };
                if reverse {
                    patches.iter().rev().for_each(&mut visit);
                } else {
                    patches.iter().for_each(&mut visit);
                }
            }
            Smoother::Condensed(c) => self.smooth_condensed(c, &lev.m, x, r, reverse),
        }
    }

    /// Element-interior correction on the covered elements followed by the
    /// patch corrections in the harmonically extended skeleton space. Both
    /// kinds of corrections commute, so this reproduces the uncondensed
    /// smoother exactly.
    fn smooth_condensed(&self, c: &Condensed, m: &CsrMatrix, x: &mut [C64], r: &mut [C64], reverse: bool) {
        let mut count = 0u64;
        for &t in &c.union {
            if let Some((dofs, factor)) = &c.interior[t] {
                let d = factor.solve(&dofs.iter().map(|&g| r[g]).collect::<Vec<_>>());
                correct(m, dofs, &d, x, r);
                count += dofs.len() as u64;
            }
        }
        let mut rs: Vec<C64> = c.skel.iter().map(|&g| r[g]).collect();
        let mut z = vec![ZERO; x.len()];
        let mut visit = |p: &Patch| {
            let cc = p.factor.solve(&p.dofs.iter().map(|&k| rs[k]).collect::<Vec<_>>());
            for (&k, &ck) in p.dofs.iter().zip(&cc) {
                x[c.skel[k]] += ck;
                let (cols, vals) = c.s.row(k);
                for (&j, &v) in cols.iter().zip(vals) {
                    rs[j] -= v.conj() * ck;
                }
                let (cols, vals) = m.row(c.skel[k]);
                for (&j, &v) in cols.iter().zip(vals) {
                    if c.skel_pos[j] == usize::MAX {
                        z[j] += v.conj() * ck;
                    }
                }
            }
            count += p.dofs.len() as u64;
        };
        if reverse {
            c.patches.iter().rev().for_each(&mut visit);
        } else {
            c.patches.iter().for_each(&mut visit);
        }
        for (k, &g) in c.skel.iter().enumerate() {
            r[g] = rs[k];
        }
        for &t in &c.union {
            if let Some((dofs, factor)) = &c.interior[t] {
                let d = factor.solve(&dofs.iter().map(|&g| z[g]).collect::<Vec<_>>());
                for (&g, dv) in dofs.iter().zip(d) {
                    x[g] -= dv;
                }
            }
        }
        self.visits.fetch_add(count, Ordering::Relaxed);
    }
}

/// `x[dofs] += c`, `r −= M[:, dofs] c` for Hermitian `M`.
fn correct(m: &CsrMatrix, dofs: &[usize], c: &[C64], x: &mut [C64], r: &mut [C64]) {
    for (&d, &cd) in dofs.iter().zip(c) {
        x[d] += cd;
        let (cols, vals) = m.row(d);
        for (&j, &v) in cols.iter().zip(vals) {
            r[j] -= v.conj() * cd;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SchurMode {
    /// `Q_S = I`, justified by the rescaled trial basis.
    #[default]
    Identity,
    /// Fixed Chebyshev approximation of `(M^U)^{-1}` with deviation at most
    /// `epsilon` on the estimated spectrum.
    Chebyshev { epsilon: f64 },
}

/// Preconditioner for the Schur complement.
#[derive(Clone, Debug)]
pub enum SchurPreconditioner {
    Identity,
    Chebyshev { poly: Chebyshev, m_u: CsrMatrix },
}

impl SchurPreconditioner {
    /// The Chebyshev interval is the Lanczos estimate of the spectrum of
    /// `M^U` widened by 5% at both ends.
    pub fn build(mode: SchurMode, m_u: &CsrMatrix, seed: u64) -> Result<Self> {
        match mode {
            SchurMode::Identity => Ok(Self::Identity),
            SchurMode::Chebyshev { epsilon } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(Error::Config(format!("Chebyshev target must lie in (0, 1), got {epsilon}")));
                }
                let n = m_u.nrows();
                let est = lanczos_extreme(|x| m_u.mul_vec(x), |x| x.to_vec(), n, 300, 1e-6, seed)?;
                let (a, b) = (est.lambda_min / 1.05, est.lambda_max * 1.05);
                let degree = chebyshev_degree_for(a, b, epsilon);
                Ok(Self::Chebyshev { poly: Chebyshev::new(a, b, degree)?, m_u: m_u.clone() })
            }
        }
    }

    pub fn apply(&self, r: &[C64]) -> Vec<C64> {
        match self {
            Self::Identity => r.to_vec(),
            Self::Chebyshev { poly, m_u } => poly.apply(|x| m_u.mul_vec(x), r),
        }
    }

    pub fn degree(&self) -> Option<usize> {
        match self {
            Self::Identity => None,
            Self::Chebyshev { poly, .. } => Some(poly.degree),
        }
    }
}

/// `diag(Q_V^{-1}, Q_S^{-1})` acting on `[v; u]`.
#[derive(Clone, Debug)]
pub struct BlockPreconditioner {
    pub test: PrecondTree,
    pub schur: SchurPreconditioner,
}

impl BlockPreconditioner {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let nv = self.test.dim();
        let mut out = self.test.apply(&x[..nv]);
        out.extend(self.schur.apply(&x[nv..]));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_trial_gram;
    use crate::femspace::TrialSpace;
    use crate::linalg::{dense_generalized_eig, dense_hermitian_eigvals, random_vector};
    use crate::mesh::{build_initial_mesh, Domain};
    use nalgebra::DMatrix;
    use rand::SeedableRng;

    fn hierarchy(domain: Domain, uniform: usize, local: usize) -> MeshHierarchy {
        let mut h = MeshHierarchy::new(build_initial_mesh(domain).unwrap());
        for _ in 0..uniform {
            h.refine_uniform().unwrap();
        }
        for _ in 0..local {
            // refine around the first vertex
            let m = h.finest();
            let marked: Vec<usize> = m.vertex_triangles(0).to_vec();
            h.refine(&marked).unwrap();
        }
        h
    }

    fn spaces(h: &MeshHierarchy, p: usize) -> Vec<TestSpace> {
        h.levels().iter().map(|m| TestSpace::new(m, p)).collect()
    }

    fn operator_matrix(tree: &PrecondTree) -> DMatrix<C64> {
        let n = tree.dim();
        let mut q = DMatrix::from_element(n, n, ZERO);
        for j in 0..n {
            let mut e = vec![ZERO; n];
            e[j] = C64::new(1.0, 0.0);
            let col = tree.apply(&e);
            for i in 0..n {
                q[(i, j)] = col[i];
            }
        }
        q
    }

    #[test]
    fn single_level_is_exact() {
        let h = hierarchy(Domain::UnitSquare, 0, 0);
        let sp = spaces(&h, 2);
        let tree = PrecondTree::build(&h, &sp, 3.0, None, &PrecondOptions::default(), None).unwrap();
        let m = assemble_test_gram(h.finest(), &sp[0], 3.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let z = random_vector(m.nrows(), &mut rng);
        let back = tree.apply(&m.mul_vec(&z));
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn multigrid_is_hermitian_with_unit_upper_bound() {
        for (domain, local) in [(Domain::UnitSquare, 0), (Domain::NonTrapping, 2)] {
            let h = hierarchy(domain, 2, local);
            let sp = spaces(&h, 2);
            let kappa = 4.0;
            let tree = PrecondTree::build(&h, &sp, kappa, None, &PrecondOptions::default(), None).unwrap();
            let q = operator_matrix(&tree);
            let defect = (&q - q.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
            let scale = q.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(defect < 1e-10 * scale, "{domain:?}: {defect}");
            let m = assemble_test_gram(h.finest(), sp.last().unwrap(), kappa).to_dense();
            // eig(Q^{-1} M) = eig(M, Q)
            let qh = (&q + q.adjoint()) * C64::new(0.5, 0.0);
            let qinv = DenseHermitianFactor::new(qh).unwrap().inverse();
            let ev = dense_generalized_eig(&m, &((&qinv + qinv.adjoint()) * C64::new(0.5, 0.0)), 4000).unwrap();
            let (lo, hi) = (ev[0], *ev.last().unwrap());
            assert!(lo > 0.0, "{domain:?}: {lo}");
            assert!((hi - 1.0).abs() < 1e-6, "{domain:?}: {hi}");
        }
    }

    #[test]
    fn condensed_smoother_matches_plain() {
        for p in [3, 4] {
            let h = hierarchy(Domain::Trapping, 1, 1);
            let sp = spaces(&h, p);
            let plain = PrecondOptions { condense: Some(false), ..Default::default() };
            let cond = PrecondOptions { condense: Some(true), ..Default::default() };
            let a = PrecondTree::build(&h, &sp, 5.0, None, &plain, None).unwrap();
            let b = PrecondTree::build(&h, &sp, 5.0, None, &cond, None).unwrap();
            assert!(b.is_condensed() && !a.is_condensed());
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
            let f = random_vector(a.dim(), &mut rng);
            let (x, y) = (a.apply(&f), b.apply(&f));
            let err = x.iter().zip(&y).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * scale, "p={p}: {err:e}");
        }
    }

    #[test]
    fn two_grid_is_at_least_as_good_as_multigrid() {
        let h = hierarchy(Domain::UnitSquare, 3, 0);
        let sp = spaces(&h, 2);
        let kappa = 10.0;
        let m = assemble_test_gram(h.finest(), sp.last().unwrap(), kappa).to_dense();
        let cond = |mode| {
            let tree = PrecondTree::build(&h, &sp, kappa, None, &PrecondOptions { mode, ..Default::default() }, None).unwrap();
            let q = operator_matrix(&tree);
            let qinv = DenseHermitianFactor::new((&q + q.adjoint()) * C64::new(0.5, 0.0)).unwrap().inverse();
            let ev = dense_generalized_eig(&m, &((&qinv + qinv.adjoint()) * C64::new(0.5, 0.0)), 4000).unwrap();
            ev.last().unwrap() / ev[0]
        };
        let (mg, tg) = (cond(CycleMode::Multigrid), cond(CycleMode::TwoGrid));
        assert!(tg.is_finite() && tg <= mg * (1.0 + 1e-8), "{tg} vs {mg}");
    }

    #[test]
    fn smoother_contracts_in_energy() {
        // two-grid error operator has spectral radius below one
        let h = hierarchy(Domain::NonTrapping, 1, 0);
        let sp = spaces(&h, 1);
        let tree = PrecondTree::build(&h, &sp, 2.0, None, &PrecondOptions { mode: CycleMode::TwoGrid, ..Default::default() }, None).unwrap();
        let m = assemble_test_gram(h.finest(), sp.last().unwrap(), 2.0).to_dense();
        let e = DMatrix::<C64>::identity(m.nrows(), m.nrows()) - operator_matrix(&tree) * &m;
        // E is M-self-adjoint: eigenvalues of L^H E L^{-H} are real
        let l = DenseHermitianFactor::new(m.clone()).unwrap().l();
        let linv = l.clone().try_inverse().unwrap();
        let sym = l.adjoint() * e * linv.adjoint();
        let ev = dense_hermitian_eigvals(&((&sym + sym.adjoint()) * C64::new(0.5, 0.0)));
        assert!(ev.iter().all(|v| v.abs() < 1.0 - 1e-6), "{:?}", (ev[0], ev.last()));
    }

    #[test]
    fn patch_visits_are_counted() {
        let h = hierarchy(Domain::UnitSquare, 2, 0);
        let sp = spaces(&h, 1);
        let tree = PrecondTree::build(&h, &sp, 2.0, None, &PrecondOptions::default(), None).unwrap();
        tree.apply(&vec![C64::new(1.0, 0.0); tree.dim()]);
        let per_cycle: usize = tree.patch_sizes().iter().flatten().sum();
        assert_eq!(tree.patch_visits(), 2 * per_cycle as u64);
    }

    #[test]
    fn reuse_of_coarse_levels() {
        let mut h = hierarchy(Domain::UnitSquare, 2, 0);
        let sp = spaces(&h, 1);
        let opts = PrecondOptions::default();
        let a = PrecondTree::build(&h, &sp, 2.0, None, &opts, None).unwrap();
        h.refine_uniform().unwrap();
        let sp2 = spaces(&h, 1);
        let b = PrecondTree::build(&h, &sp2, 2.0, None, &opts, Some(a)).unwrap();
        let c = PrecondTree::build(&h, &sp2, 2.0, None, &opts, None).unwrap();
        let f = vec![C64::new(0.3, -1.0); b.dim()];
        let (x, y) = (b.apply(&f), c.apply(&f));
        assert!(x.iter().zip(&y).all(|(u, v)| (u - v).norm() < 1e-12 * (1.0 + v.norm())));
    }

    #[test]
    fn chebyshev_schur_preconditioner_bounds() {
        let m = build_initial_mesh(Domain::UnitSquare).unwrap().refine_uniform().unwrap().refine_uniform().unwrap();
        let tr = TrialSpace::new(&m, 2);
        let mu = assemble_trial_gram(&m, &tr);
        let sp = SchurPreconditioner::build(SchurMode::Chebyshev { epsilon: 0.1 }, &mu, 7).unwrap();
        let n = mu.nrows();
        let mut q = DMatrix::from_element(n, n, ZERO);
        for j in 0..n {
            let mut e = vec![ZERO; n];
            e[j] = C64::new(1.0, 0.0);
            for (i, v) in sp.apply(&e).into_iter().enumerate() {
                q[(i, j)] = v;
            }
        }
        // spectrum of Q^{-1} M^U through the similar Hermitian L^H Q^{-1} L
        let l = DenseHermitianFactor::new(mu.to_dense()).unwrap().l();
        let t = l.adjoint() * &q * &l;
        let ev = dense_hermitian_eigvals(&((&t + t.adjoint()) * C64::new(0.5, 0.0)));
        assert!(ev[0] >= 0.9 - 1e-9 && *ev.last().unwrap() <= 1.1 + 1e-9, "{:?}", (ev[0], ev.last()));
        let id = SchurPreconditioner::build(SchurMode::Identity, &mu, 7).unwrap();
        let r = random_vector(n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        assert_eq!(id.apply(&r), r);
    }
}
