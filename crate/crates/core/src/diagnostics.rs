//! Spectral quantities of the discretization and of the preconditioner:
//! inf-sup constants, Schur complement bounds and preconditioned condition
//! numbers, each by a dense eigensolve at small scale or by Lanczos.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::linalg::{dense_generalized_eig, dense_hermitian_eigvals, jacobi, lanczos_extreme, pcg, CsrMatrix, DenseHermitianFactor, C64, ZERO};
use crate::precond::PrecondTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Lanczos,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dense => "dense",
            Self::Lanczos => "lanczos",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: Method,
}

impl SpectralBounds {
    pub fn condition(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// One row of a study table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub kappa: f64,
    pub p: usize,
    pub p_tilde: usize,
    pub dofs_u: usize,
    pub value: f64,
    pub method: Method,
}

/// Dense `S = B^H M_V^{-1} B`.
pub fn dense_schur(sys: &SaddleSystem) -> Result<DMatrix<C64>> {
    let f = DenseHermitianFactor::new(sys.m_v.to_dense())?;
    let b = sys.b.to_dense();
    let mut minv_b = b.clone();
    for j in 0..b.ncols() {
        let col: Vec<C64> = b.column(j).iter().copied().collect();
        let y = f.solve(&col);
        for (i, v) in y.into_iter().enumerate() {
            minv_b[(i, j)] = v;
        }
    }
    let s = b.adjoint() * minv_b;
    Ok((&s + s.adjoint()) * C64::new(0.5, 0.0))
}

/// Spectrum bounds of `(M^U)^{-1} S` by a dense generalized eigensolve.
pub fn schur_bounds(sys: &SaddleSystem, cap: usize) -> Result<SpectralBounds> {
    let dim = sys.dim();
    if dim > cap {
        return Err(Error::DimCapExceeded { dim, cap });
    }
    let ev = dense_generalized_eig(&dense_schur(sys)?, &sys.m_u.to_dense(), cap)?;
    Ok(SpectralBounds { lambda_min: ev[0], lambda_max: *ev.last().expect("nonempty"), method: Method::Dense })
}

/// Iterative solver for `M_V` used inside Lanczos: PCG preconditioned by the
/// multilevel tree when given, by the diagonal otherwise.
fn gram_solver<'a>(m: &'a CsrMatrix, tree: Option<&'a PrecondTree>) -> impl Fn(&[C64]) -> Result<Vec<C64>> + 'a {
    let dinv = jacobi(m);
    move |r: &[C64]| {
        let out = match tree {
            Some(t) => pcg(|x| m.mul_vec(x), |x| t.apply(x), r, 1e-12, 2000)?,
            None => pcg(|x| m.mul_vec(x), |x| x.iter().zip(&dinv).map(|(v, d)| v * d).collect(), r, 1e-12, 20 * r.len() + 100)?,
        };
        Ok(out.x)
    }
}

/// Extreme eigenvalues of the pencil `(S, M^U)` by Lanczos with inner solves.
pub fn schur_bounds_lanczos(sys: &SaddleSystem, tree: Option<&PrecondTree>, k_max: usize, seed: u64) -> Result<SpectralBounds> {
    let solve_m = gram_solver(&sys.m_v, tree);
    let solve_mu = gram_solver(&sys.m_u, None);
    let inner_error = std::cell::RefCell::new(None);
    let est = lanczos_extreme(
        |z| match solve_m(&sys.b.mul_vec(z)) {
            Ok(y) => sys.b.adjoint_mul_vec(&y),
            Err(e) => {
                inner_error.borrow_mut().get_or_insert(e);
                vec![ZERO; z.len()]
            }
        },
        |r| match solve_mu(r) {
            Ok(y) => y,
            Err(e) => {
                inner_error.borrow_mut().get_or_insert(e);
                vec![ZERO; r.len()]
            }
        },
        sys.n_trial(),
        k_max,
        1e-8,
        seed,
    )?;
    if let Some(e) = inner_error.into_inner() {
        return Err(e);
    }
    Ok(SpectralBounds { lambda_min: est.lambda_min, lambda_max: est.lambda_max, method: Method::Lanczos })
}

/// Inf-sup constant `γ = sqrt(λ_min(S, M^U))`, dense up to `cap` saddle
/// unknowns and by Lanczos beyond.
pub fn compute_inf_sup(sys: &SaddleSystem, tree: Option<&PrecondTree>, cap: usize, seed: u64) -> Result<(f64, Method)> {
    let b = if sys.dim() <= cap { schur_bounds(sys, cap)? } else { schur_bounds_lanczos(sys, tree, 400, seed)? };
    Ok((b.lambda_min.max(0.0).sqrt(), b.method))
}

/// Spectrum bounds of `Q^{-1} M_V`. The dense path forms `Q^{-1}` column by
/// column and is meant for small problems.
pub fn precond_bounds(m: &CsrMatrix, tree: &PrecondTree, method: Method, seed: u64) -> Result<SpectralBounds> {
    match method {
        Method::Lanczos => {
            let est = lanczos_extreme(|x| m.mul_vec(x), |r| tree.apply(r), m.nrows(), 400, 1e-8, seed)?;
            Ok(SpectralBounds { lambda_min: est.lambda_min, lambda_max: est.lambda_max, method })
        }
        Method::Dense => {
            let n = m.nrows();
            let mut qinv = DMatrix::from_element(n, n, ZERO);
            for j in 0..n {
                let mut e = vec![ZERO; n];
                e[j] = C64::new(1.0, 0.0);
                for (i, v) in tree.apply(&e).into_iter().enumerate() {
                    qinv[(i, j)] = v;
                }
            }
            // eig(Q^{-1} M) = eig(L^H Q^{-1} L) with M = L L^H
            let l = DenseHermitianFactor::new(m.to_dense())?.l();
            let t = l.adjoint() * qinv * &l;
            let ev = dense_hermitian_eigvals(&((&t + t.adjoint()) * C64::new(0.5, 0.0)));
            Ok(SpectralBounds { lambda_min: ev[0], lambda_max: *ev.last().expect("nonempty"), method })
        }
    }
}

/// `λ_max / λ_min` of `Q^{-1} M_V`; equals `1 / γ_V` since `λ_max = 1`.
pub fn compute_precond_condition(m: &CsrMatrix, tree: &PrecondTree, method: Method, seed: u64) -> Result<f64> {
    Ok(precond_bounds(m, tree, method, seed)?.condition())
}

/// Condition number of a Hermitian positive definite sparse matrix.
pub fn gram_condition(m: &CsrMatrix, method: Method, seed: u64) -> Result<SpectralBounds> {
    match method {
        Method::Dense => {
            let ev = dense_hermitian_eigvals(&m.to_dense());
            Ok(SpectralBounds { lambda_min: ev[0], lambda_max: *ev.last().expect("nonempty"), method })
        }
        Method::Lanczos => {
            let est = lanczos_extreme(|x| m.mul_vec(x), |r| r.to_vec(), m.nrows(), 400, 1e-8, seed)?;
            Ok(SpectralBounds { lambda_min: est.lambda_min, lambda_max: est.lambda_max, method })
        }
    }
}

/// Eigenvalues of the block-preconditioned saddle matrix
/// `diag(Q_V^{-1}, Q_S^{-1}) K`, via the Hermitian similarity
/// `P^{1/2} K P^{1/2}` with `P` formed densely. Small problems only.
pub fn preconditioned_saddle_spectrum(sys: &SaddleSystem, apply_p: &dyn Fn(&[C64]) -> Vec<C64>, cap: usize) -> Result<Vec<f64>> {
    let n = sys.dim();
    if n > cap {
        return Err(Error::DimCapExceeded { dim: n, cap });
    }
    let mut p = DMatrix::from_element(n, n, ZERO);
    for j in 0..n {
        let mut e = vec![ZERO; n];
        e[j] = C64::new(1.0, 0.0);
        for (i, v) in apply_p(&e).into_iter().enumerate() {
            p[(i, j)] = v;
        }
    }
    // eig(P K) = eig(L^H K L) with P = L L^H
    let p = (&p + p.adjoint()) * C64::new(0.5, 0.0);
    let l = DenseHermitianFactor::new(p)?.l();
    let t = l.adjoint() * sys.to_dense() * &l;
    Ok(dense_hermitian_eigvals(&((&t + t.adjoint()) * C64::new(0.5, 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_system;
    use crate::femspace::{TestSpace, TrialSpace};
    use crate::mesh::{build_initial_mesh, Domain, MeshHierarchy};
    use crate::precond::{BlockPreconditioner, PrecondOptions, SchurPreconditioner};
    use crate::problem::ProblemData;

    fn system(refine: usize, p: usize, pt: usize, kappa: f64) -> SaddleSystem {
        let mut m = build_initial_mesh(Domain::UnitSquare).unwrap();
        for _ in 0..refine {
            m = m.refine_uniform().unwrap();
        }
        let data = ProblemData::benchmark(Domain::UnitSquare, kappa).unwrap();
        assemble_system(&m, &TrialSpace::new(&m, p), &TestSpace::new(&m, pt), &data).unwrap()
    }

    #[test]
    fn identity_preconditioned_diagonal_spectrum() {
        let t: Vec<_> = (1..=100).map(|i| (i - 1, i - 1, C64::new(i as f64, 0.0))).collect();
        let m = CsrMatrix::from_triplets(100, 100, &t);
        let b = gram_condition(&m, Method::Lanczos, 1).unwrap();
        assert!((b.lambda_min - 1.0).abs() < 0.01 && (b.lambda_max - 100.0).abs() < 1.0);
    }

    #[test]
    fn schur_bounds_upper_and_sharp_lower() {
        let sys = system(0, 1, 3, 4.0);
        let b = schur_bounds(&sys, 3000).unwrap();
        assert!(b.lambda_max <= 1.0 + 1e-10 && b.lambda_min > 0.0);
        let lz = schur_bounds_lanczos(&sys, None, 400, 3).unwrap();
        assert!((lz.lambda_min - b.lambda_min).abs() <= 0.02 * b.lambda_min, "{lz:?} vs {b:?}");
    }

    #[test]
    fn inf_sup_grows_with_test_degree() {
        let g: Vec<f64> = (1..=3).map(|pt| compute_inf_sup(&system(1, 1, pt, 6.0), None, 3000, 0).unwrap().0).collect();
        assert!(g[0] <= g[1] + 1e-10 && g[1] <= g[2] + 1e-10, "{g:?}");
    }

    #[test]
    fn exact_preconditioner_has_unit_condition() {
        let sys = system(1, 1, 2, 3.0);
        let tree = PrecondTree::exact(&sys.m_v).unwrap();
        let c = compute_precond_condition(&sys.m_v, &tree, Method::Dense, 0).unwrap();
        assert!((c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exact_block_preconditioner_gives_three_clusters() {
        // with Q_V = M_V and Q_S = S the preconditioned spectrum is
        // {1, (1 ± √5)/2}
        let sys = system(0, 1, 2, 2.0);
        let s = dense_schur(&sys).unwrap();
        let sinv = DenseHermitianFactor::new(s).unwrap();
        let mv = PrecondTree::exact(&sys.m_v).unwrap();
        let nv = sys.n_test();
        let apply = |x: &[C64]| {
            let mut out = mv.apply(&x[..nv]);
            out.extend(sinv.solve(&x[nv..]));
            out
        };
        let ev = preconditioned_saddle_spectrum(&sys, &apply, 3000).unwrap();
        let targets = [1.0, (1.0 + 5f64.sqrt()) / 2.0, (1.0 - 5f64.sqrt()) / 2.0];
        for e in ev {
            assert!(targets.iter().any(|t| (e - t).abs() < 1e-6), "{e}");
        }
    }

    #[test]
    fn multilevel_bounds_dense_vs_lanczos() {
        let mut h = MeshHierarchy::new(build_initial_mesh(Domain::UnitSquare).unwrap());
        h.refine_uniform().unwrap();
        h.refine_uniform().unwrap();
        let sp: Vec<TestSpace> = h.levels().iter().map(|m| TestSpace::new(m, 2)).collect();
        let tree = PrecondTree::build(&h, &sp, 5.0, None, &PrecondOptions::default(), None).unwrap();
        let m = crate::assembly::assemble_test_gram(h.finest(), sp.last().unwrap(), 5.0);
        let d = precond_bounds(&m, &tree, Method::Dense, 0).unwrap();
        let l = precond_bounds(&m, &tree, Method::Lanczos, 0).unwrap();
        assert!((d.lambda_max - 1.0).abs() < 1e-8);
        assert!((l.condition() - d.condition()).abs() <= 0.02 * d.condition());
        let _ = BlockPreconditioner { test: tree, schur: SchurPreconditioner::Identity };
    }

    #[test]
    fn single_trial_function_gives_dual_norm_ratio() {
        let sys = system(1, 1, 3, 5.0);
        let j = 4;
        let col: Vec<_> = sys.b.triplets().filter(|t| t.1 == j).map(|(i, _, v)| (i, 0, v)).collect();
        let b = CsrMatrix::from_triplets(sys.n_test(), 1, &col);
        let muu = sys.m_u.get(j, j);
        let sub = SaddleSystem { m_v: sys.m_v.clone(), b: b.clone(), q: sys.q.clone(), m_u: CsrMatrix::from_triplets(1, 1, &[(0, 0, muu)]), kappa: sys.kappa };
        let (g, method) = compute_inf_sup(&sub, None, 3000, 0).unwrap();
        // ‖Bφ‖_{(V^δ)'} = sqrt(b^H M_V^{-1} b)
        let bj: Vec<C64> = (0..sys.n_test()).map(|i| b.get(i, 0)).collect();
        let y = DenseHermitianFactor::new(sys.m_v.to_dense()).unwrap().solve(&bj);
        let dual: f64 = bj.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum::<f64>().sqrt();
        assert_eq!(method, Method::Dense);
        assert!((g - dual / muu.re.sqrt()).abs() < 1e-12 * g.max(1.0));
    }

    #[test]
    fn inf_sup_ignores_trial_basis_scaling() {
        let sys = system(1, 1, 3, 5.0);
        let d: Vec<f64> = (0..sys.n_trial()).map(|i| 0.5 + (i % 7) as f64).collect();
        let ones = vec![1.0; sys.n_test()];
        let scaled = SaddleSystem { b: sys.b.scale_rows_cols(&ones, &d), m_u: sys.m_u.scale_rows_cols(&d, &d), ..sys.clone() };
        let (a, _) = compute_inf_sup(&sys, None, 3000, 0).unwrap();
        let (b, _) = compute_inf_sup(&scaled, None, 3000, 0).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }

    #[test]
    fn resolved_plane_wave_inf_sup() {
        let (g, _) = compute_inf_sup(&system(3, 1, 3, 10.0), None, 3000, 0).unwrap();
        assert!(g > 0.8 && g <= 1.0 + 1e-12, "{g}");
    }

    #[test]
    fn extra_smoothing_on_critical_level_does_not_hurt() {
        // κ h / p̃ ≈ 1 on level 2 of the unit square hierarchy for κ = 6
        let mut h = MeshHierarchy::new(build_initial_mesh(Domain::UnitSquare).unwrap());
        for _ in 0..3 {
            h.refine_uniform().unwrap();
        }
        let sp: Vec<TestSpace> = h.levels().iter().map(|m| TestSpace::new(m, 3)).collect();
        let m = crate::assembly::assemble_test_gram(h.finest(), sp.last().unwrap(), 6.0);
        let cond = |schedule: Vec<usize>| {
            let opts = PrecondOptions { m_schedule: schedule, ..Default::default() };
            let tree = PrecondTree::build(&h, &sp, 6.0, Some(&m), &opts, None).unwrap();
            compute_precond_condition(&m, &tree, Method::Dense, 0).unwrap()
        };
        let base = cond(vec![]);
        let more = cond(vec![1, 1, 3, 1]);
        assert!(more <= base * (1.0 + 1e-8), "{base} {more}");
    }
}
