//! Per-mesh solves, error quantities, Dörfler marking and the refinement
//! loop with prolongated initial iterates.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_system, element_indicators, local_badjoint_values, ElementKernel, SaddleSystem};
use crate::error::{Error, Result};
use crate::femspace::{test_inclusion, trial_prolongation, ElementGeometry, TestSpace, TrialSpace};
use crate::linalg::{dot, jacobi, pcg, C64};
use crate::mesh::{MeshHierarchy, Triangulation};
use crate::minres::{minres_solve, update_carried_gamma, SolveReport, StoppingPolicy};
use crate::precond::{BlockPreconditioner, PrecondOptions, PrecondTree, SchurMode, SchurPreconditioner};
use crate::problem::ProblemData;

/// Largest quadrature degree tried for error integrals.
const ERROR_DEGREE_CAP: usize = 96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub p: usize,
    pub p_test: usize,
    pub precond: PrecondOptions,
    pub schur: SchurMode,
    pub policy: StoppingPolicy,
    /// start each mesh from the prolongated previous solution
    pub prolongate: bool,
    /// evaluate true errors when the exact solution is known
    pub compute_errors: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1,
            p_test: 3,
            precond: PrecondOptions::default(),
            schur: SchurMode::Identity,
            policy: StoppingPolicy::default(),
            prolongate: true,
            compute_errors: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.p_test == 0 {
            return Err(Error::Config("polynomial degrees must be at least 1".into()));
        }
        self.policy.validate()
    }
}

/// Errors of one discrete solution against a known exact solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `‖u − u^δ‖_U`
    pub error: f64,
    /// `‖u − (u^δ + B'v^δ)‖_U`
    pub boosted: f64,
    /// `‖B'v^δ‖_U` by quadrature
    pub correction: f64,
}

/// Evaluates `total(d)` for `d = degree, 2 degree, …` until two successive
/// values agree to `1e-11` (relative).
fn integrate_converged<F>(degree: usize, mut total: F) -> Result<f64>
where
    F: FnMut(usize) -> f64,
{
    let mut d = degree;
    let mut prev = total(d);
    loop {
        d *= 2;
        if d > ERROR_DEGREE_CAP {
            return Err(Error::ErrorQuadrature { cap: ERROR_DEGREE_CAP });
        }
        let next = total(d);
        if (next - prev).abs() <= 1e-11 * next.abs() || next == 0.0 {
            return Ok(next);
        }
        prev = next;
    }
}

fn error_degree(test: &TestSpace) -> usize {
    2 * test.degree() + 6
}

/// Values `(φ, u1, u2)` of trial coefficients at the kernel points of `t`.
fn trial_point_values(kernel: &ElementKernel, trial: &TrialSpace, t: usize, u: &[C64]) -> Vec<[C64; 3]> {
    let tv = kernel.trial_values(trial, t);
    let dofs = trial.scalar().dofs(t);
    let ns = trial.n_scalar();
    (0..kernel.n_points())
        .map(|q| {
            let mut out = [C64::new(0.0, 0.0); 3];
            for (i, &d) in dofs.iter().enumerate() {
                for (c, o) in out.iter_mut().enumerate() {
                    *o += u[c * ns + d] * tv[(q, i)];
                }
            }
            out
        })
        .collect()
}

/// `‖u − u^δ‖_U`, `‖u − (u^δ + B'v)‖_U` and `‖B'v‖_U` by elementwise
/// quadrature against the exact solution.
pub fn error_report(mesh: &Triangulation, trial: &TrialSpace, test: &TestSpace, data: &ProblemData, u: &[C64], v: &[C64]) -> Result<ErrorReport> {
    if !data.has_exact_solution() {
        return Err(Error::Config("the exact solution of this problem is unknown".into()));
    }
    let mut parts = [0.0f64; 3];
    let eval = |d: usize, which: usize| -> f64 {
        let kernel = ElementKernel::new(Some(trial), test, data.kappa, d);
        let mut acc = 0.0;
        for t in 0..mesh.n_triangles() {
            let g = ElementGeometry::new(mesh, t);
            let w = kernel.weights(&g);
            let pts = kernel.points(&g);
            let uh = trial_point_values(&kernel, trial, t, u);
            let bv = if which == 0 { Vec::new() } else { local_badjoint_values(&kernel, mesh, test, t, v) };
            for q in 0..kernel.n_points() {
                let ex = data.exact(pts[q]).expect("exact solution");
                let s: f64 = (0..3)
                    .map(|c| match which {
                        0 => (ex[c] - uh[q][c]).norm_sqr(),
                        1 => (ex[c] - uh[q][c] - bv[3 * q + c]).norm_sqr(),
                        _ => bv[3 * q + c].norm_sqr(),
                    })
                    .sum();
                acc += w[q] * s;
            }
        }
        acc
    };
    for (k, part) in parts.iter_mut().enumerate() {
        *part = integrate_converged(error_degree(test), |d| eval(d, k))?;
    }
    Ok(ErrorReport { error: parts[0].sqrt(), boosted: parts[1].sqrt(), correction: parts[2].sqrt() })
}

/// Precomputed data for `‖u − ũ‖_U` of many trial iterates:
/// `‖u‖² − 2 Re ũ^H g + ũ^H M^U ũ` with `g_j = ⟨u, φ_j⟩_U`.
#[derive(Clone, Debug)]
pub struct TrialErrorFunctional {
    pub norm_sq: f64,
    pub g: Vec<C64>,
}

impl TrialErrorFunctional {
    pub fn new(mesh: &Triangulation, trial: &TrialSpace, test: &TestSpace, data: &ProblemData) -> Result<Self> {
        if !data.has_exact_solution() {
            return Err(Error::Config("the exact solution of this problem is unknown".into()));
        }
        let norm_sq = integrate_converged(error_degree(test), |d| {
            let kernel = ElementKernel::new(None, test, data.kappa, d);
            let mut acc = 0.0;
            for t in 0..mesh.n_triangles() {
                let g = ElementGeometry::new(mesh, t);
                for (x, w) in kernel.points(&g).into_iter().zip(kernel.weights(&g)) {
                    acc += w * data.exact(x).expect("exact").iter().map(|v| v.norm_sqr()).sum::<f64>();
                }
            }
            acc
        })?;
        // load vector with doubling until the coefficients settle
        let load = |d: usize| -> Vec<C64> {
            let kernel = ElementKernel::new(Some(trial), test, data.kappa, d);
            let ns = trial.n_scalar();
            let mut g = vec![C64::new(0.0, 0.0); trial.dim()];
            for t in 0..mesh.n_triangles() {
                let geo = ElementGeometry::new(mesh, t);
                let tv = kernel.trial_values(trial, t);
                let dofs = trial.scalar().dofs(t);
                for (q, (x, w)) in kernel.points(&geo).into_iter().zip(kernel.weights(&geo)).enumerate() {
                    let ex = data.exact(x).expect("exact");
                    for (i, &dof) in dofs.iter().enumerate() {
                        for (c, e) in ex.iter().enumerate() {
                            g[c * ns + dof] += e * (w * tv[(q, i)]);
                        }
                    }
                }
            }
            g
        };
        let mut d = error_degree(test);
        let mut g = load(d);
        loop {
            d *= 2;
            if d > ERROR_DEGREE_CAP {
                return Err(Error::ErrorQuadrature { cap: ERROR_DEGREE_CAP });
            }
            let next = load(d);
            let scale = next.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let diff = next.iter().zip(&g).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            g = next;
            if diff <= 1e-12 * scale || scale == 0.0 {
                break;
            }
        }
        Ok(Self { norm_sq, g })
    }

    pub fn error(&self, m_u: &crate::linalg::CsrMatrix, u: &[C64]) -> f64 {
        let e2 = self.norm_sq - 2.0 * dot(u, &self.g).re + dot(u, &m_u.mul_vec(u)).re;
        e2.max(0.0).sqrt()
    }

    /// Best approximation error `inf_w ‖u − w‖_U` over the trial space.
    pub fn best_approximation(&self, m_u: &crate::linalg::CsrMatrix) -> Result<f64> {
        let dinv = jacobi(m_u);
        let sol = pcg(|x| m_u.mul_vec(x), |r| r.iter().zip(&dinv).map(|(v, d)| v * d).collect(), &self.g, 1e-14, 10 * self.g.len() + 100)?;
        Ok((self.norm_sq - dot(&self.g, &sol.x).re).max(0.0).sqrt())
    }
}

/// Dörfler marking: the smallest set (largest indicators first, ties by
/// element id) with `Σ_M η_K² ≥ θ² Σ η_K²`. `eta_sq` holds `η_K²`.
pub fn dorfler_mark(eta_sq: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Config(format!("Dörfler parameter must lie in (0, 1], got {theta}")));
    }
    let total: f64 = eta_sq.iter().sum();
    let mut order: Vec<usize> = (0..eta_sq.len()).filter(|&i| eta_sq[i] > 0.0).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    let target = theta * theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if acc >= target && !marked.is_empty() {
            break;
        }
        acc += eta_sq[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Fine-mesh initial iterate `[I v; P u]` from a coarse solution `[v; u]`.
pub fn prolongate(
    coarse: &Triangulation,
    fine: &Triangulation,
    spaces: (&TrialSpace, &TestSpace),
    fine_spaces: (&TrialSpace, &TestSpace),
    x: &[C64],
) -> Result<Vec<C64>> {
    let nv = spaces.1.dim();
    let inc = test_inclusion(coarse, fine, spaces.1, fine_spaces.1)?;
    let pu = trial_prolongation(coarse, fine, spaces.0, fine_spaces.0)?;
    let mut out = inc.mul_vec(&x[..nv]);
    out.extend(pu.mul_vec(&x[nv..]));
    Ok(out)
}

/// Result of one solve on one mesh.
#[derive(Clone, Debug)]
pub struct MeshStep {
    pub level: usize,
    pub n_triangles: usize,
    pub dofs_trial: usize,
    pub dofs_test: usize,
    /// `[v; u]`
    pub x: Vec<C64>,
    pub report: SolveReport,
    /// `‖B'v‖_U`
    pub estimator: f64,
    /// `η_K²`
    pub indicators: Vec<f64>,
    pub errors: Option<ErrorReport>,
    pub max_h: f64,
}

impl MeshStep {
    pub fn v(&self) -> &[C64] {
        &self.x[..self.dofs_test]
    }

    pub fn u(&self) -> &[C64] {
        &self.x[self.dofs_test..]
    }
}

pub use crate::minres::IterateObserver;

/// Solver state across a sequence of nested meshes.
pub struct AdaptiveSolver {
    pub data: ProblemData,
    pub config: SolverConfig,
    hierarchy: MeshHierarchy,
    test_spaces: Vec<TestSpace>,
    trial: TrialSpace,
    tree: Option<PrecondTree>,
    carried_gamma: Option<f64>,
    /// previous solution with its trial space and mesh level
    last: Option<(usize, TrialSpace, Vec<C64>)>,
    system: Option<SaddleSystem>,
}

impl AdaptiveSolver {
    pub fn new(initial: Triangulation, data: ProblemData, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let test = TestSpace::new(&initial, config.p_test);
        let trial = TrialSpace::new(&initial, config.p);
        Ok(Self {
            data,
            config,
            hierarchy: MeshHierarchy::new(initial),
            test_spaces: vec![test],
            trial,
            tree: None,
            carried_gamma: None,
            last: None,
            system: None,
        })
    }

    pub fn hierarchy(&self) -> &MeshHierarchy {
        &self.hierarchy
    }

    pub fn mesh(&self) -> &Triangulation {
        self.hierarchy.finest()
    }

    pub fn trial(&self) -> &TrialSpace {
        &self.trial
    }

    pub fn test(&self) -> &TestSpace {
        self.test_spaces.last().expect("at least one level")
    }

    pub fn carried_gamma(&self) -> Option<f64> {
        self.carried_gamma
    }

    /// Test-space preconditioner of the last solve.
    pub fn precond_tree(&self) -> Option<&PrecondTree> {
        self.tree.as_ref()
    }

    /// System of the last solve.
    pub fn system(&self) -> Option<&SaddleSystem> {
        self.system.as_ref()
    }

    pub fn dofs(&self) -> (usize, usize) {
        (self.trial.dim(), self.test().dim())
    }

    /// Assembles and solves on the finest mesh.
    pub fn solve(&mut self, observer: Option<IterateObserver<'_>>) -> Result<MeshStep> {
        let level = self.hierarchy.n_levels() - 1;
        let mesh = self.hierarchy.finest().clone();
        let sys = assemble_system(&mesh, &self.trial, self.test(), &self.data)?;
        let tree = PrecondTree::build(&self.hierarchy, &self.test_spaces, self.data.kappa, Some(&sys.m_v), &self.config.precond, self.tree.take())?;
        let schur = SchurPreconditioner::build(self.config.schur, &sys.m_u, self.config.seed)?;
        let precond = BlockPreconditioner { test: tree, schur };
        let x0 = match (&self.last, self.config.prolongate) {
            (Some((l, tr, x)), true) if *l + 1 == self.hierarchy.n_levels() - 1 => {
                let coarse = &self.hierarchy.levels()[*l];
                Some(prolongate(coarse, &mesh, (tr, &self.test_spaces[*l]), (&self.trial, self.test()), x)?)
            }
            _ => None,
        };
        let (x, report) = minres_solve(&sys, &precond, x0.as_deref(), &self.config.policy, self.carried_gamma, observer)?;
        self.tree = Some(precond.test);
        self.carried_gamma = update_carried_gamma(self.carried_gamma, report.gamma);
        let nv = sys.n_test();
        let indicators = element_indicators(&mesh, self.test(), self.data.kappa, &x[..nv]);
        let estimator = indicators.iter().sum::<f64>().sqrt();
        let errors = if self.config.compute_errors && self.data.has_exact_solution() {
            Some(error_report(&mesh, &self.trial, self.test(), &self.data, &x[nv..], &x[..nv])?)
        } else {
            None
        };
        self.last = Some((level, self.trial.clone(), x.clone()));
        let step = MeshStep {
            level,
            n_triangles: mesh.n_triangles(),
            dofs_trial: sys.n_trial(),
            dofs_test: nv,
            x,
            report,
            estimator,
            indicators,
            errors,
            max_h: mesh.max_diameter(),
        };
        self.system = Some(sys);
        Ok(step)
    }

    fn push_level(&mut self) {
        let mesh = self.hierarchy.finest();
        self.test_spaces.push(TestSpace::new(mesh, self.config.p_test));
        self.trial = TrialSpace::new(mesh, self.config.p);
    }

    pub fn refine_uniform(&mut self) -> Result<()> {
        self.hierarchy.refine_uniform()?;
        self.push_level();
        Ok(())
    }

    pub fn refine(&mut self, marked: &[usize]) -> Result<()> {
        self.hierarchy.refine(marked)?;
        self.push_level();
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Refinement {
    /// `levels` uniform refinements after the initial solve.
    Uniform { levels: usize },
    /// Dörfler-driven refinement until the trial dimension exceeds `dof_cap`.
    Adaptive {
        #[serde(default = "default_theta")]
        theta: f64,
        dof_cap: usize,
        #[serde(default = "default_max_steps")]
        max_steps: usize,
    },
}

fn default_theta() -> f64 {
    0.6
}

fn default_max_steps() -> usize {
    60
}

impl Refinement {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Refinement::Uniform { .. } => Ok(()),
            Refinement::Adaptive { theta, .. } if theta > 0.0 && theta <= 1.0 => Ok(()),
            Refinement::Adaptive { theta, .. } => Err(Error::Config(format!("Dörfler parameter must lie in (0, 1], got {theta}"))),
        }
    }
}

/// Summary of one mesh of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub level: usize,
    pub n_triangles: usize,
    pub n_vertices: usize,
    pub dofs_trial: usize,
    pub dofs_test: usize,
    pub iterations: usize,
    pub estimator: f64,
    pub error: Option<f64>,
    pub boosted: Option<f64>,
    pub gamma: Option<f64>,
    pub ritz: Option<f64>,
    pub max_h: f64,
    pub marked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRun {
    pub data: ProblemData,
    pub refinement: Refinement,
    pub steps: Vec<StepSummary>,
    pub reports: Vec<SolveReport>,
}

/// Solve, estimate, mark, refine and prolongate until the refinement rule
/// stops.
pub fn run_adaptive(initial: Triangulation, data: ProblemData, config: SolverConfig, refinement: Refinement) -> Result<AdaptiveRun> {
    let mut solver = AdaptiveSolver::new(initial, data, config)?;
    let mut steps = Vec::new();
    let mut reports = Vec::new();
    let mut step_no = 0;
    loop {
        let step = solver.solve(None)?;
        let done = match refinement {
            Refinement::Uniform { levels } => step_no >= levels,
            Refinement::Adaptive { dof_cap, max_steps, .. } => step.dofs_trial >= dof_cap || step_no >= max_steps,
        };
        let marked = if done {
            Vec::new()
        } else {
            match refinement {
                Refinement::Uniform { .. } => (0..step.n_triangles).collect(),
                Refinement::Adaptive { theta, .. } => dorfler_mark(&step.indicators, theta)?,
            }
        };
        steps.push(StepSummary {
            level: step.level,
            n_triangles: step.n_triangles,
            n_vertices: solver.mesh().n_vertices(),
            dofs_trial: step.dofs_trial,
            dofs_test: step.dofs_test,
            iterations: step.report.iterations,
            estimator: step.estimator,
            error: step.errors.map(|e| e.error),
            boosted: step.errors.map(|e| e.boosted),
            gamma: step.report.gamma,
            ritz: step.report.ritz_negative,
            max_h: step.max_h,
            marked: marked.len(),
        });
        reports.push(step.report);
        if done || marked.is_empty() {
            break;
        }
        match refinement {
            Refinement::Uniform { .. } => solver.refine_uniform()?,
            Refinement::Adaptive { .. } => solver.refine(&marked)?,
        }
        step_no += 1;
    }
    Ok(AdaptiveRun { data, refinement, steps, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_initial_mesh, Domain};
    use crate::minres::StoppingPolicy;
    use crate::problem::DataKind;

    fn tight() -> SolverConfig {
        SolverConfig { p: 1, p_test: 3, policy: StoppingPolicy::residual_drop(1e12), ..Default::default() }
    }

    #[test]
    fn dorfler_examples() {
        let n = 14f64.sqrt();
        let eta: Vec<f64> = [3.0 / n, 2.0 / n, 1.0 / n].iter().map(|v| v * v).collect();
        assert_eq!(dorfler_mark(&eta, 0.6f64.sqrt()).unwrap(), vec![0]);
        assert_eq!(dorfler_mark(&[1.0, 0.0, 2.0], 1.0).unwrap(), vec![0, 2]);
        let eq = vec![1.0; 50];
        assert_eq!(dorfler_mark(&eq, 0.6).unwrap().len(), (0.36f64 * 50.0).ceil() as usize);
        assert!(dorfler_mark(&eq, 0.0).is_err());
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let m = build_initial_mesh(Domain::NonTrapping).unwrap();
        let data = ProblemData::new(4.0, [1.0, 0.0], DataKind::Zero).unwrap();
        let mut s = AdaptiveSolver::new(m, data, tight()).unwrap();
        let step = s.solve(None).unwrap();
        assert_eq!(step.report.iterations, 0);
        assert!(step.x.iter().all(|v| v.norm() == 0.0));
        assert_eq!(step.estimator, 0.0);
    }

    #[test]
    fn pythagoras_and_estimator_on_plane_wave() {
        let m = build_initial_mesh(Domain::UnitSquare).unwrap().refine_uniform().unwrap().refine_uniform().unwrap();
        let data = ProblemData::benchmark(Domain::UnitSquare, 6.0).unwrap();
        let mut s = AdaptiveSolver::new(m, data, tight()).unwrap();
        let step = s.solve(None).unwrap();
        let e = step.errors.unwrap();
        let lhs = e.error * e.error - e.boosted * e.boosted - step.estimator * step.estimator;
        assert!(lhs.abs() <= 1e-8 * e.error * e.error, "{lhs:e} {e:?}");
        assert!((e.correction - step.estimator).abs() <= 1e-9 * step.estimator);
        assert!(e.boosted <= e.error);
        // functional form of the error agrees with direct quadrature
        let f = TrialErrorFunctional::new(s.mesh(), s.trial(), s.test(), &s.data).unwrap();
        let sys = s.system().unwrap();
        let via = f.error(&sys.m_u, step.u());
        assert!((via - e.error).abs() <= 1e-7 * e.error, "{via} vs {}", e.error);
        assert!(f.best_approximation(&sys.m_u).unwrap() <= e.error * (1.0 + 1e-10));
    }

    #[test]
    fn prolongation_reproduces_coarse_solution() {
        let m = build_initial_mesh(Domain::Trapping).unwrap();
        let data = ProblemData::benchmark(Domain::Trapping, 3.0).unwrap();
        let mut s = AdaptiveSolver::new(m, data, tight()).unwrap();
        let step = s.solve(None).unwrap();
        let coarse = s.mesh().clone();
        let (tc, vc) = (s.trial().clone(), s.test().clone());
        s.refine(&[0, 3]).unwrap();
        let x = prolongate(&coarse, s.mesh(), (&tc, &vc), (s.trial(), s.test()), &step.x).unwrap();
        // the estimator is a property of the function, not of the mesh
        let nv = s.test().dim();
        let fine: f64 = element_indicators(s.mesh(), s.test(), 3.0, &x[..nv]).iter().sum();
        assert!((fine.sqrt() - step.estimator).abs() <= 1e-10 * step.estimator);
    }

    #[test]
    fn uniform_run_counts() {
        let m = build_initial_mesh(Domain::UnitSquare).unwrap();
        let data = ProblemData::benchmark(Domain::UnitSquare, 2.0).unwrap();
        let cfg = SolverConfig { policy: StoppingPolicy::residual_drop(1e8), ..Default::default() };
        let run = run_adaptive(m, data, cfg, Refinement::Uniform { levels: 3 }).unwrap();
        assert_eq!(run.steps.len(), 4);
        for s in &run.steps {
            // p = 1: three scalar fields on the vertices; p̃ = 3: Euler formula
            // gives the edge count, all boundary edges are Robin
            assert_eq!(s.dofs_trial, 3 * s.n_vertices);
            let ne = s.n_vertices + s.n_triangles - 1;
            let lagrange = s.n_vertices + 2 * ne + s.n_triangles;
            let rt = 4 * ne + 12 * s.n_triangles;
            let boundary = 2 * ne - 3 * s.n_triangles;
            assert_eq!(s.dofs_test, lagrange + rt - 4 * boundary);
        }
        assert!(run.steps.windows(2).all(|w| w[1].dofs_trial > w[0].dofs_trial));
        let cap0 = run_adaptive(
            build_initial_mesh(Domain::UnitSquare).unwrap(),
            data,
            SolverConfig::default(),
            Refinement::Adaptive { theta: 0.6, dof_cap: 0, max_steps: 10 },
        )
        .unwrap();
        assert_eq!(cap0.steps.len(), 1);
    }
}
