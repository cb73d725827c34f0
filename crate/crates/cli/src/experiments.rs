//! Experiment recipes. Each writes its CSV tables and `metadata.json` into
//! the output directory and returns the file names.

use std::path::Path;

use serde::Serialize;

use helmfosls::diagnostics::{compute_inf_sup, precond_bounds, Method};
use helmfosls::driver::{dorfler_mark, MeshStep};
use helmfosls::mesh::write_mesh;
use helmfosls::minres::algebraic_error_estimate;
use helmfosls::*;

use crate::output::{config_hash, write_csv, write_metadata};

type Res<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Pollution,
    Condition,
    Solve,
    Adaptive,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Self::Pollution => "pollution",
            Self::Condition => "condition",
            Self::Solve => "solve",
            Self::Adaptive => "adaptive",
        }
    }
}

/// Row of the pollution and condition tables.
#[derive(Serialize)]
struct StudyCsv<'a> {
    config_hash: &'a str,
    kappa: f64,
    p: usize,
    p_tilde: usize,
    #[serde(rename = "dofs_U")]
    dofs_u: usize,
    value: f64,
    method: &'static str,
}

#[derive(Serialize)]
struct SolveCsv<'a> {
    config_hash: &'a str,
    kappa: f64,
    criterion: &'static str,
    level: usize,
    #[serde(rename = "dofs_U")]
    dofs_u: usize,
    #[serde(rename = "dofs_V")]
    dofs_v: usize,
    max_h: f64,
    iterations: usize,
    estimator: f64,
    algebraic_estimate: Option<f64>,
    error: Option<f64>,
    boosted: Option<f64>,
}

#[derive(Serialize)]
struct TraceCsv<'a> {
    config_hash: &'a str,
    kappa: f64,
    criterion: &'static str,
    level: usize,
    k: usize,
    residual: f64,
    ritz: Option<f64>,
    gamma: Option<f64>,
    estimator: Option<f64>,
}

#[derive(Serialize)]
struct AdaptiveCsv<'a> {
    config_hash: &'a str,
    kappa: f64,
    level: usize,
    n_triangles: usize,
    #[serde(rename = "dofs_U")]
    dofs_u: usize,
    #[serde(rename = "dofs_V")]
    dofs_v: usize,
    iterations: usize,
    estimator: f64,
    algebraic_estimate: Option<f64>,
    algebraic_ratio: Option<f64>,
    error: Option<f64>,
    boosted: Option<f64>,
    gamma: Option<f64>,
    marked: usize,
}

pub fn run_experiment(kind: Experiment, cfg: &RunConfig, out: &Path, warnings: &[String]) -> Res<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let hash = config_hash(cfg);
    let mut files = match kind {
        Experiment::Pollution => pollution(cfg, &hash, out)?,
        Experiment::Condition => condition(cfg, &hash, out)?,
        Experiment::Solve => solve(cfg, &hash, out)?,
        Experiment::Adaptive => adaptive(cfg, &hash, out)?,
    };
    files.push("metadata.json".to_string());
    write_metadata(out, kind.name(), cfg, warnings, &files)?;
    Ok(files)
}

fn uniform_levels(cfg: &RunConfig, what: &str) -> Res<usize> {
    match cfg.refinement {
        Refinement::Uniform { levels } => Ok(levels),
        Refinement::Adaptive { .. } => Err(format!("the {what} experiment needs uniform refinement").into()),
    }
}

fn uniform_hierarchy(cfg: &RunConfig, kappa: f64, levels: usize) -> Res<(MeshHierarchy, ProblemData)> {
    let (mesh, data) = cfg.make_problem_at(kappa)?;
    let mut h = MeshHierarchy::new(mesh);
    for _ in 0..levels {
        h.refine_uniform()?;
    }
    Ok((h, data))
}

/// Inf-sup constants per mesh, one table per test degree.
fn pollution(cfg: &RunConfig, hash: &str, out: &Path) -> Res<Vec<String>> {
    let levels = uniform_levels(cfg, "pollution")?;
    let mut files = Vec::new();
    for &pt in &cfg.study.p_tildes {
        let mut rows = Vec::new();
        for &kappa in &cfg.study.kappas {
            let (h, data) = uniform_hierarchy(cfg, kappa, levels)?;
            let spaces: Vec<TestSpace> = h.levels().iter().map(|m| TestSpace::new(m, pt)).collect();
            let mut tree = None;
            for (l, mesh) in h.levels().iter().enumerate() {
                let sys = assemble_system(mesh, &TrialSpace::new(mesh, cfg.p), &spaces[l], &data)?;
                if sys.dim() > cfg.study.dense_cap {
                    let mut prefix = h.clone();
                    prefix.truncate(l + 1);
                    tree = Some(PrecondTree::build(&prefix, &spaces[..=l], kappa, Some(&sys.m_v), &cfg.precond, tree.take())?);
                }
                let (gamma, method) = compute_inf_sup(&sys, tree.as_ref(), cfg.study.dense_cap, cfg.seed)?;
                rows.push(StudyCsv { config_hash: hash, kappa, p: cfg.p, p_tilde: pt, dofs_u: sys.n_trial(), value: gamma, method: method.as_str() });
            }
        }
        let name = format!("pollution_ptilde{pt}.csv");
        write_csv(out, &name, &rows)?;
        files.push(name);
    }
    Ok(files)
}

/// Condition numbers of the multilevel-preconditioned test Gram matrix.
fn condition(cfg: &RunConfig, hash: &str, out: &Path) -> Res<Vec<String>> {
    let levels = uniform_levels(cfg, "condition")?;
    let mut modes = vec![(CycleMode::Multigrid, "condition_multigrid.csv")];
    if cfg.study.two_grid {
        modes.push((CycleMode::TwoGrid, "condition_two_grid.csv"));
    }
    let mut files = Vec::new();
    for (mode, name) in modes {
        let opts = PrecondOptions { mode, ..cfg.precond.clone() };
        let mut rows = Vec::new();
        for &kappa in &cfg.study.kappas {
            let (h, _) = uniform_hierarchy(cfg, kappa, levels)?;
            let spaces: Vec<TestSpace> = h.levels().iter().map(|m| TestSpace::new(m, cfg.p_tilde)).collect();
            let mut tree = None;
            for l in 0..h.n_levels() {
                let mut prefix = h.clone();
                prefix.truncate(l + 1);
                let m = assembly::assemble_test_gram(prefix.finest(), &spaces[l], kappa);
                let t = PrecondTree::build(&prefix, &spaces[..=l], kappa, Some(&m), &opts, tree.take())?;
                let method = if m.nrows() <= cfg.study.dense_cap / 2 { Method::Dense } else { Method::Lanczos };
                let b = precond_bounds(&m, &t, method, cfg.seed)?;
                let dofs_u = TrialSpace::new(prefix.finest(), cfg.p).dim();
                rows.push(StudyCsv { config_hash: hash, kappa, p: cfg.p, p_tilde: cfg.p_tilde, dofs_u, value: b.condition(), method: method.as_str() });
                tree = Some(t);
            }
        }
        write_csv(out, name, &rows)?;
        files.push(name.to_string());
    }
    Ok(files)
}

fn final_residual(step: &MeshStep) -> f64 {
    step.report.records.last().map_or(0.0, |r| r.residual)
}

fn algebraic_estimate(step: &MeshStep) -> Option<f64> {
    step.report.gamma.map(|g| algebraic_error_estimate(final_residual(step), g))
}

/// Runs the configured refinement sequence, calling `visit` with every mesh
/// step and the number of triangles marked on it.
fn sequence(cfg: &RunConfig, data: ProblemData, mesh: Triangulation, solver_cfg: SolverConfig, mut visit: impl FnMut(&MeshStep, usize)) -> Res<AdaptiveSolver> {
    let mut s = AdaptiveSolver::new(mesh, data, solver_cfg)?;
    let mut step_no = 0;
    loop {
        let st = s.solve(None)?;
        let (done, marked) = match cfg.refinement {
            Refinement::Uniform { levels } => (step_no >= levels, Vec::new()),
            Refinement::Adaptive { theta, dof_cap, max_steps } => {
                let done = st.dofs_trial >= dof_cap || step_no >= max_steps;
                (done, if done { Vec::new() } else { dorfler_mark(&st.indicators, theta)? })
            }
        };
        let n_marked = match cfg.refinement {
            Refinement::Uniform { .. } if !done => st.n_triangles,
            _ => marked.len(),
        };
        visit(&st, n_marked);
        if done {
            return Ok(s);
        }
        match cfg.refinement {
            Refinement::Uniform { .. } => s.refine_uniform()?,
            Refinement::Adaptive { .. } => s.refine(&marked)?,
        }
        step_no += 1;
    }
}

/// Iteration counts per mesh under both stopping criteria.
fn solve(cfg: &RunConfig, hash: &str, out: &Path) -> Res<Vec<String>> {
    let crit2 = match cfg.stopping.kind {
        StoppingKind::AlgebraicVsTotal { .. } => cfg.stopping,
        StoppingKind::ResidualDrop { .. } => StoppingPolicy::default(),
    };
    let mut runs = vec![
        ("residual_drop", StoppingPolicy { kind: StoppingKind::ResidualDrop { factor: cfg.study.residual_drop }, ..crit2 }, cfg.prolongate),
        ("algebraic_vs_total", crit2, cfg.prolongate),
    ];
    if cfg.study.zero_start {
        runs.push(("algebraic_vs_total_zero_start", crit2, false));
    }
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    for &kappa in &cfg.study.kappas {
        let (mesh, data) = cfg.make_problem_at(kappa)?;
        for &(criterion, policy, prolongate) in &runs {
            let solver_cfg = SolverConfig { policy, prolongate, ..cfg.solver_config() };
            sequence(cfg, data, mesh.clone(), solver_cfg, |st, _| {
                rows.push(SolveCsv {
                    config_hash: hash,
                    kappa,
                    criterion,
                    level: st.level,
                    dofs_u: st.dofs_trial,
                    dofs_v: st.dofs_test,
                    max_h: st.max_h,
                    iterations: st.report.iterations,
                    estimator: st.estimator,
                    algebraic_estimate: algebraic_estimate(st),
                    error: st.errors.map(|e| e.error),
                    boosted: st.errors.map(|e| e.boosted),
                });
                for r in &st.report.records {
                    trace.push(TraceCsv {
                        config_hash: hash,
                        kappa,
                        criterion,
                        level: st.level,
                        k: r.k,
                        residual: r.residual,
                        ritz: r.ritz,
                        gamma: r.gamma,
                        estimator: r.estimator,
                    });
                }
            })?;
        }
    }
    write_csv(out, "solve.csv", &rows)?;
    write_csv(out, "solve_trace.csv", &trace)?;
    Ok(vec!["solve.csv".into(), "solve_trace.csv".into()])
}

/// Estimator and algebraic-error ratio along the refinement loop.
fn adaptive(cfg: &RunConfig, hash: &str, out: &Path) -> Res<Vec<String>> {
    let (mesh, data) = cfg.make_problem()?;
    let mut rows = Vec::new();
    let mut reports = String::new();
    let s = sequence(cfg, data, mesh, cfg.solver_config(), |st, marked| {
        let alg = algebraic_estimate(st);
        rows.push(AdaptiveCsv {
            config_hash: hash,
            kappa: cfg.kappa,
            level: st.level,
            n_triangles: st.n_triangles,
            dofs_u: st.dofs_trial,
            dofs_v: st.dofs_test,
            iterations: st.report.iterations,
            estimator: st.estimator,
            algebraic_estimate: alg,
            algebraic_ratio: alg.map(|a| a / st.estimator),
            error: st.errors.map(|e| e.error),
            boosted: st.errors.map(|e| e.boosted),
            gamma: st.report.gamma,
            marked,
        });
        reports.push_str(&format!("# level {}\n{}", st.level, st.report.to_text()));
    })?;
    write_csv(out, "adaptive.csv", &rows)?;
    std::fs::write(out.join("final.mesh"), write_mesh(s.mesh()))?;
    std::fs::write(out.join("solve_reports.txt"), reports)?;
    Ok(vec!["adaptive.csv".into(), "final.mesh".into(), "solve_reports.txt".into()])
}
