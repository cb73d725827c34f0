//! Run configuration read from TOML.
//!
//! ```toml
//! problem = "unit_square"        # unit_square | non_trapping | trapping | custom
//! kappa = 10.0
//! p = 1
//! p_tilde = 3
//! seed = 0
//!
//! [refinement]
//! kind = "adaptive"              # or "uniform" with `levels`
//! theta = 0.6
//! dof_cap = 20000
//!
//! [precond]
//! mode = "multigrid"             # or "two_grid"
//! m_schedule = [1, 1, 2]
//!
//! [schur]
//! kind = "chebyshev"
//! epsilon = 0.1
//!
//! [stopping]
//! kind = "algebraic_vs_total"
//! fraction = 0.5
//! ```
//!
//! Every table and key is optional; see [`RunConfig::default`].

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::driver::{Refinement, SolverConfig};
use crate::error::{Error, Result};
use crate::mesh::{build_initial_mesh, load_mesh, Domain, Triangulation};
use crate::minres::StoppingPolicy;
use crate::precond::{PrecondOptions, SchurMode};
use crate::problem::{DataKind, ProblemData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    UnitSquare,
    NonTrapping,
    Trapping,
    Custom,
}

/// Mesh file and data for `problem = "custom"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomProblem {
    pub mesh: PathBuf,
    pub data: DataKind,
    /// direction of the plane wave in degrees
    #[serde(default)]
    pub angle_deg: f64,
}

/// Parameter sweeps of the study experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyOptions {
    pub kappas: Vec<f64>,
    pub p_tildes: Vec<usize>,
    /// saddle dimension up to which dense eigensolves are used
    pub dense_cap: usize,
    /// residual reduction of the reference stopping rule
    pub residual_drop: f64,
    /// also report the two-grid variant in the condition study
    pub two_grid: bool,
    /// also run every mesh from a zero start in the solve study
    pub zero_start: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { kappas: vec![10.0, 20.0, 40.0], p_tildes: vec![3, 4], dense_cap: 3000, residual_drop: 1e8, two_grid: true, zero_start: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub kappa: f64,
    pub p: usize,
    pub p_tilde: usize,
    pub seed: u64,
    /// output directory, overridden on the command line
    pub out: Option<PathBuf>,
    pub prolongate: bool,
    pub refinement: Refinement,
    pub precond: PrecondOptions,
    pub schur: SchurMode,
    pub stopping: StoppingPolicy,
    pub study: StudyOptions,
    pub custom: Option<CustomProblem>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::UnitSquare,
            kappa: 10.0,
            p: 1,
            p_tilde: 3,
            seed: 0,
            out: None,
            prolongate: true,
            refinement: Refinement::Uniform { levels: 3 },
            precond: PrecondOptions::default(),
            schur: SchurMode::Identity,
            stopping: StoppingPolicy::default(),
            study: StudyOptions::default(),
            custom: None,
        }
    }
}

impl RunConfig {
    /// Parse and validate; returns the configuration and its warnings.
    pub fn from_toml(text: &str) -> Result<(Self, Vec<String>)> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let warnings = cfg.validate()?;
        Ok((cfg, warnings))
    }

    /// Canonical serialization; two configurations with equal values give
    /// equal text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.study.kappas.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::Config("study kappas must be positive".into()));
        }
        if self.problem == ProblemKind::Custom && self.custom.is_none() {
            return Err(Error::Config("problem = \"custom\" needs a [custom] table".into()));
        }
        self.refinement.validate()?;
        self.solver_config().validate()?;
        let mut warnings = Vec::new();
        for pt in std::iter::once(self.p_tilde).chain(self.study.p_tildes.iter().copied()) {
            if pt < self.p + 2 {
                warnings.push(format!("p_tilde = {pt} is below p + 2 = {}; the inf-sup constant may degrade", self.p + 2));
            }
        }
        Ok(warnings)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            p: self.p,
            p_test: self.p_tilde,
            precond: self.precond.clone(),
            schur: self.schur,
            policy: self.stopping,
            prolongate: self.prolongate,
            compute_errors: true,
            seed: self.seed,
        }
    }

    /// Initial mesh and data at wave number `kappa`.
    pub fn make_problem_at(&self, kappa: f64) -> Result<(Triangulation, ProblemData)> {
        let domain = match self.problem {
            ProblemKind::UnitSquare => Domain::UnitSquare,
            ProblemKind::NonTrapping => Domain::NonTrapping,
            ProblemKind::Trapping => Domain::Trapping,
            ProblemKind::Custom => {
                let c = self.custom.as_ref().ok_or_else(|| Error::Config("missing [custom] table".into()))?;
                let a = c.angle_deg * PI / 180.0;
                return Ok((load_mesh(&c.mesh)?, ProblemData::new(kappa, [a.cos(), a.sin()], c.data)?));
            }
        };
        Ok((build_initial_mesh(domain)?, ProblemData::benchmark(domain, kappa)?))
    }

    pub fn make_problem(&self) -> Result<(Triangulation, ProblemData)> {
        self.make_problem_at(self.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minres::StoppingKind;

    #[test]
    fn empty_file_gives_defaults() {
        let (c, w) = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(w.is_empty());
        assert_eq!(c.stopping.kind, StoppingKind::AlgebraicVsTotal { fraction: 0.5 });
    }

    #[test]
    fn full_file_round_trips() {
        let text = r#"
problem = "non_trapping"
kappa = 20
p_tilde = 4
[refinement]
kind = "adaptive"
dof_cap = 5000
[precond]
mode = "two_grid"
m_schedule = [1, 2]
[schur]
kind = "chebyshev"
epsilon = 0.1
[stopping]
kind = "residual_drop"
factor = 1e8
"#;
        let (c, _) = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.refinement, Refinement::Adaptive { theta: 0.6, dof_cap: 5000, max_steps: 60 });
        assert_eq!(c.stopping.kind, StoppingKind::ResidualDrop { factor: 1e8 });
        assert_eq!(c.precond.smoothing_steps(1), 2);
        let (back, _) = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let (mesh, data) = c.make_problem().unwrap();
        assert!(mesh.n_triangles() > 0 && !data.has_exact_solution());
    }

    #[test]
    fn warnings_and_errors() {
        let (_, w) = RunConfig::from_toml("p = 2\np_tilde = 3").unwrap();
        assert!(!w.is_empty());
        assert!(RunConfig::from_toml("kappa = -1").is_err());
        assert!(RunConfig::from_toml("problem = \"disk\"").is_err());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("problem = \"custom\"").is_err());
        assert!(RunConfig::from_toml("[refinement]\nkind = \"adaptive\"\ntheta = 1.5\ndof_cap = 10").is_err());
    }

    #[test]
    fn custom_problem_reads_mesh_file() {
        let dir = std::env::temp_dir().join(format!("helmfosls-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("square.mesh");
        std::fs::write(&path, crate::mesh::write_mesh(&build_initial_mesh(Domain::UnitSquare).unwrap())).unwrap();
        let text = format!("problem = \"custom\"\n[custom]\nmesh = {:?}\ndata = \"plane_wave\"\nangle_deg = 60", path.to_str().unwrap());
        let (c, _) = RunConfig::from_toml(&text).unwrap();
        let (mesh, data) = c.make_problem().unwrap();
        let (m0, d0) = RunConfig::default().make_problem().unwrap();
        assert_eq!(mesh.n_triangles(), m0.n_triangles());
        assert!((data.direction[0] - d0.direction[0]).abs() < 1e-14);
        std::fs::remove_dir_all(dir).ok();
    }
}
