//! Fixtures shared by the benchmarks.

use helmfosls::{assemble_system, build_initial_mesh, Domain, MeshHierarchy, ProblemData, SaddleSystem, TestSpace, TrialSpace};

/// Uniformly refined unit-square hierarchy with the plane-wave system on its
/// finest mesh.
pub struct Fixture {
    pub hierarchy: MeshHierarchy,
    pub spaces: Vec<TestSpace>,
    pub trial: TrialSpace,
    pub data: ProblemData,
    pub system: SaddleSystem,
}

impl Fixture {
    pub fn unit_square(refinements: usize, kappa: f64, p_test: usize) -> Self {
        let mut hierarchy = MeshHierarchy::new(build_initial_mesh(Domain::UnitSquare).expect("built-in mesh"));
        for _ in 0..refinements {
            hierarchy.refine_uniform().expect("uniform refinement");
        }
        let spaces: Vec<TestSpace> = hierarchy.levels().iter().map(|m| TestSpace::new(m, p_test)).collect();
        let mesh = hierarchy.finest();
        let trial = TrialSpace::new(mesh, 1);
        let data = ProblemData::benchmark(Domain::UnitSquare, kappa).expect("positive wave number");
        let system = assemble_system(mesh, &trial, spaces.last().expect("one level"), &data).expect("assembly");
        Self { hierarchy, spaces, trial, data, system }
    }
}
