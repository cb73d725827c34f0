//! Problem data: wave number, sources and boundary data of the first-order
//! system, and the plane-wave solutions used by the benchmarks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, I};
use crate::mesh::{BoundaryTag, Domain, Point};

/// Kind of data attached to a domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// The plane wave is the exact solution; all boundary data are its traces.
    PlaneWave,
    /// Soft scattering of an incoming plane wave: `f = 0`, `g_D = 0`, Robin
    /// data of the incoming wave; the solution is unknown.
    Scattering,
    /// Homogeneous data.
    Zero,
}

/// Data of `−(1/κ) div u − φ = f1`, `(1/κ)∇φ − u = f2` with boundary
/// conditions `φ = κ g_D`, `u·n = κ g` (Neumann) and `u·n − iφ = κ g`
/// (Robin). All supported kinds have `f1 = 0` and `f2 = 0`: plane waves
/// solve the homogeneous equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemData {
    pub kappa: f64,
    /// unit propagation direction `r` of `φ = exp(−iκ r·x)`
    pub direction: [f64; 2],
    pub kind: DataKind,
}

impl ProblemData {
    pub fn new(kappa: f64, direction: [f64; 2], kind: DataKind) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Config(format!("wave number must be positive, got {kappa}")));
        }
        let n = direction[0].hypot(direction[1]);
        if (n - 1.0).abs() > 1e-14 {
            return Err(Error::Config(format!("direction must have unit length, got {n}")));
        }
        Ok(Self { kappa, direction, kind })
    }

    /// The benchmark data of a domain: the prescribed plane wave on the unit
    /// square and soft scattering on the two obstacle domains.
    pub fn benchmark(domain: Domain, kappa: f64) -> Result<Self> {
        let (angle, kind) = match domain {
            Domain::UnitSquare => (PI / 3.0, DataKind::PlaneWave),
            Domain::NonTrapping => (PI / 3.0, DataKind::Scattering),
            Domain::Trapping => (9.0 * PI / 10.0, DataKind::Scattering),
        };
        Self::new(kappa, [angle.cos(), angle.sin()], kind)
    }

    pub fn has_exact_solution(&self) -> bool {
        matches!(self.kind, DataKind::PlaneWave | DataKind::Zero)
    }

    /// `φ = exp(−iκ r·x)`.
    pub fn plane_wave(&self, x: Point) -> C64 {
        let s = -self.kappa * (self.direction[0] * x[0] + self.direction[1] * x[1]);
        C64::new(s.cos(), s.sin())
    }

    /// Exact `(φ, u)` when known.
    pub fn exact(&self, x: Point) -> Option<[C64; 3]> {
        match self.kind {
            DataKind::PlaneWave => {
                let phi = self.plane_wave(x);
                // u = (1/κ)∇φ = −i r φ
                Some([phi, -I * self.direction[0] * phi, -I * self.direction[1] * phi])
            }
            DataKind::Zero => Some([C64::new(0.0, 0.0); 3]),
            DataKind::Scattering => None,
        }
    }

    /// Boundary datum `g_D` (Dirichlet) or `g` (Neumann, Robin) at `x` with
    /// outward unit normal `n`.
    pub fn boundary(&self, tag: BoundaryTag, x: Point, n: [f64; 2]) -> C64 {
        let zero = C64::new(0.0, 0.0);
        match self.kind {
            DataKind::Zero => zero,
            DataKind::PlaneWave => {
                let [phi, u0, u1] = self.exact(x).expect("plane wave");
                let un = u0 * n[0] + u1 * n[1];
                match tag {
                    BoundaryTag::Dirichlet => phi / self.kappa,
                    BoundaryTag::Neumann => un / self.kappa,
                    BoundaryTag::Robin => (un - I * phi) / self.kappa,
                }
            }
            DataKind::Scattering => match tag {
                BoundaryTag::Robin => {
                    let rn = self.direction[0] * n[0] + self.direction[1] * n[1];
                    -I * (rn + 1.0) * self.plane_wave(x) / self.kappa
                }
                BoundaryTag::Dirichlet | BoundaryTag::Neumann => zero,
            },
        }
    }
}
