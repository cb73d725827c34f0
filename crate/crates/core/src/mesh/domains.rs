//! Initial triangulations of the three benchmark domains.

use serde::{Deserialize, Serialize};

use super::{BoundaryTag, Point, Triangulation};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `(0,1)^2`, Robin everywhere.
    UnitSquare,
    /// `(-1,1)^2` minus the arrowhead `{2|x| - 1/2 < y < |x|}`.
    NonTrapping,
    /// `(-1,1)^2` minus the union of the wedge pair and the cavity block.
    Trapping,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::UnitSquare => "unit_square",
            Domain::NonTrapping => "non_trapping",
            Domain::Trapping => "trapping",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unit_square" => Ok(Domain::UnitSquare),
            "non_trapping" => Ok(Domain::NonTrapping),
            "trapping" => Ok(Domain::Trapping),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }
}

/// Initial mesh of a benchmark domain with a matching newest-vertex
/// assignment.
pub fn build_initial_mesh(domain: Domain) -> Result<Triangulation> {
    let mesh = match domain {
        Domain::UnitSquare => unit_square()?,
        Domain::NonTrapping => with_matching(non_trapping()?)?,
        Domain::Trapping => with_matching(trapping()?)?,
    };
    mesh.check_matching()?;
    Ok(mesh)
}

fn with_matching(mesh: Triangulation) -> Result<Triangulation> {
    match mesh.find_matching_assignment() {
        Some(a) => mesh.with_newest(&a),
        None => mesh.centroid_split(),
    }
}

fn unit_square() -> Result<Triangulation> {
    let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
    let t = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
    let r = BoundaryTag::Robin;
    Triangulation::new(v, t, &[(0, 1, r), (1, 2, r), (2, 3, r), (3, 0, r)])
}

fn non_trapping() -> Result<Triangulation> {
    let v = vec![
        [-1.0, -1.0], // 0 A
        [1.0, -1.0],  // 1 B
        [1.0, 1.0],   // 2 C
        [-1.0, 1.0],  // 3 D
        [0.0, -1.0],  // 4 E
        [1.0, 0.0],   // 5 F
        [0.0, 1.0],   // 6 G
        [-1.0, 0.0],  // 7 H
        [-0.5, 0.5],  // 8 P, obstacle tip
        [0.0, 0.0],   // 9 O, obstacle notch
        [0.5, 0.5],   // 10 Q, obstacle tip
        [0.0, -0.5],  // 11 R, obstacle bottom
        [0.0, 0.5],   // 12 S
    ];
    let t = vec![
        [0, 4, 11],
        [4, 1, 11],
        [11, 1, 10],
        [1, 5, 10],
        [5, 2, 10],
        [2, 6, 10],
        [10, 9, 12],
        [10, 12, 6],
        [9, 8, 12],
        [12, 8, 6],
        [6, 3, 8],
        [3, 7, 8],
        [7, 0, 8],
        [0, 11, 8],
    ];
    let (r, d) = (BoundaryTag::Robin, BoundaryTag::Dirichlet);
    let b = [(0, 4, r), (4, 1, r), (1, 5, r), (5, 2, r), (2, 6, r), (6, 3, r), (3, 7, r), (7, 0, r), (11, 10, d), (10, 9, d), (9, 8, d), (8, 11, d)];
    Triangulation::new(v, t, &b)
}

fn trapping() -> Result<Triangulation> {
    // Outer square with the obstacle as a notch entering from the left side;
    // counter-clockwise.
    let outer: Vec<Point> = vec![
        [-1.0, -1.0],
        [1.0, -1.0],
        [1.0, 1.0],
        [-1.0, 1.0],
        [-1.0, 0.75],
        [-0.5, 0.5],
        [0.0, 0.5],
        [-0.1, 0.3],
        [0.0, 0.25],
        [-0.125, 0.25],
        [-0.25, 0.0],
        [-0.125, -0.25],
        [0.0, -0.25],
        [-0.1, -0.3],
        [0.0, -0.5],
        [-0.5, -0.5],
        [-1.0, -0.75],
    ];
    // Robin edges are the pieces of the outer square: (16,0),(0,1),(1,2),(2,3),(3,4).
    let robin_from = [16usize, 0, 1, 2, 3];
    let n = outer.len();
    let mut vertices = outer.clone();
    let mut tris = ear_clip(&outer);
    let mut boundary = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let tag = if robin_from.contains(&i) { BoundaryTag::Robin } else { BoundaryTag::Dirichlet };
        boundary.push((i, j, tag));
    }
    // The cavity (-1,-1/2) x (-1/4,1/4) is enclosed by the obstacle and the
    // left side of the square, cut along its diagonals.
    let base = vertices.len();
    vertices.extend_from_slice(&[[-1.0, -0.25], [-0.5, -0.25], [-0.5, 0.25], [-1.0, 0.25], [-0.75, 0.0]]);
    for k in 0..4 {
        tris.push([base + k, base + (k + 1) % 4, base + 4]);
    }
    boundary.push((base, base + 1, BoundaryTag::Dirichlet));
    boundary.push((base + 1, base + 2, BoundaryTag::Dirichlet));
    boundary.push((base + 2, base + 3, BoundaryTag::Dirichlet));
    boundary.push((base + 3, base, BoundaryTag::Robin));
    Triangulation::new(vertices, tris, &boundary)
}

/// Ear clipping of a simple counter-clockwise polygon. Among the available
/// ears the one with the largest minimal angle is cut first (ties by index).
fn ear_clip(poly: &[Point]) -> Vec<[usize; 3]> {
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let min_angle = |a: Point, b: Point, c: Point| {
        let ang = |p: Point, q: Point, r: Point| {
            let u = [q[0] - p[0], q[1] - p[1]];
            let v = [r[0] - p[0], r[1] - p[1]];
            (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1])
        };
        ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
    };
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let mut best: Option<(f64, usize)> = None;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(a, b, c) <= 1e-14 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = poly[j];
                cross(a, b, p) >= -1e-14 && cross(b, c, p) >= -1e-14 && cross(c, a, p) >= -1e-14
            });
            if blocked {
                continue;
            }
            let q = min_angle(a, b, c);
            if best.is_none_or(|(bq, _)| q > bq + 1e-12) {
                best = Some((q, k));
            }
        }
        let k = best.expect("a simple polygon always has an ear").1;
        let m = idx.len();
        out.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
        idx.remove(k);
    }
    out.push([idx[0], idx[1], idx[2]]);
    out
}
