//! Conforming triangulations with boundary tags, newest-vertex bisection and
//! nested level hierarchies.

mod domains;
mod hierarchy;
mod io;
mod refine;

pub use domains::{build_initial_mesh, Domain};
pub use hierarchy::{all_patches, MeshHierarchy, VertexPatch};
pub use io::{load_mesh, read_mesh, write_mesh};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
    Robin,
}

impl BoundaryTag {
    pub fn letter(self) -> char {
        match self {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::Neumann => 'N',
            BoundaryTag::Robin => 'R',
        }
    }

    pub fn from_letter(c: &str) -> Option<Self> {
        match c {
            "D" => Some(BoundaryTag::Dirichlet),
            "N" => Some(BoundaryTag::Neumann),
            "R" => Some(BoundaryTag::Robin),
            _ => None,
        }
    }
}

/// A conforming triangulation.
///
/// Triangles are stored counter-clockwise with the newest vertex in local
/// position 2, so the refinement edge is the local edge 2 = (v0, v1). Local
/// edge `i` is the one opposite vertex `i`, running from `v[i+1]` to `v[i+2]`.
/// Global edges are stored with ascending vertex ids.
#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    generation: Vec<u32>,
    parent: Vec<Option<usize>>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<[Option<usize>; 2]>,
    edge_tag: Vec<Option<BoundaryTag>>,
    vertex_tris: Vec<Vec<usize>>,
}

/// Equality of geometry, topology, tags and generations. The parent links
/// describe the relation to some other mesh and are ignored.
impl PartialEq for Triangulation {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles && self.generation == other.generation && self.edge_tag == other.edge_tag
    }
}

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(p: &[Point], t: [usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| p[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

impl Triangulation {
    /// Builds and validates a triangulation. Triangles are given with the
    /// newest vertex last; clockwise input is reoriented by swapping the
    /// first two vertices. Every boundary edge must be tagged exactly once.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: &[(usize, usize, BoundaryTag)]) -> Result<Self> {
        let n = triangles.len();
        Self::with_history(vertices, triangles, boundary, vec![0; n], vec![None; n])
    }

    pub(crate) fn with_history(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        boundary: &[(usize, usize, BoundaryTag)],
        generation: Vec<u32>,
        parent: Vec<Option<usize>>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidGeometry("no triangles".into()));
        }
        let nv = vertices.len();
        let mut seen = HashMap::new();
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidGeometry(format!("triangle {k} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidGeometry(format!("triangle {k} repeats a vertex")));
            }
            let area = signed_area(&vertices, *t);
            let scale = t.iter().map(|&v| vertices[v][0].abs().max(vertices[v][1].abs())).fold(1.0f64, f64::max);
            if !area.is_finite() || area.abs() <= 1e-14 * scale * scale {
                return Err(Error::InvalidGeometry(format!("triangle {k} has zero area")));
            }
            if area < 0.0 {
                t.swap(0, 1);
            }
            let mut key = *t;
            key.sort_unstable();
            if let Some(prev) = seen.insert(key, k) {
                return Err(Error::InvalidGeometry(format!("triangles {prev} and {k} coincide")));
            }
        }

        let mut edges = Vec::new();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut edge_tris: Vec<[Option<usize>; 2]> = Vec::new();
        for (k, t) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for i in 0..3 {
                let key = edge_key(t[(i + 1) % 3], t[(i + 2) % 3]);
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tris.push([None, None]);
                    edges.len() - 1
                });
                te[i] = e;
                match edge_tris[e] {
                    [None, _] => edge_tris[e][0] = Some(k),
                    [Some(_), None] => edge_tris[e][1] = Some(k),
                    _ => return Err(Error::InvalidGeometry(format!("edge ({}, {}) is shared by more than two triangles", key.0, key.1))),
                }
            }
            tri_edges.push(te);
        }

        let mut edge_tag = vec![None; edges.len()];
        for &(a, b, tag) in boundary {
            let Some(&e) = index.get(&edge_key(a, b)) else {
                return Err(Error::InvalidGeometry(format!("tagged edge ({a}, {b}) is not a mesh edge")));
            };
            if edge_tris[e][1].is_some() {
                return Err(Error::InvalidGeometry(format!("interior edge ({a}, {b}) carries a boundary tag")));
            }
            if edge_tag[e].replace(tag).is_some() {
                return Err(Error::InvalidGeometry(format!("edge ({a}, {b}) is tagged twice")));
            }
        }
        for (e, tris) in edge_tris.iter().enumerate() {
            if tris[1].is_none() && edge_tag[e].is_none() {
                let [a, b] = edges[e];
                return Err(Error::InvalidGeometry(format!("boundary edge ({a}, {b}) has no tag")));
            }
        }

        let mut vertex_tris = vec![Vec::new(); nv];
        for (k, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_tris[v].push(k);
            }
        }
        Ok(Self { vertices, triangles, generation, parent, edges, tri_edges, edge_tris, edge_tag, vertex_tris })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge ids of the local edges of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_tris[e]
    }

    pub fn boundary_tag(&self, e: usize) -> Option<BoundaryTag> {
        self.edge_tag[e]
    }

    /// All tagged boundary edges as `(va, vb, tag)` with `va < vb`.
    pub fn boundary_edges(&self) -> Vec<(usize, usize, BoundaryTag)> {
        self.edges.iter().zip(&self.edge_tag).filter_map(|(&[a, b], t)| t.map(|t| (a, b, t))).collect()
    }

    pub fn generation(&self, t: usize) -> u32 {
        self.generation[t]
    }

    /// Index of the triangle of the previous level containing `t`, if this
    /// mesh was produced by refinement.
    pub fn parent(&self, t: usize) -> Option<usize> {
        self.parent[t]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t])
    }

    pub fn coords(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.coords(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].map(|v| self.vertices[v]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    /// Diameter-type mesh size `max_K diam(K)`.
    pub fn max_diameter(&self) -> f64 {
        (0..self.n_edges()).map(|e| self.edge_length(e)).fold(0.0, f64::max)
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let [a, b, c] = self.coords(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (x[1] - a[1]) * (c[0] - a[0])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Interior angles of triangle `t`, in radians.
    pub fn angles(&self, t: usize) -> [f64; 3] {
        let p = self.coords(t);
        let mut out = [0.0; 3];
        for i in 0..3 {
            let a = p[i];
            let b = p[(i + 1) % 3];
            let c = p[(i + 2) % 3];
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            out[i] = (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1]);
        }
        out
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.n_triangles()).flat_map(|t| self.angles(t)).fold(f64::INFINITY, f64::min)
    }

    /// Whether every interior refinement edge is also the refinement edge of
    /// the neighbor across it.
    pub fn is_matching(&self) -> bool {
        self.matching_violation().is_none()
    }

    pub(crate) fn matching_violation(&self) -> Option<(usize, usize)> {
        for t in 0..self.n_triangles() {
            let e = self.tri_edges[t][2];
            let [a, b] = self.edge_tris[e];
            let other = if a == Some(t) { b } else { a };
            if let Some(o) = other {
                if self.tri_edges[o][2] != e {
                    return Some((t, o));
                }
            }
        }
        None
    }

    pub fn check_matching(&self) -> Result<()> {
        match self.matching_violation() {
            None => Ok(()),
            Some((t, o)) => Err(Error::NonMatchingMesh(format!("the refinement edge of triangle {t} is not the refinement edge of its neighbor {o}"))),
        }
    }

    /// Conformity check: every edge has one or two incident triangles, and
    /// exactly the single-incidence edges are tagged.
    pub fn is_conforming(&self) -> bool {
        self.edge_tris.iter().zip(&self.edge_tag).all(|(t, tag)| t[0].is_some() && (t[1].is_none() == tag.is_some())) && self.no_hanging_vertices()
    }

    fn no_hanging_vertices(&self) -> bool {
        // a hanging vertex lies in the relative interior of some edge
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let len = self.edge_length(e);
            for t in self.vertex_tris[a].iter().chain(&self.vertex_tris[b]) {
                for &v in &self.triangles[*t] {
                    if v == a || v == b {
                        continue;
                    }
                    let p = self.vertices[v];
                    let cross = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
                    let s = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / (len * len);
                    if cross.abs() <= 1e-12 * len * len && s > 1e-12 && s < 1.0 - 1e-12 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Replaces the newest-vertex assignment. `newest[t]` is the local index
    /// (0, 1 or 2) of the vertex that becomes newest.
    pub fn with_newest(&self, newest: &[usize]) -> Result<Self> {
        let tris = self.triangles.iter().zip(newest).map(|(t, &k)| [t[(k + 1) % 3], t[(k + 2) % 3], t[k]]).collect();
        Self::with_history(self.vertices.clone(), tris, &self.boundary_edges(), self.generation.clone(), self.parent.clone())
    }

    /// Searches for a matching newest-vertex assignment by backtracking,
    /// preferring long refinement edges. Returns `None` if none exists.
    pub fn find_matching_assignment(&self) -> Option<Vec<usize>> {
        let nt = self.n_triangles();
        let mut choice: Vec<Option<usize>> = vec![None; nt];
        // candidate local edges per triangle, longest first
        let cands: Vec<Vec<usize>> = (0..nt)
            .map(|t| {
                let mut c = vec![0, 1, 2];
                c.sort_by(|&i, &j| {
                    let li = self.edge_length(self.tri_edges[t][i]);
                    let lj = self.edge_length(self.tri_edges[t][j]);
                    lj.total_cmp(&li).then(i.cmp(&j))
                });
                c
            })
            .collect();
        let mut budget = 2_000_000usize;
        if self.assign(0, &mut choice, &cands, &mut budget) {
            Some(choice.into_iter().map(|c| c.expect("assigned")).collect())
        } else {
            None
        }
    }

    fn assign(&self, t: usize, choice: &mut Vec<Option<usize>>, cands: &[Vec<usize>], budget: &mut usize) -> bool {
        if t == self.n_triangles() {
            return true;
        }
        if choice[t].is_some() {
            return self.assign(t + 1, choice, cands, budget);
        }
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        for &i in &cands[t] {
            let e = self.tri_edges[t][i];
            let [a, b] = self.edge_tris[e];
            let other = if a == Some(t) { b } else { a };
            match other {
                None => {
                    choice[t] = Some(i);
                    if self.assign(t + 1, choice, cands, budget) {
                        return true;
                    }
                    choice[t] = None;
                }
                Some(o) if choice[o].is_none() => {
                    let j = (0..3).find(|&j| self.tri_edges[o][j] == e).expect("shared edge");
                    choice[t] = Some(i);
                    choice[o] = Some(j);
                    if self.assign(t + 1, choice, cands, budget) {
                        return true;
                    }
                    choice[t] = None;
                    choice[o] = None;
                }
                Some(_) => {}
            }
        }
        false
    }

    /// Splits every triangle into three at its centroid, with the centroid as
    /// newest vertex everywhere. The result always satisfies the matching
    /// condition: each old edge is the refinement edge on both sides.
    pub fn centroid_split(&self) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut tris = Vec::with_capacity(3 * self.n_triangles());
        for t in 0..self.n_triangles() {
            let c = vertices.len();
            vertices.push(self.centroid(t));
            let [a, b, d] = self.triangles[t];
            tris.push([a, b, c]);
            tris.push([b, d, c]);
            tris.push([d, a, c]);
        }
        Triangulation::new(vertices, tris, &self.boundary_edges())
    }

    /// Triangle of this mesh containing `x` (closed), searched linearly.
    pub fn locate(&self, x: Point) -> Option<usize> {
        (0..self.n_triangles()).find(|&t| self.barycentric(t, x).iter().all(|&l| l >= -1e-12))
    }
}
