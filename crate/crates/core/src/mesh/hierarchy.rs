use super::Triangulation;
use crate::error::{Error, Result};

/// Vertex patch `ω^ν`: the triangles of one level containing vertex `ν`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexPatch {
    pub vertex: usize,
    pub triangles: Vec<usize>,
}

/// Nested sequence `T_0 ≺ T_1 ≺ … ≺ T_L` of triangulations.
#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    levels: Vec<Triangulation>,
    new_patch_vertices: Vec<Vec<usize>>,
}

impl MeshHierarchy {
    pub fn new(coarse: Triangulation) -> Self {
        let all = (0..coarse.n_vertices()).collect();
        Self { levels: vec![coarse], new_patch_vertices: vec![all] }
    }

    /// Appends a refinement of the current finest level.
    pub fn push(&mut self, fine: Triangulation) -> Result<()> {
        let coarse = self.finest();
        if fine.n_vertices() < coarse.n_vertices()
            || fine.vertices()[..coarse.n_vertices()] != *coarse.vertices()
            || (0..fine.n_triangles()).any(|t| fine.parent(t).is_none_or(|p| p >= coarse.n_triangles()))
        {
            return Err(Error::NonNestedMeshes);
        }
        let new = new_vertices(coarse, &fine);
        self.levels.push(fine);
        self.new_patch_vertices.push(new);
        Ok(())
    }

    /// Refines the finest level by marking and pushes the result.
    pub fn refine(&mut self, marked: &[usize]) -> Result<()> {
        let fine = self.finest().refine_adaptive(marked)?;
        self.push(fine)
    }

    pub fn refine_uniform(&mut self) -> Result<()> {
        let fine = self.finest().refine_uniform()?;
        self.push(fine)
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> Result<&Triangulation> {
        self.levels.get(l).ok_or(Error::LevelNotInHierarchy(l))
    }

    pub fn levels(&self) -> &[Triangulation] {
        &self.levels
    }

    pub fn finest(&self) -> &Triangulation {
        self.levels.last().expect("hierarchy is never empty")
    }

    pub fn new_patch_vertices(&self, l: usize) -> Result<&[usize]> {
        self.new_patch_vertices.get(l).map(|v| v.as_slice()).ok_or(Error::LevelNotInHierarchy(l))
    }

    /// Vertex patches of level `l` in ascending vertex order. With
    /// `restrict_to_new`, only vertices incident to a triangle created at this
    /// level are returned (all vertices on level 0).
    pub fn vertex_patches(&self, l: usize, restrict_to_new: bool) -> Result<Vec<VertexPatch>> {
        let mesh = self.level(l)?;
        let verts: Vec<usize> = if restrict_to_new { self.new_patch_vertices(l)?.to_vec() } else { (0..mesh.n_vertices()).collect() };
        Ok(verts.into_iter().map(|v| patch_of(mesh, v)).collect())
    }

    /// Drops all levels above `l`.
    pub fn truncate(&mut self, n_levels: usize) {
        self.levels.truncate(n_levels.max(1));
        self.new_patch_vertices.truncate(n_levels.max(1));
    }
}

pub(crate) fn patch_of(mesh: &Triangulation, v: usize) -> VertexPatch {
    VertexPatch { vertex: v, triangles: mesh.vertex_triangles(v).to_vec() }
}

/// Every patch of an unhierarchied mesh, one per vertex.
pub fn all_patches(mesh: &Triangulation) -> Vec<VertexPatch> {
    (0..mesh.n_vertices()).map(|v| patch_of(mesh, v)).collect()
}

/// Vertices incident to a triangle that is not a copy of its parent.
fn new_vertices(coarse: &Triangulation, fine: &Triangulation) -> Vec<usize> {
    let mut children = vec![0usize; coarse.n_triangles()];
    for t in 0..fine.n_triangles() {
        children[fine.parent(t).expect("checked")] += 1;
    }
    let mut flag = vec![false; fine.n_vertices()];
    for t in 0..fine.n_triangles() {
        if children[fine.parent(t).expect("checked")] > 1 {
            for &v in &fine.triangles()[t] {
                flag[v] = true;
            }
        }
    }
    (0..fine.n_vertices()).filter(|&v| flag[v]).collect()
}
