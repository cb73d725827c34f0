//! Newest-vertex bisection with conforming closure.

use std::collections::HashMap;

use super::{edge_key, Triangulation};
use crate::error::{Error, Result};

impl Triangulation {
    /// Bisects every triangle (refinement edges of all triangles are marked).
    pub fn refine_uniform(&self) -> Result<Triangulation> {
        let all: Vec<usize> = (0..self.n_triangles()).collect();
        self.refine_adaptive(&all)
    }

    /// Bisects the marked triangles and closes the result to a conforming
    /// mesh. The returned mesh keeps all vertex ids of `self` and appends the
    /// new midpoints in ascending edge-id order.
    pub fn refine_adaptive(&self, marked: &[usize]) -> Result<Triangulation> {
        let ne = self.n_edges();
        let mut edge_marked = vec![false; ne];
        for &t in marked {
            if t >= self.n_triangles() {
                return Err(Error::InvalidGeometry(format!("marked triangle {t} does not exist")));
            }
            edge_marked[self.triangle_edges(t)[2]] = true;
        }
        // closure: a triangle with any marked edge must be bisected through its
        // refinement edge first
        let mut sweeps = 0;
        loop {
            let mut changed = false;
            for t in 0..self.n_triangles() {
                let te = self.triangle_edges(t);
                if !edge_marked[te[2]] && (edge_marked[te[0]] || edge_marked[te[1]]) {
                    edge_marked[te[2]] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            sweeps += 1;
            if sweeps > ne + 1 {
                return Err(Error::ClosureDiverged);
            }
        }

        let mut vertices = self.vertices().to_vec();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, &[a, b]) in self.edges().iter().enumerate() {
            if edge_marked[e] {
                let pa = vertices[a];
                let pb = vertices[b];
                midpoint.insert((a, b), vertices.len());
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
        }

        let mut tris = Vec::new();
        let mut generation = Vec::new();
        let mut parent = Vec::new();
        for t in 0..self.n_triangles() {
            bisect(self.triangles()[t], self.generation(t), t, &midpoint, &mut tris, &mut generation, &mut parent);
        }

        let mut boundary = Vec::new();
        for (a, b, tag) in self.boundary_edges() {
            match midpoint.get(&(a, b)) {
                Some(&m) => {
                    boundary.push((a, m, tag));
                    boundary.push((m, b, tag));
                }
                None => boundary.push((a, b, tag)),
            }
        }
        let out = Triangulation::with_history(vertices, tris, &boundary, generation, parent)?;
        debug_assert!(out.n_triangles() >= self.n_triangles() + marked.len().min(1));
        Ok(out)
    }
}

/// Bisects `(a, b, c)` (newest vertex `c`) if its refinement edge carries a
/// midpoint, recursing into the children whose refinement edges are marked.
fn bisect(
    t: [usize; 3],
    gen: u32,
    root: usize,
    midpoint: &HashMap<(usize, usize), usize>,
    tris: &mut Vec<[usize; 3]>,
    generation: &mut Vec<u32>,
    parent: &mut Vec<Option<usize>>,
) {
    let [a, b, c] = t;
    match midpoint.get(&edge_key(a, b)) {
        None => {
            tris.push(t);
            generation.push(gen);
            parent.push(Some(root));
        }
        Some(&m) => {
            bisect([c, a, m], gen + 1, root, midpoint, tris, generation, parent);
            bisect([b, c, m], gen + 1, root, midpoint, tris, generation, parent);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_initial_mesh, Domain};
    use proptest::prelude::*;

    #[test]
    fn uniform_square_counts() {
        let m0 = build_initial_mesh(Domain::UnitSquare).unwrap();
        let m1 = m0.refine_uniform().unwrap();
        assert_eq!(m1.n_triangles(), 8);
        let m2 = m1.refine_uniform().unwrap();
        assert_eq!(m2.n_triangles(), 16);
        // hand count: 4 + 4 edge midpoints after the first step, 9 + 4 after the second
        assert_eq!(m1.n_vertices(), 9);
        assert_eq!(m2.n_vertices(), 13);
        assert!(m2.is_conforming());
        for t in 0..m2.n_triangles() {
            assert_eq!(m2.generation(t), 2);
        }
    }

    #[test]
    fn empty_marking_is_identity() {
        let m0 = build_initial_mesh(Domain::UnitSquare).unwrap();
        assert_eq!(m0.refine_adaptive(&[]).unwrap(), m0);
    }

    #[test]
    fn single_mark_bisects_the_pair() {
        // Refinement edges of the diagonal mesh are the boundary edges, so a
        // single mark bisects only that triangle. One step later the refinement
        // edges are the half diagonals, shared by two children of different
        // parents; a mark there bisects exactly the pair.
        let m0 = build_initial_mesh(Domain::UnitSquare).unwrap();
        let m = m0.refine_adaptive(&[0]).unwrap();
        assert_eq!(m.n_triangles(), 5);
        let m1 = m0.refine_uniform().unwrap();
        let m2 = m1.refine_adaptive(&[0]).unwrap();
        assert_eq!(m2.n_triangles(), 10);
        assert!(m2.is_conforming());
        let e = m1.triangle_edges(0)[2];
        let [t0, t1] = m1.edge_triangles(e);
        let bisected: Vec<usize> = (0..m2.n_triangles())
            .filter_map(|t| m2.parent(t))
            .fold(vec![0; 8], |mut acc, p| {
                acc[p] += 1;
                acc
            })
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 1)
            .map(|(p, _)| p)
            .collect();
        assert_eq!(bisected, vec![t0.unwrap().min(t1.unwrap()), t0.unwrap().max(t1.unwrap())]);
    }

    #[test]
    fn all_marked_equals_uniform() {
        let m = build_initial_mesh(Domain::NonTrapping).unwrap();
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        assert_eq!(m.refine_adaptive(&all).unwrap(), m.refine_uniform().unwrap());
    }

    fn nested(coarse: &Triangulation, fine: &Triangulation) -> bool {
        (0..fine.n_triangles()).all(|t| {
            let p = fine.parent(t).unwrap();
            let c = fine.centroid(t);
            let contains = |k: usize| coarse.barycentric(k, c).iter().all(|&l| l >= -1e-12);
            contains(p) && (0..coarse.n_triangles()).filter(|&k| contains(k)).count() == 1
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_refinement_conforming_nested(seed in any::<u64>(), steps in 1usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut m = build_initial_mesh(Domain::NonTrapping).unwrap();
            let area: f64 = (0..m.n_triangles()).map(|t| m.area(t)).sum();
            for _ in 0..steps {
                let marked: Vec<usize> = (0..m.n_triangles()).filter(|_| rng.random_bool(0.2)).collect();
                let f = m.refine_adaptive(&marked).unwrap();
                prop_assert!(f.is_conforming());
                prop_assert!(nested(&m, &f));
                for &t in &marked {
                    prop_assert!((0..f.n_triangles()).filter(|&k| f.parent(k) == Some(t)).count() >= 2);
                }
                let fa: f64 = (0..f.n_triangles()).map(|t| f.area(t)).sum();
                prop_assert!((fa - area).abs() < 1e-12);
                m = f;
            }
        }

        #[test]
        fn angles_stay_in_finitely_many_classes(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m0 = build_initial_mesh(Domain::UnitSquare).unwrap();
            let mut m = m0.clone();
            for _ in 0..8 {
                let marked: Vec<usize> = (0..m.n_triangles()).filter(|_| rng.random_bool(0.3)).collect();
                m = m.refine_adaptive(&marked).unwrap();
            }
            let mut classes: Vec<[i64; 3]> = Vec::new();
            for t in 0..m.n_triangles() {
                let mut a = m.angles(t).map(|x| (x * 1e8).round() as i64);
                a.sort_unstable();
                if !classes.contains(&a) {
                    classes.push(a);
                }
            }
            // the diagonal square mesh has a single similarity class
            prop_assert!(classes.len() <= 4);
            prop_assert!(m.min_angle() >= m0.min_angle() / 2.0 - 1e-12);
        }
    }
}
