use std::collections::HashMap;

use super::triangulation::{Point, Triangle, Triangulation, MAX_DEPTH};
use crate::error::{Error, Result};

impl Triangulation {
    /// Newest vertex bisection of every marked element, followed by the
    /// completion that restores conformity.
    ///
    /// Completion marks refinement edges until every element with a marked
    /// edge also has its refinement edge marked; bisection then recurses
    /// into children whose refinement edge is marked.
    pub fn bisect(&self, marked: &[usize]) -> Result<Triangulation> {
        let n = self.num_elements();
        for &k in marked {
            if k >= n {
                return Err(Error::ElementOutOfRange { element: k, len: n });
            }
        }
        if marked.is_empty() {
            return Ok(self.clone());
        }

        let mut edge_marked = vec![false; self.num_edges()];
        for &k in marked {
            let t = &self.triangles()[k];
            edge_marked[self.element_edges(k)[t.refinement_edge]] = true;
        }
        let cap = 10 * n.max(1);
        let mut passes = 0;
        loop {
            let mut changed = false;
            for (k, t) in self.triangles().iter().enumerate() {
                let ee = self.element_edges(k);
                let re = ee[t.refinement_edge];
                if !edge_marked[re] && ee.iter().any(|&e| edge_marked[e]) {
                    edge_marked[re] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            passes += 1;
            if passes > cap {
                return Err(Error::CompletionCap { cap });
            }
        }

        let mut split: HashMap<(usize, usize), Option<usize>> = HashMap::new();
        for (e, edge) in self.edges().iter().enumerate() {
            if edge_marked[e] {
                split.insert((edge.vertices[0], edge.vertices[1]), None);
            }
        }

        let mut vertices: Vec<Point> = self.vertices().to_vec();
        let mut out = Vec::with_capacity(n + 2 * marked.len());
        let mut stack = Vec::new();
        for (k, t) in self.triangles().iter().enumerate() {
            let mut t = t.clone();
            t.parent = Some(k);
            stack.push(t);
            while let Some(t) = stack.pop() {
                let [b, c] = t.local_edge(t.refinement_edge);
                let key = (b.min(c), b.max(c));
                let Some(slot) = split.get_mut(&key) else {
                    out.push(t);
                    continue;
                };
                if t.level >= MAX_DEPTH {
                    return Err(Error::DepthLimit { max: MAX_DEPTH });
                }
                let m = *slot.get_or_insert_with(|| {
                    let (pb, pc) = (vertices[b], vertices[c]);
                    vertices.push([(pb[0] + pc[0]) / 2.0, (pb[1] + pc[1]) / 2.0]);
                    vertices.len() - 1
                });
                let a = t.newest_vertex();
                let bit = 1u128 << t.level;
                let first = Triangle {
                    vertices: [a, b, m],
                    refinement_edge: 2,
                    level: t.level + 1,
                    parent: t.parent,
                    root: t.root,
                    path: t.path,
                };
                let second = Triangle {
                    vertices: [a, m, c],
                    refinement_edge: 1,
                    level: t.level + 1,
                    parent: t.parent,
                    root: t.root,
                    path: t.path | bit,
                };
                // pushed in reverse so the first child is emitted first
                stack.push(second);
                stack.push(first);
            }
        }

        let fine = Triangulation::assemble(vertices, out)?;
        let area_gap = (fine.total_area() - self.total_area()).abs();
        if area_gap > 1e-12 * self.total_area() {
            return Err(Error::NonConforming {
                element: 0,
                reason: format!("area changed by {area_gap:e} during refinement"),
            });
        }
        // a hanging node would expose interior edge halves as boundary edges
        let gap = (fine.boundary_length() - self.boundary_length()).abs();
        if gap > 1e-12 * self.boundary_length() {
            return Err(Error::NonConforming {
                element: 0,
                reason: format!("boundary length changed by {gap:e} during refinement"),
            });
        }
        Ok(fine)
    }

    /// One bisection of every element.
    pub fn bisect_all(&self) -> Result<Triangulation> {
        let all: Vec<usize> = (0..self.num_elements()).collect();
        self.bisect(&all)
    }

    /// `rounds` successive bisections of every element.
    pub fn refine_uniform(&self, rounds: usize) -> Result<Triangulation> {
        let mut t = self.clone();
        for _ in 0..rounds {
            t = t.bisect_all()?;
        }
        Ok(t)
    }
}
