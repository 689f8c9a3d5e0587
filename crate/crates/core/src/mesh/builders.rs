//! Initial meshes for the built-in domains.

use super::triangulation::Triangulation;
use crate::error::{Error, Result};

/// Unit square split into `n x n` cells, each cut by its rising diagonal.
pub fn unit_square(n: usize) -> Result<Triangulation> {
    if n == 0 {
        return Err(Error::param("n", "need at least one cell per side"));
    }
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut conn = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            conn.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            conn.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Triangulation::build_initial(vertices, &conn)
}

/// L-shaped domain `(-1,1)^2 \ [0,1) x (-1,0]` as three unit cells with
/// six triangles; the reentrant corner is the origin.
pub fn lshape() -> Triangulation {
    let vertices = vec![
        [-1.0, -1.0],
        [0.0, -1.0],
        [-1.0, 0.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [-1.0, 1.0],
        [0.0, 1.0],
        [1.0, 1.0],
    ];
    let conn = [
        [0, 1, 3],
        [0, 3, 2],
        [2, 3, 6],
        [2, 6, 5],
        [3, 4, 7],
        [3, 7, 6],
    ];
    Triangulation::build_initial(vertices, &conn).expect("static L-shape mesh is valid")
}

/// Diamond `|x| + |y| <= 1` as the two triangles ABC and ACD with
/// A(0,-1), B(1,0), C(0,1), D(-1,0).
pub fn diamond() -> Triangulation {
    let vertices = vec![[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
    Triangulation::build_initial(vertices, &[[0, 1, 2], [0, 2, 3]])
        .expect("static diamond mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts() {
        let t = unit_square(4).unwrap();
        assert_eq!(t.num_elements(), 32);
        assert!((t.total_area() - 1.0).abs() < 1e-14);
        assert!((t.boundary_length() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn lshape_area() {
        let t = lshape();
        assert_eq!(t.num_elements(), 6);
        assert!((t.total_area() - 3.0).abs() < 1e-14);
        assert!((t.boundary_length() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn diamond_shares_ac() {
        let t = diamond();
        assert_eq!(t.num_elements(), 2);
        assert_eq!(t.num_interior_edges(), 1);
        let e = t.edges().iter().find(|e| !e.is_boundary()).unwrap();
        assert_eq!(e.vertices, [0, 2]);
        assert!((t.total_area() - 2.0).abs() < 1e-15);
        // AC is the longest edge of both halves
        for tri in t.triangles() {
            let [a, b] = tri.local_edge(tri.refinement_edge);
            assert_eq!((a.min(b), a.max(b)), (0, 2));
        }
    }
}
