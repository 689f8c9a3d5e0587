//! The criss-cross family on the diamond `|x| + |y| ≤ 1` showing that the
//! naive prolongation cannot give discrete reliability with a constant
//! independent of the refinement depth.
//!
//! The coarse mesh is `ABC ∪ ACD` with `A(0,-1)`, `B(1,0)`, `C(0,1)`,
//! `D(-1,0)`. The fine mesh is an `N x N` grid of sub-diamonds, each cut by
//! its vertical diagonal, so it has `2N²` triangles and `AC` is a union of
//! fine edges.

use crate::error::{Error, Result};
use crate::mesh::{builders, Point, Triangulation};
use crate::quadrature::gauss_legendre;
use crate::spaces::{FineFunction, SpaceKind};

/// One member of the family.
#[derive(Clone, Debug)]
pub struct CrissCrossFamily {
    pub n: usize,
    pub coarse: Triangulation,
    pub fine: Triangulation,
    /// Vertex ids of `Z_i = (1/N, 2i/N)` for `i = -k..=k`, `N = 2k + 1`.
    pub z_nodes: Vec<usize>,
}

impl CrissCrossFamily {
    pub fn k(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Index `i` of the node stored at position `pos` of `z_nodes`.
    pub fn z_index(&self, pos: usize) -> i64 {
        pos as i64 - self.k() as i64
    }
}

/// Grid point `(i, j)` of the rotated lattice.
fn lattice(n: usize, i: usize, j: usize) -> Point {
    let nf = n as f64;
    [(i as f64 - j as f64) / nf, -1.0 + (i + j) as f64 / nf]
}

pub fn build_family(n: usize) -> Result<CrissCrossFamily> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::param("n", format!("must be odd and at least 1, got {n}")));
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(lattice(n, i, j));
        }
    }
    let mut conn = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (bottom, right, top, left) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            conn.push([bottom, right, top]);
            conn.push([bottom, top, left]);
        }
    }
    let fine = Triangulation::build_initial(vertices, &conn)?;
    let k = (n - 1) / 2;
    let z_nodes = (0..=2 * k)
        .map(|pos| {
            // x = 1/N and y = 2i/N give a - b = 1, a + b = N + 2i
            let a = (n + 2 * pos - 2 * k + 1) / 2;
            id(a, a - 1)
        })
        .collect();
    Ok(CrissCrossFamily {
        n,
        coarse: builders::diamond(),
        fine,
        z_nodes,
    })
}

/// The coarse jump `[u_H]` on `AC` and the fine test function `v_h`.
#[derive(Clone, Debug)]
pub struct TestPair {
    /// `v_h = Σ sign(i) φ_{Z_i}` as a conforming P1 field (first component).
    pub v_h: FineFunction,
}

impl TestPair {
    /// `[u_H](x) = y` on the coarse edge `AC`.
    pub fn jump(x: Point) -> f64 {
        x[1]
    }
}

pub fn build_test_pair(family: &CrissCrossFamily) -> TestPair {
    let mut v_h = FineFunction::zeros(&family.fine, SpaceKind::P1);
    for (pos, &z) in family.z_nodes.iter().enumerate() {
        v_h.values[z] = [family.z_index(pos).signum() as f64, 0.0];
    }
    TestPair { v_h }
}

/// Fine edges on `AC`, i.e. interior edges on the line `x = 0`.
fn ac_edges(fine: &Triangulation) -> Vec<usize> {
    let v = fine.vertices();
    (0..fine.num_edges())
        .filter(|&e| {
            let edge = &fine.edges()[e];
            !edge.is_boundary() && edge.vertices.iter().all(|&z| v[z][0].abs() < 1e-14)
        })
        .collect()
}

/// Per-segment contribution along `AC`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub edge: usize,
    /// `{∂v_h/∂ν}` with `ν = (1, 0)`.
    pub mean_normal_derivative: f64,
    /// `∫_E [u_H] ds`
    pub jump_integral: f64,
}

pub fn segments(family: &CrissCrossFamily, pair: &TestPair) -> Vec<Segment> {
    let fine = &family.fine;
    let verts = fine.vertices();
    ac_edges(fine)
        .into_iter()
        .map(|e| {
            let edge = &fine.edges()[e];
            let dx: f64 = edge.elements().map(|t| pair.v_h.gradient(fine, t)[0][0]).sum::<f64>() / 2.0;
            let (a, b) = (verts[edge.vertices[0]], verts[edge.vertices[1]]);
            // the jump is linear, so the midpoint rule is exact
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            Segment {
                edge: e,
                mean_normal_derivative: dx,
                jump_integral: TestPair::jump(mid) * edge.length,
            }
        })
        .collect()
}

/// `∫_AC [u_H] {∂v_h/∂ν} ds`
pub fn boundary_sum(family: &CrissCrossFamily, pair: &TestPair) -> f64 {
    segments(family, pair)
        .iter()
        .map(|s| s.mean_normal_derivative * s.jump_integral)
        .sum()
}

/// `N/2 - 1/(2N)`
pub fn closed_form(n: usize) -> f64 {
    let nf = n as f64;
    nf / 2.0 - 1.0 / (2.0 * nf)
}

/// `‖∇_h v_h‖²`
pub fn grad_norm_sq(family: &CrissCrossFamily, pair: &TestPair) -> f64 {
    (0..family.fine.num_elements())
        .map(|t| {
            let g = pair.v_h.gradient(&family.fine, t)[0];
            family.fine.area(t) * (g[0] * g[0] + g[1] * g[1])
        })
        .sum()
}

/// `Σ_{E ∈ E_H \ E_h} h_E^{-1} ‖[u_H]‖²_{L²(E)}`; the jump lives on `AC`
/// only, so every other coarse edge contributes zero.
pub fn jump_term(family: &CrissCrossFamily) -> f64 {
    let coarse = &family.coarse;
    let fine_edges: std::collections::HashSet<[usize; 2]> = family.fine.edges().iter().map(|e| e.vertices).collect();
    let (nodes, weights) = gauss_legendre(3);
    let cv = coarse.vertices();
    let fv = family.fine.vertices();
    coarse
        .edges()
        .iter()
        .filter(|e| !e.is_boundary())
        .filter(|e| {
            // coarse vertices sit in the fine mesh; look them up by position
            let ends = e.vertices.map(|z| {
                fv.iter()
                    .position(|p| (p[0] - cv[z][0]).abs() < 1e-14 && (p[1] - cv[z][1]).abs() < 1e-14)
                    .expect("coarse vertices are fine vertices")
            });
            let key = if ends[0] < ends[1] { ends } else { [ends[1], ends[0]] };
            !fine_edges.contains(&key)
        })
        .map(|e| {
            let (a, b) = (cv[e.vertices[0]], cv[e.vertices[1]]);
            let integral: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| w * TestPair::jump([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]).powi(2))
                .sum::<f64>()
                * e.length;
            integral / e.length
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub boundary_sum: f64,
    pub closed_form: f64,
    pub grad_norm_sq: f64,
    pub jump_term: f64,
    /// `boundary_sum / (jump_term^{1/2} ‖∇_h v_h‖)`
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log C(N)` against `log N`.
    pub exponent: f64,
}

pub fn scaling_row(n: usize) -> Result<ScalingRow> {
    let family = build_family(n)?;
    let pair = build_test_pair(&family);
    let bs = boundary_sum(&family, &pair);
    let g2 = grad_norm_sq(&family, &pair);
    let j = jump_term(&family);
    let denom = j.sqrt() * g2.sqrt();
    Ok(ScalingRow {
        n,
        boundary_sum: bs,
        closed_form: closed_form(n),
        grad_norm_sq: g2,
        jump_term: j,
        constant: if denom > 0.0 { bs.abs() / denom } else { 0.0 },
    })
}

/// Default sizes of the study.
pub const DEFAULT_SIZES: [usize; 4] = [5, 11, 21, 41];

pub fn scaling_study(ns: &[usize]) -> Result<ScalingStudy> {
    if ns.len() < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 sizes, got {}", ns.len())));
    }
    let rows = ns.iter().map(|&n| scaling_row(n)).collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .map(|r| ((r.n as f64).ln(), r.constant.ln()))
        .unzip();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InsufficientData("N = 1 has a vanishing test function".into()));
    }
    let exponent = crate::adaptive::fit_slope(&x, &y)?;
    Ok(ScalingStudy { rows, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_sizes_are_rejected() {
        assert!(build_family(4).is_err());
        assert!(build_family(0).is_err());
    }

    #[test]
    fn smallest_member_is_the_coarse_mesh() {
        let f = build_family(1).unwrap();
        assert_eq!(f.fine.num_elements(), 2);
        let pair = build_test_pair(&f);
        assert!(pair.v_h.values.iter().all(|v| v[0] == 0.0));
        assert_eq!(boundary_sum(&f, &pair), 0.0);
        assert_eq!(grad_norm_sq(&f, &pair), 0.0);
    }

    #[test]
    fn nodes_sit_where_expected() {
        let f = build_family(5).unwrap();
        assert_eq!(f.fine.num_elements(), 50);
        for (pos, &z) in f.z_nodes.iter().enumerate() {
            let p = f.fine.vertices()[z];
            let i = f.z_index(pos) as f64;
            assert!((p[0] - 0.2).abs() < 1e-15 && (p[1] - 2.0 * i / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn jump_term_is_one_third() {
        for n in [3, 5, 9] {
            let f = build_family(n).unwrap();
            assert!((jump_term(&f) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn small_cases_match_the_closed_form() {
        for n in [3, 5, 7] {
            let f = build_family(n).unwrap();
            let pair = build_test_pair(&f);
            assert!((boundary_sum(&f, &pair) - closed_form(n)).abs() < 1e-12);
        }
    }
}
