//! Finite element spaces: Crouzeix–Raviart velocities, piecewise constant
//! pressures and conforming P1 vector fields.
//!
//! On element `K` with barycentric coordinates `λ_i`, the CR basis function
//! of local edge `i` (opposite vertex `i`) is `1 - 2λ_i`. It has unit mean on
//! its own edge and zero mean on the other two.

use crate::error::{Error, Result};
use crate::mesh::Triangulation;

/// Gradient of a vector field: row `c` is the gradient of component `c`.
pub type Grad = [[f64; 2]; 2];

/// Degrees of freedom of the CR space with zero boundary edge means:
/// two per interior edge, stored interleaved as `2j + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrSpace {
    edge_dof: Vec<Option<usize>>,
    dof_edge: Vec<usize>,
    mesh_id: u64,
}

impl CrSpace {
    pub fn new(tri: &Triangulation) -> Self {
        let mut edge_dof = vec![None; tri.num_edges()];
        let mut dof_edge = Vec::with_capacity(tri.num_interior_edges());
        for (e, edge) in tri.edges().iter().enumerate() {
            if !edge.is_boundary() {
                edge_dof[e] = Some(dof_edge.len());
                dof_edge.push(e);
            }
        }
        CrSpace {
            edge_dof,
            dof_edge,
            mesh_id: tri.id(),
        }
    }

    /// Number of scalar unknowns per component.
    pub fn num_edges(&self) -> usize {
        self.dof_edge.len()
    }

    /// Total number of velocity unknowns, `2 · #interior edges`.
    pub fn dim(&self) -> usize {
        2 * self.dof_edge.len()
    }

    /// Scalar unknown index of edge `e`, `None` on the boundary.
    pub fn edge_dof(&self, e: usize) -> Option<usize> {
        self.edge_dof[e]
    }

    pub fn dof_edge(&self, j: usize) -> usize {
        self.dof_edge[j]
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    /// Expands a coefficient vector into a function with values on all edges.
    pub fn to_function(&self, coeffs: &[f64]) -> FineFunction {
        assert_eq!(coeffs.len(), self.dim());
        let mut values = vec![[0.0; 2]; self.edge_dof.len()];
        for (j, &e) in self.dof_edge.iter().enumerate() {
            values[e] = [coeffs[2 * j], coeffs[2 * j + 1]];
        }
        FineFunction {
            kind: SpaceKind::CrouzeixRaviart,
            values,
            mesh_id: self.mesh_id,
        }
    }

    /// Coefficients of a CR function, discarding boundary edge values.
    pub fn coefficients(&self, f: &FineFunction) -> Result<Vec<f64>> {
        f.check(self.mesh_id, SpaceKind::CrouzeixRaviart)?;
        Ok(self
            .dof_edge
            .iter()
            .flat_map(|&e| f.values[e])
            .collect())
    }
}

/// Piecewise constants with the zero-mean constraint given by element areas.
#[derive(Clone, Debug)]
pub struct P0Space {
    areas: Vec<f64>,
}

impl P0Space {
    pub fn new(tri: &Triangulation) -> Self {
        P0Space {
            areas: tri.areas().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.areas.len()
    }

    pub fn mean(&self, p: &[f64]) -> f64 {
        let a: f64 = self.areas.iter().sum();
        self.areas.iter().zip(p).map(|(a, p)| a * p).sum::<f64>() / a
    }

    /// Shifts `p` so that `Σ |K| p_K = 0`.
    pub fn project_mean_zero(&self, p: &mut [f64]) {
        let m = self.mean(p);
        p.iter_mut().for_each(|v| *v -= m);
    }

    pub fn l2_norm2(&self, p: &[f64]) -> f64 {
        self.areas.iter().zip(p).map(|(a, p)| a * p * p).sum()
    }
}

/// Conforming P1 vector fields vanishing on the boundary: one dof per
/// interior vertex.
#[derive(Clone, Debug)]
pub struct P1Space {
    vertex_dof: Vec<Option<usize>>,
    mesh_id: u64,
}

impl P1Space {
    pub fn new(tri: &Triangulation) -> Self {
        let mut boundary = vec![false; tri.num_vertices()];
        for e in tri.edges().iter().filter(|e| e.is_boundary()) {
            boundary[e.vertices[0]] = true;
            boundary[e.vertices[1]] = true;
        }
        let mut n = 0;
        let vertex_dof = boundary
            .iter()
            .map(|&b| {
                (!b).then(|| {
                    n += 1;
                    n - 1
                })
            })
            .collect();
        P1Space {
            vertex_dof,
            mesh_id: tri.id(),
        }
    }

    pub fn dim(&self) -> usize {
        self.vertex_dof.iter().flatten().count()
    }

    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        self.vertex_dof[v]
    }

    pub fn is_interior(&self, v: usize) -> bool {
        self.vertex_dof[v].is_some()
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// Values are edge means, one per edge of the mesh.
    CrouzeixRaviart,
    /// Values are nodal values, one per vertex of the mesh.
    P1,
}

/// A CR or conforming P1 vector field on a particular mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct FineFunction {
    pub kind: SpaceKind,
    pub values: Vec<[f64; 2]>,
    pub mesh_id: u64,
}

impl FineFunction {
    pub fn zeros(tri: &Triangulation, kind: SpaceKind) -> Self {
        let n = match kind {
            SpaceKind::CrouzeixRaviart => tri.num_edges(),
            SpaceKind::P1 => tri.num_vertices(),
        };
        FineFunction {
            kind,
            values: vec![[0.0; 2]; n],
            mesh_id: tri.id(),
        }
    }

    pub(crate) fn check(&self, mesh_id: u64, kind: SpaceKind) -> Result<()> {
        if self.mesh_id != mesh_id {
            return Err(Error::MeshMismatch(format!(
                "function lives on mesh {:#x}, expected {mesh_id:#x}",
                self.mesh_id
            )));
        }
        if self.kind != kind {
            return Err(Error::MeshMismatch(format!(
                "expected a {kind:?} function, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// Checks that the function belongs to `tri`.
    pub fn ensure_on(&self, tri: &Triangulation) -> Result<()> {
        let n = match self.kind {
            SpaceKind::CrouzeixRaviart => tri.num_edges(),
            SpaceKind::P1 => tri.num_vertices(),
        };
        if self.mesh_id != tri.id() || self.values.len() != n {
            return Err(Error::MeshMismatch(format!(
                "function with {} values does not live on mesh {:#x}",
                self.values.len(),
                tri.id()
            )));
        }
        Ok(())
    }

    /// Local coefficients and the matching local basis gradients on `k`.
    fn local(&self, tri: &Triangulation, k: usize) -> ([[f64; 2]; 3], [[f64; 2]; 3]) {
        match self.kind {
            SpaceKind::CrouzeixRaviart => {
                let e = tri.element_edges(k);
                (
                    [self.values[e[0]], self.values[e[1]], self.values[e[2]]],
                    cr_gradients(tri, k),
                )
            }
            SpaceKind::P1 => {
                let v = tri.triangles()[k].vertices;
                (
                    [self.values[v[0]], self.values[v[1]], self.values[v[2]]],
                    tri.barycentric_gradients(k),
                )
            }
        }
    }

    /// Constant gradient on element `k`.
    pub fn gradient(&self, tri: &Triangulation, k: usize) -> Grad {
        let (c, g) = self.local(tri, k);
        let mut out = [[0.0; 2]; 2];
        for i in 0..3 {
            for comp in 0..2 {
                out[comp][0] += c[i][comp] * g[i][0];
                out[comp][1] += c[i][comp] * g[i][1];
            }
        }
        out
    }

    /// Value on element `k` at barycentric coordinates `bary`.
    pub fn eval(&self, tri: &Triangulation, k: usize, bary: [f64; 3]) -> [f64; 2] {
        let (c, _) = self.local(tri, k);
        let w = match self.kind {
            SpaceKind::CrouzeixRaviart => bary.map(|l| 1.0 - 2.0 * l),
            SpaceKind::P1 => bary,
        };
        let mut out = [0.0; 2];
        for i in 0..3 {
            out[0] += w[i] * c[i][0];
            out[1] += w[i] * c[i][1];
        }
        out
    }

    /// Value of the restriction to element `k` at its local vertex `i`.
    pub fn vertex_value(&self, tri: &Triangulation, k: usize, i: usize) -> [f64; 2] {
        let mut bary = [0.0; 3];
        bary[i] = 1.0;
        self.eval(tri, k, bary)
    }

    /// Mean of the restriction to element `k` over its local edge `i`.
    pub fn edge_mean(&self, tri: &Triangulation, k: usize, i: usize) -> [f64; 2] {
        let mut bary = [0.5; 3];
        bary[i] = 0.0;
        self.eval(tri, k, bary)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            v[0] *= s;
            v[1] *= s;
        }
    }
}

/// Gradients of the three local CR basis functions, `-2∇λ_i`.
pub fn cr_gradients(tri: &Triangulation, k: usize) -> [[f64; 2]; 3] {
    tri.barycentric_gradients(k).map(|g| [-2.0 * g[0], -2.0 * g[1]])
}

/// Divergence (trace) of a gradient matrix.
pub fn div(g: &Grad) -> f64 {
    g[0][0] + g[1][1]
}

pub fn frobenius2(g: &Grad) -> f64 {
    g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]
}

pub fn grad_sub(a: &Grad, b: &Grad) -> Grad {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

/// A discrete Stokes solution: CR velocity, P0 pressure with zero mean.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub velocity: FineFunction,
    pub pressure: Vec<f64>,
    pub mu: f64,
    /// Relative algebraic residual of the saddle-point system.
    pub residual: f64,
    /// Krylov iterations spent in the solve.
    pub iterations: usize,
}

impl DiscreteSolution {
    pub fn mesh_id(&self) -> u64 {
        self.velocity.mesh_id
    }

    /// `σ_K = μ ∇u_K + p_K Id` on every element.
    pub fn stress(&self, tri: &Triangulation) -> Vec<Grad> {
        (0..tri.num_elements())
            .map(|k| {
                let g = self.velocity.gradient(tri, k);
                let p = self.pressure[k];
                [
                    [self.mu * g[0][0] + p, self.mu * g[0][1]],
                    [self.mu * g[1][0], self.mu * g[1][1] + p],
                ]
            })
            .collect()
    }

    pub fn velocity_gradients(&self, tri: &Triangulation) -> Vec<Grad> {
        (0..tri.num_elements())
            .map(|k| self.velocity.gradient(tri, k))
            .collect()
    }
}
