//! Saddle-point assembly and solution of the discrete Stokes problem
//!
//! ```text
//! μ (∇_h u, ∇_h v) + (div_h v, p) = (g, v)    for all v in V_h
//!                     (div_h u, q) = 0         for all q in Q_h
//! ```
//!
//! with CR velocities and piecewise constant pressures of zero mean.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Triangulation;
use crate::problem::LoadFunction;
use crate::quadrature::dunavant6;
use crate::sparse::{minres, nested_dissection, pcg, Cholesky, CsrMatrix};
use crate::spaces::{cr_gradients, CrSpace, DiscreteSolution, Grad, P0Space};

/// Which linear solver to use for the saddle-point system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolverKind {
    /// Sparse Cholesky of the velocity block and conjugate gradients on the
    /// pressure Schur complement.
    #[default]
    Direct,
    /// Block-diagonally preconditioned MINRES on the full system including
    /// the mean-value multiplier.
    Minres,
}

/// Assembled blocks. The velocity block is `A = μ diag(L, L)` with `L` the
/// scalar CR stiffness matrix on interior edges.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub space: CrSpace,
    pub pressure_space: P0Space,
    /// Scalar broken Laplacian on interior edges.
    pub laplacian: CsrMatrix,
    /// Divergence block, `#elements x dim`.
    pub divergence: CsrMatrix,
    pub load: Vec<f64>,
    pub mu: f64,
    pub areas: Vec<f64>,
    coords: Vec<[f64; 2]>,
}

struct Local {
    dofs: [Option<usize>; 3],
    stiff: [[f64; 3]; 3],
    div: [[f64; 2]; 3],
    load: [[f64; 2]; 3],
}

fn local(tri: &Triangulation, space: &CrSpace, g: &LoadFunction, k: usize) -> Local {
    let grads = cr_gradients(tri, k);
    let area = tri.area(k);
    let edges = tri.element_edges(k);
    let mut stiff = [[0.0; 3]; 3];
    let mut div = [[0.0; 2]; 3];
    for i in 0..3 {
        for j in 0..3 {
            stiff[i][j] = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
        }
        div[i] = [area * grads[i][0], area * grads[i][1]];
    }
    let mut load = [[0.0; 2]; 3];
    let rule = dunavant6();
    for (b, w) in rule.points.iter().zip(&rule.weights) {
        let gv = g.eval(tri.map_point(k, *b));
        for i in 0..3 {
            let phi = 1.0 - 2.0 * b[i];
            load[i][0] += w * gv[0] * phi * area;
            load[i][1] += w * gv[1] * phi * area;
        }
    }
    Local {
        dofs: edges.map(|e| space.edge_dof(e)),
        stiff,
        div,
        load,
    }
}

/// Assembles the CR/P0 saddle-point blocks for load `g` and viscosity `mu`.
pub fn assemble_saddle(tri: &Triangulation, g: &LoadFunction, mu: f64) -> Result<SaddleSystem> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::param("mu", format!("viscosity must be positive, got {mu}")));
    }
    let space = CrSpace::new(tri);
    let n = space.num_edges();
    let locals: Vec<Local> = (0..tri.num_elements())
        .into_par_iter()
        .map(|k| local(tri, &space, g, k))
        .collect();

    let mut lt = Vec::with_capacity(9 * locals.len());
    let mut bt = Vec::with_capacity(6 * locals.len());
    let mut f = vec![0.0; 2 * n];
    for (k, loc) in locals.iter().enumerate() {
        for i in 0..3 {
            let Some(di) = loc.dofs[i] else { continue };
            for j in 0..3 {
                if let Some(dj) = loc.dofs[j] {
                    lt.push((di, dj, loc.stiff[i][j]));
                }
            }
            for c in 0..2 {
                bt.push((k, 2 * di + c, loc.div[i][c]));
                f[2 * di + c] += loc.load[i][c];
            }
        }
    }
    let coords = (0..n).map(|j| tri.edge_midpoint(space.dof_edge(j))).collect();
    Ok(SaddleSystem {
        laplacian: CsrMatrix::from_triplets(n, n, &lt),
        divergence: CsrMatrix::from_triplets(tri.num_elements(), 2 * n, &bt),
        load: f,
        mu,
        areas: tri.areas().to_vec(),
        pressure_space: P0Space::new(tri),
        space,
        coords,
    })
}

impl SaddleSystem {
    /// `A u` for interleaved velocity coefficients.
    pub fn apply_velocity_block(&self, u: &[f64], out: &mut [f64]) {
        let n = self.space.num_edges();
        for i in 0..n {
            let mut s = [0.0; 2];
            for (j, v) in self.laplacian.row(i) {
                s[0] += v * u[2 * j];
                s[1] += v * u[2 * j + 1];
            }
            out[2 * i] = self.mu * s[0];
            out[2 * i + 1] = self.mu * s[1];
        }
    }

    /// The full velocity block as a sparse matrix.
    pub fn velocity_block(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(2 * self.laplacian.nnz());
        for i in 0..self.laplacian.nrows() {
            for (j, v) in self.laplacian.row(i) {
                t.push((2 * i, 2 * j, self.mu * v));
                t.push((2 * i + 1, 2 * j + 1, self.mu * v));
            }
        }
        let d = self.space.dim();
        CsrMatrix::from_triplets(d, d, &t)
    }

    /// The bordered symmetric matrix `[A Bᵀ 0; B 0 c; 0 cᵀ 0]` with
    /// `c_K = |K|` enforcing the zero pressure mean.
    pub fn full_matrix(&self) -> CsrMatrix {
        let d = self.space.dim();
        let m = self.areas.len();
        let a = self.velocity_block();
        let mut t = Vec::new();
        for i in 0..d {
            t.extend(a.row(i).map(|(j, v)| (i, j, v)));
        }
        for k in 0..m {
            for (j, v) in self.divergence.row(k) {
                t.push((d + k, j, v));
                t.push((j, d + k, v));
            }
            t.push((d + k, d + m, self.areas[k]));
            t.push((d + m, d + k, self.areas[k]));
        }
        CsrMatrix::from_triplets(d + m + 1, d + m + 1, &t)
    }

    /// Right-hand side matching [`SaddleSystem::full_matrix`].
    pub fn full_rhs(&self) -> Vec<f64> {
        let mut b = self.load.clone();
        b.resize(self.space.dim() + self.areas.len() + 1, 0.0);
        b
    }

    pub(crate) fn factor_laplacian(&self) -> Result<Cholesky> {
        let perm = nested_dissection(&self.laplacian, &self.coords);
        Cholesky::factor(&self.laplacian, perm)
    }

    /// Solves `A x = b` given the scalar factor.
    fn solve_velocity(&self, chol: &Cholesky, b: &[f64]) -> Vec<f64> {
        let n = self.space.num_edges();
        let mut c0: Vec<f64> = (0..n).map(|i| b[2 * i]).collect();
        let mut c1: Vec<f64> = (0..n).map(|i| b[2 * i + 1]).collect();
        chol.solve_in_place(&mut c0);
        chol.solve_in_place(&mut c1);
        let mut x = vec![0.0; 2 * n];
        for i in 0..n {
            x[2 * i] = c0[i] / self.mu;
            x[2 * i + 1] = c1[i] / self.mu;
        }
        x
    }

    /// `Res(φ_j) = (g, φ_j) - μ(∇u, ∇φ_j) - (p, div φ_j)` for every velocity
    /// basis function.
    pub fn momentum_residual(&self, u: &[f64], p: &[f64]) -> Vec<f64> {
        let mut au = vec![0.0; u.len()];
        self.apply_velocity_block(u, &mut au);
        let btp = self.divergence.mul_transpose_vec(p);
        (0..u.len()).map(|i| self.load[i] - au[i] - btp[i]).collect()
    }

    /// `sup_v ((g, v) - (σ, ∇_h v)) / ‖∇_h v‖` over the CR space of this
    /// system, for an elementwise constant stress `σ` given on `tri`.
    pub fn residual_dual_norm(&self, tri: &Triangulation, sigma: &[Grad]) -> Result<f64> {
        if sigma.len() != tri.num_elements() || self.space.mesh_id() != tri.id() {
            return Err(Error::MeshMismatch("stress does not match the assembled mesh".into()));
        }
        let mut r = self.load.clone();
        for (k, s) in sigma.iter().enumerate() {
            let grads = cr_gradients(tri, k);
            let a = tri.area(k);
            for (i, &e) in tri.element_edges(k).iter().enumerate() {
                if let Some(j) = self.space.edge_dof(e) {
                    for c in 0..2 {
                        r[2 * j + c] -= a * (s[c][0] * grads[i][0] + s[c][1] * grads[i][1]);
                    }
                }
            }
        }
        let chol = self.factor_laplacian()?;
        let n = self.space.num_edges();
        let mut total = 0.0;
        for c in 0..2 {
            let rc: Vec<f64> = (0..n).map(|j| r[2 * j + c]).collect();
            let mut z = rc.clone();
            chol.solve_in_place(&mut z);
            total += crate::sparse::dot(&rc, &z);
        }
        Ok(total.max(0.0).sqrt())
    }

    /// Relative residual of `(u, p)` in the full system, with the mean
    /// multiplier taken as zero.
    pub fn relative_residual(&self, u: &[f64], p: &[f64]) -> f64 {
        let mut r1 = vec![0.0; u.len()];
        self.apply_velocity_block(u, &mut r1);
        let btp = self.divergence.mul_transpose_vec(p);
        let mut s = 0.0;
        for i in 0..u.len() {
            let r = self.load[i] - r1[i] - btp[i];
            s += r * r;
        }
        for r in self.divergence.mul_vec(u) {
            s += r * r;
        }
        let mean: f64 = self.areas.iter().zip(p).map(|(a, p)| a * p).sum();
        s += mean * mean;
        let scale = crate::sparse::norm(&self.load).max(f64::MIN_POSITIVE);
        s.sqrt() / scale
    }
}

/// Solves an assembled system.
pub fn solve_saddle(tri: &Triangulation, sys: &SaddleSystem, kind: SolverKind) -> Result<DiscreteSolution> {
    if sys.space.num_edges() == 0 {
        return Err(Error::SingularSystem("the mesh has no interior edges".into()));
    }
    if sys.space.mesh_id() != tri.id() {
        return Err(Error::MeshMismatch("system was assembled on another mesh".into()));
    }
    let (u, p, iterations) = match kind {
        SolverKind::Direct => solve_schur(sys)?,
        SolverKind::Minres => solve_minres(sys)?,
    };
    let residual = sys.relative_residual(&u, &p);
    let scale = crate::sparse::norm(&sys.load);
    if scale > 0.0 && !(residual <= 1e-10) {
        return Err(Error::NoConvergence(format!(
            "saddle-point residual {residual:e} above 1e-10"
        )));
    }
    Ok(DiscreteSolution {
        velocity: sys.space.to_function(&u),
        pressure: p,
        mu: sys.mu,
        residual,
        iterations,
    })
}

/// Assembles and solves with the default solver.
pub fn solve(tri: &Triangulation, g: &LoadFunction, mu: f64) -> Result<DiscreteSolution> {
    let sys = assemble_saddle(tri, g, mu)?;
    solve_saddle(tri, &sys, SolverKind::Direct)
}

fn solve_schur(sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let chol = sys.factor_laplacian()?;
    let b = &sys.divergence;
    let m = sys.areas.len();
    let ainv_f = sys.solve_velocity(&chol, &sys.load);
    let rhs = b.mul_vec(&ainv_f);
    let mut p = vec![0.0; m];
    let stats = pcg(
        |x, out| {
            let w = sys.solve_velocity(&chol, &b.mul_transpose_vec(x));
            b.mul_vec_into(&w, out);
        },
        |r, z| {
            for k in 0..m {
                z[k] = sys.mu * r[k] / sys.areas[k];
            }
        },
        &rhs,
        &mut p,
        1e-14,
        4 * m + 200,
    );
    sys.pressure_space.project_mean_zero(&mut p);
    let mut f = sys.load.clone();
    for (fi, bp) in f.iter_mut().zip(b.mul_transpose_vec(&p)) {
        *fi -= bp;
    }
    let u = sys.solve_velocity(&chol, &f);
    Ok((u, p, stats.iterations))
}

fn solve_minres(sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let chol = sys.factor_laplacian()?;
    let full = sys.full_matrix();
    let rhs = sys.full_rhs();
    let d = sys.space.dim();
    let m = sys.areas.len();
    let total_area: f64 = sys.areas.iter().sum();
    let mut x = vec![0.0; rhs.len()];
    let stats = minres(
        |v, out| full.mul_vec_into(v, out),
        |r, z| {
            z[..d].copy_from_slice(&sys.solve_velocity(&chol, &r[..d]));
            for k in 0..m {
                z[d + k] = sys.mu * r[d + k] / sys.areas[k];
            }
            z[d + m] = r[d + m] / (sys.mu * total_area);
        },
        &rhs,
        &mut x,
        1e-15,
        20 * (d + m) + 500,
    );
    let u = x[..d].to_vec();
    let mut p = x[d..d + m].to_vec();
    sys.pressure_space.project_mean_zero(&mut p);
    Ok((u, p, stats.iterations))
}
