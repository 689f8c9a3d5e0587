//! Residual a posteriori estimator, oscillation, the residual functional
//! and the computable consistency error.
//!
//! The element indicator is
//!
//! ```text
//! η_K = h_K ‖g‖_K + ( Σ_{E ⊂ ∂K} h_K ‖[∇_h u τ_E]‖²_E )^{1/2}
//! ```
//!
//! Boundary edges enter with the jump against the zero extension.

use rayon::prelude::*;

use crate::assembly::assemble_saddle;
use crate::error::{Error, Result};
use crate::mesh::{nesting_sets, Triangulation};
use crate::problem::{ExactSolution, LoadFunction};
use crate::quadrature::dunavant6;
use crate::spaces::{cr_gradients, DiscreteSolution, FineFunction, Grad, SpaceKind};

/// How the tangential jump across an interior edge is formed.
///
/// `Sum` is a deliberately wrong variant kept for mutation testing of the
/// verification suites.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JumpMode {
    #[default]
    Difference,
    Sum,
}

/// Element quantities that depend only on the mesh and the load.
#[derive(Clone, Debug)]
pub struct LoadData {
    /// `‖g‖²_{L²(K)}`
    pub g_norm2: Vec<f64>,
    /// `h_K² ‖g - ḡ_K‖²_{L²(K)}`
    pub osc2: Vec<f64>,
}

impl LoadData {
    pub fn new(tri: &Triangulation, g: &LoadFunction) -> Self {
        let rule = dunavant6();
        let parts: Vec<(f64, f64)> = (0..tri.num_elements())
            .into_par_iter()
            .map(|k| {
                let vals: Vec<[f64; 2]> = rule
                    .points
                    .iter()
                    .map(|b| g.eval(tri.map_point(k, *b)))
                    .collect();
                let mut mean = [0.0; 2];
                let mut norm2 = 0.0;
                for (v, w) in vals.iter().zip(&rule.weights) {
                    mean[0] += w * v[0];
                    mean[1] += w * v[1];
                    norm2 += w * (v[0] * v[0] + v[1] * v[1]);
                }
                let mut dev = 0.0;
                for (v, w) in vals.iter().zip(&rule.weights) {
                    dev += w * ((v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2));
                }
                let a = tri.area(k);
                (a * norm2, a * a * dev)
            })
            .collect();
        let (g_norm2, osc2) = parts.into_iter().unzip();
        LoadData { g_norm2, osc2 }
    }
}

/// Per-element estimator contributions.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    /// `h_K ‖g‖_K`
    pub volume: Vec<f64>,
    /// `(Σ_E h_K ‖[∇u τ_E]‖²_E)^{1/2}`
    pub jump: Vec<f64>,
    /// `η_K = volume + jump`
    pub eta: Vec<f64>,
    pub eta2: Vec<f64>,
    /// `h_K² ‖g - ḡ_K‖²`
    pub osc2: Vec<f64>,
    /// `h_K² ‖g‖²_K`
    pub vol2: Vec<f64>,
}

impl EstimatorReport {
    pub fn len(&self) -> usize {
        self.eta2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta2.is_empty()
    }

    /// `η²(T)`
    pub fn eta2_total(&self) -> f64 {
        self.eta2.iter().sum()
    }

    /// `η²(S) = Σ_{K ∈ S} η_K²`
    pub fn eta2_set(&self, set: &[usize]) -> f64 {
        set.iter().map(|&k| self.eta2[k]).sum()
    }

    pub fn osc2_total(&self) -> f64 {
        self.osc2.iter().sum()
    }

    pub fn vol2_total(&self) -> f64 {
        self.vol2.iter().sum()
    }

    pub fn vol2_set(&self, set: &[usize]) -> f64 {
        set.iter().map(|&k| self.vol2[k]).sum()
    }

    /// `η̃² = Σ_K (β₁ h_K² ‖g‖²_K + η_K²)`
    pub fn modified_eta2(&self, beta1: f64) -> Result<f64> {
        if !(beta1 > 0.0) {
            return Err(Error::param("beta1", format!("must be positive, got {beta1}")));
        }
        Ok(beta1 * self.vol2_total() + self.eta2_total())
    }
}

/// Tangential jump `[∇u τ_E]` on every edge for piecewise constant gradients.
pub fn edge_jumps(tri: &Triangulation, grads: &[Grad], mode: JumpMode) -> Vec<[f64; 2]> {
    tri.edges()
        .iter()
        .map(|e| {
            let t = e.tangent;
            let gm = grads[e.minus];
            let dm = [gm[0][0] * t[0] + gm[0][1] * t[1], gm[1][0] * t[0] + gm[1][1] * t[1]];
            match e.plus {
                None => dm,
                Some(p) => {
                    let gp = grads[p];
                    let dp = [gp[0][0] * t[0] + gp[0][1] * t[1], gp[1][0] * t[0] + gp[1][1] * t[1]];
                    match mode {
                        JumpMode::Difference => [dp[0] - dm[0], dp[1] - dm[1]],
                        JumpMode::Sum => [dp[0] + dm[0], dp[1] + dm[1]],
                    }
                }
            }
        })
        .collect()
}

/// Estimator for an arbitrary piecewise constant gradient field on `tri`.
pub fn estimate_gradients(tri: &Triangulation, grads: &[Grad], data: &LoadData, mode: JumpMode) -> EstimatorReport {
    let jumps = edge_jumps(tri, grads, mode);
    let n = tri.num_elements();
    let mut out = EstimatorReport {
        volume: Vec::with_capacity(n),
        jump: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        eta2: Vec::with_capacity(n),
        osc2: data.osc2.clone(),
        vol2: Vec::with_capacity(n),
    };
    for k in 0..n {
        let h = tri.h(k);
        let vol = h * data.g_norm2[k].sqrt();
        let mut j2 = 0.0;
        for e in tri.element_edges(k) {
            let j = jumps[e];
            j2 += h * (j[0] * j[0] + j[1] * j[1]) * tri.edges()[e].length;
        }
        let jump = j2.sqrt();
        let eta = vol + jump;
        out.volume.push(vol);
        out.jump.push(jump);
        out.eta.push(eta);
        out.eta2.push(eta * eta);
        out.vol2.push(h * h * data.g_norm2[k]);
    }
    out
}

/// Estimator of a discrete solution on its own mesh.
pub fn estimate(tri: &Triangulation, sol: &DiscreteSolution, g: &LoadFunction) -> Result<EstimatorReport> {
    sol.velocity.ensure_on(tri)?;
    let data = LoadData::new(tri, g);
    Ok(estimate_gradients(tri, &sol.velocity_gradients(tri), &data, JumpMode::Difference))
}

/// Oscillation `Σ_K h_K² ‖g - ḡ_K‖²` per element.
pub fn oscillation(tri: &Triangulation, g: &LoadFunction) -> Vec<f64> {
    LoadData::new(tri, g).osc2
}

/// `Res(v) = (g, v) - (σ_c, ∇_h v)` for a coarse solution and a CR
/// function `v` on a nested fine mesh, where `σ_c = μ∇u_c + p_c Id`.
pub fn residual_functional(
    coarse: &Triangulation,
    sol: &DiscreteSolution,
    fine: &Triangulation,
    v: &FineFunction,
    g: &LoadFunction,
) -> Result<f64> {
    sol.velocity.ensure_on(coarse)?;
    v.ensure_on(fine)?;
    if v.kind != SpaceKind::CrouzeixRaviart {
        return Err(Error::MeshMismatch("residual needs a CR test function".into()));
    }
    let nest = nesting_sets(coarse, fine)?;
    let sigma = sol.stress(coarse);
    let rule = dunavant6();
    let parts: Vec<f64> = (0..fine.num_elements())
        .into_par_iter()
        .map(|t| {
            let s = sigma[nest.fine_ancestor[t]];
            let gv = v.gradient(fine, t);
            let mut load = 0.0;
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let x = fine.map_point(t, *b);
                let gx = g.eval(x);
                let vx = v.eval(fine, t, *b);
                load += w * (gx[0] * vx[0] + gx[1] * vx[1]);
            }
            let contraction = s[0][0] * gv[0][0] + s[0][1] * gv[0][1] + s[1][0] * gv[1][0] + s[1][1] * gv[1][1];
            fine.area(t) * (load - contraction)
        })
        .collect();
    Ok(parts.iter().sum())
}

/// `consis(σ, T) = sup_{v ∈ V_h} ((g, v) - (σ, ∇_h v)) / ‖∇_h v‖`, computed
/// as `‖∇_h w‖` for the Riesz representative `w` of the functional.
pub fn consistency_error(tri: &Triangulation, g: &LoadFunction, exact: &ExactSolution) -> Result<f64> {
    let sys = assemble_saddle(tri, g, 1.0)?;
    let n = sys.space.num_edges();
    if n == 0 {
        return Err(Error::SingularSystem("the mesh has no interior edges".into()));
    }
    let mut ell = sys.load.clone();
    let rule = dunavant6();
    let sigma_int: Vec<Grad> = (0..tri.num_elements())
        .into_par_iter()
        .map(|k| {
            let mut s = [[0.0; 2]; 2];
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let sx = exact.stress(tri.map_point(k, *b));
                for c in 0..2 {
                    for d in 0..2 {
                        s[c][d] += w * sx[c][d];
                    }
                }
            }
            let a = tri.area(k);
            s.map(|r| r.map(|v| v * a))
        })
        .collect();
    for (k, s) in sigma_int.iter().enumerate() {
        let grads = cr_gradients(tri, k);
        for (i, &e) in tri.element_edges(k).iter().enumerate() {
            if let Some(j) = sys.space.edge_dof(e) {
                for c in 0..2 {
                    ell[2 * j + c] -= s[c][0] * grads[i][0] + s[c][1] * grads[i][1];
                }
            }
        }
    }
    let chol = sys.factor_laplacian()?;
    let mut total = 0.0;
    for c in 0..2 {
        let rhs: Vec<f64> = (0..n).map(|j| ell[2 * j + c]).collect();
        let w = chol.solve(&rhs);
        total += rhs.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(total.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::solve;
    use crate::mesh::builders;

    fn reference() -> Triangulation {
        Triangulation::build_initial(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]).unwrap()
    }

    #[test]
    fn constant_load_on_reference_triangle() {
        let tri = reference();
        let data = LoadData::new(&tri, &LoadFunction::constant([1.0, 0.0]));
        let r = estimate_gradients(&tri, &[[[0.0; 2]; 2]], &data, JumpMode::Difference);
        // h_K ‖1‖_K = |K|^{1/2} |K|^{1/2}
        assert!((r.eta[0] - 0.5).abs() < 1e-15);
        assert_eq!(r.jump[0], 0.0);
        assert!(r.osc2[0].abs() < 1e-30);
    }

    #[test]
    fn prescribed_tangential_jump() {
        // square split along the diagonal (0,0)-(1,1); only the upper
        // element carries a gradient whose tangential derivative along the
        // diagonal is c
        let tri = builders::unit_square(1).unwrap();
        let c = 0.75;
        let diag = tri.edges().iter().position(|e| !e.is_boundary()).unwrap();
        let t = tri.edges()[diag].tangent;
        let mut grads = vec![[[0.0; 2]; 2]; 2];
        let up = tri.edges()[diag].plus.unwrap();
        grads[up] = [[c * t[0], c * t[1]], [0.0, 0.0]];
        let data = LoadData::new(&tri, &LoadFunction::zero());
        let r = estimate_gradients(&tri, &grads, &data, JumpMode::Difference);
        let minus = tri.edges()[diag].minus;
        let h_e = 2f64.sqrt();
        // brute force: 1D Gauss quadrature of |c|² along the edge
        let (_, w) = crate::quadrature::gauss_legendre(5);
        let edge_int: f64 = w.iter().map(|w| w * c * c * h_e).sum();
        assert!((r.jump[minus] - (tri.h(minus) * edge_int).sqrt()).abs() < 1e-14);
        assert!((r.jump[minus] - (tri.h(minus) * c * c * h_e).sqrt()).abs() < 1e-14);
        // the gradient is purely tangential along the diagonal, so only
        // the boundary edges of the upper element see a normal component
        assert!(r.jump[up] > r.jump[minus]);
    }

    #[test]
    fn oscillation_of_linear_load() {
        // g = (x, 0) on the reference triangle: ‖x - 1/3‖² = |K| Var(x) = 1/2 · 1/18
        let tri = reference();
        let osc = oscillation(&tri, &LoadFunction::from_fn("x", |x| [x[0], 0.0]));
        let h2 = tri.area(0);
        assert!((osc[0] - h2 * 0.5 / 18.0).abs() < 1e-15);
        // dense sampling oracle on a fine grid of sub-triangles
        let m = 400;
        let mut s = 0.0;
        let mut cnt = 0.0;
        for i in 0..m {
            for j in 0..(m - i) {
                let x = (i as f64 + 1.0 / 3.0) / m as f64;
                s += (x - 1.0 / 3.0).powi(2);
                cnt += 1.0;
                if i + j + 1 < m {
                    let x = (i as f64 + 2.0 / 3.0) / m as f64;
                    s += (x - 1.0 / 3.0).powi(2);
                    cnt += 1.0;
                }
            }
        }
        let sampled = h2 * 0.5 * s / cnt;
        assert!((osc[0] - sampled).abs() < 1e-4 * osc[0]);
    }

    #[test]
    fn residual_vanishes_on_coarse_space() {
        let tri = builders::unit_square(3).unwrap();
        let g = LoadFunction::smooth1(1.0);
        let sol = solve(&tri, &g, 1.0).unwrap();
        let space = crate::spaces::CrSpace::new(&tri);
        for j in 0..space.dim() {
            let mut c = vec![0.0; space.dim()];
            c[j] = 1.0;
            let v = space.to_function(&c);
            assert!(residual_functional(&tri, &sol, &tri, &v, &g).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn consistency_error_of_constant_stress() {
        // u = (y, 0), p = 0.3: σ is constant and g = -div σ = 0
        let tri = builders::unit_square(4).unwrap().bisect(&[3, 9]).unwrap();
        let exact = ExactSolution {
            u: std::sync::Arc::new(|x| [x[1], 0.0]),
            grad_u: std::sync::Arc::new(|_| [[0.0, 1.0], [0.0, 0.0]]),
            p: std::sync::Arc::new(|_| 0.3),
            mu: 1.0,
        };
        let c = consistency_error(&tri, &LoadFunction::zero(), &exact).unwrap();
        assert!(c < 1e-12, "{c}");
    }

    #[test]
    fn modified_estimator_limits() {
        let tri = builders::unit_square(2).unwrap();
        let g = LoadFunction::vortex();
        let sol = solve(&tri, &g, 1.0).unwrap();
        let r = estimate(&tri, &sol, &g).unwrap();
        let e2 = r.eta2_total();
        assert!((r.modified_eta2(1e-300).unwrap() - e2).abs() < 1e-14);
        assert!((r.modified_eta2(1.0).unwrap() - e2 - r.vol2_total()).abs() < 1e-14);
        assert!(r.modified_eta2(0.0).is_err());
        let zero = estimate(&tri, &solve(&tri, &LoadFunction::zero(), 1.0).unwrap(), &LoadFunction::zero()).unwrap();
        assert_eq!(zero.modified_eta2(3.0).unwrap(), zero.eta2_total());
    }
}
