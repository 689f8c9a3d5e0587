//! Broken Sobolev norms and errors against analytic solutions.

use rayon::prelude::*;

use crate::error::Result;
use crate::mesh::Triangulation;
use crate::problem::ExactSolution;
use crate::quadrature::dunavant6;
use crate::spaces::{div, frobenius2, grad_sub, DiscreteSolution, FineFunction};

/// `‖∇_h v‖`, `‖div_h v‖` and `‖v‖` of a piecewise linear field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrokenNorms {
    pub grad: f64,
    pub div: f64,
    pub l2: f64,
}

pub fn broken_norms(tri: &Triangulation, f: &FineFunction) -> Result<BrokenNorms> {
    f.ensure_on(tri)?;
    let rule = dunavant6();
    let parts: Vec<[f64; 3]> = (0..tri.num_elements())
        .into_par_iter()
        .map(|k| {
            let g = f.gradient(tri, k);
            let a = tri.area(k);
            let mut l2 = 0.0;
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let v = f.eval(tri, k, *b);
                l2 += w * (v[0] * v[0] + v[1] * v[1]);
            }
            [a * frobenius2(&g), a * div(&g).powi(2), a * l2]
        })
        .collect();
    let s = parts.iter().fold([0.0; 3], |acc, p| [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]);
    Ok(BrokenNorms {
        grad: s[0].sqrt(),
        div: s[1].sqrt(),
        l2: s[2].sqrt(),
    })
}

/// `⦀v, q⦀² = ‖∇_h v‖² + γ₁ ‖q‖²`
pub fn energy_norm2(grad2: f64, pressure2: f64, gamma1: f64) -> f64 {
    grad2 + gamma1 * pressure2
}

/// Squared broken gradient norm of the difference of two CR/P1 fields
/// that live on the same mesh.
pub fn grad_diff2(tri: &Triangulation, a: &FineFunction, b: &FineFunction) -> Result<f64> {
    a.ensure_on(tri)?;
    b.ensure_on(tri)?;
    Ok((0..tri.num_elements())
        .map(|k| tri.area(k) * frobenius2(&grad_sub(&a.gradient(tri, k), &b.gradient(tri, k))))
        .sum())
}

/// Squared errors of a discrete solution against an analytic pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    /// `‖∇_h(u - u_h)‖²`
    pub velocity2: f64,
    /// `‖p - p_h‖²`
    pub pressure2: f64,
    /// `‖u - u_h‖²`
    pub velocity_l2: f64,
}

pub fn exact_errors(tri: &Triangulation, sol: &DiscreteSolution, exact: &ExactSolution) -> Result<ErrorNorms> {
    sol.velocity.ensure_on(tri)?;
    let rule = dunavant6();
    let parts: Vec<[f64; 3]> = (0..tri.num_elements())
        .into_par_iter()
        .map(|k| {
            let gh = sol.velocity.gradient(tri, k);
            let ph = sol.pressure[k];
            let mut s = [0.0; 3];
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let x = tri.map_point(k, *b);
                s[0] += w * frobenius2(&grad_sub(&(exact.grad_u)(x), &gh));
                s[1] += w * ((exact.p)(x) - ph).powi(2);
                let u = (exact.u)(x);
                let uh = sol.velocity.eval(tri, k, *b);
                s[2] += w * ((u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2));
            }
            s.map(|v| v * tri.area(k))
        })
        .collect();
    let s = parts.iter().fold([0.0; 3], |acc, p| [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]);
    Ok(ErrorNorms {
        velocity2: s[0],
        pressure2: s[1],
        velocity_l2: s[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builders;
    use crate::spaces::SpaceKind;

    fn interpolate(tri: &Triangulation, f: impl Fn([f64; 2]) -> [f64; 2]) -> FineFunction {
        let mut v = FineFunction::zeros(tri, SpaceKind::CrouzeixRaviart);
        for e in 0..tri.num_edges() {
            v.values[e] = f(tri.edge_midpoint(e));
        }
        v
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let tri = builders::unit_square(3).unwrap();
        let v = interpolate(&tri, |_| [2.0, -1.0]);
        let n = broken_norms(&tri, &v).unwrap();
        assert!(n.grad < 1e-13);
        assert!((n.l2 - 5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn saddle_field_gradient_norm() {
        // (x, -y): |∇|² = 2 pointwise, divergence free
        for tri in [builders::unit_square(2).unwrap(), builders::unit_square(5).unwrap().bisect(&[0, 7]).unwrap()] {
            let v = interpolate(&tri, |x| [x[0], -x[1]]);
            let n = broken_norms(&tri, &v).unwrap();
            assert!((n.grad.powi(2) - 2.0 * tri.total_area()).abs() < 1e-12);
            assert!(n.div < 1e-12);
        }
    }

    #[test]
    fn energy_norm_from_parts() {
        assert_eq!(energy_norm2(2.0, 3.0, 0.5), 3.5);
    }
}
