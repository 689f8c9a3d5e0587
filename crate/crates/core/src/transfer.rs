//! Inter-mesh operators: conservative interpolation, restriction, the naive
//! and mixed prolongations, and nodal averaging onto conforming P1.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{edge_jumps, JumpMode};
use crate::mesh::{nesting_sets, NestingSets, Point, Triangulation};
use crate::quadrature::segment_mean;
use crate::spaces::{grad_sub, Grad, SpaceKind};

pub use crate::spaces::FineFunction;

/// Gauss points per edge used for edge means of analytic fields.
pub const EDGE_GAUSS_POINTS: usize = 8;

const GEOM_TOL: f64 = 1e-12;

/// `Π_k v`: the CR function whose edge means match those of `v`.
///
/// Boundary edges keep their mean as well; it is zero for fields that vanish
/// on `∂Ω`.
pub fn conservative_interpolation<F>(tri: &Triangulation, v: F) -> FineFunction
where
    F: Fn(Point) -> [f64; 2] + Sync,
{
    let verts = tri.vertices();
    let values = tri
        .edges()
        .par_iter()
        .map(|e| segment_mean(verts[e.vertices[0]], verts[e.vertices[1]], EDGE_GAUSS_POINTS, &v))
        .collect();
    FineFunction {
        kind: SpaceKind::CrouzeixRaviart,
        values,
        mesh_id: tri.id(),
    }
}

/// `Π_k` applied to a discrete field that already lives on `tri`.
///
/// CR functions come back unchanged; P1 functions are reduced to their edge
/// means, which are the endpoint averages.
pub fn interpolate_discrete(tri: &Triangulation, v: &FineFunction) -> Result<FineFunction> {
    v.ensure_on(tri)?;
    match v.kind {
        SpaceKind::CrouzeixRaviart => Ok(v.clone()),
        SpaceKind::P1 => {
            let values = tri
                .edges()
                .iter()
                .map(|e| {
                    let (a, b) = (v.values[e.vertices[0]], v.values[e.vertices[1]]);
                    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
                })
                .collect();
            Ok(FineFunction {
                kind: SpaceKind::CrouzeixRaviart,
                values,
                mesh_id: tri.id(),
            })
        }
    }
}

fn require_cr(v: &FineFunction) -> Result<()> {
    if v.kind != SpaceKind::CrouzeixRaviart {
        return Err(Error::MeshMismatch(format!("expected a CR function, got {:?}", v.kind)));
    }
    Ok(())
}

fn on_segment(a: Point, b: Point, x: Point) -> Option<f64> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let r = [x[0] - a[0], x[1] - a[1]];
    let cross = d[0] * r[1] - d[1] * r[0];
    if cross.abs() > GEOM_TOL * len2.max(1.0) {
        return None;
    }
    let s = (d[0] * r[0] + d[1] * r[1]) / len2;
    (-GEOM_TOL..=1.0 + GEOM_TOL).contains(&s).then_some(s)
}

/// For every fine edge, the coarse edge that contains it, if any.
pub fn coarse_edge_map(coarse: &Triangulation, fine: &Triangulation, nest: &NestingSets) -> Vec<Option<usize>> {
    let fv = fine.vertices();
    let cv = coarse.vertices();
    fine.edges()
        .iter()
        .map(|fe| {
            let (a, b) = (fv[fe.vertices[0]], fv[fe.vertices[1]]);
            fe.elements().find_map(|t| {
                let k = nest.fine_ancestor[t];
                coarse.element_edges(k).into_iter().find(|&ce| {
                    let c = coarse.edges()[ce].vertices;
                    on_segment(cv[c[0]], cv[c[1]], a).is_some() && on_segment(cv[c[0]], cv[c[1]], b).is_some()
                })
            })
        })
        .collect()
}

/// `I_{k-1} v_k`: each coarse edge mean is the length-weighted average of the
/// means over its fine sub-edges.
pub fn restriction(fine: &Triangulation, v: &FineFunction, coarse: &Triangulation) -> Result<FineFunction> {
    v.ensure_on(fine)?;
    require_cr(v)?;
    let nest = nesting_sets(coarse, fine)?;
    let map = coarse_edge_map(coarse, fine, &nest);
    let mut acc = vec![[0.0; 2]; coarse.num_edges()];
    let mut covered = vec![0.0; coarse.num_edges()];
    for (f, ce) in map.iter().enumerate() {
        if let Some(ce) = *ce {
            let l = fine.edges()[f].length;
            acc[ce][0] += l * v.values[f][0];
            acc[ce][1] += l * v.values[f][1];
            covered[ce] += l;
        }
    }
    for (ce, e) in coarse.edges().iter().enumerate() {
        if (covered[ce] - e.length).abs() > 1e-10 * e.length {
            return Err(Error::NotNested(format!(
                "coarse edge {ce} is not a union of fine edges"
            )));
        }
        acc[ce][0] /= e.length;
        acc[ce][1] /= e.length;
    }
    Ok(FineFunction {
        kind: SpaceKind::CrouzeixRaviart,
        values: acc,
        mesh_id: coarse.id(),
    })
}

/// Coarse edge of element `k` with the same endpoints as fine edge `f`.
fn identical_coarse_edge(coarse: &Triangulation, k: usize, fine: &Triangulation, f: usize) -> Option<usize> {
    let ends = fine.edges()[f].vertices;
    coarse.element_edges(k).into_iter().find(|&ce| coarse.edges()[ce].vertices == ends)
}

/// `ω_{E,k}`: coarse elements containing the midpoint of fine edge `f`.
///
/// Candidates are the ancestors of the elements incident to `f`; each one is
/// confirmed with a point-in-triangle test.
fn coarse_patch(coarse: &Triangulation, fine: &Triangulation, nest: &NestingSets, f: usize) -> Vec<usize> {
    let mid = fine.edge_midpoint(f);
    let mut out: Vec<usize> = Vec::with_capacity(2);
    for t in fine.edges()[f].elements() {
        let k = nest.fine_ancestor[t];
        if !out.contains(&k) && coarse.barycentric(k, mid).iter().all(|&l| l >= -GEOM_TOL) {
            out.push(k);
        }
    }
    out
}

/// `I′ v_k`: every fine edge mean averages the one-sided means of `v_k`
/// over the coarse elements containing the edge. Boundary edges are zero.
pub fn naive_prolongation(coarse: &Triangulation, v: &FineFunction, fine: &Triangulation) -> Result<FineFunction> {
    let nest = nesting_sets(coarse, fine)?;
    naive_prolongation_with(coarse, v, fine, &nest)
}

pub fn naive_prolongation_with(
    coarse: &Triangulation,
    v: &FineFunction,
    fine: &Triangulation,
    nest: &NestingSets,
) -> Result<FineFunction> {
    v.ensure_on(coarse)?;
    require_cr(v)?;
    check_nest(fine, nest)?;
    let values = (0..fine.num_edges())
        .into_par_iter()
        .map(|f| {
            if fine.edges()[f].is_boundary() {
                return Ok([0.0; 2]);
            }
            let k0 = nest.fine_ancestor[fine.edges()[f].minus];
            if let Some(ce) = identical_coarse_edge(coarse, k0, fine, f) {
                // every one-sided mean of a CR field on its own edge is the dof
                return Ok(v.values[ce]);
            }
            let mid = fine.edge_midpoint(f);
            let omega = coarse_patch(coarse, fine, nest, f);
            if omega.is_empty() {
                return Err(Error::NotNested(format!("fine edge {f} lies in no coarse element")));
            }
            let mut s = [0.0; 2];
            for &k in &omega {
                let val = v.eval(coarse, k, coarse.barycentric(k, mid));
                s[0] += val[0];
                s[1] += val[1];
            }
            let xi = omega.len() as f64;
            Ok([s[0] / xi, s[1] / xi])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FineFunction {
        kind: SpaceKind::CrouzeixRaviart,
        values,
        mesh_id: fine.id(),
    })
}

/// `Π v_k`: conforming P1 field whose value at an interior vertex is the
/// mean of the one-sided values of `v_k`; zero at boundary vertices.
pub fn nodal_averaging(tri: &Triangulation, v: &FineFunction) -> Result<FineFunction> {
    v.ensure_on(tri)?;
    require_cr(v)?;
    let nv = tri.num_vertices();
    let mut sum = vec![[0.0; 2]; nv];
    let mut count = vec![0usize; nv];
    for (k, t) in tri.triangles().iter().enumerate() {
        for (i, &z) in t.vertices.iter().enumerate() {
            let val = v.vertex_value(tri, k, i);
            sum[z][0] += val[0];
            sum[z][1] += val[1];
            count[z] += 1;
        }
    }
    let mut boundary = vec![false; nv];
    for e in tri.edges().iter().filter(|e| e.is_boundary()) {
        boundary[e.vertices[0]] = true;
        boundary[e.vertices[1]] = true;
    }
    let values = (0..nv)
        .map(|z| {
            if boundary[z] || count[z] == 0 {
                [0.0; 2]
            } else {
                let c = count[z] as f64;
                [sum[z][0] / c, sum[z][1] / c]
            }
        })
        .collect();
    Ok(FineFunction {
        kind: SpaceKind::P1,
        values,
        mesh_id: tri.id(),
    })
}

/// `J v_k`: edge means of `Π v_k` on fine edges touching the refined region,
/// edge means of `v_k` everywhere else.
pub fn mixed_prolongation(coarse: &Triangulation, v: &FineFunction, fine: &Triangulation) -> Result<FineFunction> {
    let nest = nesting_sets(coarse, fine)?;
    mixed_prolongation_with(coarse, v, fine, &nest)
}

pub fn mixed_prolongation_with(
    coarse: &Triangulation,
    v: &FineFunction,
    fine: &Triangulation,
    nest: &NestingSets,
) -> Result<FineFunction> {
    v.ensure_on(coarse)?;
    require_cr(v)?;
    check_nest(fine, nest)?;
    let averaged = nodal_averaging(coarse, v)?;
    let values = (0..fine.num_edges())
        .into_par_iter()
        .map(|f| {
            let edge = &fine.edges()[f];
            if edge.is_boundary() {
                return [0.0; 2];
            }
            let mid = fine.edge_midpoint(f);
            let touches_refined = edge.elements().any(|t| nest.is_refined[nest.fine_ancestor[t]]);
            let k = nest.fine_ancestor[edge.minus];
            let bary = coarse.barycentric(k, mid);
            if touches_refined {
                averaged.eval(coarse, k, bary)
            } else {
                // both sides are unrefined, so the edge is a coarse edge
                match identical_coarse_edge(coarse, k, fine, f) {
                    Some(ce) => v.values[ce],
                    None => v.eval(coarse, k, bary),
                }
            }
        })
        .collect();
    Ok(FineFunction {
        kind: SpaceKind::CrouzeixRaviart,
        values,
        mesh_id: fine.id(),
    })
}

fn check_nest(fine: &Triangulation, nest: &NestingSets) -> Result<()> {
    if nest.fine_ancestor.len() != fine.num_elements() {
        return Err(Error::NotNested(format!(
            "nesting describes {} fine elements, mesh has {}",
            nest.fine_ancestor.len(),
            fine.num_elements()
        )));
    }
    Ok(())
}

/// Which prolongation the stability constant is measured for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prolongation {
    /// `J`
    Mixed,
    /// `I′`
    Naive,
}

/// Smallest `C` with
/// `‖∇_f(P v - v)‖² ≤ C Σ_{K∈M} Σ_{E⊂∂K} h_K ‖[∇v τ_E]‖²_{L²(E)}`
/// for all coarse CR fields `v`, where `M` is the coarse neighbourhood of
/// the refined region.
///
/// The two velocity components decouple, so the supremum is computed on
/// scalar fields as the top eigenvalue of the pencil restricted to the range
/// of the jump form. Returns infinity when some field with vanishing jump
/// terms is still moved by the prolongation.
pub fn prolongation_constant(coarse: &Triangulation, fine: &Triangulation, op: Prolongation) -> Result<f64> {
    let nest = nesting_sets(coarse, fine)?;
    let n = coarse.num_interior_edges();
    if n == 0 {
        return Ok(0.0);
    }
    let dofs: Vec<usize> = (0..coarse.num_edges()).filter(|&e| !coarse.edges()[e].is_boundary()).collect();
    let in_m = {
        let mut m = vec![false; coarse.num_elements()];
        for &k in &nest.neighborhood {
            m[k] = true;
        }
        m
    };
    let nf = fine.num_elements();

    let columns: Vec<(Vec<f64>, Vec<f64>)> = dofs
        .par_iter()
        .map(|&e| {
            let mut v = FineFunction::zeros(coarse, SpaceKind::CrouzeixRaviart);
            v.values[e] = [1.0, 0.0];
            let w = match op {
                Prolongation::Mixed => mixed_prolongation_with(coarse, &v, fine, &nest)?,
                Prolongation::Naive => naive_prolongation_with(coarse, &v, fine, &nest)?,
            };
            let coarse_grads: Vec<Grad> = (0..coarse.num_elements()).map(|k| v.gradient(coarse, k)).collect();
            let mut ncol = Vec::with_capacity(2 * nf);
            for t in 0..nf {
                let d = grad_sub(&w.gradient(fine, t), &coarse_grads[nest.fine_ancestor[t]]);
                let s = fine.area(t).sqrt();
                ncol.push(s * d[0][0]);
                ncol.push(s * d[0][1]);
            }
            let jumps = edge_jumps(coarse, &coarse_grads, JumpMode::Difference);
            let mut dcol = Vec::new();
            for (k, _) in in_m.iter().enumerate().filter(|(_, &m)| m) {
                let h = coarse.h(k);
                for ce in coarse.element_edges(k) {
                    dcol.push((h * coarse.edges()[ce].length).sqrt() * jumps[ce][0]);
                }
            }
            Ok((ncol, dcol))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows_n = columns[0].0.len();
    let rows_d = columns[0].1.len();
    let mn = DMatrix::from_fn(rows_n, n, |i, j| columns[j].0[i]);
    let md = DMatrix::from_fn(rows_d, n, |i, j| columns[j].1[i]);
    let nmat = mn.transpose() * &mn;
    let dmat = md.transpose() * &md;
    generalized_sup(&nmat, &dmat)
}

/// `sup xᵀNx / xᵀDx` for symmetric semidefinite `N`, `D`.
fn generalized_sup(nmat: &DMatrix<f64>, dmat: &DMatrix<f64>) -> Result<f64> {
    let eig = SymmetricEigen::new(dmat.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let scale_n = nmat.diagonal().iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(if scale_n > 0.0 { f64::INFINITY } else { 0.0 });
    }
    let cut = 1e-10 * top;
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > cut).collect();
    let kernel: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] <= cut).collect();
    if !kernel.is_empty() && scale_n > 0.0 {
        let q0 = eig.eigenvectors.select_columns(&kernel);
        let leak = (q0.transpose() * nmat * &q0).abs().max();
        if leak > 1e-8 * scale_n {
            return Ok(f64::INFINITY);
        }
    }
    let w = DMatrix::from_fn(eig.eigenvectors.nrows(), keep.len(), |i, j| {
        eig.eigenvectors[(i, keep[j])] / eig.eigenvalues[keep[j]].sqrt()
    });
    let reduced = w.transpose() * nmat * &w;
    let sym = (&reduced + reduced.transpose()) * 0.5;
    let ev = SymmetricEigen::new(sym);
    Ok(ev.eigenvalues.iter().cloned().fold(0.0, f64::max))
}

/// Bisects the descendants of the coarse `region` `depth` times (plus
/// whatever the conforming closure adds).
pub fn refine_region(coarse: &Triangulation, region: &[usize], depth: usize) -> Result<Triangulation> {
    let mut inside = vec![false; coarse.num_elements()];
    for &k in region {
        if k >= coarse.num_elements() {
            return Err(Error::ElementOutOfRange { element: k, len: coarse.num_elements() });
        }
        inside[k] = true;
    }
    let mut fine = coarse.clone();
    for _ in 0..depth {
        let nest = nesting_sets(coarse, &fine)?;
        let marked: Vec<usize> = (0..fine.num_elements()).filter(|&t| inside[nest.fine_ancestor[t]]).collect();
        fine = fine.bisect(&marked)?;
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builders;
    use crate::quadrature::gauss_legendre;

    fn random_cr(tri: &Triangulation, seed: u64) -> FineFunction {
        // small LCG keeps the unit tests free of extra dependencies
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut v = FineFunction::zeros(tri, SpaceKind::CrouzeixRaviart);
        for (e, edge) in tri.edges().iter().enumerate() {
            if !edge.is_boundary() {
                v.values[e] = [next(), next()];
            }
        }
        v
    }

    #[test]
    fn quadratic_edge_means_match_gauss_oracle() {
        let tri = Triangulation::build_initial(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]).unwrap();
        let pi = conservative_interpolation(&tri, |x| [x[0] * x[0], 0.0]);
        let (nodes, weights) = gauss_legendre(3);
        for (e, edge) in tri.edges().iter().enumerate() {
            let a = tri.vertices()[edge.vertices[0]];
            let b = tri.vertices()[edge.vertices[1]];
            let oracle: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| w * (a[0] + t * (b[0] - a[0])).powi(2))
                .sum();
            assert!((pi.values[e][0] - oracle).abs() < 1e-15);
        }
        // x² over the hypotenuse from (1,0) to (0,1) has mean 1/3
        let hyp = tri.edges().iter().position(|e| e.vertices == [1, 2]).unwrap();
        assert!((pi.values[hyp][0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn discrete_interpolation_is_identity_on_cr() {
        let tri = builders::unit_square(3).unwrap();
        let v = random_cr(&tri, 3);
        assert_eq!(interpolate_discrete(&tri, &v).unwrap(), v);
    }

    #[test]
    fn restriction_of_a_constant() {
        let coarse = builders::unit_square(2).unwrap();
        let fine = coarse.bisect(&[0, 3]).unwrap().bisect(&[1]).unwrap();
        let mut v = FineFunction::zeros(&fine, SpaceKind::CrouzeixRaviart);
        v.values.iter_mut().for_each(|x| *x = [2.0, -0.5]);
        let r = restriction(&fine, &v, &coarse).unwrap();
        for x in &r.values {
            assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] + 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn restriction_inverts_naive_prolongation() {
        let coarse = builders::unit_square(3).unwrap();
        let fine = coarse.bisect(&[2, 5, 9]).unwrap();
        let v = random_cr(&coarse, 11);
        let up = naive_prolongation(&coarse, &v, &fine).unwrap();
        let back = restriction(&fine, &up, &coarse).unwrap();
        for (a, b) in back.values.iter().zip(&v.values) {
            assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn prolongations_are_identity_without_refinement() {
        let tri = builders::unit_square(3).unwrap();
        let v = random_cr(&tri, 5);
        assert_eq!(mixed_prolongation(&tri, &v, &tri).unwrap().values, v.values);
        let naive = naive_prolongation(&tri, &v, &tri).unwrap();
        for (a, b) in naive.values.iter().zip(&v.values) {
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn averaging_reproduces_continuous_fields() {
        let tri = builders::unit_square(4).unwrap();
        // piecewise linear interpolant of f vanishing on the boundary
        let g = |x: Point| {
            let on_boundary = x[0].abs() < 1e-12 || x[1].abs() < 1e-12 || (x[0] - 1.0).abs() < 1e-12 || (x[1] - 1.0).abs() < 1e-12;
            if on_boundary {
                [0.0, 0.0]
            } else {
                [x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]) + x[0]]
            }
        };
        let mut lin = FineFunction::zeros(&tri, SpaceKind::CrouzeixRaviart);
        let mut p1 = FineFunction::zeros(&tri, SpaceKind::P1);
        for (z, x) in tri.vertices().iter().enumerate() {
            p1.values[z] = g(*x);
        }
        for e in 0..tri.num_edges() {
            let edge = &tri.edges()[e];
            let (a, b) = (p1.values[edge.vertices[0]], p1.values[edge.vertices[1]]);
            lin.values[e] = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        }
        let avg = nodal_averaging(&tri, &lin).unwrap();
        for (a, b) in avg.values.iter().zip(&p1.values) {
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_prolongation_of_uniform_refinement_is_averaging() {
        let coarse = builders::unit_square(2).unwrap();
        let fine = coarse.bisect_all().unwrap();
        let v = random_cr(&coarse, 9);
        let j = mixed_prolongation(&coarse, &v, &fine).unwrap();
        let avg = nodal_averaging(&coarse, &v).unwrap();
        let nest = nesting_sets(&coarse, &fine).unwrap();
        for f in 0..fine.num_edges() {
            let k = nest.fine_ancestor[fine.edges()[f].minus];
            let expect = avg.eval(&coarse, k, coarse.barycentric(k, fine.edge_midpoint(f)));
            assert!((j.values[f][0] - expect[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_constant_is_finite_and_naive_differs() {
        let coarse = builders::unit_square(4).unwrap();
        let fine = refine_region(&coarse, &[12, 13], 2).unwrap();
        let cj = prolongation_constant(&coarse, &fine, Prolongation::Mixed).unwrap();
        let ci = prolongation_constant(&coarse, &fine, Prolongation::Naive).unwrap();
        assert!(cj.is_finite() && cj > 0.0, "{cj}");
        assert!(ci.is_finite() && ci > 0.0, "{ci}");
    }

    #[test]
    fn coarse_patch_sizes() {
        let coarse = builders::unit_square(2).unwrap();
        let fine = coarse.bisect(&[0]).unwrap();
        let nest = nesting_sets(&coarse, &fine).unwrap();
        for f in 0..fine.num_edges() {
            let n = coarse_patch(&coarse, &fine, &nest, f).len();
            let expect = if fine.edges()[f].is_boundary() { 1 } else { 1 + coarse_edge_map(&coarse, &fine, &nest)[f].is_some() as usize };
            assert_eq!(n, expect, "fine edge {f}");
        }
    }
}
