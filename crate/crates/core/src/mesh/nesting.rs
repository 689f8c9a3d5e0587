use std::collections::HashMap;
use std::f64::consts::PI;

use super::triangulation::{GenealogyKey, Triangulation};
use crate::error::{Error, Result};

/// How a coarse mesh `T_k` relates to a nested refinement `T_{k+l}`.
#[derive(Clone, Debug, PartialEq)]
pub struct NestingSets {
    /// Coarse elements that survive unchanged, `T_k ∩ T_{k+l}`.
    pub common: Vec<usize>,
    /// Coarse elements that were bisected, `T_k \ T_{k+l}`.
    pub refined: Vec<usize>,
    /// Coarse elements whose closure touches the refined region, `M_{k,k+l}`.
    pub neighborhood: Vec<usize>,
    /// Coarse elements making up `Ω_R`.
    pub region_r: Vec<usize>,
    /// Unrefined coarse elements not touching `Ω_R`, making up `Ω_C`.
    pub region_c: Vec<usize>,
    /// Coarse ancestor of every fine element.
    pub fine_ancestor: Vec<usize>,
    /// Per coarse element: was it bisected?
    pub is_refined: Vec<bool>,
}

impl NestingSets {
    /// Fine elements lying in refined coarse elements.
    pub fn fine_in_refined(&self) -> impl Iterator<Item = usize> + '_ {
        self.fine_ancestor
            .iter()
            .enumerate()
            .filter(|(_, &a)| self.is_refined[a])
            .map(|(t, _)| t)
    }
}

/// Computes the common/refined partition of `coarse` and the regions used
/// by the mixed prolongation.
pub fn nesting_sets(coarse: &Triangulation, fine: &Triangulation) -> Result<NestingSets> {
    let nc = coarse.num_vertices();
    if fine.num_vertices() < nc || fine.vertices()[..nc] != *coarse.vertices() {
        return Err(Error::NotNested(
            "coarse vertices are not a prefix of the fine vertices".into(),
        ));
    }
    let lookup: HashMap<GenealogyKey, usize> =
        coarse.keys().enumerate().map(|(k, key)| (key, k)).collect();

    let mut fine_ancestor = Vec::with_capacity(fine.num_elements());
    let mut is_common = vec![false; coarse.num_elements()];
    let mut covered = vec![0.0; coarse.num_elements()];
    for (t, tri) in fine.triangles().iter().enumerate() {
        let key = tri.key();
        let anc = (0..=key.level)
            .rev()
            .find_map(|l| lookup.get(&key.truncated(l)).copied())
            .ok_or_else(|| Error::NotNested(format!("fine element {t} has no coarse ancestor")))?;
        if coarse.triangles()[anc].level == tri.level {
            is_common[anc] = true;
        }
        covered[anc] += fine.area(t);
        fine_ancestor.push(anc);
    }
    for (k, &c) in covered.iter().enumerate() {
        if (c - coarse.area(k)).abs() > 1e-10 * coarse.area(k) {
            return Err(Error::NotNested(format!(
                "coarse element {k} is not covered by its descendants"
            )));
        }
    }

    let is_refined: Vec<bool> = is_common.iter().map(|c| !c).collect();
    let mut touched = vec![false; coarse.num_vertices()];
    for (k, tri) in coarse.triangles().iter().enumerate() {
        if is_refined[k] {
            for &v in &tri.vertices {
                touched[v] = true;
            }
        }
    }
    let mut common = Vec::new();
    let mut refined = Vec::new();
    let mut neighborhood = Vec::new();
    let mut region_c = Vec::new();
    for (k, tri) in coarse.triangles().iter().enumerate() {
        let touches = tri.vertices.iter().any(|&v| touched[v]);
        if is_refined[k] {
            refined.push(k);
        } else {
            common.push(k);
            if !touches {
                region_c.push(k);
            }
        }
        if touches {
            neighborhood.push(k);
        }
    }
    Ok(NestingSets {
        common,
        region_r: refined.clone(),
        refined,
        neighborhood,
        region_c,
        fine_ancestor,
        is_refined,
    })
}

/// Largest size ratio `h_K / h_T` over refined coarse elements `K` and
/// their fine descendants `T`; 1 when nothing was refined.
pub fn refinement_ratio(coarse: &Triangulation, fine: &Triangulation) -> Result<f64> {
    let nest = nesting_sets(coarse, fine)?;
    let mut gamma: f64 = 1.0;
    for (t, &k) in nest.fine_ancestor.iter().enumerate() {
        if nest.is_refined[k] {
            let depth = fine.triangles()[t].level - coarse.triangles()[k].level;
            gamma = gamma.max(2f64.powf(depth as f64 / 2.0));
        }
    }
    Ok(gamma)
}

/// Element, edge and vertex patches of a mesh.
#[derive(Clone, Debug)]
pub struct Patches {
    /// `ω_K` without `K`: elements sharing an edge with `K`.
    pub element_neighbors: Vec<Vec<usize>>,
    /// `ω_E`: elements containing edge `E`.
    pub edge_patch: Vec<Vec<usize>>,
    /// `ω_Z`: elements containing vertex `Z`.
    pub vertex_patch: Vec<Vec<usize>>,
}

impl Patches {
    /// `ξ_E`
    pub fn edge_cardinality(&self, e: usize) -> usize {
        self.edge_patch[e].len()
    }

    /// `ξ_Z`
    pub fn vertex_cardinality(&self, z: usize) -> usize {
        self.vertex_patch[z].len()
    }
}

pub fn patches(tri: &Triangulation) -> Patches {
    let mut element_neighbors = vec![Vec::new(); tri.num_elements()];
    let mut edge_patch = Vec::with_capacity(tri.num_edges());
    for e in tri.edges() {
        edge_patch.push(e.elements().collect::<Vec<_>>());
        if let Some(p) = e.plus {
            element_neighbors[e.minus].push(p);
            element_neighbors[p].push(e.minus);
        }
    }
    let mut vertex_patch = vec![Vec::new(); tri.num_vertices()];
    for (k, t) in tri.triangles().iter().enumerate() {
        for &v in &t.vertices {
            vertex_patch[v].push(k);
        }
    }
    Patches {
        element_neighbors,
        edge_patch,
        vertex_patch,
    }
}

/// Bound `κ` with `#M_{k,k+l} <= κ #(T_k \ T_{k+l})` for every NVB
/// descendant of `initial`.
///
/// Every descendant angle is at least the smallest angle among the NVB
/// similarity classes of the initial elements, which bounds the number of
/// elements around a vertex by `2π / α_min` and the elements touching any
/// element by three times that.
pub fn overlap_constant(initial: &Triangulation) -> usize {
    let alpha = similarity_min_angle(initial);
    // the ratio is an exact integer for many meshes; guard against it landing
    // a rounding error below
    3 * (2.0 * PI / alpha + 1e-9).floor() as usize
}

/// Smallest angle over six generations of uniform bisection of each
/// initial element in isolation.
pub fn similarity_min_angle(initial: &Triangulation) -> f64 {
    let mut alpha = f64::INFINITY;
    for k in 0..initial.num_elements() {
        let t = &initial.triangles()[k];
        let single = Triangulation::with_refinement_edges(
            initial.element_points(k).to_vec(),
            &[([0, 1, 2], t.refinement_edge)],
        )
        .expect("element of a valid mesh");
        let deep = single.refine_uniform(6).expect("isolated refinement");
        alpha = alpha.min(deep.min_angle());
    }
    alpha
}

/// Number of distinct angle triples among the descendants of each initial element.
pub fn similarity_classes(tri: &Triangulation) -> HashMap<usize, usize> {
    let mut classes: HashMap<usize, Vec<[f64; 3]>> = HashMap::new();
    for (k, t) in tri.triangles().iter().enumerate() {
        let mut a = tri.angles(k);
        a.sort_by(f64::total_cmp);
        let list = classes.entry(t.root()).or_default();
        if !list
            .iter()
            .any(|b| (0..3).all(|i| (a[i] - b[i]).abs() < 1e-9))
        {
            list.push(a);
        }
    }
    classes.into_iter().map(|(r, l)| (r, l.len())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builders;
    use std::f64::consts::SQRT_2;

    #[test]
    fn identical_meshes() {
        let t = builders::unit_square(2).unwrap();
        let n = nesting_sets(&t, &t).unwrap();
        assert!(n.refined.is_empty());
        assert!(n.neighborhood.is_empty());
        assert_eq!(n.region_c.len(), 8);
        assert_eq!(refinement_ratio(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn uniform_refinement() {
        let t = builders::unit_square(2).unwrap();
        let f = t.bisect_all().unwrap();
        let n = nesting_sets(&t, &f).unwrap();
        assert_eq!(n.refined.len(), 8);
        assert!(n.region_c.is_empty());
        assert!(n.common.is_empty());
        assert!((refinement_ratio(&t, &f).unwrap() - SQRT_2).abs() < 1e-15);
        for l in 1..=4 {
            let f = t.refine_uniform(l).unwrap();
            let g = refinement_ratio(&t, &f).unwrap();
            assert!((g - 2f64.powf(l as f64 / 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_element_neighbourhood() {
        // 8-element square; element 3 is the upper triangle of the
        // lower-right cell, its refinement edge is the shared diagonal
        let t = builders::unit_square(2).unwrap();
        let f = t.bisect(&[3]).unwrap();
        let n = nesting_sets(&t, &f).unwrap();
        assert_eq!(n.refined, vec![2, 3]);
        let p = patches(&t);
        for &k in &n.refined {
            assert!(n.neighborhood.contains(&k));
            for nb in &p.element_neighbors[k] {
                assert!(n.neighborhood.contains(nb));
            }
        }
        // every vertex-touching element is included, nothing else
        let expected: Vec<usize> = (0..8)
            .filter(|&k| {
                t.triangles()[k]
                    .vertices
                    .iter()
                    .any(|v| t.triangles()[2].vertices.contains(v) || t.triangles()[3].vertices.contains(v))
            })
            .collect();
        assert_eq!(n.neighborhood, expected);
        for &c in &n.region_c {
            assert!(!n.neighborhood.contains(&c));
        }
        let mut all: Vec<usize> = n.common.iter().chain(&n.refined).copied().collect();
        all.sort();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn reversed_order_is_not_nested() {
        let t = builders::unit_square(2).unwrap();
        let f = t.bisect(&[0]).unwrap();
        assert!(matches!(nesting_sets(&f, &t), Err(Error::NotNested(_))));
    }

    #[test]
    fn patch_cardinalities() {
        let t = Triangulation::build_initial(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            &[[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let p = patches(&t);
        for (e, edge) in t.edges().iter().enumerate() {
            assert_eq!(p.edge_cardinality(e), if edge.is_boundary() { 1 } else { 2 });
        }
        // diagonal endpoints
        assert_eq!(p.vertex_cardinality(0), 2);
        assert_eq!(p.vertex_cardinality(2), 2);
        assert_eq!(p.vertex_cardinality(1), 1);
        assert_eq!(p.element_neighbors[0], vec![1]);
    }

    #[test]
    fn right_isosceles_overlap_constant() {
        // right isosceles triangles stay right isosceles under NVB: 45 degrees minimum
        let t = builders::unit_square(1).unwrap();
        let alpha = similarity_min_angle(&t);
        assert!((alpha - PI / 4.0).abs() < 1e-12);
        assert_eq!(overlap_constant(&t), 24);
    }
}
