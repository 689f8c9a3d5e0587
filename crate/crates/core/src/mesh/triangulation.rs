use std::collections::hash_map::{DefaultHasher, Entry};
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Maximum number of bisections below an initial element that the
/// genealogy encoding can represent.
pub const MAX_DEPTH: u32 = 127;

/// A triangle with counter-clockwise vertices.
///
/// Local edge `i` is the edge opposite local vertex `i`, so the refinement
/// edge is opposite the newest vertex `vertices[refinement_edge]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub refinement_edge: usize,
    /// Number of bisections separating this element from its initial ancestor.
    pub level: u32,
    /// Element of the previous snapshot that contains this one.
    pub parent: Option<usize>,
    pub(crate) root: usize,
    pub(crate) path: u128,
}

impl Triangle {
    pub(crate) fn initial(vertices: [usize; 3], refinement_edge: usize, root: usize) -> Self {
        Triangle {
            vertices,
            refinement_edge,
            level: 0,
            parent: None,
            root,
            path: 0,
        }
    }

    /// Global vertex ids of local edge `i`.
    pub fn local_edge(&self, i: usize) -> [usize; 2] {
        [self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3]]
    }

    pub fn newest_vertex(&self) -> usize {
        self.vertices[self.refinement_edge]
    }

    /// Index of the initial element this triangle descends from.
    pub fn root(&self) -> usize {
        self.root
    }

    pub(crate) fn key(&self) -> GenealogyKey {
        GenealogyKey {
            root: self.root,
            level: self.level,
            path: self.path,
        }
    }
}

/// Position of an element in the binary bisection forest rooted at the
/// initial mesh: bit `l` of `path` records which child was taken at
/// generation `l + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) struct GenealogyKey {
    pub root: usize,
    pub level: u32,
    pub path: u128,
}

impl GenealogyKey {
    pub fn truncated(self, level: u32) -> Self {
        debug_assert!(level <= self.level);
        let mask = if level == 0 {
            0
        } else {
            u128::MAX >> (128 - level)
        };
        GenealogyKey {
            root: self.root,
            level,
            path: self.path & mask,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints, smaller id first.
    pub vertices: [usize; 2],
    /// Unit normal; points out of `minus` (into `plus` for interior edges).
    pub normal: [f64; 2],
    /// `(-normal[1], normal[0])`.
    pub tangent: [f64; 2],
    pub length: f64,
    /// Incident element with the smaller id (the only one on the boundary).
    pub minus: usize,
    pub plus: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }

    pub fn elements(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.minus).chain(self.plus)
    }
}

/// An immutable conforming triangulation snapshot.
#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    element_edges: Vec<[usize; 3]>,
    areas: Vec<f64>,
    boundary_length: f64,
    id: u64,
}

impl Triangulation {
    /// Builds an initial mesh from vertex coordinates and connectivity.
    ///
    /// Triangles are reoriented counter-clockwise. The refinement edge of
    /// each element is its longest edge, ties going to the edge whose
    /// opposite vertex has the smallest id.
    pub fn build_initial(vertices: Vec<Point>, connectivity: &[[usize; 3]]) -> Result<Self> {
        check_vertices(&vertices)?;
        let mut triangles = Vec::with_capacity(connectivity.len());
        for (k, conn) in connectivity.iter().enumerate() {
            let verts = oriented(&vertices, *conn, k)?;
            let lens: [f64; 3] =
                std::array::from_fn(|i| dist2(vertices[verts[(i + 1) % 3]], vertices[verts[(i + 2) % 3]]));
            let longest = lens.iter().copied().fold(0.0, f64::max);
            let best = (0..3)
                .filter(|&i| lens[i] >= longest * (1.0 - 1e-12))
                .min_by_key(|&i| verts[i])
                .expect("at least one longest edge");
            triangles.push(Triangle::initial(verts, best, k));
        }
        let tri = Self::assemble(vertices, triangles)?;
        tri.check_hanging_nodes()?;
        Ok(tri)
    }

    /// Builds an initial mesh with explicitly labelled refinement edges.
    pub fn with_refinement_edges(
        vertices: Vec<Point>,
        connectivity: &[([usize; 3], usize)],
    ) -> Result<Self> {
        check_vertices(&vertices)?;
        let mut triangles = Vec::with_capacity(connectivity.len());
        for (k, &(conn, r)) in connectivity.iter().enumerate() {
            if r > 2 {
                return Err(Error::InvalidRefinementEdge {
                    element: k,
                    edge: r,
                });
            }
            let verts = oriented(&vertices, conn, k)?;
            // orientation flips swap local vertices 1 and 2
            let r = if verts == conn { r } else { [0, 2, 1][r] };
            triangles.push(Triangle::initial(verts, r, k));
        }
        let tri = Self::assemble(vertices, triangles)?;
        tri.check_hanging_nodes()?;
        Ok(tri)
    }

    /// Assembles edge tables for already oriented triangles.
    pub(crate) fn assemble(vertices: Vec<Point>, triangles: Vec<Triangle>) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            let a = signed_area(&vertices, t.vertices);
            if a <= 0.0 {
                return Err(Error::DegenerateTriangle { element: k });
            }
            areas.push(a);
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        // (first element, its local edge) per edge; direction check uses the local order
        let mut owners: Vec<(usize, usize)> = Vec::new();
        let mut plus: Vec<Option<usize>> = Vec::new();
        let mut element_edges = vec![[0usize; 3]; triangles.len()];
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let [a, b] = t.local_edge(i);
                let key = (a.min(b), a.max(b));
                match lookup.entry(key) {
                    Entry::Vacant(v) => {
                        v.insert(owners.len());
                        element_edges[k][i] = owners.len();
                        owners.push((k, i));
                        plus.push(None);
                    }
                    Entry::Occupied(o) => {
                        let e = *o.get();
                        if plus[e].is_some() {
                            return Err(Error::NonConforming {
                                element: k,
                                reason: format!("edge ({a}, {b}) shared by more than two elements"),
                            });
                        }
                        let (first, fi) = owners[e];
                        if triangles[first].local_edge(fi) == [a, b] {
                            return Err(Error::InconsistentOrientation { first, second: k });
                        }
                        plus[e] = Some(k);
                        element_edges[k][i] = e;
                    }
                }
            }
        }

        let mut edges = Vec::with_capacity(owners.len());
        let mut boundary_length = 0.0;
        for (e, &(minus, _)) in owners.iter().enumerate() {
            let (lo, hi) = match plus[e] {
                Some(p) => (minus.min(p), Some(minus.max(p))),
                None => (minus, None),
            };
            let li = element_edges[lo]
                .iter()
                .position(|&x| x == e)
                .expect("edge registered on its element");
            let [a, b] = triangles[lo].local_edge(li);
            let (a, b) = (a.min(b), a.max(b));
            let pa = vertices[a];
            let pb = vertices[b];
            let length = dist2(pa, pb).sqrt();
            let t = [(pb[0] - pa[0]) / length, (pb[1] - pa[1]) / length];
            let mut n = [t[1], -t[0]];
            let c = centroid(&vertices, triangles[lo].vertices);
            let m = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            if n[0] * (m[0] - c[0]) + n[1] * (m[1] - c[1]) < 0.0 {
                n = [-n[0], -n[1]];
            }
            if hi.is_none() {
                boundary_length += length;
            }
            edges.push(Edge {
                vertices: [a, b],
                normal: n,
                tangent: [-n[1], n[0]],
                length,
                minus: lo,
                plus: hi,
            });
        }

        let mut hasher = DefaultHasher::new();
        vertices.len().hash(&mut hasher);
        for t in &triangles {
            t.vertices.hash(&mut hasher);
            t.key().hash(&mut hasher);
        }
        Ok(Triangulation {
            vertices,
            triangles,
            edges,
            element_edges,
            areas,
            boundary_length,
            id: hasher.finish(),
        })
    }

    fn check_hanging_nodes(&self) -> Result<()> {
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            let a = self.vertices[e.vertices[0]];
            let b = self.vertices[e.vertices[1]];
            for (v, p) in self.vertices.iter().enumerate() {
                if v == e.vertices[0] || v == e.vertices[1] {
                    continue;
                }
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                let len2 = dist2(a, b);
                if cross.abs() > 1e-12 * len2 {
                    continue;
                }
                let s = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / len2;
                if s > 1e-12 && s < 1.0 - 1e-12 {
                    return Err(Error::NonConforming {
                        element: e.minus,
                        reason: format!("hanging vertex {v} on edge ({}, {})", e.vertices[0], e.vertices[1]),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    /// Global edge ids of the local edges of element `k`.
    pub fn element_edges(&self, k: usize) -> [usize; 3] {
        self.element_edges[k]
    }

    pub fn area(&self, k: usize) -> f64 {
        self.areas[k]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Element size `h_K = |K|^{1/2}`.
    pub fn h(&self, k: usize) -> f64 {
        self.areas[k].sqrt()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_length
    }

    /// Content fingerprint used to match functions to their mesh.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn element_points(&self, k: usize) -> [Point; 3] {
        let v = self.triangles[k].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn centroid(&self, k: usize) -> Point {
        centroid(&self.vertices, self.triangles[k].vertices)
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]
    }

    /// Gradients of the barycentric coordinates of element `k`.
    pub fn barycentric_gradients(&self, k: usize) -> [[f64; 2]; 3] {
        let p = self.element_points(k);
        let two_area = 2.0 * self.areas[k];
        let mut g = [[0.0; 2]; 3];
        for i in 0..3 {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            g[i] = [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area];
        }
        g
    }

    /// Interior angles of element `k` in radians, by local vertex.
    pub fn angles(&self, k: usize) -> [f64; 3] {
        let p = self.element_points(k);
        let mut out = [0.0; 3];
        for i in 0..3 {
            let a = p[i];
            let b = p[(i + 1) % 3];
            let c = p[(i + 2) % 3];
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / (dist2(a, b) * dist2(a, c)).sqrt();
            out[i] = cos.clamp(-1.0, 1.0).acos();
        }
        out
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.num_elements())
            .flat_map(|k| self.angles(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Maps each point to the physical coordinates of barycentric weights on element `k`.
    pub fn map_point(&self, k: usize, bary: [f64; 3]) -> Point {
        let p = self.element_points(k);
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }

    /// Barycentric coordinates of `x` with respect to element `k`.
    pub fn barycentric(&self, k: usize, x: Point) -> [f64; 3] {
        let g = self.barycentric_gradients(k);
        let p = self.element_points(k);
        let mut out = [0.0; 3];
        for i in 0..3 {
            // λ_i vanishes at the vertex after i
            let q = p[(i + 1) % 3];
            out[i] = g[i][0] * (x[0] - q[0]) + g[i][1] * (x[1] - q[1]);
        }
        out
    }

    /// Local index (0..3) of global edge `e` within element `k`.
    pub fn local_edge_index(&self, k: usize, e: usize) -> Option<usize> {
        self.element_edges[k].iter().position(|&x| x == e)
    }

    pub(crate) fn keys(&self) -> impl Iterator<Item = GenealogyKey> + '_ {
        self.triangles.iter().map(Triangle::key)
    }
}

fn check_vertices(vertices: &[Point]) -> Result<()> {
    for (v, p) in vertices.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::NonFiniteCoordinate { vertex: v });
        }
    }
    Ok(())
}

fn oriented(vertices: &[Point], conn: [usize; 3], k: usize) -> Result<[usize; 3]> {
    for &v in &conn {
        if v >= vertices.len() {
            return Err(Error::VertexOutOfRange { element: k, vertex: v });
        }
    }
    if conn[0] == conn[1] || conn[1] == conn[2] || conn[0] == conn[2] {
        return Err(Error::DegenerateTriangle { element: k });
    }
    let a = signed_area(vertices, conn);
    let scale = (0..3)
        .map(|i| dist2(vertices[conn[i]], vertices[conn[(i + 1) % 3]]))
        .fold(0.0, f64::max);
    if a.abs() <= 1e-14 * scale {
        return Err(Error::DegenerateTriangle { element: k });
    }
    Ok(if a > 0.0 {
        conn
    } else {
        [conn[0], conn[2], conn[1]]
    })
}

pub(crate) fn signed_area(vertices: &[Point], t: [usize; 3]) -> f64 {
    let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn centroid(vertices: &[Point], t: [usize; 3]) -> Point {
    let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

pub(crate) fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}
