//! Quadrature on triangles and on edges.

use std::sync::OnceLock;

use crate::mesh::{Point, Triangulation};

/// Symmetric rule on a triangle in barycentric coordinates. Weights sum
/// to one, so integrals are `|K| * Σ w_i f(x_i)`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    fn symmetric(orbits: &[(f64, [f64; 3])], degree: usize) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(w, [a, b, c]) in orbits {
            let perms = [
                [a, b, c],
                [b, c, a],
                [c, a, b],
                [a, c, b],
                [c, b, a],
                [b, a, c],
            ];
            let mut uniq: Vec<[f64; 3]> = Vec::new();
            for p in perms {
                if !uniq.contains(&p) {
                    uniq.push(p);
                }
            }
            for p in uniq {
                points.push(p);
                weights.push(w);
            }
        }
        TriangleRule {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// 12-point Dunavant rule, exact for polynomials of degree 6.
pub fn dunavant6() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| {
        TriangleRule::symmetric(
            &[
                (
                    0.116_786_275_726_379,
                    [0.501_426_509_658_179, 0.249_286_745_170_910, 0.249_286_745_170_910],
                ),
                (
                    0.050_844_906_370_207,
                    [0.873_821_971_016_996, 0.063_089_014_491_502, 0.063_089_014_491_502],
                ),
                (
                    0.082_851_075_618_374,
                    [0.053_145_049_844_817, 0.310_352_451_033_784, 0.636_502_499_121_399],
                ),
            ],
            6,
        )
    })
}

/// Three edge midpoints with equal weights, exact for quadratics.
pub fn edge_midpoint_rule() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| TriangleRule::symmetric(&[(1.0 / 3.0, [0.0, 0.5, 0.5])], 2))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, weights summing to one.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one Gauss point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// `∫_K f dx` with the degree-6 rule.
pub fn integrate<F: Fn(Point) -> f64>(tri: &Triangulation, k: usize, f: F) -> f64 {
    let rule = dunavant6();
    let mut s = 0.0;
    for (b, w) in rule.points.iter().zip(&rule.weights) {
        s += w * f(tri.map_point(k, *b));
    }
    s * tri.area(k)
}

/// `∫_K f dx` for vector valued `f`.
pub fn integrate_vec<F: Fn(Point) -> [f64; 2]>(tri: &Triangulation, k: usize, f: F) -> [f64; 2] {
    let rule = dunavant6();
    let mut s = [0.0; 2];
    for (b, w) in rule.points.iter().zip(&rule.weights) {
        let v = f(tri.map_point(k, *b));
        s[0] += w * v[0];
        s[1] += w * v[1];
    }
    [s[0] * tri.area(k), s[1] * tri.area(k)]
}

/// Mean of `f` over the segment `[a, b]` by `n`-point Gauss–Legendre.
pub fn segment_mean<F: Fn(Point) -> [f64; 2]>(a: Point, b: Point, n: usize, f: F) -> [f64; 2] {
    let (x, w) = gauss_legendre(n);
    let mut s = [0.0; 2];
    for (t, wt) in x.iter().zip(&w) {
        let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let v = f(p);
        s[0] += wt * v[0];
        s[1] += wt * v[1];
    }
    s
}
