use super::CsrMatrix;
use crate::mesh::Point;

const LEAF: usize = 48;

/// Geometric nested dissection.
///
/// Nodes are split at the coordinate median along the longer side of their
/// bounding box; the left nodes adjacent to the right half form the
/// separator, which is numbered after both halves. Ties are broken by node
/// id so the ordering is fully deterministic.
pub fn nested_dissection(graph: &CsrMatrix, coords: &[Point]) -> Vec<usize> {
    let n = graph.nrows();
    assert_eq!(coords.len(), n);
    let mut out = Vec::with_capacity(n);
    let mut stamp = vec![0usize; n];
    let mut counter = 0;
    dissect((0..n).collect(), graph, coords, &mut stamp, &mut counter, &mut out);
    out
}

fn dissect(
    mut nodes: Vec<usize>,
    graph: &CsrMatrix,
    coords: &[Point],
    stamp: &mut [usize],
    counter: &mut usize,
    out: &mut Vec<usize>,
) {
    if nodes.len() <= LEAF {
        out.extend(nodes);
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &v in &nodes {
        for d in 0..2 {
            lo[d] = lo[d].min(coords[v][d]);
            hi[d] = hi[d].max(coords[v][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    nodes.sort_by(|&a, &b| {
        coords[a][axis]
            .total_cmp(&coords[b][axis])
            .then(coords[a][1 - axis].total_cmp(&coords[b][1 - axis]))
            .then(a.cmp(&b))
    });
    let right = nodes.split_off(nodes.len() / 2);
    *counter += 1;
    for &v in &right {
        stamp[v] = *counter;
    }
    let (sep, left): (Vec<usize>, Vec<usize>) = nodes
        .into_iter()
        .partition(|&v| graph.row(v).any(|(w, _)| stamp[w] == *counter));
    dissect(left, graph, coords, stamp, counter, out);
    dissect(right, graph, coords, stamp, counter, out);
    out.extend(sep);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Cholesky;

    fn grid(m: usize) -> (CsrMatrix, Vec<Point>) {
        let id = |i: usize, j: usize| j * m + i;
        let mut t = Vec::new();
        let mut pts = Vec::new();
        for j in 0..m {
            for i in 0..m {
                pts.push([i as f64, j as f64]);
                t.push((id(i, j), id(i, j), 4.0));
                if i + 1 < m {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                    t.push((id(i + 1, j), id(i, j), -1.0));
                }
                if j + 1 < m {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                    t.push((id(i, j + 1), id(i, j), -1.0));
                }
            }
        }
        (CsrMatrix::from_triplets(m * m, m * m, &t), pts)
    }

    #[test]
    fn is_a_permutation() {
        let (a, pts) = grid(30);
        let mut p = nested_dissection(&a, &pts);
        p.sort();
        assert_eq!(p, (0..900).collect::<Vec<_>>());
    }

    #[test]
    fn reduces_fill_against_natural_order() {
        let (a, pts) = grid(60);
        let natural = Cholesky::factor(&a, (0..3600).collect()).unwrap().fill();
        let nd = Cholesky::factor(&a, nested_dissection(&a, &pts)).unwrap().fill();
        assert!(nd < natural, "nd fill {nd} vs natural {natural}");
    }
}
