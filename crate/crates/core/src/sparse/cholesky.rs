use super::CsrMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Sparse `L Lᵀ` factorization of a symmetric positive definite matrix
/// under a fixed symmetric permutation.
///
/// Up-looking algorithm: row `k` of `L` is found by a sparse triangular
/// solve whose pattern is the reach of the row in the elimination tree.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
}

impl Cholesky {
    /// Factors `a` with the ordering `perm` (`perm[new] = old`).
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(Error::param("perm", "dimension mismatch"));
        }
        let c = a.permute_symmetric(&perm);
        let parent = etree(&c);

        // symbolic pass: column counts of L
        let mut counts = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![false; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + counts[k];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut next = lp[..n].to_vec();
        let mut x = vec![0.0; n];

        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stack, &mut mark);
            for (i, v) in c.row(k) {
                if i <= k {
                    x[i] = v;
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / lx[lp[i]];
                x[i] = 0.0;
                for q in lp[i] + 1..next[i] {
                    x[li[q]] -= lx[q] * lki;
                }
                d -= lki * lki;
                let q = next[i];
                next[i] += 1;
                li[q] = k;
                lx[q] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(perm[k]));
            }
            let q = next[k];
            next[k] += 1;
            li[q] = k;
            lx[q] = d.sqrt();
        }
        Ok(Cholesky {
            n,
            perm,
            lp,
            li,
            lx,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L`.
    pub fn fill(&self) -> usize {
        self.lx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..self.n {
            y[j] /= self.lx[self.lp[j]];
            let yj = y[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                y[self.li[p]] -= self.lx[p] * yj;
            }
        }
        for j in (0..self.n).rev() {
            let mut s = y[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                s -= self.lx[p] * y[self.li[p]];
            }
            y[j] = s / self.lx[self.lp[j]];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}

/// Elimination tree from the upper triangle of a symmetric matrix.
fn etree(c: &CsrMatrix) -> Vec<usize> {
    let n = c.nrows();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for (j, _) in c.row(k) {
            let mut i = j;
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), returned
/// in `stack[top..]` in topological order.
fn ereach(c: &CsrMatrix, k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [bool]) -> usize {
    let n = c.nrows();
    let mut top = n;
    mark[k] = true;
    for (j, _) in c.row(k) {
        if j > k {
            continue;
        }
        let mut i = j;
        let mut len = 0;
        while !mark[i] {
            stack[len] = i;
            len += 1;
            mark[i] = true;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    for &i in &stack[top..] {
        mark[i] = false;
    }
    mark[k] = false;
    top
}
