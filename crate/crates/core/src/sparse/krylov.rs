use super::dot;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final residual in the preconditioner norm, relative to the right-hand side.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for a symmetric positive
/// semi-definite operator and a consistent right-hand side.
///
/// Stops once `sqrt(rᵀ M⁻¹ r) <= tol * sqrt(bᵀ M⁻¹ b)`.
pub fn pcg<A, M>(mut apply_a: A, mut apply_m: M, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> KrylovStats
where
    A: FnMut(&[f64], &mut [f64]),
    M: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut ax = vec![0.0; n];
    apply_a(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = vec![0.0; n];
    apply_m(b, &mut z);
    let bnorm = dot(b, &z).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    apply_m(&r, &mut z);
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rel = rz.max(0.0).sqrt() / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        apply_a(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        apply_m(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = rz.max(0.0).sqrt() / bnorm;
        it += 1;
    }
    KrylovStats {
        iterations: it,
        relative_residual: rel,
        converged: rel <= tol,
    }
}

/// Preconditioned MINRES for symmetric (possibly indefinite) systems with
/// a symmetric positive definite preconditioner.
pub fn minres<A, M>(mut apply_a: A, mut apply_m: M, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> KrylovStats
where
    A: FnMut(&[f64], &mut [f64]),
    M: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut tmp = vec![0.0; n];
    apply_a(x, &mut tmp);
    let mut r1: Vec<f64> = b.iter().zip(&tmp).map(|(b, a)| b - a).collect();
    let mut y = vec![0.0; n];
    apply_m(&r1, &mut y);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return KrylovStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut zb = vec![0.0; n];
    apply_m(b, &mut zb);
    let bnorm = dot(b, &zb).max(0.0).sqrt().max(f64::MIN_POSITIVE);

    let mut r2 = r1.clone();
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let (mut oldb, mut beta, mut dbar, mut epsln) = (0.0, beta1, 0.0, 0.0);
    let (mut phibar, mut cs, mut sn) = (beta1, -1.0, 0.0);
    let mut it = 0;
    let mut rel = beta1 / bnorm;
    while it < max_iter && rel > tol {
        it += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply_a(&v, &mut y);
        if it >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        apply_m(&r2, &mut y);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        rel = phibar / bnorm;
        if beta == 0.0 {
            break;
        }
    }
    KrylovStats {
        iterations: it,
        relative_residual: rel,
        converged: rel <= tol,
    }
}

#[cfg(test)]
fn residual_norm<A: FnMut(&[f64], &mut [f64])>(mut apply_a: A, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    apply_a(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    super::norm(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    fn identity(x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }

    #[test]
    fn pcg_solves_spd() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + i as f64 / n as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut x = vec![0.0; n];
        let st = pcg(|v, o| a.mul_vec_into(v, o), identity, &b, &mut x, 1e-13, 500);
        assert!(st.converged);
        assert!(residual_norm(|v, o| a.mul_vec_into(v, o), &b, &x) < 1e-11);
    }

    #[test]
    fn minres_solves_indefinite() {
        // [2 1; 1 -3] blocks down the diagonal
        let n = 40;
        let mut t = Vec::new();
        for k in 0..n / 2 {
            let (i, j) = (2 * k, 2 * k + 1);
            t.extend([(i, i, 2.0 + k as f64), (i, j, 1.0), (j, i, 1.0), (j, j, -3.0)]);
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let mut x = vec![0.0; n];
        let st = minres(|v, o| a.mul_vec_into(v, o), identity, &b, &mut x, 1e-14, 1000);
        assert!(st.converged, "{st:?}");
        assert!(residual_norm(|v, o| a.mul_vec_into(v, o), &b, &x) < 1e-10);
    }
}
