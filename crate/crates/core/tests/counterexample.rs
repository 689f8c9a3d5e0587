use afem_stokes::counterexample::{
    boundary_sum, build_family, build_test_pair, grad_norm_sq, jump_term, scaling_study, segments,
};

/// `‖∇v_h‖²` summed element by element from the nodal values, with the
/// hat-function gradients written out from the vertex coordinates.
fn brute_force_grad_norm(n: usize) -> f64 {
    let f = build_family(n).unwrap();
    let pair = build_test_pair(&f);
    let v = f.fine.vertices();
    let mut total = 0.0;
    for t in f.fine.triangles() {
        let [a, b, c] = t.vertices;
        let (pa, pb, pc) = (v[a], v[b], v[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let (ua, ub, uc) = (pair.v_h.values[a][0], pair.v_h.values[b][0], pair.v_h.values[c][0]);
        let gx = ((ub - ua) * (pc[1] - pa[1]) - (uc - ua) * (pb[1] - pa[1])) / det;
        let gy = ((uc - ua) * (pb[0] - pa[0]) - (ub - ua) * (pc[0] - pa[0])) / det;
        total += 0.5 * det.abs() * (gx * gx + gy * gy);
    }
    total
}

#[test]
fn triangle_counts() {
    for n in [1, 3, 5, 11] {
        assert_eq!(build_family(n).unwrap().fine.num_elements(), 2 * n * n);
    }
}

#[test]
fn boundary_sum_matches_the_closed_form() {
    let f5 = build_family(5).unwrap();
    assert!((boundary_sum(&f5, &build_test_pair(&f5)) - 2.4).abs() < 1e-10);
    let f11 = build_family(11).unwrap();
    assert!((boundary_sum(&f11, &build_test_pair(&f11)) - (5.5 - 1.0 / 22.0)).abs() < 1e-10);
    for n in (1..=61).step_by(2) {
        let f = build_family(n).unwrap();
        let nf = n as f64;
        assert!((boundary_sum(&f, &build_test_pair(&f)) - (nf / 2.0 - 1.0 / (2.0 * nf))).abs() < 1e-10);
    }
}

#[test]
fn gradient_norm_against_brute_force() {
    let f = build_family(5).unwrap();
    let g = grad_norm_sq(&f, &build_test_pair(&f));
    assert!((g - brute_force_grad_norm(5)).abs() < 1e-12);
    for n in (3..=41).step_by(2) {
        let f = build_family(n).unwrap();
        assert!(grad_norm_sq(&f, &build_test_pair(&f)) < 4.0 * n as f64);
    }
}

#[test]
fn normal_flux_is_half_n_next_to_every_node() {
    for n in [3, 5, 9] {
        let f = build_family(n).unwrap();
        let pair = build_test_pair(&f);
        let segs = segments(&f, &pair);
        assert_eq!(segs.len(), n);
        let half = n as f64 / 2.0;
        for s in &segs {
            let e = &f.fine.edges()[s.edge];
            let mid_y = 0.5 * (f.fine.vertices()[e.vertices[0]][1] + f.fine.vertices()[e.vertices[1]][1]);
            // the segment centred at height 2i/N sees the node Z_i
            let i = (mid_y * n as f64 / 2.0).round() as i64;
            assert!((s.mean_normal_derivative - i.signum() as f64 * half).abs() < 1e-12);
        }
    }
}

#[test]
fn jump_term_does_not_depend_on_n() {
    for n in [3, 5, 21] {
        assert!((jump_term(&build_family(n).unwrap()) - 1.0 / 3.0).abs() < 1e-14);
    }
}

#[test]
fn constant_grows_like_sqrt_n() {
    let study = scaling_study(&[5, 11, 21, 41]).unwrap();
    assert!((0.4..=0.6).contains(&study.exponent), "{}", study.exponent);
    assert!(study.rows.windows(2).all(|w| w[1].constant > w[0].constant));
    assert!(scaling_study(&[5, 11, 21]).is_err());
    assert!(scaling_study(&[5, 11, 20, 41]).is_err());
}

#[test]
fn study_is_bit_reproducible() {
    assert_eq!(scaling_study(&[5, 11, 21, 41]).unwrap(), scaling_study(&[5, 11, 21, 41]).unwrap());
}
