use proptest::prelude::*;
use yamabe_glue::balance::*;

fn triangle(d: f64) -> Vec<Vec<f64>> {
    let c = d / 3f64.sqrt();
    (0..3)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            vec![c * th.cos(), c * th.sin(), 0.0]
        })
        .collect()
}

#[test]
fn triangle_closed_form() {
    for dim in [3usize, 4, 5] {
        let d = 1.3;
        let mut pts = triangle(d);
        for p in &mut pts {
            p.resize(dim, 0.0);
        }
        let r = solve_balancing(&pts, &[1.0; 3], dim).unwrap();
        let expect = (d.powf(dim as f64 - 2.0) / 2.0).powf(1.0 / (dim as f64 - 2.0));
        for v in &r {
            assert!((v - expect).abs() < 1e-12 * expect);
        }
        assert!(balancing_residual(&pts, &[1.0; 3], &r, dim) < 1e-12);
        let a = compute_displacements(&pts, &[1.0; 3], &r, dim);
        for (ai, xi) in a.iter().zip(&pts) {
            let rk = r[0].powf((dim as f64 - 2.0) / 2.0);
            for (av, xv) in ai.iter().zip(xi) {
                let expect = -rk * rk * 3.0 * xv * d.powf(-(dim as f64));
                assert!((av - expect).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn equilateral_displacement_three_dimensions() {
    let d = 2.0;
    let pts = triangle(d);
    let r = solve_balancing(&pts, &[1.0; 3], 3).unwrap();
    let a = compute_displacements(&pts, &[1.0; 3], &r, 3);
    for (ai, xi) in a.iter().zip(&pts) {
        for (av, xv) in ai.iter().zip(xi) {
            assert!((av + 1.5 / (d * d) * xv).abs() < 1e-14);
        }
    }
}

#[test]
fn pair_displacement() {
    let pts = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.5]];
    let r = solve_balancing(&pts, &[1.0, 1.0], 3).unwrap();
    assert!((r[0] - 2.5).abs() < 1e-12);
    let a = compute_displacements(&pts, &[1.0, 1.0], &r, 3);
    assert!((a[0][2] + 2.5 / (2.5 * 2.5)).abs() < 1e-14);
}

#[test]
fn collinear_middle_is_undisplaced() {
    let pts = vec![vec![-1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
    let q = [1.0, 1.0, 1.0];
    let r = solve_balancing(&pts, &q, 3);
    if let Ok(r) = r {
        let a = compute_displacements(&pts, &q, &r, 3);
        assert!(a[1].iter().all(|v| v.abs() < 1e-14));
    }
    let r = vec![1.0, 1.0, 1.0];
    let a = compute_displacements(&pts, &q, &r, 3);
    assert!(a[1].iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn rescale_is_homogeneous() {
    let c = Configuration::balanced(3, triangle(1.0), vec![1.0; 3], 1e-2).unwrap();
    let s = c.rescale(6.0).unwrap();
    let direct = solve_balancing(&s.points, &s.q, 3).unwrap();
    for (a, b) in s.r.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-12 * b);
    }
    assert!((s.residual() - c.residual()).abs() < 1e-12);
    let id = s.rescale(1.0).unwrap();
    assert_eq!(id.points, s.points);
    assert_eq!(id.r, s.r);
}

#[test]
fn rescale_detects_overlap() {
    let c = Configuration::balanced(3, triangle(1.0), vec![1.0; 3], 1e-2).unwrap();
    assert!(matches!(c.rescale(1.5), Err(yamabe_glue::Error::Infeasible(_))));
}

#[test]
fn normalized_triangle_has_side_four() {
    let c = Configuration::balanced_normalized(3, triangle(1.0), vec![1.0; 3], 1e-2).unwrap();
    assert!((c.min_distance() - 4.0).abs() < 1e-12);
    assert!(c.r.iter().all(|&r| (r - 2.0).abs() < 1e-12));
    assert!(c.residual() < 1e-12);
}

proptest! {
    #[test]
    fn permutation_equivariance(seed in 0u64..1000, shift in 1usize..4) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 4;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.8..1.2)).collect();
        let Ok(r) = solve_balancing(&pts, &q, 3) else { return Ok(()) };
        let a = compute_displacements(&pts, &q, &r, 3);
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let pp: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let qp: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
        let rp = solve_balancing(&pp, &qp, 3).unwrap();
        let ap = compute_displacements(&pp, &qp, &rp, 3);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((rp[k] - r[i]).abs() < 1e-9 * r[i]);
            for c in 0..3 {
                prop_assert!((ap[k][c] - a[i][c]).abs() < 1e-9 * (1.0 + a[i][c].abs()));
            }
        }
    }

    #[test]
    fn rotation_equivariance(th in 0.0f64..6.28, seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let q = [1.0, 1.1, 0.9];
        let Ok(r) = solve_balancing(&pts, &q, 3) else { return Ok(()) };
        let a = compute_displacements(&pts, &q, &r, 3);
        let rot = |p: &[f64]| vec![th.cos() * p[0] - th.sin() * p[1], th.sin() * p[0] + th.cos() * p[1], p[2]];
        let pr: Vec<Vec<f64>> = pts.iter().map(|p| rot(p)).collect();
        let rr = solve_balancing(&pr, &q, 3).unwrap();
        let ar = compute_displacements(&pr, &q, &rr, 3);
        for i in 0..3 {
            prop_assert!((rr[i] - r[i]).abs() < 1e-9 * r[i]);
            let ra = rot(&a[i]);
            for c in 0..3 {
                prop_assert!((ar[i][c] - ra[c]).abs() < 1e-9 * (1.0 + ra[c].abs()));
            }
        }
    }
}
