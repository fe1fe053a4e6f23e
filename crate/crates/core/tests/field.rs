use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yamabe_glue::field::*;
use yamabe_glue::harmonics::{SphereTransform, C1};

fn dyadic_grid() -> Vec<f64> {
    (0..=640).map(|k| 2f64.powf(-(k as f64) / 64.0)).collect()
}

#[test]
fn power_law_norm_matches_closed_form() {
    let r = dyadic_grid();
    for mu in [1.0, 1.25, 1.5, 1.9] {
        let u: Vec<f64> = r.iter().map(|x| x.powf(mu)).collect();
        let g: Vec<f64> = r.iter().map(|x| mu * x.powf(mu - 1.0)).collect();
        let n = dyadic_norm(&r, &u, Some(&g), mu, 1.0).unwrap();
        let want = 2f64.powf(mu) * (1.0 + mu / 2.0);
        assert!((n / want - 1.0).abs() < 1e-12, "mu {mu}: {n} vs {want}");
        let n0 = dyadic_norm(&r, &u, None, mu, 1.0).unwrap();
        assert!((n0 / 2f64.powf(mu) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_data_has_zero_norm() {
    let r = dyadic_grid();
    let z = vec![0.0; r.len()];
    assert_eq!(dyadic_norm(&r, &z, Some(&z), 1.5, 1.0).unwrap(), 0.0);
}

#[test]
fn nodes_outside_the_region_are_ignored() {
    let r = [0.5, 1.0, 1.5, 3.0];
    let u = [1.0, 1.0, 1e6, 1e6];
    let n = dyadic_norm(&r, &u, None, 1.0, 1.0).unwrap();
    assert!((n - 4.0).abs() < 1e-14);
}

#[test]
fn innermost_annulus_dominates_a_flat_field() {
    let r = dyadic_grid();
    let u = vec![1.0; r.len()];
    let n = dyadic_norm(&r, &u, None, 1.5, 1.0).unwrap();
    let s = 2f64.powi(-11);
    assert!((n / s.powf(-1.5) - 1.0).abs() < 1e-12);
}

#[test]
fn norm_is_homogeneous_and_subadditive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = dyadic_grid();
    for _ in 0..20 {
        let a: Vec<f64> = r.iter().map(|x| rng.gen_range(0.0..1.0) * x.powf(1.5)).collect();
        let b: Vec<f64> = r.iter().map(|x| rng.gen_range(0.0..1.0) * x.powf(1.2)).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let c = rng.gen_range(0.1..10.0);
        let ca: Vec<f64> = a.iter().map(|x| c * x).collect();
        let na = dyadic_norm(&r, &a, None, 1.5, 1.0).unwrap();
        let nb = dyadic_norm(&r, &b, None, 1.5, 1.0).unwrap();
        let nab = dyadic_norm(&r, &ab, None, 1.5, 1.0).unwrap();
        let nca = dyadic_norm(&r, &ca, None, 1.5, 1.0).unwrap();
        assert!((nca - c * na).abs() < 1e-12 * nca);
        assert!(nab <= na + nb + 1e-12 * nab);
    }
}

#[test]
fn norm_grows_with_the_weight() {
    let r = dyadic_grid();
    let u: Vec<f64> = r.iter().map(|x| x.powf(1.7) * (1.0 + (10.0 * x).sin().abs())).collect();
    let ns: Vec<f64> = [1.1, 1.3, 1.5, 1.7, 1.9].iter().map(|&m| dyadic_norm(&r, &u, None, m, 1.0).unwrap()).collect();
    assert!(ns.windows(2).all(|w| w[1] >= w[0]), "{ns:?}");
}

fn linear_block(tr: &SphereTransform) -> ModalBlock {
    let r: Vec<f64> = (0..=40).map(|k| 2f64.powf(-(k as f64) / 8.0)).collect();
    let mut b = ModalBlock::zeros(r.clone(), tr.basis.len());
    for (k, &rk) in r.iter().enumerate() {
        b.u[(k, 1)] = rk;
        b.ur[(k, 1)] = 1.0;
    }
    b
}

#[test]
fn gradient_of_a_linear_field_is_constant() {
    let tr = SphereTransform::with_degree(4);
    let b = linear_block(&tr);
    let (su, sg) = b.sups(&tr);
    let max_x = tr.quad.nodes.iter().map(|t| t[0].abs()).fold(0.0, f64::max);
    for k in 0..b.r.len() {
        assert!((sg[k] - C1).abs() < 1e-12, "{}", sg[k]);
        assert!((su[k] - C1 * b.r[k] * max_x).abs() < 1e-12);
    }
}

#[test]
fn hermite_interpolation_is_exact_for_cubics() {
    let tr = SphereTransform::with_degree(2);
    let r: Vec<f64> = vec![0.2, 0.5, 0.7, 1.0];
    let mut b = ModalBlock::zeros(r.clone(), tr.basis.len());
    for (k, &x) in r.iter().enumerate() {
        b.u[(k, 0)] = x * x * x - 2.0 * x;
        b.ur[(k, 0)] = 3.0 * x * x - 2.0;
    }
    for x in [0.2, 0.33, 0.61, 0.99] {
        let v = b.modes_at(x).unwrap()[0];
        assert!((v - (x * x * x - 2.0 * x)).abs() < 1e-14);
    }
    assert!(b.modes_at(1.2).is_none());
}

fn monopole(c: f64, tr: &SphereTransform) -> WeightedField {
    let mut m = DMatrix::zeros(1, tr.basis.len());
    m[(0, 0)] = c;
    WeightedField {
        centers: vec![[0.0; 3]],
        balls: vec![ModalBlock::zeros(vec![0.5, 1.0], tr.basis.len())],
        shells: vec![ModalBlock::zeros(vec![1.0, 2.0], tr.basis.len())],
        multipoles: m,
        decay: 1.0,
        nu: 1.5,
        nu_prime: 1.0,
    }
}

#[test]
fn far_norm_of_a_monopole() {
    let tr = SphereTransform::with_degree(3);
    let f = monopole(2.0, &tr);
    let y0 = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    let n0 = f.weighted_norm(&tr, 0, NormRegion::Far).unwrap();
    let n1 = f.weighted_norm(&tr, 1, NormRegion::All).unwrap();
    assert!((n0.far - 2.0 * y0).abs() < 1e-13);
    assert!((n1.far - 4.0 * y0).abs() < 1e-13);
    assert_eq!(n1.total, n1.far);
    assert!(f.weighted_norm(&tr, 2, NormRegion::All).is_err());
}

#[test]
fn multipole_gradient_matches_differences() {
    let tr = SphereTransform::with_degree(4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut f = monopole(1.0, &tr);
    f.centers = vec![[0.3, -0.2, 0.1], [-1.0, 0.5, 0.0]];
    f.multipoles = DMatrix::from_fn(2, tr.basis.len(), |_, _| rng.gen_range(-1.0..1.0));
    let x = [2.1, 1.7, -1.3];
    let (_, g) = f.multipole_eval(&tr, x);
    let h = 1e-5;
    for k in 0..3 {
        let (mut xp, mut xm) = (x, x);
        xp[k] += h;
        xm[k] -= h;
        let fd = (f.multipole_eval(&tr, xp).0 - f.multipole_eval(&tr, xm).0) / (2.0 * h);
        assert!((fd - g[k]).abs() < 1e-8 * (1.0 + g[k].abs()));
    }
}

#[test]
fn ball_norm_uses_the_weight() {
    let tr = SphereTransform::with_degree(4);
    let mut f = monopole(0.0, &tr);
    f.balls[0] = linear_block(&tr);
    let n = f.weighted_norm(&tr, 1, NormRegion::Ball(0)).unwrap();
    let r = &f.balls[0].r;
    let (su, sg) = f.balls[0].sups(&tr);
    let want = dyadic_norm(r, &su, Some(&sg), 1.5, 1.0).unwrap();
    assert_eq!(n.balls[0], want);
    assert_eq!(n.far, 0.0);
}

#[test]
fn csv_has_a_header_row() {
    let tr = SphereTransform::with_degree(1);
    let f = monopole(1.0, &tr);
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let s = String::from_utf8(buf).unwrap();
    assert!(s.starts_with("region,center,mode,t,value\n"));
    assert_eq!(s.lines().count(), 1 + 2 * 2 * tr.basis.len());
}
