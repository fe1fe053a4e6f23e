use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yamabe_glue::approx::ApproxSolution;
use yamabe_glue::config::RunConfig;
use yamabe_glue::exterior::*;
use yamabe_glue::grid::ShellGrid;
use yamabe_glue::harmonics::SphereTransform;

fn laplace(centers: Vec<[f64; 3]>, lmax: usize) -> Exterior {
    Exterior::new(centers, SphereTransform::with_degree(lmax), ShellGrid::new(2.0, 32), None).unwrap()
}

fn triangle(eps: f64) -> ApproxSolution {
    let mut rc = RunConfig::preset("triangle-N3").unwrap();
    rc.eps = eps;
    ApproxSolution::new(rc.configuration().unwrap()).unwrap()
}

#[test]
fn single_ball_multipoles_are_exact() {
    let ext = laplace(vec![[0.0; 3]], 4);
    let m = ext.n_modes();
    let s0 = ext.dtn(false);
    for (j, md) in ext.tr.basis.modes.iter().enumerate() {
        for k in 0..m {
            let want = if j == k { -(md.l as f64 + 1.0) } else { 0.0 };
            assert!((s0[(j, k)] - want).abs() < 1e-13);
        }
    }
    assert_eq!(s0[(0, 0)], -1.0);
    let mut psi = DMatrix::zeros(1, m);
    psi[(0, 6)] = 1.0;
    let f = ext.solve(&psi, None, false);
    let x = [0.3, -1.1, 0.9];
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) as f64;
    let r = r.sqrt();
    let th = [x[0] / r, x[1] / r, x[2] / r];
    let l = ext.tr.basis.modes[6].l as i32;
    let exact = r.powi(-l - 1) * ext.tr.basis.eval_mode(6, th);
    assert!((ext.eval(&f, x).unwrap() - exact).abs() < 1e-14);
}

#[test]
fn zero_data_gives_zero() {
    let ext = laplace(vec![[0.0; 3], [5.0, 0.0, 0.0]], 3);
    let f = ext.solve(&DMatrix::zeros(2, ext.n_modes()), None, true);
    assert_eq!(f.c.amax(), 0.0);
}

#[test]
fn cross_coupling_decay_rates() {
    let mut vals = Vec::new();
    let ds = [8.0, 16.0, 32.0];
    for d in ds {
        let ext = laplace(vec![[0.0; 3], [0.0, 0.0, d]], 4);
        let m = ext.n_modes();
        let s = ext.dtn(false);
        // rows on ball 0, columns on ball 1: (l, l') = (0, 0), (0, 1), (1, 1), (2, 0)
        let z = 3;
        let z2 = 8;
        vals.push([s[(0, m)], s[(0, m + z)], s[(z, m + z)], s[(z2, m)]]);
    }
    let expected = [-1.0, -2.0, -3.0, -3.0];
    for c in 0..4 {
        let slope = (vals[2][c].abs() / vals[0][c].abs()).ln() / (ds[2] / ds[0]).ln();
        assert!((slope - expected[c]).abs() < 0.05, "entry {c}: slope {slope}");
    }
}

#[test]
fn laplace_dtn_is_symmetric_and_near_diagonal_when_separated() {
    let sol = triangle(1e-2);
    let ext = Exterior::for_approx(&sol, SphereTransform::with_degree(8), 32, false).unwrap();
    let s0 = ext.dtn(false);
    let defect = (&s0 - s0.transpose()).amax();
    eprintln!("symmetry defect {defect:e}, trace condition {}", ext.condition);
    assert!(defect < 1e-6);

    let far = laplace(vec![[0.0; 3], [1e3, 0.0, 0.0], [0.0, 1e3, 0.0]], 3);
    let s = far.dtn(false);
    let m = far.n_modes();
    for r in 0..3 * m {
        let l = far.tr.basis.modes[r % m].l as f64;
        for c in 0..3 * m {
            let want = if r == c { -(l + 1.0) } else { 0.0 };
            assert!((s[(r, c)] - want).abs() < 2e-3);
        }
    }
}

#[test]
fn newton_potential_of_uniform_shell() {
    let ext = laplace(vec![[0.0; 3]], 2);
    let nk = ext.shell.len();
    let mut g = DMatrix::zeros(nk, ext.n_modes());
    for k in 0..nk {
        g[(k, 0)] = 1.0;
    }
    let nw = ext.newton(&g);
    let ro: f64 = 2.0;
    for (k, &r) in ext.shell.cheb.nodes.iter().enumerate() {
        let exact = -((r.powi(3) - 1.0) / (3.0 * r) + (ro * ro - r * r) / 2.0);
        let dexact = -((2.0 * r.powi(3) + 1.0) / (3.0 * r * r) - r);
        assert!((nw.vals[(k, 0)] - exact).abs() < 1e-13);
        assert!((nw.dr[(k, 0)] - dexact).abs() < 1e-12);
    }
    assert!((nw.tail[0] + (ro.powi(3) - 1.0) / 3.0).abs() < 1e-13);
}

#[test]
fn compactly_supported_shell_field_is_recovered() {
    let ext = laplace(vec![[0.0; 3], [6.0, 0.0, 0.0], [0.0, 6.0, 0.0]], 4);
    let m = ext.n_modes();
    let bump = |r: f64| -> [f64; 3] {
        let (a, b) = (r - 1.0, 2.0 - r);
        [a * b.powi(3), b.powi(3) - 3.0 * a * b * b, -6.0 * b * b + 6.0 * a * b]
    };
    let j = 5;
    let l = ext.tr.basis.modes[j].l as f64;
    let nk = ext.shell.len();
    let mut src = vec![DMatrix::zeros(nk, m); 3];
    for (k, &r) in ext.shell.cheb.nodes.iter().enumerate() {
        let [b, b1, b2] = bump(r);
        src[1][(k, j)] = b2 + 2.0 * b1 / r - l * (l + 1.0) * b / (r * r);
    }
    let f = ext.solve(&DMatrix::zeros(3, m), Some(&src), false);
    let blk = ext.shell_modes(&f, 1);
    let mut err: f64 = 0.0;
    for (k, &r) in ext.shell.cheb.nodes.iter().enumerate() {
        for jj in 0..m {
            let want = if jj == j { bump(r)[0] } else { 0.0 };
            err = err.max((blk.u[(k, jj)] - want).abs());
        }
    }
    eprintln!("recovery error {err:e}");
    assert!(err < 1e-10);
    assert!(f.multipoles().amax() < 1e-10);
}

#[test]
fn potential_correction_scales_like_eps_to_the_fourth() {
    let mut diffs = Vec::new();
    for eps in [1e-2, 1e-3] {
        let sol = triangle(eps);
        let ext = Exterior::for_approx(&sol, SphereTransform::with_degree(4), 24, true).unwrap();
        let d = (ext.dtn(true) - ext.dtn(false)).amax();
        diffs.push(d);
    }
    let ratio = diffs[0] / diffs[1];
    eprintln!("||S_eps - S_0||: {diffs:?}, ratio {ratio}");
    assert!(diffs[1] < diffs[0]);
    assert!(ratio > 1e4 / 3.0 && ratio < 1e4 * 3.0);
}

#[test]
fn kernel_system_dichotomy() {
    let pair = RunConfig::preset("pair-N3").unwrap().configuration().unwrap();
    let a = kernel_system_matrix(&pair);
    for v in a.iter() {
        assert!((v - 1.0).abs() < 1e-12);
    }
    assert!(sigma_min(&a) < 1e-10);
    let k = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
    assert!((&a * k).amax() < 1e-12);

    let tri = RunConfig::preset("triangle-N3").unwrap().configuration().unwrap();
    let s = sigma_min(&kernel_system_matrix(&tri));
    assert!((s - 0.5).abs() < 0.05, "sigma_min {s}");
}

#[test]
fn kernel_quadratic_form_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in ["triangle-N3", "square-N3", "tetrahedron-N3"] {
        let cfg = RunConfig::preset(name).unwrap().configuration().unwrap();
        let a = kernel_system_matrix(&cfg);
        let n = cfg.len();
        let k = 0.5;
        for _ in 0..5 {
            let pt: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p: Vec<f64> = (0..n).map(|i| pt[i] * cfg.q[i] * cfg.r[i].powf(k)).collect();
            let ap = &a * nalgebra::DVector::from_vec(p);
            let lhs: f64 = (0..n).map(|i| pt[i] * cfg.q[i] * cfg.r[i].powf(-k) * ap[i]).sum();
            let rhs = kernel_quadratic_form(&cfg, &pt);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "{name}: {lhs} vs {rhs}");
        }
        assert!(sigma_min(&a) > 0.05);
    }
}
