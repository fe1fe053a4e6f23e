use std::sync::Arc;

use nalgebra::DMatrix;
use yamabe_glue::config::Grids;
use yamabe_glue::delaunay::DelaunayOrbit;
use yamabe_glue::grid::BallGrid;
use yamabe_glue::interior::*;

fn ball(eps: f64, r: f64) -> BallGrid {
    BallGrid::new(Arc::new(DelaunayOrbit::new(3, eps).unwrap()), r, &Grids::default())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `g = t^2 e^{-a t} (1 + c sin(b t))` with its first two derivatives.
fn profile(t: f64, a: f64, b: f64, c: f64) -> [f64; 3] {
    let e = (-a * t).exp();
    let (p, p1, p2) = (t * t * e, (2.0 * t - a * t * t) * e, (2.0 - 4.0 * a * t + a * a * t * t) * e);
    let (sn, cs) = (b * t).sin_cos();
    let (q, q1, q2) = (1.0 + c * sn, c * b * cs, -c * b * b * sn);
    [p * q, p1 * q + p * q1, p2 * q + 2.0 * p1 * q1 + p * q2]
}

/// Source `g'' - (gamma^2 - P) g` of the mode equation.
fn source(p: &ModeProblem, t: &[f64], g: impl Fn(f64) -> [f64; 3]) -> Vec<f64> {
    t.iter()
        .zip(p.potential)
        .map(|(&tk, &pk)| {
            let [g0, _, g2] = g(tk);
            g2 - (p.gamma2() - pk) * g0
        })
        .collect()
}

#[test]
fn zero_source_gives_zero() {
    let g = ball(1e-2, 2.0);
    let s = BallSolver::new(g.clone(), 4).unwrap();
    let sol = s.solve(&DMatrix::zeros(g.len(), 25), 1.5).unwrap();
    assert_eq!(sol.w.amax(), 0.0);
    assert!(sol.k.iter().all(|&k| k == 0.0));
}

#[test]
fn manufactured_low_modes() {
    let g = ball(1e-2, 2.0);
    for l in 0..=1 {
        let p = ModeProblem::new(&g, l);
        let exact: Vec<f64> = g.t.iter().map(|&t| profile(t, 1.5, 2.0, 0.3)[0]).collect();
        let f = source(&p, &g.t, |t| profile(t, 1.5, 2.0, 0.3));
        let psi = g.jacobi_profile(l).0;
        let (sol, k) = solve_mode_low(&p, &f, &psi, g.eps).unwrap();
        let total: Vec<f64> = sol.w.iter().zip(&psi).map(|(w, ps)| w + k / g.eps * ps).collect();
        assert!(total[0].abs() < 1e-14);
        let err: Vec<f64> = total.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let rel = sup(&err) / sup(&exact);
        eprintln!("l = {l}: relative error {rel:e}, K = {k:e}");
        assert!(rel < 1e-6);
        let res = p.fd_residual(&sol.w, &f);
        assert!(sup(&res) < 1e-7 * sup(&f) * 10.0, "residual {}", sup(&res));
    }
}

#[test]
fn manufactured_high_modes() {
    let g = ball(1e-2, 2.0);
    for l in [2usize, 5, 8] {
        let p = ModeProblem::new(&g, l);
        let exact: Vec<f64> = g.t.iter().map(|&t| profile(t, 0.7, 1.3, 0.5)[0]).collect();
        let f = source(&p, &g.t, |t| profile(t, 0.7, 1.3, 0.5));
        let sol = solve_mode_high(&p, &f).unwrap();
        let err: Vec<f64> = sol.w.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let rel = sup(&err) / sup(&exact);
        eprintln!("l = {l}: relative error {rel:e}");
        assert!(rel < 1e-6);
    }
}

#[test]
fn high_mode_bound_uniform_in_eps() {
    let nu = 1.5;
    let mut consts = Vec::new();
    for eps in [1e-2, 1e-3] {
        let g = ball(eps, 2.0);
        let p = ModeProblem::new(&g, 2);
        let f: Vec<f64> = g.t.iter().map(|&t| (-(0.5 + nu) * t).exp() * (1.0 + t.sin())).collect();
        let sol = solve_mode_high(&p, &f).unwrap();
        consts.push(weighted_sup(&sol.w, g.h, 0.5, nu));
    }
    eprintln!("weighted bounds {consts:?}");
    assert!((consts[0] / consts[1] - 1.0).abs() < 0.5);
}

#[test]
fn free_decaying_solution_is_exponential() {
    let pot = vec![0.0; 4001];
    let p = ModeProblem { dim: 3, l: 3, h: 0.005, potential: &pot };
    let pair = homogeneous_pair(&p).unwrap();
    let g = p.gamma();
    let err = pair
        .y_dec
        .iter()
        .enumerate()
        .map(|(k, y)| (y - (-g * k as f64 * p.h).exp()).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "{err:e}");
}

#[test]
fn homogeneous_pair_properties() {
    let eps = 1e-3;
    let g = ball(eps, 2.0);
    for l in 2..=8 {
        let p = ModeProblem::new(&g, l);
        let pair = homogeneous_pair(&p).unwrap();
        let w0 = pair.wronskian[0];
        let drift = pair.wronskian.iter().map(|w| (w / w0 - 1.0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "l = {l}: wronskian drift {drift:e}");
        let bound = 15.0 / 4.0 / (p.gamma() + p.delta());
        assert!((pair.slope + p.gamma()).abs() <= bound, "l = {l}: slope {}", pair.slope);
        let half = (g.orbit.period / 2.0 / g.h) as usize;
        assert!(pair.y_dec[..half].windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn interior_dtn_converges_to_limits() {
    let mut errs = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let g = ball(eps, 2.0);
        let e: Vec<f64> = (0..=3)
            .map(|l| (interior_dtn(&g, l).unwrap() - interior_dtn_limit(3, 2.0, l)).abs())
            .collect();
        errs.push(e);
    }
    eprintln!("dtn errors {errs:?}");
    assert!((interior_dtn_limit(3, 2.0, 0) + 2.0).abs() < 1e-15);
    assert!((interior_dtn_limit(3, 2.0, 1) - 1.0).abs() < 1e-15);
    for l in 0..=1 {
        assert!(errs[0][l] > errs[1][l] && errs[1][l] > errs[2][l]);
        assert!(errs[2][l] < 1e-3);
    }
    assert!(errs[2].iter().all(|&e| e < 1e-3));
}

#[test]
fn single_mode_source_stays_in_its_mode() {
    let g = ball(1e-2, 2.0);
    let s = BallSolver::new(g.clone(), 4).unwrap();
    let mut f = DMatrix::zeros(g.len(), 25);
    for k in 0..g.len() {
        f[(k, 7)] = (-(g.t[k] - 2.0).powi(2)).exp();
    }
    let sol = s.solve(&f, 1.5).unwrap();
    for j in 0..25 {
        let m = sol.w.column(j).amax();
        if j == 7 {
            assert!(m > 0.0);
        } else {
            assert_eq!(m, 0.0);
        }
    }
}

#[test]
fn jacobi_boundary_values_scale_with_eps() {
    let mut m0 = Vec::new();
    let mut m1 = Vec::new();
    for eps in [1e-2, 3e-3, 1e-3] {
        let g = ball(eps, 2.0);
        m0.push(g.jacobi_profile(0).0[0] / eps);
        m1.push(g.jacobi_profile(1).0[0] / eps);
    }
    eprintln!("m0 {m0:?} m1 {m1:?}");
    for m in [&m0, &m1] {
        assert!(m.iter().all(|&x| x > 0.05));
        assert!((m[0] / m[2] - 1.0).abs() < 0.05);
    }
}

#[test]
fn boundary_condition_and_conditioning() {
    let g = ball(1e-2, 2.0);
    let s = BallSolver::new(g.clone(), 2).unwrap();
    let mut f = DMatrix::zeros(g.len(), 9);
    for k in 0..g.len() {
        for j in 0..9 {
            f[(k, j)] = ((j + 1) as f64 * g.t[k]).cos() * (-(g.t[k] - 3.0).powi(2)).exp();
        }
    }
    let sol = s.solve(&f, 1.5).unwrap();
    for j in 0..9 {
        let (w, _) = s.total_mode(&sol, j);
        assert!(w[0].abs() < 1e-13, "mode {j}: trace {}", w[0]);
    }
    let near = BallGrid::new(g.orbit.clone(), 1.0 + 1e-9, &Grids::default());
    assert!(matches!(
        interior_dtn(&near, 0),
        Err(yamabe_glue::Error::Conditioning(_))
    ));
}

#[test]
fn low_mode_error_is_fourth_order() {
    let orbit = Arc::new(DelaunayOrbit::new(3, 1e-2).unwrap());
    let err = |n: usize, l: usize| {
        let grids = Grids { tgrid_per_period: n, ..Grids::default() };
        let g = BallGrid::new(orbit.clone(), 2.0, &grids);
        let p = ModeProblem::new(&g, l);
        let f = source(&p, &g.t, |t| profile(t, 1.5, 2.0, 0.3));
        let psi = g.jacobi_profile(l).0;
        let (sol, k) = solve_mode_low(&p, &f, &psi, g.eps).unwrap();
        g.t.iter()
            .zip(sol.w.iter().zip(&psi))
            .map(|(&t, (w, ps))| (w + k / g.eps * ps - profile(t, 1.5, 2.0, 0.3)[0]).abs())
            .fold(0.0, f64::max)
    };
    for l in 0..=1 {
        let ratio = err(1024, l) / err(2048, l);
        assert!(ratio > 12.0 && ratio < 20.0, "l = {l}: ratio {ratio}");
    }
}
