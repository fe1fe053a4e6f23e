use yamabe_glue::approx::ApproxSolution;
use yamabe_glue::config::RunConfig;
use yamabe_glue::gluing::*;
use yamabe_glue::harmonics::modes;
use yamabe_glue::interior::ModeProblem;

fn operator(name: &str, eps: f64, lmax: usize) -> GlueOperator {
    let mut rc = RunConfig::preset(name).unwrap();
    rc.eps = eps;
    rc.lmax = lmax;
    GlueOperator::from_run_config(&rc).unwrap()
}

/// Cylindrical profile `w(t) = (t + ln 2)^5 e^{-t^2/sigma^2} / s` with `w_t`, `w_tt`;
/// the physical field `r^{-1/2} w(-ln r)` vanishes to fifth order at `r = 2`.
fn profile(t: f64) -> [f64; 3] {
    let (l, sg2, s) = (2f64.ln(), 2.25, 0.4);
    if t <= -l {
        return [0.0; 3];
    }
    let x = t + l;
    let (q, q1, q2) = (x.powi(5), 5.0 * x.powi(4), 20.0 * x.powi(3));
    let e = (-t * t / sg2).exp();
    let (e1, e2) = (-2.0 * t / sg2 * e, (4.0 * t * t / (sg2 * sg2) - 2.0 / sg2) * e);
    [q * e / s, (q1 * e + q * e1) / s, (q2 * e + 2.0 * q1 * e1 + q * e2) / s]
}

/// Manufactured field `sum_j amp_j r^{-1/2} w(-ln r) phi_j` around ball `i0` and its source.
fn manufactured(op: &GlueOperator, i0: usize, amps: &[(usize, f64)]) -> (Source, GluedField) {
    let k = op.kappa();
    let ms = modes(op.balls[0].lmax);
    let mut f = op.zero_source();
    let mut g = op.zero_field();
    let grid = &op.balls[i0].grid;
    for &(j, amp) in amps {
        let l = ms[j].l;
        let p = ModeProblem::new(grid, l);
        for (kk, &t) in grid.t.iter().enumerate() {
            let [w, _, wtt] = profile(t);
            g.balls[i0][(kk, j)] = amp * w;
            g.balls_tt[i0][(kk, j)] = amp * wtt;
            f.balls[i0][(kk, j)] = amp * (wtt - (p.gamma2() - grid.potential[kk]) * w);
        }
        for (kk, &r) in op.exterior.shell.cheb.nodes.iter().enumerate() {
            let [w, wt, wtt] = profile(-r.ln());
            let amp_r = r.powf(-k);
            let v = op.exterior.potential[i0][kk];
            g.shells[i0].u[(kk, j)] = amp * amp_r * w;
            g.shells[i0].ur[(kk, j)] = -amp * amp_r / r * (k * w + wt);
            f.shells[i0][(kk, j)] = amp * (amp_r / (r * r) * (wtt - p.gamma2() * w) + v * amp_r * w);
        }
    }
    (f, g)
}

fn field_error(a: &GluedField, b: &GluedField) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.amax() / b.amax()
}

#[test]
fn zero_source_gives_zero() {
    let op = operator("triangle-N3", 1e-2, 3);
    let sol = op.glue_solve(&op.zero_source()).unwrap();
    assert_eq!(sol.field.amax(), 0.0);
    for i in 0..3 {
        assert_eq!(sol.k(i), [0.0; 4]);
    }
}

#[test]
fn manufactured_solution_is_recovered() {
    let op = operator("triangle-N3", 1e-2, 4);
    let (f, g) = manufactured(&op, 1, &[(0, 1.0), (2, -0.5), (6, 0.7), (13, 0.3)]);
    let sol = op.glue_solve(&f).unwrap();
    let err = field_error(&sol.field, &g);
    eprintln!(
        "relative error {err:e}, jumps {:e} {:e}, K {:?}, sigma_min {}",
        sol.jump_c0,
        sol.jump_c1,
        sol.k(1),
        op.report.sigma_min
    );
    assert!(err < 1e-5);
    assert!(sol.jump_c0 < 1e-10 && sol.jump_c1 < 1e-8);
}

#[test]
fn interface_matching_is_exact_for_generic_sources() {
    let op = operator("square-N3", 1e-2, 3);
    let mut f = op.zero_source();
    let m = op.n_modes();
    for (i, fb) in f.balls.iter_mut().enumerate() {
        let t = &op.balls[i].grid.t;
        for k in 0..fb.nrows() {
            for j in 0..m {
                fb[(k, j)] = ((i + j + 1) as f64 * 0.3 * t[k]).sin() * (-2.0 * t[k]).exp();
            }
        }
    }
    let sol = op.glue_solve(&f).unwrap();
    eprintln!("jumps {:e} {:e}", sol.jump_c0, sol.jump_c1);
    assert!(sol.jump_c0 < 1e-10 * sol.psi.amax().max(1.0));
    assert!(sol.jump_c1 < 1e-8 * sol.psi.amax().max(1.0));
}

#[test]
fn two_points_are_rejected() {
    let rc = RunConfig::preset("pair-N3").unwrap();
    let err = GlueOperator::from_run_config(&rc).unwrap_err();
    assert!(err.to_string().contains("n >= 3"), "{err}");
    let approx = ApproxSolution::new(rc.configuration().unwrap()).unwrap();
    let s2 = interface_sigma_min(&approx, 2, &rc.grids).unwrap();
    let tri = RunConfig::preset("triangle-N3").unwrap();
    let approx3 = ApproxSolution::new(tri.configuration().unwrap()).unwrap();
    let s3 = interface_sigma_min(&approx3, 2, &tri.grids).unwrap();
    eprintln!("sigma_min(S - T): pair {s2:e}, triangle {s3:e}");
    assert!(s3 > s2);
}

#[test]
fn regular_part_has_the_weighted_norm_of_the_solution() {
    let op = operator("triangle-N3", 1e-2, 3);
    let (f, g) = manufactured(&op, 0, &[(0, 1.0)]);
    let sol = op.glue_solve(&f).unwrap();
    let wf = op.weighted_field(&op.regular_part(&sol));
    let n = wf.weighted_norm(op.tr(), 1, yamabe_glue::field::NormRegion::All).unwrap();
    let n0 = op.weighted_field(&g).weighted_norm(op.tr(), 1, yamabe_glue::field::NormRegion::All).unwrap();
    assert!(n.total.is_finite() && (n.total / n0.total - 1.0).abs() < 1e-5);
}

#[test]
fn deficiency_coefficients_of_the_error_term_scale_with_eps() {
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    for eps in [1e-2, 5e-3, 2.5e-3] {
        let op = operator("triangle-N3", eps, 3);
        let rho = op.approx.config.rho_i[0];
        let p = yamabe_glue::nonlinear::NonlinearProblem::new(op).unwrap();
        let sol = p.op.glue_solve(&p.zeta).unwrap();
        let k = sol.k(0);
        c0.push(k[0].abs() / (eps * rho * rho));
        c1.push(k[1..].iter().fold(0.0f64, |m, v| m.max(v.abs())) / (eps * rho));
    }
    eprintln!("K0/(eps rho^2) {c0:?}, Kj/(eps rho) {c1:?}");
    for c in [&c0, &c1] {
        assert!(c.iter().all(|v| v.is_finite() && *v <= 2.0 * c[0]));
    }
}
