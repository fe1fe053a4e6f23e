use std::f64::consts::PI;
use std::sync::OnceLock;

use yamabe_glue::approx::ApproxSolution;
use yamabe_glue::config::{Grids, RunConfig, Tolerances};
use yamabe_glue::delaunay::family_eval;
use yamabe_glue::gluing::{GlueOperator, Source};
use yamabe_glue::nonlinear::*;
use yamabe_glue::Error;

fn problem(name: &str, eps: f64, lmax: usize) -> NonlinearProblem {
    let mut rc = RunConfig::preset(name).unwrap();
    rc.eps = eps;
    rc.lmax = lmax;
    NonlinearProblem::new(GlueOperator::from_run_config(&rc).unwrap()).unwrap()
}

fn triangle() -> &'static (NonlinearProblem, NonlinearSolution) {
    static CELL: OnceLock<(NonlinearProblem, NonlinearSolution)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = problem("triangle-N3", 1e-2, 4);
        let sol = p.solve(&Tolerances::default(), 1e3).unwrap();
        (p, sol)
    })
}

fn difference(p: &NonlinearProblem, a: &State, b: &State) -> StateNorm {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    p.norm(&d).unwrap()
}

#[test]
fn cylindrical_piece_matches_the_family() {
    let rc = RunConfig::preset("triangle-N3").unwrap();
    let approx = ApproxSolution::new(rc.configuration().unwrap()).unwrap();
    let mut fam = approx.family(0, false);
    fam.a = vec![0.1, -0.2, 0.05];
    let orbit = &approx.orbits[0];
    for r in [0.3f64, 0.02, 0.005] {
        for th in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [-0.48, 0.6, -0.64]] {
            let x: Vec<f64> = th.iter().map(|c| r * c).collect();
            let want = r.sqrt() * family_eval(&fam, orbit, &x).unwrap();
            let got = cylindrical_piece(orbit, fam.r, &fam.a, -r.ln(), th);
            assert!((got - want).abs() < 1e-12 * want, "r {r}: {got} vs {want}");
        }
    }
}

#[test]
fn residual_at_zero_is_the_error_term() {
    let (p, _) = triangle();
    let r = p.residual(&p.zero_state()).unwrap();
    let mut d = r.source.clone();
    d.axpy(-1.0, &p.zeta);
    assert_eq!(d.amax(), 0.0);
    assert_eq!(r.norm, p.zeta_norm);
    assert!(r.min_u > 0.0);
}

#[test]
fn inverse_of_l_lies_in_the_weighted_space() {
    let (p, _) = triangle();
    let x = p.inverse_l(&p.zeta).unwrap();
    let n = p.norm(&x).unwrap();
    let eps_rho2 = 1e-2 * p.rho().powi(2);
    eprintln!("{n:?}, eps rho^2 {eps_rho2:e}");
    assert!(n.total.is_finite() && n.total < eps_rho2);
    assert!(n.v > n.s && n.s > 0.0);
}

#[test]
fn linearization_is_the_derivative_of_the_residual() {
    let (p, _) = triangle();
    let mut x = p.inverse_l(&p.zeta).unwrap();
    x = {
        let mut y = p.zero_state();
        y.axpy(300.0, &x);
        y
    };
    let r0 = p.residual(&p.zero_state()).unwrap();
    let lx = p.apply_linearization(&x).unwrap();
    let remainder = |t: f64| {
        let mut xt = p.zero_state();
        xt.axpy(t, &x);
        let mut d = p.residual(&xt).unwrap().source;
        d.axpy(-1.0, &r0.source);
        d.axpy(-t, &lx);
        p.op.source_norm(&d)
    };
    let (a, b) = (remainder(1.0), remainder(0.5));
    let lin = p.op.source_norm(&lx);
    eprintln!("remainders {a:e} {b:e}, ratio {}, |Lambda x| {lin:e}", a / b);
    assert!(a < 1e-2 * lin);
    assert!((a / b - 4.0).abs() < 0.4);
}

#[test]
fn linearized_solve_recovers_a_manufactured_state() {
    let (p, _) = triangle();
    let m = p.op.n_modes();
    let mut g = p.zeta.clone();
    let shifted: Source = p.zeta.clone();
    for (gb, sb) in g.balls.iter_mut().zip(&shifted.balls) {
        for j in 0..m {
            let col = sb.column((j + 5) % m).into_owned();
            let mut c = gb.column_mut(j);
            c += col * 0.3;
        }
    }
    let xs = p.inverse_l(&g).unwrap();
    let f = p.apply_linearization(&xs).unwrap();
    let ls = p.solve_linearized(&f, 1e-12, 30).unwrap();
    let err = difference(p, &ls.state, &xs).total / p.norm(&xs).unwrap().total;
    eprintln!("error {err:e}, factors {:?}", ls.factors);
    assert!(err < 1e-5);
    assert!(ls.factors.iter().all(|f| *f < 0.1));
}

#[test]
fn jacobi_direction_is_a_pure_parameter() {
    let (p, _) = triangle();
    let mut e = p.zero_state();
    e.s[1] = 1e-3;
    let f = p.apply_linearization(&e).unwrap();
    let ls = p.solve_linearized(&f, 1e-12, 30).unwrap();
    let x = &ls.state;
    let n = p.norm(x).unwrap();
    eprintln!("S {:?}, alpha {:?}, {n:?}, it {} rel {:e} factors {:?}", x.s, x.alpha, ls.iterations, ls.relative_residual, ls.factors);
    assert!((x.s[1] - 1e-3).abs() < 1e-3 * 1e-3);
    assert!(x.s[0].abs() < 1e-8 && x.s[2].abs() < 1e-8);
    assert!(x.alpha.iter().flatten().all(|a| a.abs() < 1e-7));
    assert!(n.v < 1e-3 * n.s);
}

#[test]
fn chord_iteration_converges_on_the_triangle() {
    let (p, sol) = triangle();
    eprintln!("{}", serde_json::to_string(&p.summary(sol).unwrap()).unwrap());
    assert!(sol.converged);
    assert!(sol.records.len() <= 10);
    assert!(sol.reduction >= 1e3);
    assert!(sol.min_u > 0.0);
    for w in sol.records.windows(2) {
        assert!(w[1].residual <= w[0].residual);
    }
    for r in &sol.records {
        assert!(r.norm <= sol.radius);
        assert!(r.contraction.map_or(true, |c| c < 1.0));
        assert!(r.inner_factor < 0.1);
    }
    let (next, _, _) = p.picard_step(&sol.state, 1e-10, 30).unwrap();
    let d = difference(p, &next, &sol.state).total;
    assert!(d < 1e-6 * p.norm(&sol.state).unwrap().total, "fixed point moved by {d:e}");
}

#[test]
fn first_step_is_inside_half_the_ball() {
    let (_, sol) = triangle();
    assert!(sol.records[0].step_norm <= 0.5 * sol.radius * (1.0 + 1e-6));
}

#[test]
fn solution_is_rotation_equivariant() {
    let (p, sol) = triangle();
    let rep = p.symmetry_defect(&sol.state, rotation_z(2.0 * PI / 3.0), &[1, 2, 0]);
    eprintln!("{rep:?}");
    assert!(rep.s < 1e-6 && rep.alpha < 1e-6 && rep.field < 1e-6);
    let bad = p.symmetry_defect(&sol.state, rotation_z(PI / 2.0), &[1, 2, 0]);
    assert!(bad.alpha > 1e-2);
}

#[test]
fn nondegeneracy_is_positive_and_stable() {
    let (p, sol) = triangle();
    let g = Grids::default();
    let refined = Grids { tgrid_per_period: 4096, n_cheb: 48, ..g.clone() };
    let rep = p.nondegeneracy(&sol.state, &g, &refined, &[1.25, 1.5, 1.75]).unwrap();
    eprintln!("{rep:?}");
    assert!(rep.positive_and_stable);
}

#[test]
fn negative_states_are_rejected() {
    let (p, _) = triangle();
    let mut x = p.zero_state();
    x.v.balls[0][(10, 0)] = -1e3;
    assert!(matches!(p.residual(&x), Err(Error::Positivity(_))));
}
