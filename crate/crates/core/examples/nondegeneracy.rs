//! Nondegeneracy report at a converged solution: smallest singular value of the
//! discretized linearization for several weights, under one grid refinement.
//!
//! `cargo run --release --example nondegeneracy -- [lmax]`

use yamabe_glue::config::{Grids, RunConfig};
use yamabe_glue::gluing::GlueOperator;
use yamabe_glue::nonlinear::NonlinearProblem;

fn main() -> yamabe_glue::Result<()> {
    let mut rc = RunConfig::preset("triangle-N3")?;
    rc.lmax = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let p = NonlinearProblem::new(GlueOperator::from_run_config(&rc)?)?;
    let sol = p.solve(&rc.tolerances, 1e3)?;
    let g = rc.grids.clone();
    let refined = Grids { tgrid_per_period: 2 * g.tgrid_per_period, n_cheb: g.n_cheb * 3 / 2, ..g.clone() };
    let rep = p.nondegeneracy(&sol.state, &g, &refined, &[1.25, 1.5, 1.75])?;
    for k in 0..rep.mu_prime.len() {
        println!("mu' = {:.2}: sigma_min = {:.8}, refined {:.8}", rep.mu_prime[k], rep.sigma[k], rep.sigma_refined[k]);
    }
    println!("max relative change {:.2e}, positive and stable: {}", rep.max_relative_change, rep.positive_and_stable);
    Ok(())
}
