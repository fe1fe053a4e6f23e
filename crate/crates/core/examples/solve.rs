//! Nonlinear solve on a preset: Picard trace, positivity and updated parameters.
//!
//! `cargo run --release --example solve -- triangle-N3 1e-2 [lmax]`

use yamabe_glue::config::RunConfig;
use yamabe_glue::gluing::GlueOperator;
use yamabe_glue::nonlinear::NonlinearProblem;

fn main() -> yamabe_glue::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut rc = RunConfig::preset(args.first().map(String::as_str).unwrap_or("triangle-N3"))?;
    if let Some(e) = args.get(1).and_then(|s| s.parse().ok()) {
        rc.eps = e;
    }
    rc.lmax = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(6);
    let p = NonlinearProblem::new(GlueOperator::from_run_config(&rc)?)?;
    let sol = p.solve(&rc.tolerances, 1e3)?;
    println!("|zeta| = {:.4e}, radius C0 eps rho^2 = {:.4e}", sol.zeta_norm, sol.radius);
    for r in &sol.records {
        println!(
            "step {}: residual {:.3e}, step {:.3e}, norm {:.3e}, contraction {:?}, inner factor {:.2e}",
            r.step, r.residual, r.step_norm, r.norm, r.contraction, r.inner_factor
        );
    }
    println!("reduction {:.3e}, min u {:.4e}, converged {}", sol.reduction, sol.min_u, sol.converged);
    let s = p.summary(&sol)?;
    for i in 0..s.r.len() {
        println!("point {i}: R + S = {:.10}, a + alpha = {:.6?}", s.r[i], s.a[i]);
    }
    Ok(())
}
