//! Global linear solver: interior Dirichlet-to-Neumann limits, interface
//! conditioning, and recovery of a manufactured solution.
//!
//! `cargo run --release --example linear -- [lmax]`

use yamabe_glue::config::RunConfig;
use yamabe_glue::gluing::GlueOperator;
use yamabe_glue::interior::{interior_dtn, interior_dtn_limit};
use yamabe_glue::verify::manufactured_glue;

fn main() -> yamabe_glue::Result<()> {
    let mut rc = RunConfig::preset("triangle-N3")?;
    rc.lmax = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let op = GlueOperator::from_run_config(&rc)?;
    let g = &op.balls[0].grid;
    for l in 0..=3 {
        println!("l = {l}: T_eps = {:+.8}, T_0 = {:+.8}", interior_dtn(g, l)?, interior_dtn_limit(3, g.r_param, l));
    }
    println!("interface {:?}", op.report);
    let (f, want) = manufactured_glue(&op, 1, &[(0, 1.0), (1, -0.4), (5, 0.7)]);
    let sol = op.glue_solve(&f)?;
    let mut d = sol.field.clone();
    d.axpy(-1.0, &want);
    println!("manufactured relative error {:.3e}", d.amax() / want.amax());
    println!("C0 / C1 jumps across the unit spheres: {:.2e} / {:.2e}", sol.jump_c0, sol.jump_c1);
    println!("K(ball 1) = {:?}", sol.k(1));
    Ok(())
}
