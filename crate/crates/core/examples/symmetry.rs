//! Equivariance of the converged solution under the symmetry group of a preset.
//!
//! `cargo run --release --example symmetry -- square-N3 [lmax]`

use yamabe_glue::config::RunConfig;
use yamabe_glue::gluing::GlueOperator;
use yamabe_glue::nonlinear::{rotation_z, NonlinearProblem};
use yamabe_glue::verify::preset_symmetry;

fn main() -> yamabe_glue::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map(String::as_str).unwrap_or("triangle-N3");
    let mut rc = RunConfig::preset(name)?;
    rc.lmax = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let (q, perm) = preset_symmetry(name).ok_or_else(|| yamabe_glue::Error::Config(format!("{name} has no symmetry")))?;
    let p = NonlinearProblem::new(GlueOperator::from_run_config(&rc)?)?;
    let sol = p.solve(&rc.tolerances, 1e3)?;
    let rep = p.symmetry_defect(&sol.state, q, &perm);
    println!("{name}: relative defects S {:.2e}, alpha {:.2e}, v {:.2e}", rep.s, rep.alpha, rep.field);
    let off = p.symmetry_defect(&sol.state, rotation_z(0.3), &perm);
    println!("non-symmetry rotation: alpha defect {:.2e}", off.alpha);
    Ok(())
}
