//! Approximate solution: matching moments and their scaling with eps, and the
//! error term along a ray leaving a singular point.
//!
//! `cargo run --release --example approx`

use yamabe_glue::approx::ApproxSolution;
use yamabe_glue::config::RunConfig;
use yamabe_glue::harmonics::SphereTransform;
use yamabe_glue::verify::log_slope;

fn main() -> yamabe_glue::Result<()> {
    let tr = SphereTransform::with_degree(8);
    let eps = [1e-2, 3e-3, 1e-3];
    let mut d0 = Vec::new();
    for &e in &eps {
        let mut rc = RunConfig::preset("triangle-N3")?;
        rc.eps = e;
        let s = ApproxSolution::new(rc.configuration()?)?;
        let (d, n) = s.matching_moments(&tr, 0, 0)?;
        let (d1, n1) = s.matching_moments(&tr, 0, 1)?;
        println!("eps {e:.0e}: rho {:.4e}, mode 0 (D, N) = ({d:.3e}, {n:.3e}), mode 1 = ({d1:.3e}, {n1:.3e})", s.config.rho_i[0]);
        d0.push(d.abs());
        if e == eps[0] {
            let p = &s.config.points[0];
            let rho = s.config.rho_i[0];
            for f in [0.5, 1.5, 3.0, 10.0] {
                let mut x = p.clone();
                x[1] += f * rho;
                println!("  zeta at {f:>4} rho = {:.4e}", s.error_term(&x)?);
            }
        }
    }
    println!("slope of the mode-0 Dirichlet moment: {:.3} (expected 2.6)", log_slope(&eps, &d0));
    Ok(())
}
