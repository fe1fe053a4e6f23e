//! Delaunay orbit: period, energy drift, neck bounds, and the orbit table.
//!
//! `cargo run --release --example delaunay -- 3 1e-2 [orbit.csv]`

use yamabe_glue::delaunay::{cylinder_period, eps_cyl, period, DelaunayOrbit, DelaunayParams};

fn main() -> yamabe_glue::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dim: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(3);
    let eps: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let o = DelaunayOrbit::new(dim, eps)?;
    println!("N = {dim}, eps = {eps:e}, eps_cyl = {:.6}", eps_cyl(dim));
    println!("period T = {:.12} (trajectory {:.12}), dT/deps = {:.6e}", o.period, o.period_event, o.dperiod_deps);
    println!("v_max = {:.12}, energy drift over 5 periods = {:.2e}", o.v_max, o.energy_drift);
    println!("cylinder limit of the period = {:.12}", cylinder_period(dim));
    for e in [1e-2, 1e-3, 1e-4, 1e-5] {
        let a = period(&DelaunayParams::new(dim, e)?)?;
        let b = period(&DelaunayParams::new(dim, e / 10.0)?)?;
        println!("T({:.0e}) - T({e:.0e}) = {:.6} vs {:.6}", e / 10.0, b - a, 4.0 / (dim as f64 - 2.0) * 10f64.ln());
    }
    if let Some(path) = args.get(2) {
        o.write_csv(std::fs::File::create(path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
