//! Balanced, dilated Delaunay parameters for a preset or a JSON config.
//!
//! `cargo run --example balance -- triangle-N3 1e-2`

use yamabe_glue::config::RunConfig;

fn main() -> yamabe_glue::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map(String::as_str).unwrap_or("triangle-N3");
    let mut rc = RunConfig::preset(name)?;
    if let Some(e) = args.get(1) {
        rc.eps = e.parse().map_err(|_| yamabe_glue::Error::Config(format!("bad eps '{e}'")))?;
    }
    let cfg = rc.configuration()?;
    println!("{}", serde_json::to_string_pretty(&cfg)?);
    println!("balancing residual {:.3e}", cfg.residual());
    Ok(())
}
