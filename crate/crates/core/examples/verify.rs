//! Acceptance suite, or a subset: `cargo run --release --example verify -- 1 5 8`

use yamabe_glue::verify::Suite;

fn main() -> yamabe_glue::Result<()> {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let mut suite = Suite::from_preset("triangle-N3")?;
    for c in suite.run(&ids) {
        println!("{}", c.line());
    }
    Ok(())
}
