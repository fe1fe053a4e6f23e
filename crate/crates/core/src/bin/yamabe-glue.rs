//! Command-line front end: one subcommand per pipeline stage.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use yamabe_glue::approx::ApproxSolution;
use yamabe_glue::config::RunConfig;
use yamabe_glue::delaunay::{integrate_orbit, DelaunayParams};
use yamabe_glue::gluing::GlueOperator;
use yamabe_glue::harmonics::{n_modes, SphereTransform};
use yamabe_glue::interior::{interior_dtn, interior_dtn_limit};
use yamabe_glue::nonlinear::NonlinearProblem;
use yamabe_glue::verify::{manufactured_glue, Check, Status, Suite};
use yamabe_glue::{Error, Result};

#[derive(Parser)]
#[command(name = "yamabe-glue", version, about = "Gluing construction of singular Yamabe metrics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// JSON configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    lmax: Option<usize>,
    #[arg(long, global = true)]
    tgrid_per_period: Option<usize>,
    #[arg(long, global = true)]
    tol_energy: Option<f64>,
    #[arg(long, global = true)]
    tol_linear: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Output directory for JSON/CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV file for the primary table of the subcommand.
    #[arg(long, global = true)]
    emit: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Delaunay orbit, period and energy drift.
    Delaunay,
    /// Balanced parameters R, a.
    Balance,
    /// Error term and matching moments of the approximate solution.
    Approx,
    /// Interface, DtN and manufactured-solution diagnostics.
    Linear,
    /// Full nonlinear solve.
    Solve,
    /// Acceptance suite; `--only` restricts to some criteria.
    Verify {
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Aggregates the JSON artifacts in `--out` into report.json and report.md.
    Report,
}

impl Opts {
    fn run_config(&self) -> Result<RunConfig> {
        let mut rc = match (&self.config, &self.preset) {
            (Some(p), _) => RunConfig::from_json(&fs::read_to_string(p)?)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => RunConfig::preset("triangle-N3")?,
        };
        if let Some(d) = self.dim {
            if d != rc.dim {
                for p in &mut rc.points {
                    p.resize(d, 0.0);
                }
                rc.dim = d;
            }
        }
        if let Some(v) = self.eps {
            rc.eps = v;
        }
        if let Some(v) = self.lmax {
            rc.lmax = v;
        }
        if let Some(v) = self.tgrid_per_period {
            rc.grids.tgrid_per_period = v;
        }
        if let Some(v) = self.tol_energy {
            rc.tolerances.energy = v;
        }
        if let Some(v) = self.tol_linear {
            rc.tolerances.linear = v;
        }
        if let Some(v) = self.max_iter {
            rc.tolerances.max_iter = v;
        }
        if let Some(v) = self.seed {
            rc.seed = v;
        }
        rc.validate()?;
        Ok(rc)
    }

    fn write_json(&self, name: &str, v: &Value) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, serde_json::to_string_pretty(v)?)?;
        Ok(path)
    }

    fn emit_file(&self) -> Result<Option<fs::File>> {
        match &self.emit {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                Ok(Some(fs::File::create(p)?))
            }
            None => Ok(None),
        }
    }
}

fn delaunay(o: &Opts) -> Result<bool> {
    let rc = o.run_config()?;
    let params = DelaunayParams::new(rc.dim, rc.eps)?;
    let orbit = integrate_orbit(&params, 5, rc.grids.tgrid_per_period, rc.tolerances.energy)?;
    let v = json!({
        "dim": rc.dim,
        "eps": rc.eps,
        "period": orbit.period,
        "period_event": orbit.period_event,
        "dperiod_deps": orbit.dperiod_deps,
        "v_max": orbit.v_max,
        "energy": orbit.energy,
        "energy_drift": {"value": orbit.energy_drift, "tolerance": rc.tolerances.energy},
    });
    println!("{}", serde_json::to_string_pretty(&v)?);
    o.write_json("delaunay.json", &v)?;
    if let Some(f) = o.emit_file()? {
        orbit.write_csv(f)?;
    }
    Ok(orbit.energy_drift <= rc.tolerances.energy)
}

fn balance(o: &Opts) -> Result<bool> {
    let rc = o.run_config()?;
    let cfg = rc.configuration()?;
    let res = cfg.residual();
    let v = json!({"configuration": cfg, "residual": {"value": res, "tolerance": 1e-12}});
    println!("{}", serde_json::to_string_pretty(&v)?);
    o.write_json("balance.json", &v)?;
    if let Some(f) = o.emit_file()? {
        let mut w = csv::Writer::from_writer(f);
        let mut head = vec!["i".to_string(), "R".into()];
        head.extend((0..cfg.dim).map(|k| format!("a{k}")));
        w.write_record(&head)?;
        for i in 0..cfg.len() {
            let mut row = vec![i.to_string(), format!("{:.15e}", cfg.r[i])];
            row.extend(cfg.a[i].iter().map(|x| format!("{x:.15e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(res <= 1e-12)
}

fn approx(o: &Opts) -> Result<bool> {
    let rc = o.run_config()?;
    let sol = ApproxSolution::new(rc.configuration()?)?;
    let tr = SphereTransform::with_degree(rc.lmax);
    let mut moments = Vec::new();
    for i in 0..sol.config.len() {
        for j in 0..=rc.dim.min(3) {
            let (d, n) = sol.matching_moments(&tr, i, j)?;
            moments.push(json!({"point": i, "mode": j, "dirichlet": d, "neumann": n}));
        }
    }
    let mut zeta = Vec::new();
    for (i, p) in sol.config.points.iter().enumerate() {
        let rho = sol.config.rho_i[i];
        for s in [0.5, 1.0, 1.5, 2.0, 2.5, 4.0, 16.0] {
            let r = s * rho;
            let mut x = p.clone();
            x[0] += r;
            zeta.push(json!({"point": i, "r": r, "zeta": sol.error_term(&x)?}));
        }
    }
    let v = json!({"eps": rc.eps, "rho": sol.config.rho_i, "moments": moments, "zeta": zeta});
    println!("{}", serde_json::to_string_pretty(&v)?);
    o.write_json("approx.json", &v)?;
    if let Some(f) = o.emit_file()? {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["point", "mode", "dirichlet", "neumann"])?;
        for m in &moments {
            w.write_record([m["point"].to_string(), m["mode"].to_string(), m["dirichlet"].to_string(), m["neumann"].to_string()])?;
        }
        w.flush()?;
    }
    Ok(true)
}

fn linear(o: &Opts) -> Result<bool> {
    let rc = o.run_config()?;
    let op = GlueOperator::from_run_config(&rc)?;
    let mut dtn = Vec::new();
    for (i, b) in op.balls.iter().enumerate() {
        for l in 0..=3 {
            let t = interior_dtn(&b.grid, l)?;
            dtn.push(json!({"point": i, "l": l, "dtn": t, "limit": interior_dtn_limit(rc.dim, b.grid.r_param, l)}));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    let m = n_modes(rc.lmax);
    let amps: Vec<(usize, f64)> = (0..4).map(|_| (rng.gen_range(0..m), rng.gen_range(-1.0..1.0))).collect();
    let i0 = rng.gen_range(0..op.n_centers());
    let (f, g) = manufactured_glue(&op, i0, &amps);
    let sol = op.glue_solve(&f)?;
    let mut d = sol.field.clone();
    d.axpy(-1.0, &g);
    let err = d.amax() / g.amax();
    let tol = 1e-5;
    let v = json!({
        "interface": op.report,
        "interior_dtn": dtn,
        "manufactured": {"point": i0, "modes": amps, "relative_error": {"value": err, "tolerance": tol},
            "jump_c0": sol.jump_c0, "jump_c1": sol.jump_c1},
    });
    println!("{}", serde_json::to_string_pretty(&v)?);
    o.write_json("linear.json", &v)?;
    if let Some(f) = o.emit_file()? {
        op.weighted_field(&sol.field).write_csv(f)?;
    }
    Ok(err <= tol)
}

fn solve(o: &Opts) -> Result<bool> {
    let rc = o.run_config()?;
    let p = NonlinearProblem::new(GlueOperator::from_run_config(&rc)?)?;
    let sol = p.solve(&rc.tolerances, 1e3)?;
    let summary = p.summary(&sol)?;
    let v = serde_json::to_value(&summary)?;
    println!("{}", serde_json::to_string_pretty(&v)?);
    o.write_json("solution.json", &v)?;
    if let Some(f) = o.emit_file()? {
        p.op.weighted_field(&sol.state.v).write_csv(f)?;
    }
    Ok(sol.converged && sol.min_u > 0.0)
}

fn suite(o: &Opts) -> Result<Suite> {
    let rc = o.run_config()?;
    let preset = match (&o.config, &o.preset) {
        (None, Some(p)) => Some(p.clone()),
        (None, None) => Some("triangle-N3".into()),
        _ => None,
    };
    Ok(Suite::new(rc, preset))
}

fn verify(o: &Opts, only: &[usize]) -> Result<bool> {
    let mut s = suite(o)?;
    let mut checks: Vec<Check> = Vec::new();
    let ids: Vec<usize> = if only.is_empty() { (1..=13).collect() } else { only.to_vec() };
    for id in ids {
        let c = s.check(id);
        println!("{}", c.line());
        checks.push(c);
    }
    let ok = checks.iter().all(|c| c.status != Status::Fail);
    o.write_json("verify.json", &json!({"preset": s.preset, "config": s.rc, "checks": checks, "pass": ok}))?;
    Ok(ok)
}

fn markdown(report: &Value) -> String {
    let mut md = String::from("# Run report\n");
    if let Some(checks) = report.pointer("/verify/checks").and_then(Value::as_array) {
        md.push_str("\n## Acceptance\n\n| # | check | status | quantity | value | tolerance | seconds |\n|---|---|---|---|---|---|---|\n");
        for c in checks {
            let ms = c["measures"].as_array().cloned().unwrap_or_default();
            if ms.is_empty() {
                md.push_str(&format!("| {} | {} | {} | {} | | | {:.2} |\n", c["id"], c["name"].as_str().unwrap_or(""),
                    c["status"].as_str().unwrap_or(""), c["note"].as_str().unwrap_or(""), c["seconds"].as_f64().unwrap_or(0.0)));
            }
            for m in ms {
                md.push_str(&format!(
                    "| {} | {} | {} | {} | {:.4e} | {} {:.1e} | {:.2} |\n",
                    c["id"],
                    c["name"].as_str().unwrap_or(""),
                    c["status"].as_str().unwrap_or(""),
                    m["name"].as_str().unwrap_or("").replace('|', "\\|"),
                    m["value"].as_f64().unwrap_or(f64::NAN),
                    m["op"].as_str().unwrap_or(""),
                    m["tolerance"].as_f64().unwrap_or(f64::NAN),
                    c["seconds"].as_f64().unwrap_or(0.0),
                ));
            }
        }
    }
    if let Some(s) = report.get("solution") {
        md.push_str("\n## Nonlinear solve\n\n");
        for key in ["zeta_norm", "residual", "reduction", "min_u", "radius", "converged"] {
            md.push_str(&format!("- {key}: {}\n", s[key]));
        }
    }
    for key in ["delaunay", "balance", "approx", "linear"] {
        if report.get(key).is_some() {
            md.push_str(&format!("\n## {key}\n\nsee `{key}.json`\n"));
        }
    }
    md
}

fn report(o: &Opts) -> Result<bool> {
    let read = |p: &Path| -> Result<Option<Value>> {
        if p.exists() {
            Ok(Some(serde_json::from_str(&fs::read_to_string(p)?)?))
        } else {
            Ok(None)
        }
    };
    if !o.out.join("verify.json").exists() {
        verify(o, &[])?;
    }
    let mut agg = serde_json::Map::new();
    for key in ["delaunay", "balance", "approx", "linear", "solution", "verify"] {
        if let Some(v) = read(&o.out.join(format!("{key}.json")))? {
            agg.insert(key.into(), v);
        }
    }
    let agg = Value::Object(agg);
    let ok = agg.pointer("/verify/pass").and_then(Value::as_bool).unwrap_or(false);
    o.write_json("report.json", &agg)?;
    let md = markdown(&agg);
    fs::write(o.out.join("report.md"), &md)?;
    print!("{md}");
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let o = &cli.opts;
    let r = match &cli.cmd {
        Cmd::Delaunay => delaunay(o),
        Cmd::Balance => balance(o),
        Cmd::Approx => approx(o),
        Cmd::Linear => linear(o),
        Cmd::Solve => solve(o),
        Cmd::Verify { only } => verify(o, only),
        Cmd::Report => report(o),
    };
    match r {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
