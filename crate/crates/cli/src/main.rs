//! `nlsoliton`: generate, verify and explore nonlocal multi-soliton solutions.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails,
//! 2 for invalid configuration or usage.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nonlocal_soliton::heisenberg::ech_solution;
use nonlocal_soliton::hirota::hirota_from_spectral;
use nonlocal_soliton::landau::{spin_from_ech, split_ml};
use nonlocal_soliton::residual::evaluate_grid;
use serde_json::json;

mod checks;
mod config;
mod report;

use config::{check_soliton, merge, soliton_from_json, ConfigError, Format, Overrides, RunConfig, System};
use report::{check_record, csv_bytes, emit, json_bytes, num, print_summary, report_bytes, Check, Report, Summary, CHECK_COLUMNS};

#[derive(Parser)]
#[command(name = "nlsoliton", version, about = "Nonlocal multi-soliton solutions: generation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file (stdout when omitted)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Grid as "x0:x1:nx,t0:t1:nt"
    #[arg(long, global = true, value_name = "SPEC", allow_hyphen_values = true)]
    grid: Option<String>,

    /// Finite-difference step
    #[arg(long, global = true, value_name = "STEP")]
    h: Option<f64>,

    /// Equation system to generate or verify
    #[arg(long, global = true, value_enum)]
    system: Option<System>,

    /// Suppress the summary on stderr
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write field values on the grid
    Generate,
    /// Check the configured solution against the selected equations
    Verify,
    /// Sample m, l along x = x0 and classify the curve
    Trajectory,
    /// Verify every entry of the configuration's sweep list
    Sweep,
    /// Run the built-in reference parameter sets end to end
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Verify => "verify",
            Command::Trajectory => "trajectory",
            Command::Sweep => "sweep",
            Command::Selftest => "selftest",
        }
    }

    fn default_format(self) -> Format {
        match self {
            Command::Generate | Command::Trajectory => Format::Csv,
            _ => Format::Json,
        }
    }
}

fn columns(system: System) -> Vec<&'static str> {
    let mut c = vec!["x", "t"];
    if system.includes(System::Ech) {
        c.extend(["u_re", "u_im", "v_re", "v_im", "omega_re", "omega_im"]);
    }
    if system.includes(System::Hirota) || system == System::Zerocurv {
        c.extend(["q_re", "q_im", "r_re", "r_im"]);
    }
    if system.includes(System::Elle) {
        c.extend(["s1_re", "s1_im", "s2_re", "s2_im", "s3_re", "s3_im"]);
    }
    if system.includes(System::Nelle) {
        c.extend(["m1", "m2", "m3", "l1", "l2", "l3"]);
    }
    c.push("singular");
    c
}

/// One row of field values; singular points give NaN and a flag.
fn field_row(cfg: &nonlocal_soliton::SolitonConfig, system: System, x: f64, t: f64, width: usize) -> (Vec<f64>, bool) {
    let mut row = vec![x, t];
    let mut singular = false;
    let mut put = |vals: Option<Vec<f64>>, n: usize| match vals {
        Some(v) => row.extend(v),
        None => {
            singular = true;
            row.extend(std::iter::repeat_n(f64::NAN, n));
        }
    };
    let ech = ech_solution(cfg, x, t).ok();
    if system.includes(System::Ech) {
        put(ech.map(|p| vec![p.u.re, p.u.im, p.v.re, p.v.im, p.omega().re, p.omega().im]), 6);
    }
    if system.includes(System::Hirota) || system == System::Zerocurv {
        put(hirota_from_spectral(cfg, x, t).ok().map(|p| vec![p.q.re, p.q.im, p.r.re, p.r.im]), 4);
    }
    if system.includes(System::Elle) {
        put(ech.map(|p| spin_from_ech(&p).s.iter().flat_map(|z| [z.re, z.im]).collect()), 6);
    }
    if system.includes(System::Nelle) {
        put(split_ml(cfg, x, t).ok().map(|s| s.as_array().to_vec()), 6);
    }
    debug_assert_eq!(row.len() + 1, width);
    (row, singular)
}

fn generate(rc: &RunConfig, format: Format) -> anyhow::Result<bool> {
    let cols = columns(rc.system);
    let rows = evaluate_grid(&rc.grid, |x, t| field_row(&rc.soliton, rc.system, x, t, cols.len()));
    let bytes = match format {
        Format::Csv => csv_bytes(
            &cols,
            rows.iter().map(|(r, s)| r.iter().map(|v| num(*v)).chain([u8::from(*s).to_string()]).collect()),
        )?,
        Format::Json => {
            // NaN at singular points becomes null
            let data: Vec<serde_json::Value> = rows
                .iter()
                .map(|(r, s)| serde_json::Value::Array(r.iter().map(|v| json!(v)).chain([json!(s)]).collect()))
                .collect();
            json_bytes(&json!({
                "config": rc.soliton_json,
                "grid": rc.grid.to_string(),
                "system": rc.system.name(),
                "columns": cols,
                "rows": data,
            }))?
        }
    };
    emit(rc.out.as_deref(), &bytes)?;
    if !rc.quiet {
        let singular = rows.iter().filter(|r| r.1).count();
        eprintln!("generate: {} points on {}, {singular} singular", rows.len(), rc.grid);
    }
    Ok(true)
}

fn verify(rc: &RunConfig, format: Format) -> anyhow::Result<bool> {
    let checks = checks::verify(&rc.soliton, rc.system, &rc.grid, &rc.stencil);
    let report = Report::new("verify", rc.system.name(), Some(rc.soliton_json.clone()), Some(rc.grid.to_string()), Some(rc.stencil.step), checks);
    emit(rc.out.as_deref(), &report_bytes(&report, format)?)?;
    if !rc.quiet {
        print_summary("verify", &report.checks);
    }
    Ok(report.passed())
}

fn trajectory(rc: &RunConfig, format: Format) -> anyhow::Result<bool> {
    let (tr, class) = checks::run_trajectory(&rc.trajectory, &rc.soliton, &rc.local, &rc.nonlocal)?;
    let bytes = match format {
        Format::Csv => csv_bytes(
            &["t", "m1", "m2", "m3", "l1", "l2", "l3", "singular"],
            tr.points.iter().map(|p| {
                std::iter::once(p.t)
                    .chain(p.m)
                    .chain(p.l)
                    .map(num)
                    .chain([u8::from(p.singular).to_string()])
                    .collect()
            }),
        )?,
        Format::Json => json_bytes(&json!({
            "trajectory": rc.trajectory,
            "classification": class,
            "points": tr.points,
        }))?,
    };
    emit(rc.out.as_deref(), &bytes)?;
    if !rc.quiet {
        let singular = tr.points.iter().filter(|p| p.singular).count();
        eprintln!("trajectory: {} samples at x0 = {}, {singular} singular, class {}", tr.points.len(), tr.x0, class.name());
    }
    Ok(true)
}

fn sweep(rc: &RunConfig, format: Format) -> anyhow::Result<bool> {
    if rc.sweep.is_empty() {
        return Err(ConfigError("sweep: the configuration has no \"sweep\" entries".into()).into());
    }
    let mut configs = Vec::with_capacity(rc.sweep.len());
    for (i, patch) in rc.sweep.iter().enumerate() {
        let merged = merge(&rc.soliton_json, patch)?;
        let cfg = soliton_from_json(&merged).map_err(|e| ConfigError(format!("sweep entry {i}: {e}")))?;
        check_soliton(&cfg, &format!("sweep entry {i}"))?;
        configs.push((patch, merged, cfg));
    }
    let mut runs = Vec::new();
    let mut all = Vec::new();
    for (i, (patch, merged, cfg)) in configs.into_iter().enumerate() {
        let checks = checks::verify(&cfg, rc.system, &rc.grid, &rc.stencil);
        if !rc.quiet {
            print_summary(&format!("sweep entry {i}"), &checks);
        }
        all.extend(checks.iter().cloned().map(|c| (i, c)));
        let summary = Summary::of(&checks);
        runs.push(json!({
            "index": i,
            "overrides": patch,
            "config": merged,
            "checks": checks,
            "summary": summary,
            "status": if summary.failed == 0 { "pass" } else { "fail" },
        }));
    }
    let flat: Vec<Check> = all.iter().map(|(_, c)| c.clone()).collect();
    let summary = Summary::of(&flat);
    let bytes = match format {
        Format::Json => json_bytes(&json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": "sweep",
            "system": rc.system.name(),
            "grid": rc.grid.to_string(),
            "step": rc.stencil.step,
            "runs": runs,
            "summary": summary,
            "status": if summary.failed == 0 { "pass" } else { "fail" },
        }))?,
        Format::Csv => {
            let header: Vec<&str> = std::iter::once("run").chain(CHECK_COLUMNS).collect();
            csv_bytes(&header, all.iter().map(|(i, c)| std::iter::once(i.to_string()).chain(check_record(c)).collect()))?
        }
    };
    emit(rc.out.as_deref(), &bytes)?;
    Ok(summary.failed == 0)
}

fn selftest(rc: &RunConfig, format: Format) -> anyhow::Result<bool> {
    let start = Instant::now();
    let report = Report::new("selftest", "all", None, None, None, checks::selftest());
    emit(rc.out.as_deref(), &report_bytes(&report, format)?)?;
    if !rc.quiet {
        print_summary("selftest", &report.checks);
        eprintln!("selftest: {:.1} s", start.elapsed().as_secs_f64());
    }
    Ok(report.passed())
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let ov = Overrides {
        config: cli.config.clone(),
        out: cli.out.clone(),
        format: cli.format,
        grid: cli.grid.clone(),
        h: cli.h,
        system: cli.system,
        quiet: cli.quiet,
    };
    let rc = RunConfig::load(&ov, cli.command == Command::Generate)?;
    let format = rc.format.unwrap_or(cli.command.default_format());
    match cli.command {
        Command::Generate => generate(&rc, format),
        Command::Verify => verify(&rc, format),
        Command::Trajectory => trajectory(&rc, format),
        Command::Sweep => sweep(&rc, format),
        Command::Selftest => selftest(&rc, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nlsoliton {}: {e}", cli.command.name());
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
