//! Command-line front end: validate system files, partition and analyze
//! configurations, integrate flows, enumerate line orbits, run the formula
//! checks, scan sampled ensembles, and emit full reports.
//!
//! Exit codes: 0 on success / verdict pass, 2 when a degenerate orbit or a
//! formula violation was found, 1 on errors.

use std::io::Read;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rmas_core::analysis::{
    check_index_formula, check_inertia_formula, enumerate_line_equilibria, inertia,
};
use rmas_core::dynamics::FlowOptions;
use rmas_core::harness::{
    morse_report, records_csv, run_genericity_scan, LawSampler, SystemSpecFile, Tolerances,
};

#[derive(Parser)]
#[command(
    name = "rmas",
    version,
    about = "Multi-agent gradient systems on triangulated Laman graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Collinearity tolerance (normalized cross product)
    #[arg(long, global = true)]
    tol_collinear: Option<f64>,

    /// Relative zero-eigenvalue tolerance
    #[arg(long, global = true)]
    tol_zero_eig: Option<f64>,

    /// Base RNG seed for sampling commands
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a system definition file
    Validate { spec: String },
    /// Canonical partition at each initial configuration
    Partition { spec: String },
    /// Inertia of the linearization at each initial configuration
    Inertia { spec: String },
    /// Integrate the gradient flow from each initial configuration
    Flow {
        spec: String,
        /// Residual tolerance for convergence
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e4)]
        t_max: f64,
    },
    /// Enumerate critical line orbits
    LineEq { spec: String },
    /// Formula checks at equilibria
    Check {
        #[command(subcommand)]
        which: CheckCommand,
    },
    /// Genericity scan over sampled ensembles on the spec's graph
    Scan {
        spec: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Sampled family: "spring" or "power"
        #[arg(long, default_value = "spring")]
        family: String,
    },
    /// Full verification report (line orbits, subsystems, flows, verdict)
    Report { spec: String },
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Morse-Bott index formula at flow-found equilibria and line orbits
    IndexFormula { spec: String },
    /// One-step reduction inertia formula at enumerated line orbits
    InertiaFormula { spec: String },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<i32> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("building worker pool")?;
    }
    match &cli.command {
        Command::Validate { spec } => cmd_validate(cli, spec),
        Command::Partition { spec } => cmd_partition(cli, spec),
        Command::Inertia { spec } => cmd_inertia(cli, spec),
        Command::Flow { spec, tol, t_max } => cmd_flow(cli, spec, *tol, *t_max),
        Command::LineEq { spec } => cmd_line_eq(cli, spec),
        Command::Check { which } => match which {
            CheckCommand::IndexFormula { spec } => cmd_check_index(cli, spec),
            CheckCommand::InertiaFormula { spec } => cmd_check_inertia(cli, spec),
        },
        Command::Scan {
            spec,
            samples,
            family,
        } => cmd_scan(cli, spec, *samples, family),
        Command::Report { spec } => cmd_report(cli, spec),
    }
}

fn load_spec(path: &str) -> Result<SystemSpecFile> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .context("reading stdin")?;
        buf
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?
    };
    Ok(SystemSpecFile::parse(&text)?)
}

fn tolerances(cli: &Cli, spec: &SystemSpecFile) -> Tolerances {
    let mut t = spec.tolerances();
    if let Some(c) = cli.tol_collinear {
        t.collinear = c;
    }
    if let Some(z) = cli.tol_zero_eig {
        t.zero_eig = z;
    }
    t
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json_lines(cli: &Cli, lines: &[serde_json::Value]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&serde_json::to_string(l)?);
        text.push('\n');
    }
    emit(cli, &text)
}

fn cmd_validate(cli: &Cli, spec_path: &str) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let system = spec.build_system()?;
    let admissible = system.ensemble().is_admissible();
    emit_json_lines(
        cli,
        &[json!({
            "valid": true,
            "n": system.n(),
            "edges": system.graph().edges().len(),
            "admissible": admissible,
            "initial_configurations": spec.initial_configs().len(),
        })],
    )?;
    Ok(0)
}

fn cmd_partition(cli: &Cli, spec_path: &str) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let system = spec.build_system()?;
    let tols = tolerances(cli, &spec);
    let mut lines = Vec::new();
    for (i, config) in spec.initial_configs().iter().enumerate() {
        let p = rmas_core::analysis::canonical_partition(system.graph(), config, tols.collinear)?;
        lines.push(json!({
            "config_index": i,
            "parts": p.parts.iter().map(|part| json!({
                "edges": part.edges,
                "direction": [part.direction.0, part.direction.1],
            })).collect::<Vec<_>>(),
        }));
    }
    emit_json_lines(cli, &lines)?;
    Ok(0)
}

fn cmd_inertia(cli: &Cli, spec_path: &str) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let system = spec.build_system()?;
    let tols = tolerances(cli, &spec);
    let mut lines = Vec::new();
    for (i, config) in spec.initial_configs().iter().enumerate() {
        let h = system.hessian(config)?;
        let t = inertia(h.matrix(), tols.zero_eig)?;
        lines.push(json!({
            "config_index": i,
            "inertia": t,
            "residual": system.residual(config)?,
        }));
    }
    emit_json_lines(cli, &lines)?;
    Ok(0)
}

fn cmd_flow(cli: &Cli, spec_path: &str, tol: f64, t_max: f64) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let system = spec.build_system()?;
    let opts = FlowOptions {
        residual_tol: tol,
        t_max,
        ..FlowOptions::default()
    };
    let mut lines = Vec::new();
    for (i, config) in spec.initial_configs().iter().enumerate() {
        match system.flow(config, &opts) {
            Ok((end, summary)) => {
                let canonical = end.canonical_form()?;
                lines.push(json!({
                    "config_index": i,
                    "converged": true,
                    "positions": positions_of(&canonical),
                    "summary": summary,
                }));
            }
            Err(e) => {
                lines.push(json!({ "config_index": i, "converged": false, "error": e.to_string() }))
            }
        }
    }
    emit_json_lines(cli, &lines)?;
    Ok(0)
}

fn positions_of(c: &rmas_core::dynamics::Configuration) -> Vec<[f64; 2]> {
    (1..=c.n())
        .map(|i| {
            let (a, b) = c.point(i);
            [a, b]
        })
        .collect()
}

fn cmd_line_eq(cli: &Cli, spec_path: &str) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let system = spec.build_system()?;
    let tols = tolerances(cli, &spec);
    let records = enumerate_line_equilibria(&system, &tols.enumerate_options())?;
    match cli.format {
        Format::Json => {
            let lines: Vec<_> = records.iter().map(|r| r.to_json()).collect();
            emit_json_lines(cli, &lines)?;
        }
        Format::Csv => emit(cli, &records_csv(&records))?,
    }
    Ok(if records.iter().all(|r| r.nondegenerate) {
        0
    } else {
        2
    })
}

fn cmd_check_index(cli: &Cli, spec_path: &str) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let system = spec.build_system()?;
    let tols = tolerances(cli, &spec);
    let check_opts = tols.check_options();
    let mut lines = Vec::new();
    let mut ok = true;

    for r in enumerate_line_equilibria(&system, &tols.enumerate_options())? {
        let report = check_index_formula(&system, &r.config, &check_opts)?;
        ok &= report.holds;
        lines.push(json!({ "kind": "line_orbit", "case_vector": r.case_vector, "report": report }));
    }
    for (i, start) in spec.initial_configs().iter().enumerate() {
        let (end, _) = system.flow(start, &FlowOptions::default())?;
        let refined = system.newton_refine(&end)?;
        let report = check_index_formula(&system, &refined, &check_opts)?;
        ok &= report.holds;
        lines.push(json!({ "kind": "flow", "config_index": i, "report": report }));
    }
    emit_json_lines(cli, &lines)?;
    Ok(if ok { 0 } else { 2 })
}

fn cmd_check_inertia(cli: &Cli, spec_path: &str) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let system = spec.build_system()?;
    let tols = tolerances(cli, &spec);
    let check_opts = tols.check_options();
    let mut lines = Vec::new();
    let mut ok = true;
    for r in enumerate_line_equilibria(&system, &tols.enumerate_options())? {
        let report = check_inertia_formula(&system, &r.config, &check_opts)?;
        ok &= report.holds;
        lines.push(json!({ "case_vector": r.case_vector, "report": report }));
    }
    emit_json_lines(cli, &lines)?;
    Ok(if ok { 0 } else { 2 })
}

fn cmd_scan(cli: &Cli, spec_path: &str, samples: usize, family: &str) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let graph = spec.build_graph()?;
    let tols = tolerances(cli, &spec);
    let sampler = match family {
        "spring" => LawSampler::Spring {
            k: [0.5, 2.0],
            c: [0.25, 4.0],
        },
        "power" => LawSampler::Power {
            k: [0.5, 2.0],
            alpha: [0.5, 2.0],
            c: [0.25, 4.0],
        },
        other => anyhow::bail!("unknown sampler family {other:?} (use spring or power)"),
    };
    let report = run_genericity_scan(&graph, &sampler, samples, cli.seed, &tols)?;
    eprintln!("scan finished in {:.2}s", report.wall_time_secs);
    match cli.format {
        Format::Json => emit_json_lines(cli, &[report.to_json()])?,
        Format::Csv => emit(cli, &report.csv())?,
    }
    Ok(if report.degenerate_orbits == 0 { 0 } else { 2 })
}

fn cmd_report(cli: &Cli, spec_path: &str) -> Result<i32> {
    let spec = load_spec(spec_path)?;
    let report = morse_report(&spec)?;
    emit_json_lines(cli, &report.to_json_lines())?;
    Ok(if report.verdict { 0 } else { 2 })
}
