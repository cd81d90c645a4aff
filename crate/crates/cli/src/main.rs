//! `macc`: plan, check and inspect collective construction runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use macc_cli::sweep;
use macc_core::bounds::{bound_report, BoundReport};
use macc_core::durations::DurationSpec;
use macc_core::instance::parse_instance;
use macc_core::model::action_var_name;
use macc_core::oracle::brute_force_plan;
use macc_core::plan::{extract_itineraries, parse_plan, render_timeline, serialize_plan};
use macc_core::solve::{plan_lexicographic, solve_unit, PlanOutcome, SolveStatus};
use macc_core::validate::validate_with_itineraries;
use macc_core::{Catalog, Instance, ScaledDurations, SolverConfig};

#[derive(Parser)]
#[command(
    name = "macc",
    version,
    about = "Exact planner for multi-agent collective construction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a makespan-optimal, then cost-optimal, plan.
    Plan {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the plan file here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the action catalog of the final horizon here.
        #[arg(long)]
        dump_catalog: Option<PathBuf>,
    },
    /// Check a plan file against the world rules; exits 1 when invalid.
    Validate {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print makespan bounds.
    Bounds {
        #[command(flatten)]
        input: Input,
        /// Optimal unit-duration plan file, enabling T_b, u_f, u_c, l_f and T_h.
        #[arg(long)]
        unit_plan: Option<PathBuf>,
        /// Solve for the unit-duration plan instead of reading one.
        #[arg(long, conflicts_with = "unit_plan")]
        solve_unit: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare the estimate T_h with optimal makespans over a duration grid.
    Sweep {
        #[arg(long)]
        instance: PathBuf,
        /// Duration values tried for every swept action type.
        #[arg(long, default_value = "1,2", value_delimiter = ',')]
        values: Vec<u64>,
        /// Also sweep move_empty (held at the first value otherwise).
        #[arg(long)]
        full_grid: bool,
        /// Cells solved in parallel.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Exhaustive search on toy instances.
    Oracle {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 64)]
        t_max: u32,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the witness plan file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ASCII timeline of a plan file.
    Render {
        #[arg(long)]
        plan: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Preset (unit, 1-2, 1-2-3, termes, height_linear), JSON file or inline JSON.
    #[arg(long, default_value = "unit")]
    durations: String,
}

#[derive(Args)]
struct SolverArgs {
    /// Solver command template with {model}, {solution}, {time_limit}, {threads}.
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Seconds per solver call.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1)]
    threads: u32,
    /// Largest horizon tried.
    #[arg(long)]
    max_horizon: Option<u32>,
    /// Keep model and solution files in this directory.
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    parse_instance(&read(path)?).with_context(|| format!("invalid instance {}", path.display()))
}

fn load_durations(arg: &str) -> Result<(DurationSpec, ScaledDurations)> {
    let spec = if let Ok(spec) = DurationSpec::preset(arg) {
        spec
    } else if arg.trim_start().starts_with('{') {
        DurationSpec::parse_json(arg).context("invalid inline durations")?
    } else {
        let text = read(Path::new(arg))?;
        DurationSpec::parse_json(&text).with_context(|| format!("invalid durations file {arg}"))?
    };
    let sd = spec.scale()?;
    Ok((spec, sd))
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig> {
    let mut cfg = match &args.solver_cmd {
        Some(t) => SolverConfig::from_template(t)?,
        None => default_solver(),
    };
    cfg.time_limit = args.time_limit;
    cfg.threads = args.threads;
    cfg.max_horizon = args.max_horizon;
    cfg.work_dir = args.work_dir.clone();
    cfg.keep_files = args.work_dir.is_some();
    Ok(cfg)
}

/// The bundled `macc-highs` next to this binary, else `highs` on the PATH.
fn default_solver() -> SolverConfig {
    let sibling = std::env::current_exe()
        .ok()
        .and_then(|p| p.parent().map(|d| d.join("macc-highs")))
        .filter(|p| p.exists());
    match sibling {
        Some(p) => {
            let mut cfg = SolverConfig::highs(p.to_string_lossy());
            cfg.command.push("--quiet".into());
            cfg
        }
        None => SolverConfig::highs("highs"),
    }
}

fn opt(v: Option<u32>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::TimeLimit => "time-limit",
    }
}

fn bounds_json(b: &BoundReport) -> Value {
    serde_json::to_value(b).expect("bounds serialize")
}

fn bounds_text(b: &BoundReport) -> String {
    format!(
        "l_r={} l_f={} T_b={} alpha={} T_h={} u_f={} u_c={}",
        b.lr,
        opt(b.lf),
        opt(b.tb),
        b.alpha.map_or_else(|| "-".to_string(), |a| a.to_string()),
        opt(b.th),
        opt(b.uf),
        opt(b.uc)
    )
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Plan {
            input,
            solver,
            format,
            out,
            dump_catalog,
        } => cmd_plan(
            &input,
            &solver,
            format,
            out.as_deref(),
            dump_catalog.as_deref(),
        ),
        Command::Validate {
            input,
            plan,
            format,
        } => cmd_validate(&input, &plan, format),
        Command::Bounds {
            input,
            unit_plan,
            solve_unit: solve,
            solver,
            format,
        } => cmd_bounds(&input, unit_plan.as_deref(), solve, &solver, format),
        Command::Sweep {
            instance,
            values,
            full_grid,
            jobs,
            solver,
            format,
        } => cmd_sweep(&instance, &values, full_grid, jobs, &solver, format),
        Command::Oracle {
            input,
            t_max,
            format,
            out,
        } => cmd_oracle(&input, t_max, format, out.as_deref()),
        Command::Render { plan } => {
            let (plan, its) = parse_plan(&read(&plan)?)?;
            print!("{}", render_timeline(&plan, &its));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_plan(
    input: &Input,
    solver: &SolverArgs,
    format: Format,
    out: Option<&Path>,
    dump_catalog: Option<&Path>,
) -> Result<ExitCode> {
    let inst = load_instance(&input.instance)?;
    let (spec, sd) = load_durations(&input.durations)?;
    let cfg = solver_config(solver)?;
    let outcome = plan_lexicographic(&inst, &sd, &cfg)?;
    let plan = &outcome.plan;
    let its = extract_itineraries(plan)?;
    if let Some(path) = out {
        std::fs::write(path, serialize_plan(plan, &its))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = dump_catalog {
        std::fs::write(path, catalog_dump(&inst, &sd, plan.horizon)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let b = plan.bounds.clone().expect("planner attaches bounds");
    match format {
        Format::Json => {
            let v = json!({
                "durations": spec.label(),
                "multiple": plan.multiple,
                "lower_bound": b.lr,
                "makespan": plan.horizon,
                "uf": b.uf,
                "uc": b.uc,
                "sum_of_costs": plan.sum_of_costs,
                "agents": plan.agents_used(),
                "bounds": bounds_json(&b),
                "attempts": attempts_json(&outcome),
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        Format::Text => {
            println!(
                "durations: {} (time unit 1/{})",
                spec.label(),
                plan.multiple
            );
            println!(
                "{:<12} {:<22} {:<13} agents",
                "lower bound", "makespan (u_f; u_c)", "sum-of-costs"
            );
            println!(
                "{:<12} {:<22} {:<13} {}",
                b.lr,
                format!("{} ({}; {})", plan.horizon, opt(b.uf), opt(b.uc)),
                plan.sum_of_costs,
                plan.agents_used()
            );
            println!("bounds: {}", bounds_text(&b));
            let tried: Vec<String> = outcome
                .attempts
                .iter()
                .map(|a| {
                    format!(
                        "T={} {} ({:.2}s)",
                        a.horizon,
                        status_name(a.status),
                        a.elapsed.as_secs_f64()
                    )
                })
                .collect();
            println!("tried: {}", tried.join(", "));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn attempts_json(outcome: &PlanOutcome) -> Value {
    outcome
        .attempts
        .iter()
        .map(|a| {
            json!({
                "horizon": a.horizon,
                "status": status_name(a.status),
                "columns": a.columns,
                "rows": a.rows,
                "seconds": a.elapsed.as_secs_f64(),
            })
        })
        .collect()
}

fn catalog_dump(inst: &Instance, sd: &ScaledDurations, horizon: u32) -> Result<String> {
    let cat = Catalog::build(inst, sd, horizon)?;
    let mut out = cat.counts_table();
    out.push('\n');
    for a in cat.actions() {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            action_var_name(a),
            a.action_type(),
            a.ts(),
            a.te,
            a.duration()
        ));
    }
    Ok(out)
}

fn cmd_validate(input: &Input, plan_path: &Path, format: Format) -> Result<ExitCode> {
    let inst = load_instance(&input.instance)?;
    let (_, sd) = load_durations(&input.durations)?;
    let (plan, its) = parse_plan(&read(plan_path)?)?;
    let its = (!its.is_empty()).then_some(its);
    let report = validate_with_itineraries(&inst, &sd, &plan, its.as_deref());
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Text => print!("{}", report.to_text()),
    }
    Ok(if report.is_valid() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_bounds(
    input: &Input,
    unit_plan: Option<&Path>,
    solve: bool,
    solver: &SolverArgs,
    format: Format,
) -> Result<ExitCode> {
    let inst = load_instance(&input.instance)?;
    let (_, sd) = load_durations(&input.durations)?;
    let unit = match unit_plan {
        Some(path) => {
            let (p, _) = parse_plan(&read(path)?)?;
            let report = macc_core::validate::validate_plan(&inst, &ScaledDurations::unit(), &p);
            if !report.is_valid() {
                bail!(
                    "{} is not a valid unit-duration plan:\n{}",
                    path.display(),
                    report.to_text()
                );
            }
            Some(p)
        }
        None if solve => Some(solve_unit(&inst, &solver_config(solver)?)?),
        None => None,
    };
    let b = bound_report(&inst, &sd, unit.as_ref())?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&bounds_json(&b))?),
        Format::Text => println!("{}", bounds_text(&b)),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(input: &Input, t_max: u32, format: Format, out: Option<&Path>) -> Result<ExitCode> {
    let inst = load_instance(&input.instance)?;
    let (_, sd) = load_durations(&input.durations)?;
    let Some(r) = brute_force_plan(&inst, &sd, t_max)? else {
        bail!("no plan with makespan up to {t_max}");
    };
    if let Some(path) = out {
        let its = extract_itineraries(&r.plan)?;
        std::fs::write(path, serialize_plan(&r.plan, &its))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    match format {
        Format::Json => println!(
            "{}",
            json!({"makespan": r.makespan, "sum_of_costs": r.sum_of_costs, "agents": r.plan.agents_used()})
        ),
        Format::Text => println!(
            "makespan {}  sum-of-costs {}  agents {}",
            r.makespan,
            r.sum_of_costs,
            r.plan.agents_used()
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    instance: &Path,
    values: &[u64],
    full: bool,
    jobs: Option<usize>,
    solver: &SolverArgs,
    format: Format,
) -> Result<ExitCode> {
    if values.is_empty() || values.contains(&0) {
        bail!("sweep values must be positive integers");
    }
    let inst = load_instance(instance)?;
    let cfg = solver_config(solver)?;
    let unit = solve_unit(&inst, &cfg).context("unit-duration solve failed")?;
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cells = sweep::run(&inst, &cfg, &unit, &sweep::grid(values, full), jobs);
    let summary = sweep::summarize(&cells);

    match format {
        Format::Json => {
            let rows: Vec<Value> = cells
                .iter()
                .map(|c| match &c.result {
                    Ok(r) => json!({
                        "durations": c.values,
                        "tb": r.bounds.tb,
                        "alpha": r.bounds.alpha.map(|a| a.to_string()),
                        "th": r.th(),
                        "lr": r.bounds.lr,
                        "uf": r.uf(),
                        "uc": r.bounds.uc,
                        "makespan": r.makespan(),
                        "sum_of_costs": r.plan.sum_of_costs,
                        "error": r.error(),
                        "bounds_hold": r.bounds_hold(),
                    }),
                    Err(e) => json!({"durations": c.values, "failure": e}),
                })
                .collect();
            let v = json!({
                "cells": summary.cells,
                "solved": summary.solved,
                "bounds_hold": summary.bounds_hold,
                "rmse": summary.rmse,
                "max_relative_error": summary.max_relative_error,
                "rows": rows,
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        Format::Text => {
            println!(
                "{:<14} {:>4} {:>7} {:>4} {:>4} {:>4} {:>9} {:>6}",
                "e,l,mb,me,pu,d", "T_b", "alpha", "T_h", "l_r", "u_f", "makespan", "error"
            );
            for c in &cells {
                let label = c.values.map(|v| v.to_string()).join(",");
                match &c.result {
                    Ok(r) => println!(
                        "{:<14} {:>4} {:>7} {:>4} {:>4} {:>4} {:>9} {:>6}",
                        label,
                        opt(r.bounds.tb),
                        r.bounds.alpha.map_or_else(String::new, |a| a.to_string()),
                        r.th(),
                        r.bounds.lr,
                        r.uf(),
                        r.makespan(),
                        r.error()
                    ),
                    Err(e) => println!("{label:<14} failed: {e}"),
                }
            }
            println!(
                "cells {}  solved {}  bounds hold {}  RMSE {:.3}  max relative error {:.3}",
                summary.cells,
                summary.solved,
                summary.bounds_hold,
                summary.rmse,
                summary.max_relative_error
            );
        }
    }
    Ok(if summary.solved == summary.cells {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
