//! External MILP solver driver and the lexicographic horizon search.
//!
//! The model goes to the solver as a CPLEX LP file; the solver writes a
//! solution file which is parsed back, rounded and re-checked against every
//! row before it is trusted.

use std::collections::HashMap;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::bounds::{bound_report, lower_bound_lr};
use crate::catalog::{Action, BlockAction, Catalog, CatalogError, MIN_HORIZON};
use crate::durations::ScaledDurations;
use crate::instance::Instance;
use crate::model::{build_model, MilpModel, VarRef};
use crate::plan::Plan;
use crate::Time;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solver executable `{0}` not found; pass --solver-cmd or install HiGHS")]
    SolverNotFound(String),
    #[error("solver command template is empty or lacks {{model}}")]
    BadCommand,
    #[error("time limit must be positive")]
    BadTimeLimit,
    #[error("solver exited with {status}: {stderr}")]
    SolverFailed { status: String, stderr: String },
    #[error("could not parse solver output: {0}")]
    Unparsable(String),
    #[error("solver solution violates {count} model row(s), first: {first}")]
    Integrity { count: usize, first: String },
    #[error("solver objective {reported} differs from recomputed {computed}")]
    ObjectiveMismatch { reported: f64, computed: u64 },
    #[error("solver hit its time limit at horizon {0}; optimality not proven")]
    Inconclusive(Time),
    #[error("no plan with makespan up to {0}")]
    NoPlan(Time),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Bounds(#[from] crate::bounds::BoundsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionFormat {
    /// HiGHS raw solution file.
    Highs,
    /// CBC `-solu` output.
    Cbc,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Program and arguments; `{model}`, `{solution}`, `{time_limit}` and
    /// `{threads}` are substituted per call.
    pub command: Vec<String>,
    pub format: SolutionFormat,
    /// Seconds per solver call.
    pub time_limit: f64,
    pub threads: u32,
    /// Values at or above this count as 1.
    pub rounding: f64,
    /// Directory for model and solution files; a fresh temp dir when `None`.
    pub work_dir: Option<PathBuf>,
    pub keep_files: bool,
    /// Largest horizon the search may try; defaults to `u_c + 1`.
    pub max_horizon: Option<Time>,
    /// Known lower bound on the makespan (e.g. from a dominated duration
    /// mapping); horizons below it are skipped.
    pub min_horizon: Option<Time>,
}

impl SolverConfig {
    /// Stock HiGHS command line for `program`.
    pub fn highs(program: impl Into<String>) -> Self {
        let command = [
            program.into(),
            "--model_file".into(),
            "{model}".into(),
            "--solution_file".into(),
            "{solution}".into(),
            "--time_limit".into(),
            "{time_limit}".into(),
        ]
        .to_vec();
        SolverConfig {
            command,
            format: SolutionFormat::Highs,
            time_limit: 600.0,
            threads: 1,
            rounding: 0.5,
            work_dir: None,
            keep_files: false,
            max_horizon: None,
            min_horizon: None,
        }
    }

    /// CBC reading an LP file and writing its solution file.
    pub fn cbc(program: impl Into<String>) -> Self {
        let command = [
            program.into(),
            "{model}".into(),
            "sec".into(),
            "{time_limit}".into(),
            "threads".into(),
            "{threads}".into(),
            "solve".into(),
            "solu".into(),
            "{solution}".into(),
        ]
        .to_vec();
        SolverConfig {
            command,
            format: SolutionFormat::Cbc,
            ..SolverConfig::highs("")
        }
    }

    /// Whitespace-separated command template; the format is guessed from the program name.
    pub fn from_template(template: &str) -> Result<Self, SolveError> {
        let command: Vec<String> = template.split_whitespace().map(str::to_string).collect();
        let program = command.first().ok_or(SolveError::BadCommand)?;
        let base = if Path::new(program)
            .file_name()
            .is_some_and(|n| n.to_string_lossy().to_ascii_lowercase().contains("cbc"))
        {
            SolverConfig::cbc("")
        } else {
            SolverConfig::highs("")
        };
        Ok(SolverConfig { command, ..base })
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.time_limit.is_nan() || self.time_limit <= 0.0 {
            return Err(SolveError::BadTimeLimit);
        }
        if self.command.is_empty() || !self.command.iter().any(|a| a.contains("{model}")) {
            return Err(SolveError::BadCommand);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub horizon: Time,
    /// Sum of costs; set when `status` is `Optimal`.
    pub objective: Option<u64>,
    pub actions: Vec<Action>,
    pub blocks: Vec<BlockAction>,
    pub columns: usize,
    pub rows: usize,
    pub elapsed: Duration,
}

/// Outcome of one solver call, before checking against the model.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: HashMap<String, f64>,
}

/// Parses a HiGHS raw solution file.
pub fn parse_highs_solution(text: &str) -> Result<RawSolution, SolveError> {
    let mut lines = text.lines().map(str::trim);
    let mut status = None;
    let mut objective = None;
    let mut values = HashMap::new();
    while let Some(line) = lines.next() {
        if line == "Model status" {
            let s = lines.next().unwrap_or("");
            status = Some(match s {
                "Optimal" => SolveStatus::Optimal,
                "Infeasible" | "Primal infeasible or unbounded" => SolveStatus::Infeasible,
                "Time limit reached" => SolveStatus::TimeLimit,
                other => return Err(SolveError::Unparsable(format!("model status `{other}`"))),
            });
        } else if let Some(rest) = line.strip_prefix("Objective ") {
            objective = rest.trim().parse::<f64>().ok();
        } else if let Some(rest) = line.strip_prefix("# Columns ") {
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| SolveError::Unparsable(format!("column count `{rest}`")))?;
            for _ in 0..n {
                let entry = lines
                    .next()
                    .ok_or_else(|| SolveError::Unparsable("truncated column section".into()))?;
                let mut parts = entry.split_whitespace();
                let (Some(name), Some(v)) = (parts.next(), parts.next()) else {
                    return Err(SolveError::Unparsable(format!("column line `{entry}`")));
                };
                let v: f64 = v
                    .parse()
                    .map_err(|_| SolveError::Unparsable(format!("column value `{v}`")))?;
                values.insert(name.to_string(), v);
            }
            // Only the primal section matters.
            break;
        }
    }
    let status = status.ok_or_else(|| SolveError::Unparsable("no model status".into()))?;
    Ok(RawSolution {
        status,
        objective,
        values,
    })
}

/// Parses a CBC solution file.
pub fn parse_cbc_solution(text: &str) -> Result<RawSolution, SolveError> {
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| SolveError::Unparsable("empty solution file".into()))?
        .trim();
    let lower = head.to_ascii_lowercase();
    let status = if lower.starts_with("optimal") {
        SolveStatus::Optimal
    } else if lower.contains("infeasible") {
        SolveStatus::Infeasible
    } else if lower.starts_with("stopped") {
        SolveStatus::TimeLimit
    } else {
        return Err(SolveError::Unparsable(format!("status line `{head}`")));
    };
    let objective = head
        .rsplit_once("objective value")
        .and_then(|(_, v)| v.trim().parse::<f64>().ok());
    let mut values = HashMap::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        // `[**] index name value reduced_cost`
        let parts = if parts.first() == Some(&"**") {
            &parts[1..]
        } else {
            &parts[..]
        };
        if parts.len() < 3 {
            continue;
        }
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| SolveError::Unparsable(format!("value in `{line}`")))?;
        values.insert(parts[1].to_string(), v);
    }
    Ok(RawSolution {
        status,
        objective,
        values,
    })
}

fn substitute(arg: &str, model: &Path, solution: &Path, cfg: &SolverConfig) -> String {
    arg.replace("{model}", &model.to_string_lossy())
        .replace("{solution}", &solution.to_string_lossy())
        .replace("{time_limit}", &cfg.time_limit.to_string())
        .replace("{threads}", &cfg.threads.to_string())
}

/// Writes `model`, runs the solver and parses its solution file.
pub fn run_solver(model: &MilpModel, cfg: &SolverConfig) -> Result<RawSolution, SolveError> {
    cfg.validate()?;
    let temp = match cfg.work_dir {
        Some(_) => None,
        None => Some(tempfile::Builder::new().prefix("macc-").tempdir()?),
    };
    let dir = match (&cfg.work_dir, &temp) {
        (Some(d), _) => {
            std::fs::create_dir_all(d)?;
            d.clone()
        }
        (None, Some(t)) => t.path().to_path_buf(),
        (None, None) => unreachable!("temp dir created above"),
    };
    let stem = format!("macc_T{}", model.horizon);
    let model_path = dir.join(format!("{stem}.lp"));
    let solution_path = dir.join(format!("{stem}.sol"));
    let _ = std::fs::remove_file(&solution_path);
    model.write_lp(&model_path)?;

    let args: Vec<String> = cfg
        .command
        .iter()
        .map(|a| substitute(a, &model_path, &solution_path, cfg))
        .collect();
    let output = match Command::new(&args[0]).args(&args[1..]).output() {
        Ok(o) => o,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(SolveError::SolverNotFound(args[0].clone()))
        }
        Err(e) => return Err(e.into()),
    };
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let tail: Vec<&str> = stderr.lines().rev().take(5).collect();
        return Err(SolveError::SolverFailed {
            status: output.status.to_string(),
            stderr: tail.into_iter().rev().collect::<Vec<_>>().join(" | "),
        });
    }
    let text = std::fs::read_to_string(&solution_path)
        .map_err(|e| SolveError::Unparsable(format!("{}: {e}", solution_path.display())))?;
    let parsed = match cfg.format {
        SolutionFormat::Highs => parse_highs_solution(&text),
        SolutionFormat::Cbc => parse_cbc_solution(&text),
    };
    if cfg.keep_files {
        if let Some(t) = temp {
            let _ = t.keep();
        }
    }
    parsed
}

/// Rounds a raw solution against `model` and re-checks every row.
pub fn decode(
    model: &MilpModel,
    cat: &Catalog,
    raw: &RawSolution,
    rounding: f64,
) -> Result<Solution, SolveError> {
    let mut solution = Solution {
        status: raw.status,
        horizon: model.horizon,
        objective: None,
        actions: Vec::new(),
        blocks: Vec::new(),
        columns: model.num_columns(),
        rows: model.constraints.len(),
        elapsed: Duration::ZERO,
    };
    if raw.status != SolveStatus::Optimal {
        return Ok(solution);
    }
    let values: Vec<bool> = model
        .column_names()
        .iter()
        .map(|n| raw.values.get(n).copied().unwrap_or(0.0) >= rounding)
        .collect();
    let broken = model.check(&values);
    if let Some(first) = broken.first() {
        return Err(SolveError::Integrity {
            count: broken.len(),
            first: first.to_string(),
        });
    }
    let objective = model.objective_value(|v| values[model.column(v)]) as u64;
    if let Some(reported) = raw.objective {
        if (reported - objective as f64).abs() > 1e-6 * (1.0 + reported.abs()) {
            return Err(SolveError::ObjectiveMismatch {
                reported,
                computed: objective,
            });
        }
    }
    for (col, &on) in values.iter().enumerate() {
        if !on {
            continue;
        }
        match model.var_ref(col) {
            VarRef::R(id) => solution.actions.push(*cat.action(id)),
            VarRef::H(id) => solution.blocks.push(*cat.block(id)),
        }
    }
    solution.actions.sort();
    solution.blocks.sort();
    solution.objective = Some(objective);
    Ok(solution)
}

/// Builds and solves the model for exactly `horizon`.
pub fn solve_fixed_horizon(
    inst: &Instance,
    sd: &ScaledDurations,
    horizon: Time,
    cfg: &SolverConfig,
) -> Result<Solution, SolveError> {
    let started = Instant::now();
    let cat = Catalog::build(inst, sd, horizon)?;
    let model = build_model(inst, &cat);
    let raw = run_solver(&model, cfg)?;
    let mut solution = decode(&model, &cat, &raw, cfg.rounding)?;
    solution.elapsed = started.elapsed();
    Ok(solution)
}

/// One horizon tried by [`plan_lexicographic`].
#[derive(Debug, Clone)]
pub struct Attempt {
    pub horizon: Time,
    pub status: SolveStatus,
    pub columns: usize,
    pub rows: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    /// Optimal plan with its bound report attached.
    pub plan: Plan,
    pub attempts: Vec<Attempt>,
    /// Unit-duration plan used for the bounds, when durations are not unit.
    pub unit_plan: Option<Plan>,
}

fn search(
    inst: &Instance,
    sd: &ScaledDurations,
    start: Time,
    cap: Time,
    cfg: &SolverConfig,
    attempts: &mut Vec<Attempt>,
) -> Result<Plan, SolveError> {
    for horizon in start..=cap {
        let s = solve_fixed_horizon(inst, sd, horizon, cfg)?;
        attempts.push(Attempt {
            horizon,
            status: s.status,
            columns: s.columns,
            rows: s.rows,
            elapsed: s.elapsed,
        });
        match s.status {
            SolveStatus::Optimal => {
                return Ok(Plan::new(horizon, sd.multiple, s.actions, s.blocks))
            }
            SolveStatus::Infeasible => continue,
            SolveStatus::TimeLimit => return Err(SolveError::Inconclusive(horizon)),
        }
    }
    Err(SolveError::NoPlan(cap))
}

/// Smallest horizon with a plan, then the cheapest plan for it.
///
/// For non-unit durations a unit-duration plan is solved first; it yields
/// `T_b`, the constructive bound `u_f`, `u_c` and the estimate `T_h`, and
/// lets the search start at `max(l_r, T_b)`.
pub fn plan_lexicographic(
    inst: &Instance,
    sd: &ScaledDurations,
    cfg: &SolverConfig,
) -> Result<PlanOutcome, SolveError> {
    if sd.is_unit() && sd.multiple == 1 {
        return plan_with_unit(inst, sd, cfg, None);
    }
    let unit = solve_unit(inst, cfg)?;
    plan_with_unit(inst, sd, cfg, Some(unit))
}

/// Optimal plan under unit durations.
pub fn solve_unit(inst: &Instance, cfg: &SolverConfig) -> Result<Plan, SolveError> {
    let unit = ScaledDurations::unit();
    let start = lower_bound_lr(inst, &unit).max(MIN_HORIZON);
    let cap = cfg
        .max_horizon
        .unwrap_or(Time::MAX)
        .min(unit_cap_guess(inst));
    search(inst, &unit, start, cap, cfg, &mut Vec::new())
}

/// Like [`plan_lexicographic`] with the unit-duration plan already known.
pub fn plan_with_unit(
    inst: &Instance,
    sd: &ScaledDurations,
    cfg: &SolverConfig,
    unit_plan: Option<Plan>,
) -> Result<PlanOutcome, SolveError> {
    let report = bound_report(inst, sd, unit_plan.as_ref())?;
    let start = report.start_horizon().max(cfg.min_horizon.unwrap_or(0));
    let cap = match (cfg.max_horizon, report.uc) {
        (Some(m), _) => m,
        (None, Some(uc)) => uc + 1,
        (None, None) => unit_cap_guess(inst),
    };
    let mut attempts = Vec::new();
    let mut plan = search(inst, sd, start, cap, cfg, &mut attempts)?;
    plan.bounds = Some(report);
    Ok(PlanOutcome {
        plan,
        attempts,
        unit_plan,
    })
}

/// Fallback search cap when no unit-duration run bounds the horizon.
fn unit_cap_guess(inst: &Instance) -> Time {
    let d = &inst.dims;
    let blocks = inst.total_blocks() as Time;
    let span = (d.x as Time + d.y as Time) * d.z as Time;
    4 + (blocks + 1) * (2 * span + 4)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HIGHS_OPTIMAL: &str = "Model status\nOptimal\n\n# Primal solution values\nFeasible\nObjective 3\n# Columns 3\nr_a 1\nr_b 0\nh_c 0.9999999\n# Rows 1\nc2_0 0\n\n# Dual solution values\nNone\n";

    #[test]
    fn parses_highs_raw_solution() {
        let raw = parse_highs_solution(HIGHS_OPTIMAL).unwrap();
        assert_eq!(raw.status, SolveStatus::Optimal);
        assert_eq!(raw.objective, Some(3.0));
        assert_eq!(raw.values.len(), 3);
        assert_eq!(raw.values["h_c"], 0.9999999);

        let infeasible = "Model status\nInfeasible\n\n# Primal solution values\nNone\n";
        let raw = parse_highs_solution(infeasible).unwrap();
        assert_eq!(raw.status, SolveStatus::Infeasible);
        assert!(raw.values.is_empty());

        assert!(parse_highs_solution("garbage").is_err());
        assert!(parse_highs_solution("Model status\nOptimal\n# Columns 2\nr_a 1\n").is_err());
    }

    #[test]
    fn parses_cbc_solution() {
        let text =
            "Optimal - objective value 3.00000000\n      0 r_a   1   0\n      1 r_b   0   2\n";
        let raw = parse_cbc_solution(text).unwrap();
        assert_eq!(raw.status, SolveStatus::Optimal);
        assert_eq!(raw.objective, Some(3.0));
        assert_eq!(raw.values["r_b"], 0.0);
        let raw = parse_cbc_solution("Infeasible - objective value 0.00000000\n").unwrap();
        assert_eq!(raw.status, SolveStatus::Infeasible);
    }

    #[test]
    fn config_checks() {
        let mut cfg = SolverConfig::highs("highs");
        cfg.time_limit = 0.0;
        assert!(matches!(cfg.validate(), Err(SolveError::BadTimeLimit)));
        let cfg = SolverConfig::from_template("cbc {model} solve solu {solution}").unwrap();
        assert_eq!(cfg.format, SolutionFormat::Cbc);
        assert!(matches!(
            SolverConfig::from_template("highs --foo")
                .unwrap()
                .validate(),
            Err(SolveError::BadCommand)
        ));
    }

    #[test]
    fn missing_solver_is_reported() {
        let inst = crate::instance::parse_instance(
            r#"{"x": 3, "y": 3, "z": 2, "agent_limit": 1,
                "heightmap": [[0,0,0],[0,1,0],[0,0,0]]}"#,
        )
        .unwrap();
        let cfg = SolverConfig::highs("/nonexistent/highs-binary");
        let err = solve_fixed_horizon(&inst, &ScaledDurations::unit(), 4, &cfg).unwrap_err();
        assert!(matches!(err, SolveError::SolverNotFound(_)), "{err}");
    }
}
