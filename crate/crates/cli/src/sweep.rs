//! Estimate-versus-optimum sweep over a grid of integer duration vectors.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use macc_core::bounds::{lower_bound_lf, BoundReport};
use macc_core::durations::DurationSpec;
use macc_core::solve::plan_with_unit;
use macc_core::{Instance, Plan, ScaledDurations, SolverConfig};

/// Durations in entry, leave, move_block, move_empty, pick_up, deliver order.
pub type Vector = [u64; 6];

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub values: Vector,
    pub result: Result<CellOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub bounds: BoundReport,
    pub plan: Plan,
}

impl CellOutcome {
    pub fn makespan(&self) -> u32 {
        self.plan.horizon
    }

    pub fn th(&self) -> u32 {
        self.bounds.th.expect("sweep cells carry a unit plan")
    }

    pub fn uf(&self) -> u32 {
        self.bounds.uf.expect("sweep cells carry a unit plan")
    }

    /// `T_h` minus the optimal makespan.
    pub fn error(&self) -> i64 {
        self.th() as i64 - self.makespan() as i64
    }

    /// `l_r <= makespan <= u_f` and `T_h` within `[l_r, u_f]`.
    pub fn bounds_hold(&self) -> bool {
        let lr = self.bounds.lr;
        lr <= self.makespan()
            && self.makespan() <= self.uf()
            && lr <= self.th()
            && self.th() <= self.uf()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub cells: usize,
    pub solved: usize,
    pub bounds_hold: usize,
    pub rmse: f64,
    pub max_relative_error: f64,
}

/// `values^5` vectors with move_empty held at `values[0]`, or `values^6` when `full`.
pub fn grid(values: &[u64], full: bool) -> Vec<Vector> {
    let swept: &[usize] = if full {
        &[0, 1, 2, 3, 4, 5]
    } else {
        &[0, 1, 2, 4, 5]
    };
    let n = values.len();
    (0..n.pow(swept.len() as u32))
        .map(|mut code| {
            let mut v = [values[0]; 6];
            for &slot in swept {
                v[slot] = values[code % n];
                code /= n;
            }
            v
        })
        .collect()
}

fn scaled(v: &Vector) -> Result<ScaledDurations, String> {
    DurationSpec::per_type_integers(*v)
        .scale()
        .map_err(|e| e.to_string())
}

/// Solves every cell against the shared unit-duration plan with `jobs` workers.
///
/// Cells run in order of total duration. A cell starts its horizon search at
/// the largest makespan among finished cells whose durations it dominates.
pub fn run(
    inst: &Instance,
    cfg: &SolverConfig,
    unit: &Plan,
    cells: &[Vector],
    jobs: usize,
) -> Vec<SweepCell> {
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&i| (cells[i].iter().sum::<u64>(), i));
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<Option<SweepCell>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = order.get(k) else { break };
                let floor = {
                    let finished = done.lock().expect("worker panicked");
                    dominated_floor(inst, &cells[i], &finished)
                };
                let result = solve_cell(inst, cfg, unit, &cells[i], floor);
                done.lock().expect("worker panicked")[i] = Some(SweepCell {
                    values: cells[i],
                    result,
                });
            });
        }
    });
    done.into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|c| c.expect("every cell ran"))
        .collect()
}

fn dominated_floor(inst: &Instance, v: &Vector, finished: &[Option<SweepCell>]) -> Option<u32> {
    let target = scaled(v).ok()?;
    finished
        .iter()
        .flatten()
        .filter_map(|c| {
            let r = c.result.as_ref().ok()?;
            let coarse = scaled(&c.values).ok()?;
            lower_bound_lf(r.makespan(), &coarse, &target, &inst.dims).ok()
        })
        .max()
}

fn solve_cell(
    inst: &Instance,
    cfg: &SolverConfig,
    unit: &Plan,
    v: &Vector,
    floor: Option<u32>,
) -> Result<CellOutcome, String> {
    let sd = scaled(v)?;
    let mut cfg = cfg.clone();
    cfg.min_horizon = cfg.min_horizon.max(floor);
    let outcome = plan_with_unit(inst, &sd, &cfg, Some(unit.clone())).map_err(|e| e.to_string())?;
    Ok(CellOutcome {
        bounds: outcome
            .plan
            .bounds
            .clone()
            .expect("planner attaches bounds"),
        plan: outcome.plan,
    })
}

pub fn summarize(cells: &[SweepCell]) -> SweepSummary {
    let solved: Vec<&CellOutcome> = cells
        .iter()
        .filter_map(|c| c.result.as_ref().ok())
        .collect();
    let sq: f64 = solved.iter().map(|r| (r.error() as f64).powi(2)).sum();
    let max_rel = solved
        .iter()
        .map(|r| r.error().unsigned_abs() as f64 / r.makespan() as f64)
        .fold(0.0, f64::max);
    SweepSummary {
        cells: cells.len(),
        solved: solved.len(),
        bounds_hold: solved.iter().filter(|r| r.bounds_hold()).count(),
        rmse: if solved.is_empty() {
            f64::NAN
        } else {
            (sq / solved.len() as f64).sqrt()
        },
        max_relative_error: max_rel,
    }
}
