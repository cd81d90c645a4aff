//! Exhaustive search over joint agent schedules for toy instances.
//!
//! Works directly from the movement rules, one timestep at a time, and shares
//! no code with the catalog or the model. States hold the column heights and
//! the actions still running; agents are interchangeable so the running set
//! is kept sorted.

use std::collections::HashMap;

use thiserror::Error;

use crate::catalog::{Action, ActionTemplate, Kind};
use crate::durations::{ActionType, ScaledDurations};
use crate::instance::{Cell, Instance, Position};
use crate::plan::{derive_block_actions, Plan};
use crate::Time;

pub const MAX_COLUMNS: usize = 16;
pub const MAX_BLOCKS: usize = 3;
pub const MAX_AGENTS: u32 = 2;
pub const MAX_HORIZON: Time = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub makespan: Time,
    pub sum_of_costs: u64,
    pub plan: Plan,
}

fn check_guard(inst: &Instance, t_max: Time) -> Result<(), OracleError> {
    let columns = inst.dims.columns();
    if columns > MAX_COLUMNS {
        return Err(OracleError::TooLarge(format!(
            "{columns} columns > {MAX_COLUMNS}"
        )));
    }
    if inst.total_blocks() > MAX_BLOCKS {
        return Err(OracleError::TooLarge(format!(
            "{} blocks > {MAX_BLOCKS}",
            inst.total_blocks()
        )));
    }
    if inst.agent_limit > MAX_AGENTS {
        return Err(OracleError::TooLarge(format!(
            "agent limit {} > {MAX_AGENTS}",
            inst.agent_limit
        )));
    }
    if t_max > MAX_HORIZON {
        return Err(OracleError::TooLarge(format!(
            "horizon {t_max} > {MAX_HORIZON}"
        )));
    }
    Ok(())
}

/// Smallest feasible horizon up to `t_max` and the cheapest plan for it.
pub fn brute_force_plan(
    inst: &Instance,
    sd: &ScaledDurations,
    t_max: Time,
) -> Result<Option<OracleResult>, OracleError> {
    check_guard(inst, t_max)?;
    for horizon in 4..=t_max {
        if let Some(plan) = Search::new(inst, sd, horizon).run() {
            return Ok(Some(OracleResult {
                makespan: horizon,
                sum_of_costs: plan.sum_of_costs,
                plan,
            }));
        }
    }
    Ok(None)
}

/// Cheapest plan for exactly `horizon`, if one exists.
pub fn brute_force_fixed(
    inst: &Instance,
    sd: &ScaledDurations,
    horizon: Time,
) -> Result<Option<Plan>, OracleError> {
    check_guard(inst, horizon)?;
    if horizon < 4 {
        return Ok(None);
    }
    Ok(Search::new(inst, sd, horizon).run())
}

/// Column heights at the start of a timestep plus the actions still running
/// (at most two, sorted), packed into one integer for hashing.
type Key = u128;

/// Two packed action codes, see [`Search::encode`].
type Started = u64;

struct Node {
    cost: u64,
    parent: u32,
    started: Started,
}

struct Search<'a> {
    inst: &'a Instance,
    sd: &'a ScaledDurations,
    horizon: Time,
    cols: usize,
    border: Vec<(u8, u8)>,
    min_move: Time,
    min_leave: Time,
}

type Heights = [u8; MAX_COLUMNS];

struct Step {
    t: Time,
    heights: Heights,
    continuing: Vec<Action>,
    free: Vec<Action>,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, sd: &'a ScaledDurations, horizon: Time) -> Self {
        let d = inst.dims;
        let mut border = Vec::new();
        for y in 0..d.y {
            for x in 0..d.x {
                if x == 0 || y == 0 || x == d.x - 1 || y == d.y - 1 {
                    border.push((x, y));
                }
            }
        }
        let min_over_levels =
            |ty: ActionType| (0..d.z).map(|z| sd.duration(ty, z)).min().unwrap_or(1);
        Search {
            inst,
            sd,
            horizon,
            cols: d.columns(),
            border,
            min_move: min_over_levels(ActionType::MoveEmpty)
                .min(min_over_levels(ActionType::MoveBlock)),
            min_leave: sd.duration(ActionType::Leave, 0),
        }
    }

    fn col(&self, x: u8, y: u8) -> usize {
        y as usize * self.inst.dims.x as usize + x as usize
    }

    fn col_xy(&self, col: usize) -> (u8, u8) {
        let w = self.inst.dims.x as usize;
        ((col % w) as u8, (col / w) as u8)
    }

    fn on_border(&self, x: u8, y: u8) -> bool {
        let d = self.inst.dims;
        x == 0 || y == 0 || x == d.x - 1 || y == d.y - 1
    }

    fn edge_distance(&self, x: u8, y: u8) -> Time {
        let d = self.inst.dims;
        x.min(y).min(d.x - 1 - x).min(d.y - 1 - y) as Time
    }

    fn adjacent(&self, x: u8, y: u8) -> Vec<(u8, u8)> {
        let d = self.inst.dims;
        let mut out = Vec::with_capacity(4);
        if x > 0 {
            out.push((x - 1, y));
        }
        if x + 1 < d.x {
            out.push((x + 1, y));
        }
        if y > 0 {
            out.push((x, y - 1));
        }
        if y + 1 < d.y {
            out.push((x, y + 1));
        }
        out
    }

    // Packing. Heights stay below 4 and agents below level 4 because the
    // guard allows at most three blocks; horizons stay below 65.

    fn encode_pos(&self, p: Position) -> u32 {
        match p {
            Position::Start => 0,
            Position::End => 1,
            Position::Cell(c) => 2 + (self.col(c.x, c.y) as u32) * 4 + c.z as u32,
        }
    }

    fn decode_pos(&self, code: u32) -> Position {
        match code {
            0 => Position::Start,
            1 => Position::End,
            n => {
                let (x, y) = self.col_xy(((n - 2) / 4) as usize);
                Position::Cell(Cell::new(x, y, ((n - 2) % 4) as u8))
            }
        }
    }

    /// 30-bit code, never zero.
    fn encode(&self, a: &Action) -> u32 {
        let t = &a.template;
        let kind = match t.kind {
            Kind::Move => 0,
            Kind::PickUp => 1,
            Kind::Deliver => 2,
        };
        1 + (t.ts
            | a.te << 6
            | self.encode_pos(t.start) << 13
            | self.encode_pos(t.end) << 20
            | (t.carry as u32) << 27
            | kind << 28)
    }

    fn decode(&self, code: u32) -> Action {
        let c = code - 1;
        let kind = match c >> 28 {
            0 => Kind::Move,
            1 => Kind::PickUp,
            _ => Kind::Deliver,
        };
        ActionTemplate {
            ts: c & 0x3f,
            start: self.decode_pos((c >> 13) & 0x7f),
            carry: (c >> 27) & 1 == 1,
            kind,
            end: self.decode_pos((c >> 20) & 0x7f),
        }
        .timed((c >> 6) & 0x7f)
    }

    fn pack(&self, heights: &Heights, running: &[Action]) -> Key {
        let mut key: Key = 0;
        for (i, &h) in heights[..self.cols].iter().enumerate() {
            key |= (h as Key) << (2 * i);
        }
        for (i, a) in running.iter().enumerate() {
            key |= (self.encode(a) as Key) << (32 + 32 * i);
        }
        key
    }

    fn unpack(&self, key: Key) -> (Heights, Vec<Action>) {
        let mut heights = [0u8; MAX_COLUMNS];
        for (i, h) in heights[..self.cols].iter_mut().enumerate() {
            *h = ((key >> (2 * i)) & 3) as u8;
        }
        let mut running = Vec::with_capacity(2);
        for i in 0..3 {
            let code = ((key >> (32 + 32 * i)) & 0xffff_ffff) as u32;
            if code != 0 {
                running.push(self.decode(code));
            }
        }
        (heights, running)
    }

    fn pack_started(&self, started: &[Action]) -> Started {
        started.iter().enumerate().fold(0, |acc, (i, a)| {
            acc | (self.encode(a) as Started) << (32 * i)
        })
    }

    fn unpack_started(&self, started: Started) -> Vec<Action> {
        (0..2)
            .map(|i| ((started >> (32 * i)) & 0xffff_ffff) as u32)
            .filter(|&c| c != 0)
            .map(|c| self.decode(c))
            .collect()
    }

    /// Earliest time an agent free at `from` standing on `(x, y, z)` can be off the grid.
    fn exit_time(&self, from: Time, x: u8, y: u8, z: u8) -> Time {
        from + self.edge_distance(x, y).max(z as Time) * self.min_move + self.min_leave
    }

    fn columns_of(&self, a: &Action) -> [Option<usize>; 2] {
        let s = a.template.start.column().map(|(x, y)| self.col(x, y));
        let e = a.template.end.column().map(|(x, y)| self.col(x, y));
        if s == e {
            [s, None]
        } else {
            [s, e]
        }
    }

    fn timed(&self, tpl: ActionTemplate) -> Action {
        tpl.timed(tpl.ts + self.sd.duration_of(&tpl))
    }

    /// Follow-up actions for an agent standing on `c` with `carry` at time `t`.
    fn options(&self, t: Time, c: Cell, carry: bool, heights: &Heights) -> Vec<Action> {
        let last = self.horizon - 1;
        let mut out = Vec::new();
        let mut push = |a: Action| {
            if a.te <= last {
                out.push(a);
            }
        };
        if t <= self.horizon - 3 {
            push(self.timed(ActionTemplate {
                ts: t,
                start: c.into(),
                carry,
                kind: Kind::Move,
                end: c.into(),
            }));
            for (nx, ny) in self.adjacent(c.x, c.y) {
                let nz = heights[self.col(nx, ny)];
                if nz.abs_diff(c.z) <= 1 {
                    push(self.timed(ActionTemplate {
                        ts: t,
                        start: c.into(),
                        carry,
                        kind: Kind::Move,
                        end: Cell::new(nx, ny, nz).into(),
                    }));
                }
                if self.on_border(nx, ny) || c.z + 1 >= self.inst.dims.z {
                    continue;
                }
                let (kind, needed) = if carry {
                    (Kind::Deliver, c.z)
                } else {
                    (Kind::PickUp, c.z + 1)
                };
                if nz == needed {
                    push(self.timed(ActionTemplate {
                        ts: t,
                        start: c.into(),
                        carry,
                        kind,
                        end: Cell::new(nx, ny, c.z).into(),
                    }));
                }
            }
        }
        if (2..=self.horizon - 2).contains(&t) && self.on_border(c.x, c.y) {
            push(self.timed(ActionTemplate {
                ts: t,
                start: c.into(),
                carry,
                kind: Kind::Move,
                end: Position::End,
            }));
        }
        out
    }

    fn run(&self) -> Option<Plan> {
        let last = self.horizon - 1;
        let mut layers: Vec<Vec<Node>> = vec![vec![Node {
            cost: 0,
            parent: u32::MAX,
            started: 0,
        }]];
        let mut frontier: Vec<Key> = vec![0];

        for t in 0..last {
            let mut index: HashMap<Key, u32> = HashMap::new();
            let mut next_keys: Vec<Key> = Vec::new();
            let mut next_nodes: Vec<Node> = Vec::new();
            for (pi, &key) in frontier.iter().enumerate() {
                let base = layers[t as usize][pi].cost;
                let (heights, running) = self.unpack(key);
                let mut continuing = Vec::new();
                let mut free = Vec::new();
                for a in running {
                    if a.te > t {
                        continuing.push(a);
                    } else if a.template.end != Position::End {
                        free.push(a);
                    }
                }
                let step = Step {
                    t,
                    heights,
                    continuing,
                    free,
                };
                let mut used = [false; MAX_COLUMNS];
                for a in &step.continuing {
                    for c in self.columns_of(a).into_iter().flatten() {
                        used[c] = true;
                    }
                }
                let mut chosen = Vec::new();
                self.expand(&step, 0, &mut used, &mut chosen, &mut |started| {
                    let Some(next) = self.advance(&step, started) else {
                        return;
                    };
                    let cost = base + started.iter().map(|a| a.duration() as u64).sum::<u64>();
                    match index.get(&next) {
                        Some(&i) => {
                            let node = &mut next_nodes[i as usize];
                            if cost < node.cost {
                                node.cost = cost;
                                node.parent = pi as u32;
                                node.started = self.pack_started(started);
                            }
                        }
                        None => {
                            index.insert(next, next_nodes.len() as u32);
                            next_nodes.push(Node {
                                cost,
                                parent: pi as u32,
                                started: self.pack_started(started),
                            });
                            next_keys.push(next);
                        }
                    }
                });
            }
            if next_keys.is_empty() {
                return None;
            }
            layers.push(next_nodes);
            frontier = next_keys;
        }

        let goal = frontier
            .iter()
            .enumerate()
            .filter(|(_, &k)| {
                let (heights, running) = self.unpack(k);
                heights[..self.cols] == *self.inst.targets()
                    && running
                        .iter()
                        .all(|a| a.template.end == Position::End && a.te <= last)
            })
            .min_by_key(|(i, _)| layers[last as usize][*i].cost)?
            .0;

        let mut actions = Vec::new();
        let mut idx = goal as u32;
        for t in (1..=last as usize).rev() {
            let node = &layers[t][idx as usize];
            actions.extend(self.unpack_started(node.started));
            idx = node.parent;
        }
        let blocks = derive_block_actions(&self.inst.dims, self.horizon, &actions);
        let plan = Plan::new(self.horizon, self.sd.multiple, actions, blocks);
        debug_assert_eq!(plan.sum_of_costs, layers[last as usize][goal].cost);
        Some(plan)
    }

    /// Chooses a follow-up for every free agent, then any number of entries.
    fn expand(
        &self,
        step: &Step,
        agent: usize,
        used: &mut [bool; MAX_COLUMNS],
        chosen: &mut Vec<Action>,
        emit: &mut dyn FnMut(&[Action]),
    ) {
        if agent < step.free.len() {
            let prev = &step.free[agent].template;
            let Position::Cell(c) = prev.agent_after() else {
                return;
            };
            if step.heights[self.col(c.x, c.y)] != c.z {
                return;
            }
            for a in self.options(step.t, c, prev.carry_after(), &step.heights) {
                if self.claim(&a, used) {
                    chosen.push(a);
                    self.expand(step, agent + 1, used, chosen, emit);
                    chosen.pop();
                    self.release(&a, used);
                }
            }
            return;
        }
        self.add_entries(step, 0, used, chosen, emit);
    }

    fn add_entries(
        &self,
        step: &Step,
        from: usize,
        used: &mut [bool; MAX_COLUMNS],
        chosen: &mut Vec<Action>,
        emit: &mut dyn FnMut(&[Action]),
    ) {
        emit(chosen);
        let active = step.continuing.len() + chosen.len();
        if step.t + 4 > self.horizon || active as u32 >= self.inst.agent_limit {
            return;
        }
        for i in from..self.border.len() * 2 {
            let (x, y) = self.border[i / 2];
            let a = self.timed(ActionTemplate {
                ts: step.t,
                start: Position::Start,
                carry: i % 2 == 1,
                kind: Kind::Move,
                end: Cell::new(x, y, 0).into(),
            });
            if a.te > self.horizon - 1 || !self.claim(&a, used) {
                continue;
            }
            chosen.push(a);
            // A second entry into the same column is blocked by `used`, so
            // continue with the next border cell.
            self.add_entries(step, (i / 2 + 1) * 2, used, chosen, emit);
            chosen.pop();
            self.release(&a, used);
        }
    }

    fn claim(&self, a: &Action, used: &mut [bool]) -> bool {
        let cols = self.columns_of(a);
        if cols.iter().flatten().any(|&c| used[c]) {
            return false;
        }
        for c in cols.into_iter().flatten() {
            used[c] = true;
        }
        true
    }

    fn release(&self, a: &Action, used: &mut [bool]) {
        for c in self.columns_of(a).into_iter().flatten() {
            used[c] = false;
        }
    }

    /// Packed state at `t + 1`, or `None` when the result breaks a rule or
    /// cannot finish in time.
    fn advance(&self, step: &Step, started: &[Action]) -> Option<Key> {
        let t = step.t;
        let last = self.horizon - 1;
        let mut heights = step.heights;
        let mut running: Vec<Action> = step.continuing.iter().chain(started).copied().collect();
        if running.len() as u32 > self.inst.agent_limit {
            return None;
        }
        for a in &running {
            if a.te - 1 == t {
                if let Some(cell) = a.template.end.cell() {
                    let col = self.col(cell.x, cell.y);
                    match a.template.kind {
                        Kind::PickUp => heights[col] = cell.z,
                        Kind::Deliver => heights[col] = cell.z + 1,
                        Kind::Move => {}
                    }
                }
            }
        }
        running.sort_unstable();

        let s = t + 1;
        let mut lock = [s; MAX_COLUMNS];
        let mut pending = heights;
        for a in &running {
            for c in self.columns_of(a).into_iter().flatten() {
                lock[c] = lock[c].max(a.te);
            }
            if a.te > s {
                if let Some(cell) = a.template.end.cell() {
                    let col = self.col(cell.x, cell.y);
                    match a.template.kind {
                        Kind::PickUp => pending[col] = cell.z,
                        Kind::Deliver => pending[col] = cell.z + 1,
                        Kind::Move => {}
                    }
                }
            }
            if let Position::Cell(c) = a.template.agent_after() {
                if self.exit_time(a.te, c.x, c.y, c.z) > last {
                    return None;
                }
            }
        }
        for col in 0..self.cols {
            let (x, y) = self.col_xy(col);
            let (have, want) = (pending[col], self.inst.target(x, y));
            if have == want {
                continue;
            }
            let (done, exit_level) = if have < want {
                (self.ready(col, want, &pending, &lock), want - 1)
            } else {
                let work: Time = (want..have)
                    .map(|z| self.sd.duration(ActionType::PickUp, z))
                    .sum();
                (lock[col] + work, want)
            };
            let exit = self
                .adjacent(x, y)
                .into_iter()
                .map(|(nx, ny)| self.exit_time(0, nx, ny, exit_level))
                .min()
                .unwrap_or(0);
            if done + exit > last {
                return None;
            }
        }
        Some(self.pack(&heights, &running))
    }

    /// Lower bound on when column `col` can reach height `h`. A block at
    /// level `z >= 1` is delivered from a neighbor of height `z`; a neighbor
    /// that still has to grow must be built first and then climbed.
    fn ready(&self, col: usize, h: u8, pending: &Heights, lock: &[Time; MAX_COLUMNS]) -> Time {
        if h <= pending[col] {
            return lock[col];
        }
        let z = h - 1;
        let below = self.ready(col, z, pending, lock);
        let stand = if z == 0 {
            0
        } else {
            let (x, y) = self.col_xy(col);
            self.adjacent(x, y)
                .into_iter()
                .filter(|&(nx, ny)| !self.on_border(nx, ny))
                .map(|(nx, ny)| {
                    let n = self.col(nx, ny);
                    if pending[n] >= z {
                        lock[n]
                    } else {
                        self.ready(n, z, pending, lock) + self.min_move
                    }
                })
                .min()
                .unwrap_or(Time::MAX / 4)
        };
        below.max(stand) + self.sd.duration(ActionType::Deliver, z)
    }
}
