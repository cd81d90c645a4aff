//! Plan checker that replays the world step by step.
//!
//! It works from the world rules (gravity, exclusive columns, agent flow,
//! agent cap) and never evaluates model rows, so it can serve as an
//! independent check on the model builder and the solver.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::bounds::uf_schedule;
use crate::catalog::{Action, ActionTemplate, Kind};
use crate::durations::{ActionType, ScaledDurations};
use crate::instance::{Cell, GridDims, Instance, Position};
use crate::model::action_var_name;
use crate::plan::{derive_block_actions, Itinerary, Plan};
use crate::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Blocks only go on top of a column and only come off its top.
    Gravity,
    /// Two actions touching the same column at the same time.
    Exclusion,
    AgentCap,
    /// Agents must chain actions without gaps from entry to leave.
    Flow,
    /// Column heights must evolve consistently.
    HeightFlow,
    /// Final world must equal the target.
    Completion,
    Border,
    /// Agents stand on the top of their start column while acting.
    Support,
    /// Moves between non-adjacent cells, steps over one level, off-grid cells.
    Geometry,
    /// Action length disagrees with the duration mapping.
    Duration,
    /// Action outside `[0, T - 1]`.
    Horizon,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::Gravity => "gravity",
            Rule::Exclusion => "exclusion",
            Rule::AgentCap => "agent-cap",
            Rule::Flow => "flow",
            Rule::HeightFlow => "height-flow",
            Rule::Completion => "completion",
            Rule::Border => "border",
            Rule::Support => "support",
            Rule::Geometry => "geometry",
            Rule::Duration => "duration",
            Rule::Horizon => "horizon",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub t: Option<Time>,
    pub rule: Rule,
    pub location: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.t {
            Some(t) => write!(f, "t={t} "),
            None => Ok(()),
        }?;
        write!(f, "[{}] {}: {}", self.rule.id(), self.location, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn to_text(&self) -> String {
        if self.is_valid() {
            return "plan is valid\n".to_string();
        }
        let mut out = format!("{} violation(s)\n", self.violations.len());
        for v in &self.violations {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

struct Checker {
    dims: GridDims,
    out: Vec<Violation>,
}

impl Checker {
    fn flag(
        &mut self,
        t: Option<Time>,
        rule: Rule,
        location: impl Into<String>,
        detail: impl Into<String>,
    ) {
        self.out.push(Violation {
            t,
            rule,
            location: location.into(),
            detail: detail.into(),
        });
    }

    fn in_grid(&self, c: Cell) -> bool {
        c.x < self.dims.x && c.y < self.dims.y && c.z < self.dims.z
    }

    fn adjacent(a: Cell, b: Cell) -> bool {
        a.x.abs_diff(b.x) + a.y.abs_diff(b.y) == 1
    }

    fn check_geometry(&mut self, a: &Action) {
        let name = action_var_name(a);
        let tpl = &a.template;
        for p in [tpl.start, tpl.end] {
            if let Some(c) = p.cell() {
                if !self.in_grid(c) {
                    self.flag(
                        Some(a.ts()),
                        Rule::Geometry,
                        &name,
                        format!("cell {p} is outside the grid"),
                    );
                    return;
                }
            }
        }
        match (tpl.start, tpl.end, tpl.kind) {
            (Position::Start, Position::Cell(e), Kind::Move) => {
                if !self.dims.is_border(e.x, e.y) || e.z != 0 {
                    self.flag(
                        Some(a.ts()),
                        Rule::Border,
                        &name,
                        "entry must end on a ground-level border cell",
                    );
                }
            }
            (Position::Cell(s), Position::End, Kind::Move) => {
                if !self.dims.is_border(s.x, s.y) || s.z != 0 {
                    self.flag(
                        Some(a.ts()),
                        Rule::Border,
                        &name,
                        "leave must start on a ground-level border cell",
                    );
                }
            }
            (Position::Cell(s), Position::Cell(e), Kind::Move) => {
                if s != e && (!Self::adjacent(s, e) || s.z.abs_diff(e.z) > 1) {
                    self.flag(
                        Some(a.ts()),
                        Rule::Geometry,
                        &name,
                        "moves go to a 4-neighbor at most one level up or down",
                    );
                }
            }
            (Position::Cell(s), Position::Cell(e), Kind::PickUp | Kind::Deliver) => {
                let wants = tpl.kind == Kind::Deliver;
                if tpl.carry != wants {
                    self.flag(
                        Some(a.ts()),
                        Rule::Flow,
                        &name,
                        "carry flag contradicts the action (pick-up needs empty hands, deliver a block)",
                    );
                }
                if !Self::adjacent(s, e) || s.z != e.z || e.z + 1 >= self.dims.z {
                    self.flag(
                        Some(a.ts()),
                        Rule::Geometry,
                        &name,
                        "block must sit at the agent's level in a neighboring column below the top layer",
                    );
                }
            }
            _ => self.flag(
                Some(a.ts()),
                Rule::Geometry,
                &name,
                "start/end positions do not form an action",
            ),
        }
    }
}

/// Replays `plan` and reports every rule it breaks.
pub fn validate_plan(inst: &Instance, sd: &ScaledDurations, plan: &Plan) -> ViolationReport {
    validate_with_itineraries(inst, sd, plan, None)
}

/// Like [`validate_plan`], additionally checking recorded itineraries.
pub fn validate_with_itineraries(
    inst: &Instance,
    sd: &ScaledDurations,
    plan: &Plan,
    itineraries: Option<&[Itinerary]>,
) -> ViolationReport {
    let dims = inst.dims;
    let horizon = plan.horizon;
    let mut ck = Checker {
        dims,
        out: Vec::new(),
    };
    if horizon == 0 {
        ck.flag(None, Rule::Horizon, "plan", "makespan must be positive");
        return ViolationReport { violations: ck.out };
    }
    let last = horizon - 1;

    // Per-action checks; malformed actions are excluded from the replay.
    let mut live: Vec<&Action> = Vec::new();
    for a in &plan.actions {
        let name = action_var_name(a);
        if a.te <= a.ts() || a.te > last {
            ck.flag(
                Some(a.ts()),
                Rule::Horizon,
                &name,
                format!(
                    "interval [{}, {}) must lie within [0, {last}]",
                    a.ts(),
                    a.te
                ),
            );
            continue;
        }
        let expected = sd.duration_of(&a.template);
        if a.duration() != expected {
            ck.flag(
                Some(a.ts()),
                Rule::Duration,
                &name,
                format!(
                    "lasts {} but {} takes {expected}",
                    a.duration(),
                    a.action_type()
                ),
            );
        }
        let before = ck.out.len();
        ck.check_geometry(a);
        if ck.out[before..].iter().all(|v| v.rule != Rule::Geometry) {
            live.push(a);
        }
    }

    // Column heights at the start of every timestep.
    let columns = dims.columns();
    let mut changes: BTreeMap<Time, Vec<&Action>> = BTreeMap::new();
    for a in &live {
        if a.height_change().is_some() {
            changes.entry(a.te - 1).or_default().push(a);
        }
    }
    let mut heights: Vec<Vec<u8>> = Vec::with_capacity(horizon as usize);
    heights.push(vec![0; columns]);
    for t in 0..last {
        let mut next = heights[t as usize].clone();
        let mut touched = vec![false; columns];
        for a in changes.get(&t).into_iter().flatten() {
            let ((x, y), from, to) = a.height_change().expect("filtered");
            let col = dims.column_index(x, y);
            let name = action_var_name(a);
            if dims.is_border(x, y) {
                ck.flag(
                    Some(t),
                    Rule::Border,
                    &name,
                    format!("changes border column ({x},{y})"),
                );
            }
            if touched[col] {
                ck.flag(
                    Some(t),
                    Rule::HeightFlow,
                    format!("({x},{y})"),
                    "two height changes in one timestep",
                );
                continue;
            }
            touched[col] = true;
            let current = heights[t as usize][col];
            if current != from {
                ck.flag(
                    Some(t),
                    Rule::Gravity,
                    &name,
                    format!(
                        "column ({x},{y}) has height {current}, {} needs {from}",
                        a.action_type()
                    ),
                );
            }
            if to >= dims.z {
                ck.flag(
                    Some(t),
                    Rule::HeightFlow,
                    &name,
                    "column would exceed the top level",
                );
                continue;
            }
            next[col] = to;
        }
        heights.push(next);
    }

    // Support, exclusion and agent cap per timestep.
    for t in 0..horizon {
        let mut holders: Vec<Vec<&Action>> = vec![Vec::new(); columns];
        let mut active = 0u32;
        for a in live.iter().filter(|a| a.is_active(t)) {
            active += 1;
            let (c1, c2) = a.exclusion_columns();
            for (x, y) in c1.into_iter().chain(c2) {
                holders[dims.column_index(x, y)].push(a);
            }
            if let Some(s) = a.template.start.cell() {
                let h = heights[t as usize][dims.column_index(s.x, s.y)];
                if h != s.z {
                    ck.flag(
                        Some(t),
                        Rule::Support,
                        action_var_name(a),
                        format!(
                            "agent at level {} but column ({},{}) has height {h}",
                            s.z, s.x, s.y
                        ),
                    );
                }
            }
        }
        if active > inst.agent_limit {
            ck.flag(
                Some(t),
                Rule::AgentCap,
                "grid",
                format!("{active} agents active, limit is {}", inst.agent_limit),
            );
        }
        for (col, list) in holders.iter().enumerate() {
            if list.len() > 1 {
                let names: Vec<String> = list.iter().map(|a| action_var_name(a)).collect();
                ck.flag(
                    Some(t),
                    Rule::Exclusion,
                    format!("({},{})", col % dims.x as usize, col / dims.x as usize),
                    format!("column held by {}", names.join(", ")),
                );
            }
        }
    }

    check_flow(&mut ck, &live);

    let final_heights = &heights[last as usize];
    for y in 0..dims.y {
        for x in 0..dims.x {
            let got = final_heights[dims.column_index(x, y)];
            let want = inst.target(x, y);
            if got != want {
                ck.flag(
                    Some(last),
                    Rule::Completion,
                    format!("({x},{y})"),
                    format!("final height {got}, target {want}"),
                );
            }
        }
    }

    if !plan.blocks.is_empty() {
        let mut recorded = plan.blocks.clone();
        recorded.sort();
        let mut derived = derive_block_actions(&dims, horizon, &plan.actions);
        derived.sort();
        if recorded != derived {
            let first = recorded
                .iter()
                .zip(&derived)
                .find(|(a, b)| a != b)
                .map(|(a, _)| format!("first mismatch at t={} ({},{})", a.t, a.x, a.y))
                .unwrap_or_else(|| {
                    format!("{} recorded vs {} expected", recorded.len(), derived.len())
                });
            ck.flag(None, Rule::HeightFlow, "block_actions", first);
        }
    }

    if let Some(its) = itineraries {
        check_itineraries(&mut ck, plan, its);
    }

    let mut violations = ck.out;
    violations.sort();
    violations.dedup();
    ViolationReport { violations }
}

fn check_flow(ck: &mut Checker, live: &[&Action]) {
    let mut balance: BTreeMap<(Time, Cell, bool), i64> = BTreeMap::new();
    for a in live {
        let tpl = &a.template;
        if let Some(c) = tpl.agent_after().cell() {
            *balance.entry((a.te, c, tpl.carry_after())).or_default() += 1;
        }
        if let Some(c) = tpl.start.cell() {
            *balance.entry((tpl.ts, c, tpl.carry)).or_default() -= 1;
        }
    }
    for ((t, c, carry), b) in balance {
        if b != 0 {
            let what = if b > 0 {
                format!(
                    "{b} agent(s) arrive (carry={}) with nothing to do next",
                    carry as u8
                )
            } else {
                format!(
                    "{} action(s) start (carry={}) with no agent there",
                    -b, carry as u8
                )
            };
            ck.flag(Some(t), Rule::Flow, Position::Cell(c).to_string(), what);
        }
    }
}

fn check_itineraries(ck: &mut Checker, plan: &Plan, its: &[Itinerary]) {
    let mut used = vec![0usize; plan.actions.len()];
    for it in its {
        let loc = format!("agent {}", it.agent);
        let Some(&first) = it.actions.first() else {
            ck.flag(None, Rule::Flow, &loc, "empty itinerary");
            continue;
        };
        if it.actions.iter().any(|&i| i >= plan.actions.len()) {
            ck.flag(
                None,
                Rule::Flow,
                &loc,
                "itinerary refers to a missing action",
            );
            continue;
        }
        for &i in &it.actions {
            used[i] += 1;
        }
        if plan.actions[first].action_type() != ActionType::Entry {
            ck.flag(
                None,
                Rule::Flow,
                &loc,
                "itinerary does not start with an entry",
            );
        }
        let last = *it.actions.last().expect("non-empty");
        if plan.actions[last].action_type() != ActionType::Leave {
            ck.flag(
                None,
                Rule::Flow,
                &loc,
                "itinerary does not end with a leave",
            );
        }
        for w in it.actions.windows(2) {
            let (a, b): (&Action, &ActionTemplate) =
                (&plan.actions[w[0]], &plan.actions[w[1]].template);
            if a.te != b.ts
                || a.template.agent_after() != b.start
                || a.template.carry_after() != b.carry
            {
                ck.flag(
                    Some(a.te),
                    Rule::Flow,
                    &loc,
                    format!(
                        "{} does not continue {}",
                        action_var_name(&plan.actions[w[1]]),
                        action_var_name(a)
                    ),
                );
            }
        }
    }
    for (i, n) in used.iter().enumerate() {
        if *n != 1 {
            ck.flag(
                None,
                Rule::Flow,
                action_var_name(&plan.actions[i]),
                format!("appears in {n} itineraries"),
            );
        }
    }
}

/// Re-times a unit-duration plan to `target` durations, holding every agent
/// with waits until the slowest action of each unit step has finished.
pub fn pad_with_waits(inst: &Instance, unit_plan: &Plan, target: &ScaledDurations) -> Plan {
    let barrier = uf_schedule(unit_plan, target);
    let mut actions = Vec::with_capacity(unit_plan.actions.len());
    for a in &unit_plan.actions {
        let step = a.ts() as usize;
        let ts = barrier[step];
        let mut tpl = a.template;
        tpl.ts = ts;
        let timed = tpl.timed(ts + target.duration_of(&tpl));
        actions.push(timed);
        if let Position::Cell(c) = tpl.agent_after() {
            let carry = tpl.carry_after();
            for t in timed.te..barrier[step + 1] {
                actions.push(
                    ActionTemplate {
                        ts: t,
                        start: c.into(),
                        carry,
                        kind: Kind::Move,
                        end: c.into(),
                    }
                    .timed(t + 1),
                );
            }
        }
    }
    let horizon = *barrier.last().expect("non-empty schedule");
    let blocks = derive_block_actions(&inst.dims, horizon, &actions);
    Plan::new(horizon, target.multiple, actions, blocks)
}
