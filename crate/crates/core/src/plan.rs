//! Plans, per-agent itineraries and the JSON plan file.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::BoundReport;
use crate::catalog::{Action, ActionTemplate, BlockAction, Kind};
use crate::durations::ActionType;
use crate::instance::{Cell, GridDims, Position};
use crate::Time;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("malformed plan file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("malformed plan file: {0}")]
    Field(String),
    #[error(
        "flow imbalance at t={t} {cell:?} carry={carry}: {incoming} arriving, {outgoing} departing"
    )]
    FlowImbalance {
        t: Time,
        cell: Cell,
        carry: bool,
        incoming: usize,
        outgoing: usize,
    },
    #[error("action {0} is not reachable from any entry action")]
    Orphan(usize),
    #[error("recorded {field} {recorded} does not match recomputed {computed}")]
    Inconsistent {
        field: &'static str,
        recorded: u64,
        computed: u64,
    },
}

/// A construction plan over horizon `T` (its makespan).
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub horizon: Time,
    /// Scaling multiple of the durations the plan was computed with.
    pub multiple: u64,
    /// Selected actions in sorted order.
    pub actions: Vec<Action>,
    pub blocks: Vec<BlockAction>,
    pub sum_of_costs: u64,
    pub bounds: Option<BoundReport>,
}

impl Plan {
    pub fn new(
        horizon: Time,
        multiple: u64,
        mut actions: Vec<Action>,
        mut blocks: Vec<BlockAction>,
    ) -> Self {
        actions.sort();
        blocks.sort();
        let sum_of_costs = actions.iter().map(|a| a.duration() as u64).sum();
        Plan {
            horizon,
            multiple,
            actions,
            blocks,
            sum_of_costs,
            bounds: None,
        }
    }

    pub fn makespan(&self) -> Time {
        self.horizon
    }

    pub fn count(&self, ty: ActionType) -> usize {
        self.actions
            .iter()
            .filter(|a| a.action_type() == ty)
            .count()
    }

    /// Largest number of agents on the grid at any timestep.
    pub fn agents_used(&self) -> usize {
        (0..self.horizon)
            .map(|t| self.actions.iter().filter(|a| a.is_active(t)).count())
            .max()
            .unwrap_or(0)
    }
}

/// One agent's chained actions, from its entry to its leave.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Itinerary {
    pub agent: usize,
    /// Indices into [`Plan::actions`].
    pub actions: Vec<usize>,
}

type FlowNode = (Time, Cell, bool);

/// Splits the selected actions into agent paths.
///
/// At each flow node `(t, cell, carry)` arrivals and departures are paired
/// first-to-first in sorted action order.
pub fn extract_itineraries(plan: &Plan) -> Result<Vec<Itinerary>, PlanError> {
    let mut incoming: BTreeMap<FlowNode, Vec<usize>> = BTreeMap::new();
    let mut outgoing: BTreeMap<FlowNode, Vec<usize>> = BTreeMap::new();
    for (i, a) in plan.actions.iter().enumerate() {
        let tpl = &a.template;
        if let Some(cell) = tpl.agent_after().cell() {
            incoming
                .entry((a.te, cell, tpl.carry_after()))
                .or_default()
                .push(i);
        }
        if let Some(cell) = tpl.start.cell() {
            outgoing
                .entry((tpl.ts, cell, tpl.carry))
                .or_default()
                .push(i);
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    let nodes: std::collections::BTreeSet<FlowNode> =
        incoming.keys().chain(outgoing.keys()).copied().collect();
    for node in nodes {
        let ins = incoming.get(&node).map_or(&[][..], Vec::as_slice);
        let outs = outgoing.get(&node).map_or(&[][..], Vec::as_slice);
        if ins.len() != outs.len() {
            return Err(PlanError::FlowImbalance {
                t: node.0,
                cell: node.1,
                carry: node.2,
                incoming: ins.len(),
                outgoing: outs.len(),
            });
        }
        for (&a, &b) in ins.iter().zip(outs) {
            next.insert(a, b);
        }
    }

    let mut entries: Vec<usize> = (0..plan.actions.len())
        .filter(|&i| plan.actions[i].template.start == Position::Start)
        .collect();
    entries.sort_by_key(|&i| {
        let t = &plan.actions[i].template;
        (t.ts, t.end, t.carry)
    });
    let mut seen = vec![false; plan.actions.len()];
    let mut out = Vec::with_capacity(entries.len());
    for (agent, &first) in entries.iter().enumerate() {
        let mut path = vec![first];
        seen[first] = true;
        let mut cur = first;
        while let Some(&n) = next.get(&cur) {
            path.push(n);
            seen[n] = true;
            cur = n;
        }
        out.push(Itinerary {
            agent,
            actions: path,
        });
    }
    if let Some(orphan) = seen.iter().position(|s| !s) {
        return Err(PlanError::Orphan(orphan));
    }
    Ok(out)
}

type Column = (u8, u8);

/// Block-actions implied by replaying column heights from an empty world.
pub fn derive_block_actions(
    dims: &GridDims,
    horizon: Time,
    actions: &[Action],
) -> Vec<BlockAction> {
    let mut heights = vec![0u8; dims.columns()];
    let mut changes: BTreeMap<Time, Vec<(Column, u8)>> = BTreeMap::new();
    for a in actions {
        if let Some((col, _, to)) = a.height_change() {
            changes.entry(a.te - 1).or_default().push((col, to));
        }
    }
    let mut out = Vec::with_capacity(horizon as usize * dims.columns());
    for t in 0..horizon {
        let mut after = heights.clone();
        if let Some(list) = changes.get(&t) {
            for &((x, y), to) in list {
                after[dims.column_index(x, y)] = to;
            }
        }
        for y in 0..dims.y {
            for x in 0..dims.x {
                let i = dims.column_index(x, y);
                out.push(BlockAction {
                    t,
                    x,
                    y,
                    z: heights[i],
                    z2: after[i],
                });
            }
        }
        heights = after;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum Coord {
    Num(u8),
    Tag(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ActionRecord {
    ts: Time,
    te: Time,
    x: Coord,
    y: Coord,
    z: Coord,
    c: u8,
    k: String,
    x2: Coord,
    y2: Coord,
    z2: Coord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct BlockRecord {
    t: Time,
    x: u8,
    y: u8,
    z: u8,
    z2: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    makespan: Time,
    sum_of_costs: u64,
    #[serde(default = "one")]
    multiple: u64,
    actions: Vec<ActionRecord>,
    itineraries: Vec<Vec<usize>>,
    #[serde(default)]
    block_actions: Vec<BlockRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundReport>,
}

fn one() -> u64 {
    1
}

fn encode_position(p: &Position) -> (Coord, Coord, Coord) {
    match p {
        Position::Start => (
            Coord::Tag("S".into()),
            Coord::Tag("S".into()),
            Coord::Tag("S".into()),
        ),
        Position::End => (
            Coord::Tag("E".into()),
            Coord::Tag("E".into()),
            Coord::Tag("E".into()),
        ),
        Position::Cell(c) => (Coord::Num(c.x), Coord::Num(c.y), Coord::Num(c.z)),
    }
}

fn decode_position(x: &Coord, y: &Coord, z: &Coord) -> Result<Position, PlanError> {
    match (x, y, z) {
        (Coord::Num(x), Coord::Num(y), Coord::Num(z)) => Ok(Position::Cell(Cell::new(*x, *y, *z))),
        (Coord::Tag(a), Coord::Tag(b), Coord::Tag(c)) if a == b && b == c => match a.as_str() {
            "S" => Ok(Position::Start),
            "E" => Ok(Position::End),
            other => Err(PlanError::Field(format!("unknown sentinel {other:?}"))),
        },
        _ => Err(PlanError::Field(format!(
            "mixed coordinates {x:?}, {y:?}, {z:?}"
        ))),
    }
}

fn encode_action(a: &Action) -> ActionRecord {
    let (x, y, z) = encode_position(&a.template.start);
    let (x2, y2, z2) = encode_position(&a.template.end);
    ActionRecord {
        ts: a.ts(),
        te: a.te,
        x,
        y,
        z,
        c: a.template.carry as u8,
        k: a.template.kind.letter().to_string(),
        x2,
        y2,
        z2,
    }
}

fn decode_action(r: &ActionRecord) -> Result<Action, PlanError> {
    let kind = Kind::from_letter(&r.k)
        .ok_or_else(|| PlanError::Field(format!("unknown kind {:?}", r.k)))?;
    let carry = match r.c {
        0 => false,
        1 => true,
        other => return Err(PlanError::Field(format!("carry flag {other} is not 0/1"))),
    };
    if r.te <= r.ts {
        return Err(PlanError::Field(format!(
            "action ends at {} before it starts at {}",
            r.te, r.ts
        )));
    }
    Ok(ActionTemplate {
        ts: r.ts,
        start: decode_position(&r.x, &r.y, &r.z)?,
        carry,
        kind,
        end: decode_position(&r.x2, &r.y2, &r.z2)?,
    }
    .timed(r.te))
}

/// Writes the JSON plan file.
pub fn serialize_plan(plan: &Plan, itineraries: &[Itinerary]) -> String {
    let file = PlanFile {
        makespan: plan.horizon,
        sum_of_costs: plan.sum_of_costs,
        multiple: plan.multiple,
        actions: plan.actions.iter().map(encode_action).collect(),
        itineraries: itineraries.iter().map(|i| i.actions.clone()).collect(),
        block_actions: plan
            .blocks
            .iter()
            .map(|b| BlockRecord {
                t: b.t,
                x: b.x,
                y: b.y,
                z: b.z,
                z2: b.z2,
            })
            .collect(),
        bounds: plan.bounds.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plan serializes");
    text.push('\n');
    text
}

/// Reads a plan file. The recorded sum-of-costs must match the actions.
pub fn parse_plan(text: &str) -> Result<(Plan, Vec<Itinerary>), PlanError> {
    let file: PlanFile = serde_json::from_str(text)?;
    let actions = file
        .actions
        .iter()
        .map(decode_action)
        .collect::<Result<Vec<_>, _>>()?;
    let blocks: Vec<BlockAction> = file
        .block_actions
        .iter()
        .map(|b| BlockAction {
            t: b.t,
            x: b.x,
            y: b.y,
            z: b.z,
            z2: b.z2,
        })
        .collect();
    let n = actions.len();
    for path in &file.itineraries {
        if let Some(&bad) = path.iter().find(|&&i| i >= n) {
            return Err(PlanError::Field(format!(
                "itinerary refers to action {bad} but only {n} exist"
            )));
        }
    }
    // Itinerary indices refer to the file's order, so keep it when already sorted.
    let sorted = actions.windows(2).all(|w| w[0] <= w[1]);
    if !sorted {
        return Err(PlanError::Field("actions are not in sorted order".into()));
    }
    let mut plan = Plan::new(file.makespan, file.multiple, actions, blocks);
    plan.bounds = file.bounds;
    if plan.sum_of_costs != file.sum_of_costs {
        return Err(PlanError::Inconsistent {
            field: "sum_of_costs",
            recorded: file.sum_of_costs,
            computed: plan.sum_of_costs,
        });
    }
    let itineraries = file
        .itineraries
        .into_iter()
        .enumerate()
        .map(|(agent, actions)| Itinerary { agent, actions })
        .collect();
    Ok((plan, itineraries))
}

fn type_letter(ty: ActionType) -> char {
    match ty {
        ActionType::Entry => 'e',
        ActionType::Leave => 'l',
        ActionType::MoveBlock => 'b',
        ActionType::MoveEmpty => 'm',
        ActionType::PickUp => 'p',
        ActionType::Deliver => 'd',
        ActionType::Wait => 'w',
    }
}

/// ASCII timeline, one lane per agent. Each action shows its type letter at
/// its start timestep followed by `~` while it runs.
pub fn render_timeline(plan: &Plan, itineraries: &[Itinerary]) -> String {
    let width = plan.horizon as usize;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "makespan {}  sum-of-costs {}  itineraries {}",
        plan.horizon,
        plan.sum_of_costs,
        itineraries.len()
    );
    let ruler: String = (0..width)
        .map(|t| char::from(b'0' + (t % 10) as u8))
        .collect();
    let _ = writeln!(out, "{:>9} |{}|", "t", ruler);
    for it in itineraries {
        let mut lane = vec![' '; width];
        for &i in &it.actions {
            let a = &plan.actions[i];
            for t in a.ts()..a.te.min(plan.horizon) {
                lane[t as usize] = if t == a.ts() {
                    type_letter(a.action_type())
                } else {
                    '~'
                };
            }
        }
        let _ = writeln!(
            out,
            "{:>9} |{}|",
            format!("agent {}", it.agent),
            lane.into_iter().collect::<String>()
        );
    }
    out
}
