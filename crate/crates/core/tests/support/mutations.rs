//! Plan mutations the validator must reject.
//!
//! Each mutation takes a valid plan and returns a broken copy, or `None`
//! when the plan has nothing it can act on.

use macc_core::instance::Instance;
use macc_core::plan::derive_block_actions;
use macc_core::{Action, ActionTemplate, ActionType, Kind, Plan, Position, Rule};

pub struct Mutation {
    pub name: &'static str,
    /// Rules at least one of which must be reported.
    pub expect: &'static [Rule],
    pub apply: fn(&Instance, &Plan) -> Option<Plan>,
}

fn with_actions(inst: &Instance, plan: &Plan, actions: Vec<Action>) -> Plan {
    let blocks = derive_block_actions(&inst.dims, plan.horizon, &actions);
    Plan::new(plan.horizon, plan.multiple, actions, blocks)
}

fn first_of(plan: &Plan, pred: impl Fn(&Action) -> bool) -> Option<usize> {
    plan.actions.iter().position(pred)
}

fn replace(inst: &Instance, plan: &Plan, i: usize, a: Action) -> Plan {
    let mut actions = plan.actions.clone();
    actions[i] = a;
    with_actions(inst, plan, actions)
}

fn is_type(a: &Action, ty: ActionType) -> bool {
    a.action_type() == ty
}

fn shift_later(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| is_type(a, ActionType::Deliver))?;
    let mut a = plan.actions[i];
    a.template.ts += 1;
    a.te += 1;
    Some(replace(inst, plan, i, a))
}

fn shift_earlier(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| is_type(a, ActionType::Leave))?;
    let mut a = plan.actions[i];
    a.template.ts -= 1;
    a.te -= 1;
    Some(replace(inst, plan, i, a))
}

fn drop_deliver(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| is_type(a, ActionType::Deliver))?;
    let mut actions = plan.actions.clone();
    actions.remove(i);
    Some(with_actions(inst, plan, actions))
}

fn drop_leave(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| is_type(a, ActionType::Leave))?;
    let mut actions = plan.actions.clone();
    actions.remove(i);
    Some(with_actions(inst, plan, actions))
}

fn duplicate_entry(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| is_type(a, ActionType::Entry))?;
    let mut actions = plan.actions.clone();
    actions.push(plan.actions[i]);
    Some(with_actions(inst, plan, actions))
}

/// Adds `agent_limit + 1` agents that enter, wait and leave together.
fn extra_agents(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let entry = plan
        .actions
        .iter()
        .find(|a| is_type(a, ActionType::Entry))?;
    let leave = plan
        .actions
        .iter()
        .find(|a| is_type(a, ActionType::Leave))?;
    let (d_entry, d_leave) = (entry.duration(), leave.duration());
    let ts_leave = d_entry.max(2);
    if ts_leave + d_leave > plan.horizon - 1 {
        return None;
    }
    let mut actions = plan.actions.clone();
    for c in inst
        .border_cells()
        .into_iter()
        .take(inst.agent_limit as usize + 1)
    {
        let at = Position::Cell(c);
        let tpl = |ts, start, kind, end| ActionTemplate {
            ts,
            start,
            carry: false,
            kind,
            end,
        };
        actions.push(tpl(0, Position::Start, Kind::Move, at).timed(d_entry));
        for t in d_entry..ts_leave {
            actions.push(tpl(t, at, Kind::Move, at).timed(t + 1));
        }
        actions.push(tpl(ts_leave, at, Kind::Move, Position::End).timed(ts_leave + d_leave));
    }
    Some(with_actions(inst, plan, actions))
}

fn carry_flip(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| {
        a.template.kind == Kind::Move
            && a.template.start.cell().is_some()
            && a.template.end.cell().is_some()
    })
    .or_else(|| first_of(plan, |a| is_type(a, ActionType::Leave)))?;
    let mut a = plan.actions[i];
    a.template.carry = !a.template.carry;
    Some(replace(inst, plan, i, a))
}

/// Moves an entry to a different border cell without touching what follows.
fn entry_elsewhere(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| is_type(a, ActionType::Entry))?;
    let mut a = plan.actions[i];
    let here = a.template.end.cell()?;
    let other = inst
        .border_cells()
        .into_iter()
        .find(|c| c.column() != here.column() && here.x.abs_diff(c.x) + here.y.abs_diff(c.y) > 1)?;
    a.template.end = other.into();
    Some(replace(inst, plan, i, a))
}

/// A move that jumps two columns.
fn teleport(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| {
        a.template.kind == Kind::Move && a.template.start.cell().is_some()
    })?;
    let mut a = plan.actions[i];
    let from = a.template.start.cell()?;
    let far = inst
        .border_cells()
        .into_iter()
        .find(|c| from.x.abs_diff(c.x) + from.y.abs_diff(c.y) >= 2)?;
    a.template.end = far.into();
    Some(replace(inst, plan, i, a))
}

/// Retargets a delivery onto a border column next to the agent.
fn border_block(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let (i, target) = plan.actions.iter().enumerate().find_map(|(i, a)| {
        if !is_type(a, ActionType::Deliver) {
            return None;
        }
        let from = a.template.start.cell()?;
        let target = inst
            .neighbors(from.x, from.y)
            .into_iter()
            .find(|&(x, y)| inst.dims.is_border(x, y))?;
        Some((i, macc_core::Cell::new(target.0, target.1, from.z)))
    })?;
    let mut a = plan.actions[i];
    a.template.end = target.into();
    Some(replace(inst, plan, i, a))
}

fn stretch_duration(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| is_type(a, ActionType::Leave))?;
    let mut a = plan.actions[i];
    a.te += 1;
    Some(replace(inst, plan, i, a))
}

fn squeeze_duration(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| a.duration() >= 2)?;
    let mut a = plan.actions[i];
    a.te -= 1;
    Some(replace(inst, plan, i, a))
}

/// Claims the agent ends an on-grid move one level higher than the column allows.
fn wrong_level(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| {
        a.template.kind == Kind::Move
            && a.template.start.cell().is_some()
            && a.template.end.cell().is_some()
    })?;
    let mut a = plan.actions[i];
    let mut c = a.template.end.cell()?;
    c.z += 1;
    if c.z >= inst.dims.z {
        return None;
    }
    a.template.end = c.into();
    Some(replace(inst, plan, i, a))
}

fn truncate_horizon(_inst: &Instance, plan: &Plan) -> Option<Plan> {
    let mut p = plan.clone();
    p.horizon -= 1;
    Some(p)
}

/// Erases one height change from the recorded block-actions.
fn tamper_blocks(_inst: &Instance, plan: &Plan) -> Option<Plan> {
    let mut p = plan.clone();
    let b = p.blocks.iter_mut().find(|b| b.z != b.z2)?;
    b.z2 = b.z;
    Some(p)
}

fn deliver_as_pickup(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| is_type(a, ActionType::Deliver))?;
    let mut a = plan.actions[i];
    a.template.kind = Kind::PickUp;
    a.template.carry = false;
    Some(replace(inst, plan, i, a))
}

/// Swaps the start and end of the first on-grid move between two columns.
fn reverse_move(inst: &Instance, plan: &Plan) -> Option<Plan> {
    let i = first_of(plan, |a| {
        a.template.kind == Kind::Move
            && matches!((a.template.start.cell(), a.template.end.cell()), (Some(s), Some(e)) if s != e)
    })?;
    let mut a = plan.actions[i];
    std::mem::swap(&mut a.template.start, &mut a.template.end);
    Some(replace(inst, plan, i, a))
}

pub const CATALOG: &[Mutation] = &[
    Mutation {
        name: "shift-deliver-later",
        expect: &[Rule::Flow, Rule::Horizon],
        apply: shift_later,
    },
    Mutation {
        name: "shift-leave-earlier",
        expect: &[Rule::Flow, Rule::Horizon],
        apply: shift_earlier,
    },
    Mutation {
        name: "drop-deliver",
        expect: &[Rule::Completion, Rule::Flow],
        apply: drop_deliver,
    },
    Mutation {
        name: "drop-leave",
        expect: &[Rule::Flow],
        apply: drop_leave,
    },
    Mutation {
        name: "duplicate-entry",
        expect: &[Rule::Exclusion, Rule::AgentCap, Rule::Flow],
        apply: duplicate_entry,
    },
    Mutation {
        name: "extra-agents",
        expect: &[Rule::AgentCap],
        apply: extra_agents,
    },
    Mutation {
        name: "carry-flip",
        expect: &[Rule::Flow],
        apply: carry_flip,
    },
    Mutation {
        name: "entry-elsewhere",
        expect: &[Rule::Flow],
        apply: entry_elsewhere,
    },
    Mutation {
        name: "teleport",
        expect: &[Rule::Geometry],
        apply: teleport,
    },
    Mutation {
        name: "border-block",
        expect: &[Rule::Border, Rule::Geometry],
        apply: border_block,
    },
    Mutation {
        name: "stretch-duration",
        expect: &[Rule::Duration, Rule::Horizon],
        apply: stretch_duration,
    },
    Mutation {
        name: "squeeze-duration",
        expect: &[Rule::Duration],
        apply: squeeze_duration,
    },
    Mutation {
        name: "wrong-level",
        expect: &[Rule::Support, Rule::Geometry, Rule::Flow],
        apply: wrong_level,
    },
    Mutation {
        name: "truncate-horizon",
        expect: &[Rule::Horizon],
        apply: truncate_horizon,
    },
    Mutation {
        name: "tamper-blocks",
        expect: &[Rule::HeightFlow, Rule::Gravity, Rule::Completion],
        apply: tamper_blocks,
    },
    Mutation {
        name: "deliver-as-pickup",
        expect: &[Rule::Geometry, Rule::Flow, Rule::HeightFlow],
        apply: deliver_as_pickup,
    },
    Mutation {
        name: "reverse-move",
        expect: &[Rule::Flow, Rule::Geometry],
        apply: reverse_move,
    },
];
