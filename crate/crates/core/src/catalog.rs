//! Time-expanded action sets for a fixed horizon.
//!
//! Templates are enumerated with the published start-time windows, then
//! materialized with their end time `t_e = t_s + f_d`. Anything that would end
//! after `T - 1` is dropped since it could never be part of a plan.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::durations::{ActionType, ScaledDurations};
use crate::instance::{border_cells, Cell, GridDims, Instance, Position};
use crate::Time;

/// Smallest horizon that admits an entry followed by a leave.
pub const MIN_HORIZON: Time = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("horizon {0} is below the minimum of {MIN_HORIZON}")]
    HorizonTooShort(Time),
}

/// Action type distinguisher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Move,
    PickUp,
    Deliver,
}

impl Kind {
    pub fn letter(self) -> char {
        match self {
            Kind::Move => 'M',
            Kind::PickUp => 'P',
            Kind::Deliver => 'D',
        }
    }

    pub fn from_letter(c: &str) -> Option<Self> {
        match c {
            "M" => Some(Kind::Move),
            "P" => Some(Kind::PickUp),
            "D" => Some(Kind::Deliver),
            _ => None,
        }
    }
}

/// An action without its end time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionTemplate {
    pub ts: Time,
    pub start: Position,
    /// Whether the agent carries a block when the action starts.
    pub carry: bool,
    pub kind: Kind,
    /// Agent position afterwards, or the affected block for pick-up/deliver.
    pub end: Position,
}

impl ActionTemplate {
    pub fn action_type(&self) -> ActionType {
        match (self.start, self.end, self.kind) {
            (Position::Start, _, _) => ActionType::Entry,
            (_, Position::End, _) => ActionType::Leave,
            (_, _, Kind::PickUp) => ActionType::PickUp,
            (_, _, Kind::Deliver) => ActionType::Deliver,
            (s, e, Kind::Move) if s == e => ActionType::Wait,
            _ if self.carry => ActionType::MoveBlock,
            _ => ActionType::MoveEmpty,
        }
    }

    /// Where the agent stands once the action is over.
    pub fn agent_after(&self) -> Position {
        match self.kind {
            Kind::Move => self.end,
            Kind::PickUp | Kind::Deliver => self.start,
        }
    }

    pub fn carry_after(&self) -> bool {
        match self.kind {
            Kind::Move => self.carry,
            Kind::PickUp => true,
            Kind::Deliver => false,
        }
    }

    pub fn timed(self, te: Time) -> Action {
        Action { template: self, te }
    }
}

/// Grid column `(x, y)`.
pub type Column = (u8, u8);

/// A timed action occupying `[ts, te)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub template: ActionTemplate,
    pub te: Time,
}

impl Action {
    pub fn ts(&self) -> Time {
        self.template.ts
    }

    pub fn duration(&self) -> Time {
        self.te - self.template.ts
    }

    pub fn action_type(&self) -> ActionType {
        self.template.action_type()
    }

    pub fn is_active(&self, t: Time) -> bool {
        self.template.ts <= t && t < self.te
    }

    /// On-grid columns reserved for the whole execution interval; the second
    /// entry is `None` when start and end share a column or one is off-grid.
    pub fn exclusion_columns(&self) -> (Option<Column>, Option<Column>) {
        let a = self.template.start.column();
        let b = self.template.end.column();
        match (a, b) {
            (Some(a), Some(b)) if a == b => (Some(a), None),
            (None, b) => (b, None),
            (a, b) => (a, b),
        }
    }

    /// Column height change caused by this action: `(column, from, to)`
    /// taking effect during timestep `te - 1`.
    pub fn height_change(&self) -> Option<((u8, u8), u8, u8)> {
        let cell = self.template.end.cell()?;
        match self.template.kind {
            Kind::PickUp => Some((cell.column(), cell.z + 1, cell.z)),
            Kind::Deliver => Some((cell.column(), cell.z, cell.z + 1)),
            Kind::Move => None,
        }
    }
}

/// Height transition of one column during one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockAction {
    pub t: Time,
    pub x: u8,
    pub y: u8,
    pub z: u8,
    pub z2: u8,
}

/// Un-timed templates grouped by action type.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub horizon: Time,
    pub dims: GridDims,
    pub by_type: [Vec<ActionTemplate>; 7],
}

type IndexKey = (Time, Cell, bool, Kind);

/// Materialized actions and block-actions for one horizon, with lookup indexes.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub horizon: Time,
    pub dims: GridDims,
    actions: Vec<Action>,
    type_ranges: [std::ops::Range<usize>; 7],
    template_counts: [usize; 7],
    blocks: Vec<BlockAction>,
    block_ids: HashMap<BlockAction, u32>,
    by_start: HashMap<IndexKey, Vec<u32>>,
    by_end: HashMap<IndexKey, Vec<u32>>,
    by_finish: HashMap<IndexKey, Vec<u32>>,
}

/// Enumerates every action template for horizon `horizon`.
pub fn enumerate_templates(inst: &Instance, horizon: Time) -> Result<TemplateSet, CatalogError> {
    if horizon < MIN_HORIZON {
        return Err(CatalogError::HorizonTooShort(horizon));
    }
    let dims = inst.dims;
    let t = horizon;
    let border = border_cells(&dims);
    let mut by_type: [Vec<ActionTemplate>; 7] = Default::default();
    let push = |by_type: &mut [Vec<ActionTemplate>; 7], tpl: ActionTemplate| {
        by_type[tpl.action_type().index()].push(tpl);
    };

    for ts in 0..=t - 4 {
        for carry in [false, true] {
            for &b in &border {
                push(
                    &mut by_type,
                    ActionTemplate {
                        ts,
                        start: Position::Start,
                        carry,
                        kind: Kind::Move,
                        end: b.into(),
                    },
                );
            }
        }
    }

    let cells: Vec<Cell> = dims.cells().collect();
    for ts in 1..=t - 3 {
        for &c in &cells {
            for (nx, ny) in dims.neighbors(c.x, c.y) {
                let lo = c.z.saturating_sub(1);
                let hi = (c.z + 1).min(dims.z - 1);
                for nz in lo..=hi {
                    for carry in [false, true] {
                        push(
                            &mut by_type,
                            ActionTemplate {
                                ts,
                                start: c.into(),
                                carry,
                                kind: Kind::Move,
                                end: Cell::new(nx, ny, nz).into(),
                            },
                        );
                    }
                }
            }
            for carry in [false, true] {
                push(
                    &mut by_type,
                    ActionTemplate {
                        ts,
                        start: c.into(),
                        carry,
                        kind: Kind::Move,
                        end: c.into(),
                    },
                );
            }
            if c.z + 1 < dims.z {
                for (nx, ny) in dims.neighbors(c.x, c.y) {
                    let block = Cell::new(nx, ny, c.z);
                    push(
                        &mut by_type,
                        ActionTemplate {
                            ts,
                            start: c.into(),
                            carry: false,
                            kind: Kind::PickUp,
                            end: block.into(),
                        },
                    );
                    push(
                        &mut by_type,
                        ActionTemplate {
                            ts,
                            start: c.into(),
                            carry: true,
                            kind: Kind::Deliver,
                            end: block.into(),
                        },
                    );
                }
            }
        }
    }

    for ts in 2..=t - 2 {
        for carry in [false, true] {
            for &b in &border {
                push(
                    &mut by_type,
                    ActionTemplate {
                        ts,
                        start: b.into(),
                        carry,
                        kind: Kind::Move,
                        end: Position::End,
                    },
                );
            }
        }
    }

    Ok(TemplateSet {
        horizon,
        dims,
        by_type,
    })
}

/// All block-actions `(t, x, y, z, z')` with `z' ∈ {z-1, z, z+1}` inside the grid.
pub fn enumerate_block_actions(dims: &GridDims, horizon: Time) -> Vec<BlockAction> {
    let mut out = Vec::new();
    for t in 0..horizon {
        for y in 0..dims.y {
            for x in 0..dims.x {
                for z in 0..dims.z {
                    let lo = z.saturating_sub(1);
                    let hi = (z + 1).min(dims.z - 1);
                    for z2 in lo..=hi {
                        out.push(BlockAction { t, x, y, z, z2 });
                    }
                }
            }
        }
    }
    out
}

/// Assigns end times and drops actions that would end after `T - 1`.
pub fn materialize(templates: &TemplateSet, sd: &ScaledDurations) -> Catalog {
    let last = templates.horizon - 1;
    let mut actions = Vec::new();
    let mut type_ranges: [std::ops::Range<usize>; 7] = Default::default();
    let mut template_counts = [0usize; 7];
    for ty in ActionType::ALL {
        let begin = actions.len();
        let list = &templates.by_type[ty.index()];
        template_counts[ty.index()] = list.len();
        for tpl in list {
            let te = tpl.ts + sd.duration_of(tpl);
            if te <= last {
                actions.push(tpl.timed(te));
            }
        }
        type_ranges[ty.index()] = begin..actions.len();
    }
    let blocks = enumerate_block_actions(&templates.dims, templates.horizon);
    Catalog::from_parts(
        templates.horizon,
        templates.dims,
        actions,
        type_ranges,
        template_counts,
        blocks,
    )
}

impl Catalog {
    pub fn build(
        inst: &Instance,
        sd: &ScaledDurations,
        horizon: Time,
    ) -> Result<Self, CatalogError> {
        Ok(materialize(&enumerate_templates(inst, horizon)?, sd))
    }

    fn from_parts(
        horizon: Time,
        dims: GridDims,
        actions: Vec<Action>,
        type_ranges: [std::ops::Range<usize>; 7],
        template_counts: [usize; 7],
        blocks: Vec<BlockAction>,
    ) -> Self {
        let mut by_start: HashMap<IndexKey, Vec<u32>> = HashMap::new();
        let mut by_end: HashMap<IndexKey, Vec<u32>> = HashMap::new();
        let mut by_finish: HashMap<IndexKey, Vec<u32>> = HashMap::new();
        for (i, a) in actions.iter().enumerate() {
            let tpl = &a.template;
            let id = i as u32;
            if let Some(c) = tpl.start.cell() {
                by_start
                    .entry((tpl.ts, c, tpl.carry, tpl.kind))
                    .or_default()
                    .push(id);
                by_finish
                    .entry((a.te, c, tpl.carry, tpl.kind))
                    .or_default()
                    .push(id);
            }
            if let Some(c) = tpl.end.cell() {
                by_end
                    .entry((a.te, c, tpl.carry, tpl.kind))
                    .or_default()
                    .push(id);
            }
        }
        let block_ids = blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (*b, i as u32))
            .collect();
        Catalog {
            horizon,
            dims,
            actions,
            type_ranges,
            template_counts,
            blocks,
            block_ids,
            by_start,
            by_end,
            by_finish,
        }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, id: u32) -> &Action {
        &self.actions[id as usize]
    }

    pub fn actions_of(&self, ty: ActionType) -> &[Action] {
        &self.actions[self.type_ranges[ty.index()].clone()]
    }

    pub fn template_count(&self, ty: ActionType) -> usize {
        self.template_counts[ty.index()]
    }

    pub fn blocks(&self) -> &[BlockAction] {
        &self.blocks
    }

    pub fn block(&self, id: u32) -> &BlockAction {
        &self.blocks[id as usize]
    }

    pub fn block_id(&self, b: &BlockAction) -> Option<u32> {
        self.block_ids.get(b).copied()
    }

    /// Index of an action with exactly this template and end time.
    pub fn action_id(&self, a: &Action) -> Option<u32> {
        let tpl = &a.template;
        let list = match tpl.start.cell() {
            Some(c) => self.starting_at(tpl.ts, c, tpl.carry, tpl.kind),
            None => {
                let c = tpl.end.cell()?;
                self.ending_at(a.te, c, tpl.carry, tpl.kind)
            }
        };
        list.iter().copied().find(|&id| self.action(id) == a)
    }

    /// Actions `R_{t, *, x, y, z, c, k, *, *, *}`.
    pub fn starting_at(&self, t: Time, cell: Cell, carry: bool, kind: Kind) -> &[u32] {
        self.by_start
            .get(&(t, cell, carry, kind))
            .map_or(&[], Vec::as_slice)
    }

    /// Actions `R_{*, t, *, *, *, c, k, x, y, z}`.
    pub fn ending_at(&self, t: Time, cell: Cell, carry: bool, kind: Kind) -> &[u32] {
        self.by_end
            .get(&(t, cell, carry, kind))
            .map_or(&[], Vec::as_slice)
    }

    /// Actions `R_{*, t, x, y, z, c, k, *, *, *}`: finishing at `t` after starting at `cell`.
    pub fn finishing_from(&self, t: Time, cell: Cell, carry: bool, kind: Kind) -> &[u32] {
        self.by_finish
            .get(&(t, cell, carry, kind))
            .map_or(&[], Vec::as_slice)
    }

    /// Per-type template and action counts as a text table.
    pub fn counts_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "horizon T = {}", self.horizon);
        let _ = writeln!(out, "{:<12} {:>10} {:>10}", "type", "templates", "actions");
        for ty in ActionType::ALL {
            let _ = writeln!(
                out,
                "{:<12} {:>10} {:>10}",
                ty.name(),
                self.template_count(ty),
                self.actions_of(ty).len()
            );
        }
        let _ = writeln!(out, "{:<12} {:>10} {:>10}", "block", "", self.blocks.len());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::durations::DurationSpec;
    use crate::instance::parse_instance;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn e1() -> Instance {
        parse_instance(
            r#"{"x": 3, "y": 3, "z": 2, "agent_limit": 1,
                "heightmap": [[0,0,0],[0,1,0],[0,0,0]]}"#,
        )
        .unwrap()
    }

    fn e2() -> Instance {
        parse_instance(
            r#"{"x": 4, "y": 4, "z": 3, "agent_limit": 2,
                "heightmap": [[0,0,0,0],[0,2,0,0],[0,1,0,0],[0,0,0,0]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn rejects_short_horizon() {
        assert_eq!(
            enumerate_templates(&e1(), 3).unwrap_err(),
            CatalogError::HorizonTooShort(3)
        );
    }

    #[test]
    fn entry_and_leave_windows() {
        let set = enumerate_templates(&e1(), 4).unwrap();
        let entries = &set.by_type[ActionType::Entry.index()];
        assert_eq!(entries.len(), 16);
        assert!(entries.iter().all(|t| t.ts == 0));
        let leave_ts: HashSet<Time> = set.by_type[ActionType::Leave.index()]
            .iter()
            .map(|t| t.ts)
            .collect();
        assert_eq!(leave_ts, HashSet::from([2]));
    }

    #[test]
    fn pick_up_templates_are_empty_handed() {
        let set = enumerate_templates(&e2(), 7).unwrap();
        let picks = &set.by_type[ActionType::PickUp.index()];
        assert!(!picks.is_empty());
        assert!(picks.iter().all(|t| !t.carry && t.kind == Kind::PickUp));
        assert!(picks
            .iter()
            .all(|t| t.end.cell().unwrap().z + 1 < set.dims.z));
        let delivers = &set.by_type[ActionType::Deliver.index()];
        assert!(delivers.iter().all(|t| t.carry && t.kind == Kind::Deliver));
    }

    #[test]
    fn materialize_drops_late_actions() {
        let termes = DurationSpec::termes().scale().unwrap();
        let short = Catalog::build(&e1(), &termes, 4).unwrap();
        let deliver_at_1 = |cat: &Catalog| {
            cat.actions_of(ActionType::Deliver)
                .iter()
                .filter(|a| a.ts() == 1)
                .map(|a| a.te)
                .collect::<HashSet<_>>()
        };
        assert!(deliver_at_1(&short).is_empty());
        let long = Catalog::build(&e1(), &termes, 5).unwrap();
        assert_eq!(deliver_at_1(&long), HashSet::from([4]));

        let waits = long.actions_of(ActionType::Wait);
        let unit = Catalog::build(&e1(), &ScaledDurations::unit(), 5).unwrap();
        assert!(unit
            .actions_of(ActionType::Wait)
            .iter()
            .all(|a| a.te == a.ts() + 1));
        assert!(waits.iter().all(|a| a.te == a.ts() + 1));
    }

    #[test]
    fn unit_durations_keep_every_template() {
        for horizon in 4..9 {
            let cat = Catalog::build(&e2(), &ScaledDurations::unit(), horizon).unwrap();
            for ty in ActionType::ALL {
                assert_eq!(
                    cat.actions_of(ty).len(),
                    cat.template_count(ty),
                    "{ty} T={horizon}"
                );
            }
        }
    }

    #[test]
    fn block_action_counts() {
        let blocks = enumerate_block_actions(&e1().dims, 4);
        assert_eq!(blocks.len(), 144);
        let dims = e2().dims;
        let all = enumerate_block_actions(&dims, 2);
        assert!(all
            .iter()
            .filter(|b| b.z == 0)
            .all(|b| b.z2 == 0 || b.z2 == 1));
        assert!(all
            .iter()
            .filter(|b| b.z == dims.z - 1)
            .all(|b| b.z2 + 1 == b.z || b.z2 == b.z));
    }

    #[test]
    fn template_types_are_disjoint() {
        let set = enumerate_templates(&e2(), 6).unwrap();
        let mut seen = HashSet::new();
        for (i, list) in set.by_type.iter().enumerate() {
            for tpl in list {
                assert_eq!(tpl.action_type().index(), i);
                assert!(seen.insert(*tpl), "duplicate template {tpl:?}");
            }
        }
    }

    #[test]
    fn catalog_grows_linearly_in_horizon() {
        let sd = DurationSpec::termes().scale().unwrap();
        let size = |t| Catalog::build(&e2(), &sd, t).unwrap().actions().len();
        let (a, b, c) = (size(12), size(13), size(14));
        assert_eq!(c - b, b - a);
    }

    fn brute_force_indexes(cat: &Catalog) {
        let dims = cat.dims;
        for t in 0..cat.horizon {
            for cell in dims.cells() {
                for carry in [false, true] {
                    for kind in [Kind::Move, Kind::PickUp, Kind::Deliver] {
                        let filter = |pred: &dyn Fn(&Action) -> bool| -> Vec<u32> {
                            (0..cat.actions().len() as u32)
                                .filter(|&i| pred(cat.action(i)))
                                .collect()
                        };
                        let start = filter(&|a| {
                            a.ts() == t
                                && a.template.start == Position::Cell(cell)
                                && a.template.carry == carry
                                && a.template.kind == kind
                        });
                        let end = filter(&|a| {
                            a.te == t
                                && a.template.end == Position::Cell(cell)
                                && a.template.carry == carry
                                && a.template.kind == kind
                        });
                        let finish = filter(&|a| {
                            a.te == t
                                && a.template.start == Position::Cell(cell)
                                && a.template.carry == carry
                                && a.template.kind == kind
                        });
                        assert_eq!(cat.starting_at(t, cell, carry, kind), start.as_slice());
                        assert_eq!(cat.ending_at(t, cell, carry, kind), end.as_slice());
                        assert_eq!(cat.finishing_from(t, cell, carry, kind), finish.as_slice());
                    }
                }
            }
        }
    }

    #[test]
    fn indexes_match_set_filtering() {
        brute_force_indexes(&Catalog::build(&e1(), &ScaledDurations::unit(), 5).unwrap());
        brute_force_indexes(
            &Catalog::build(&e1(), &DurationSpec::termes().scale().unwrap(), 7).unwrap(),
        );
    }

    #[test]
    fn action_lookup_round_trips() {
        let cat = Catalog::build(&e2(), &DurationSpec::one_two().scale().unwrap(), 8).unwrap();
        for (i, a) in cat.actions().iter().enumerate() {
            assert_eq!(cat.action_id(a), Some(i as u32));
        }
        for (i, b) in cat.blocks().iter().enumerate() {
            assert_eq!(cat.block_id(b), Some(i as u32));
        }
    }

    #[test]
    fn height_linear_catalog_matches_formula() {
        let sd = DurationSpec::HeightLinear.scale().unwrap();
        let cat = Catalog::build(&e2(), &sd, 14).unwrap();
        for a in cat.actions() {
            let z = a.template.end.cell().map_or(0, |c| c.z) as u32;
            let expect = match a.action_type() {
                ActionType::Entry | ActionType::Leave => 3,
                ActionType::MoveEmpty => 2 + z,
                ActionType::MoveBlock => 3 + z,
                ActionType::PickUp => 2 + 2 * z,
                ActionType::Deliver => 3 + 2 * z,
                ActionType::Wait => 1,
            };
            assert_eq!(a.duration(), expect, "{a:?}");
        }
    }

    proptest! {
        #[test]
        fn materialized_actions_respect_horizon(
            horizon in 4u32..12,
            durs in proptest::collection::vec(1u64..4, 6),
        ) {
            let arr = [durs[0], durs[1], durs[2], durs[3], durs[4], durs[5]];
            let sd = DurationSpec::per_type_integers(arr).scale().unwrap();
            let cat = Catalog::build(&e1(), &sd, horizon).unwrap();
            for a in cat.actions() {
                prop_assert!(a.duration() >= 1);
                prop_assert!(a.te < horizon);
                prop_assert_eq!(a.duration(), sd.duration_of(&a.template));
            }
        }
    }
}
