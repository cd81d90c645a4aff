//! The 0/1 integer program over a [`Catalog`].
//!
//! One binary per action (`r`) and per block-action (`h`). The objective is
//! the sum of action durations. Constraint families are labelled `c2`..`c14`
//! after the row groups they implement:
//!
//! | family | meaning |
//! |--------|---------|
//! | c2  | border columns stay empty |
//! | c3  | the world starts empty |
//! | c4  | the target structure stands at `T - 1` |
//! | c5  | column height carries over between timesteps |
//! | c6  | one height per column and timestep |
//! | c7, c8 | agent flow without / with a block |
//! | c9  | exclusion zone over start and end columns |
//! | c11 | agent cap |
//! | c12 | agents stand on top of their start column |
//! | c13, c14 | height decreases / increases tied to pick-up / deliver |
//!
//! Models are written in CPLEX LP format.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::catalog::{Action, BlockAction, Catalog, Kind};
use crate::instance::{border_cells, Cell, Instance, Position};
use crate::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    /// Action indicator, indexed into [`Catalog::actions`].
    R(u32),
    /// Block-action indicator, indexed into [`Catalog::blocks`].
    H(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C11,
    C12,
    C13,
    C14,
}

impl Family {
    pub const ALL: [Family; 12] = [
        Family::C2,
        Family::C3,
        Family::C4,
        Family::C5,
        Family::C6,
        Family::C7,
        Family::C8,
        Family::C9,
        Family::C11,
        Family::C12,
        Family::C13,
        Family::C14,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Family::C2 => "c2",
            Family::C3 => "c3",
            Family::C4 => "c4",
            Family::C5 => "c5",
            Family::C6 => "c6",
            Family::C7 => "c7",
            Family::C8 => "c8",
            Family::C9 => "c9",
            Family::C11 => "c11",
            Family::C12 => "c12",
            Family::C13 => "c13",
            Family::C14 => "c14",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Sense::Le => lhs <= rhs,
            Sense::Eq => lhs == rhs,
            Sense::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarRef, i64)>,
    pub sense: Sense,
    pub rhs: i64,
    pub family: Family,
}

impl LinearConstraint {
    fn new(family: Family, terms: Vec<(VarRef, i64)>, sense: Sense, rhs: i64) -> Self {
        let mut c = LinearConstraint {
            terms,
            sense,
            rhs,
            family,
        };
        c.canonicalize();
        c
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn canonicalize(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarRef, i64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0);
        self.terms = merged;
    }

    pub fn lhs(&self, value: impl Fn(VarRef) -> bool) -> i64 {
        self.terms
            .iter()
            .filter(|(v, _)| value(*v))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn is_satisfied(&self, value: impl Fn(VarRef) -> bool) -> bool {
        self.sense.holds(self.lhs(value), self.rhs)
    }
}

/// A violated row found when substituting an assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowViolation {
    pub row: usize,
    pub name: String,
    pub lhs: i64,
    pub sense: Sense,
    pub rhs: i64,
}

impl fmt::Display for RowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "row {} ({}): {} {} {} does not hold",
            self.row,
            self.name,
            self.lhs,
            self.sense.symbol(),
            self.rhs
        )
    }
}

/// Solver-agnostic MILP: minimize `Σ d_i r_i` subject to the constraint families.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub horizon: Time,
    pub num_actions: usize,
    pub num_blocks: usize,
    column_names: Vec<String>,
    pub objective: Vec<(VarRef, i64)>,
    pub constraints: Vec<LinearConstraint>,
}

pub fn action_var_name(a: &Action) -> String {
    let pos = |p: &Position| match p {
        Position::Start => "S_S_S".to_string(),
        Position::End => "E_E_E".to_string(),
        Position::Cell(c) => format!("{}_{}_{}", c.x, c.y, c.z),
    };
    format!(
        "r_{}_{}_{}_{}_{}_{}",
        a.ts(),
        a.te,
        pos(&a.template.start),
        a.template.carry as u8,
        a.template.kind.letter(),
        pos(&a.template.end)
    )
}

pub fn block_var_name(b: &BlockAction) -> String {
    format!("h_{}_{}_{}_{}_{}", b.t, b.x, b.y, b.z, b.z2)
}

struct Rows {
    rows: Vec<LinearConstraint>,
}

impl Rows {
    fn push(&mut self, family: Family, terms: Vec<(VarRef, i64)>, sense: Sense, rhs: i64) {
        self.rows
            .push(LinearConstraint::new(family, terms, sense, rhs));
    }
}

/// Builds every constraint family for the catalog's horizon.
pub fn build_model(inst: &Instance, cat: &Catalog) -> MilpModel {
    let dims = inst.dims;
    let horizon = cat.horizon;
    let h = |t: Time, x: u8, y: u8, z: u8, z2: u8| -> VarRef {
        VarRef::H(
            cat.block_id(&BlockAction { t, x, y, z, z2 })
                .expect("block-action exists"),
        )
    };
    let r_terms = |ids: &[u32], coef: i64| -> Vec<(VarRef, i64)> {
        ids.iter().map(|&i| (VarRef::R(i), coef)).collect()
    };
    let mut rows = Rows { rows: Vec::new() };

    // c2: border columns hold height zero at every timestep.
    for t in 0..horizon {
        for b in border_cells(&dims) {
            rows.push(
                Family::C2,
                vec![(h(t, b.x, b.y, b.z, b.z), 1)],
                Sense::Eq,
                1,
            );
        }
    }
    // c3 and c4.
    for y in 0..dims.y {
        for x in 0..dims.x {
            rows.push(Family::C3, vec![(h(0, x, y, 0, 0), 1)], Sense::Eq, 1);
        }
    }
    for y in 0..dims.y {
        for x in 0..dims.x {
            let zt = inst.target(x, y);
            rows.push(
                Family::C4,
                vec![(h(horizon - 1, x, y, zt, zt), 1)],
                Sense::Eq,
                1,
            );
        }
    }
    // c5: what a column ends timestep t at is what it starts t + 1 at.
    for t in 0..horizon - 1 {
        for cell in dims.cells() {
            let mut terms = Vec::new();
            for z0 in 0..dims.z {
                if z0.abs_diff(cell.z) <= 1 {
                    terms.push((h(t, cell.x, cell.y, z0, cell.z), 1));
                    terms.push((h(t + 1, cell.x, cell.y, cell.z, z0), -1));
                }
            }
            rows.push(Family::C5, terms, Sense::Eq, 0);
        }
    }
    // c6
    for t in 0..horizon {
        for y in 0..dims.y {
            for x in 0..dims.x {
                let mut terms = Vec::new();
                for z in 0..dims.z {
                    for z2 in 0..dims.z {
                        if z.abs_diff(z2) <= 1 {
                            terms.push((h(t, x, y, z, z2), 1));
                        }
                    }
                }
                rows.push(Family::C6, terms, Sense::Eq, 1);
            }
        }
    }
    // c7, c8: flow conservation for empty-handed and carrying agents.
    for t in 0..horizon {
        for cell in dims.cells() {
            let mut empty = r_terms(cat.ending_at(t, cell, false, Kind::Move), 1);
            empty.extend(r_terms(cat.finishing_from(t, cell, true, Kind::Deliver), 1));
            empty.extend(r_terms(cat.starting_at(t, cell, false, Kind::Move), -1));
            empty.extend(r_terms(cat.starting_at(t, cell, false, Kind::PickUp), -1));
            if !empty.is_empty() {
                rows.push(Family::C7, empty, Sense::Eq, 0);
            }
            let mut loaded = r_terms(cat.ending_at(t, cell, true, Kind::Move), 1);
            loaded.extend(r_terms(cat.finishing_from(t, cell, false, Kind::PickUp), 1));
            loaded.extend(r_terms(cat.starting_at(t, cell, true, Kind::Move), -1));
            loaded.extend(r_terms(cat.starting_at(t, cell, true, Kind::Deliver), -1));
            if !loaded.is_empty() {
                rows.push(Family::C8, loaded, Sense::Eq, 0);
            }
        }
    }
    // c9, c11, c12 are all sums over actions active at t.
    let columns = dims.columns();
    let mut exclusion: Vec<Vec<(VarRef, i64)>> = vec![Vec::new(); horizon as usize * columns];
    let mut active: Vec<Vec<(VarRef, i64)>> = vec![Vec::new(); horizon as usize];
    let cells: Vec<Cell> = dims.cells().collect();
    let cell_index = |c: Cell| c.z as usize * columns + dims.column_index(c.x, c.y);
    let mut support: Vec<Vec<(VarRef, i64)>> = vec![Vec::new(); horizon as usize * cells.len()];
    for (i, a) in cat.actions().iter().enumerate() {
        let v = VarRef::R(i as u32);
        let start = a.template.start.column();
        let end = a.template.end.column();
        for t in a.ts()..a.te {
            let row = t as usize * columns;
            if let Some((x, y)) = start {
                exclusion[row + dims.column_index(x, y)].push((v, 1));
            }
            if let Some((x, y)) = end {
                exclusion[row + dims.column_index(x, y)].push((v, 1));
            }
            if let (Some(s), Some(e)) = (start, end) {
                if s == e {
                    exclusion[row + dims.column_index(s.0, s.1)].push((v, -1));
                }
            }
            active[t as usize].push((v, 1));
            if let Some(c) = a.template.start.cell() {
                support[t as usize * cells.len() + cell_index(c)].push((v, -1));
            }
        }
    }
    for terms in exclusion.into_iter().filter(|t| !t.is_empty()) {
        rows.push(Family::C9, terms, Sense::Le, 1);
    }
    for terms in active {
        rows.push(Family::C11, terms, Sense::Le, inst.agent_limit as i64);
    }
    for t in 0..horizon {
        for &cell in &cells {
            let mut terms =
                std::mem::take(&mut support[t as usize * cells.len() + cell_index(cell)]);
            if terms.is_empty() {
                continue;
            }
            for z2 in 0..dims.z {
                if z2.abs_diff(cell.z) <= 1 {
                    terms.push((h(t, cell.x, cell.y, cell.z, z2), 1));
                }
            }
            rows.push(Family::C12, terms, Sense::Ge, 0);
        }
    }
    // c13, c14: a column shrinks by one exactly when a pick-up ends, grows when a deliver ends.
    for t in 0..horizon - 1 {
        for y in 0..dims.y {
            for x in 0..dims.x {
                for z in 0..dims.z - 1 {
                    let cell = Cell::new(x, y, z);
                    let mut down = vec![(h(t, x, y, z + 1, z), 1)];
                    down.extend(r_terms(cat.ending_at(t + 1, cell, false, Kind::PickUp), -1));
                    rows.push(Family::C13, down, Sense::Eq, 0);
                }
            }
        }
    }
    for t in 0..horizon - 1 {
        for y in 0..dims.y {
            for x in 0..dims.x {
                for z in 0..dims.z - 1 {
                    let cell = Cell::new(x, y, z);
                    let mut up = vec![(h(t, x, y, z, z + 1), 1)];
                    up.extend(r_terms(cat.ending_at(t + 1, cell, true, Kind::Deliver), -1));
                    rows.push(Family::C14, up, Sense::Eq, 0);
                }
            }
        }
    }

    let objective = cat
        .actions()
        .iter()
        .enumerate()
        .map(|(i, a)| (VarRef::R(i as u32), a.duration() as i64))
        .collect();
    let column_names = cat
        .actions()
        .iter()
        .map(action_var_name)
        .chain(cat.blocks().iter().map(block_var_name))
        .collect();
    MilpModel {
        horizon,
        num_actions: cat.actions().len(),
        num_blocks: cat.blocks().len(),
        column_names,
        objective,
        constraints: rows.rows,
    }
}

impl MilpModel {
    pub fn num_columns(&self) -> usize {
        self.num_actions + self.num_blocks
    }

    pub fn column(&self, v: VarRef) -> usize {
        match v {
            VarRef::R(i) => i as usize,
            VarRef::H(i) => self.num_actions + i as usize,
        }
    }

    pub fn var_ref(&self, column: usize) -> VarRef {
        if column < self.num_actions {
            VarRef::R(column as u32)
        } else {
            VarRef::H((column - self.num_actions) as u32)
        }
    }

    pub fn name(&self, v: VarRef) -> &str {
        &self.column_names[self.column(v)]
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Row names in export order: `<family>_<ordinal within family>`.
    pub fn row_names(&self) -> Vec<String> {
        let mut counters: HashMap<Family, usize> = HashMap::new();
        self.constraints
            .iter()
            .map(|c| {
                let n = counters.entry(c.family).or_default();
                let name = format!("{}_{}", c.family, n);
                *n += 1;
                name
            })
            .collect()
    }

    pub fn rows_in(&self, family: Family) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.family == family)
            .count()
    }

    pub fn objective_value(&self, value: impl Fn(VarRef) -> bool) -> i64 {
        self.objective
            .iter()
            .filter(|(v, _)| value(*v))
            .map(|(_, c)| c)
            .sum()
    }

    /// Rows violated by a 0/1 assignment given per column.
    pub fn check(&self, values: &[bool]) -> Vec<RowViolation> {
        let names = self.row_names();
        self.constraints
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let lhs = c.lhs(|v| values[self.column(v)]);
                (!c.sense.holds(lhs, c.rhs)).then(|| RowViolation {
                    row: i,
                    name: names[i].clone(),
                    lhs,
                    sense: c.sense,
                    rhs: c.rhs,
                })
            })
            .collect()
    }

    /// Column assignment selecting exactly the given actions and block-actions.
    /// Returns `None` if any of them is not in the catalog.
    pub fn assignment(
        &self,
        cat: &Catalog,
        actions: &[Action],
        blocks: &[BlockAction],
    ) -> Option<Vec<bool>> {
        let mut values = vec![false; self.num_columns()];
        for a in actions {
            values[self.column(VarRef::R(cat.action_id(a)?))] = true;
        }
        for b in blocks {
            values[self.column(VarRef::H(cat.block_id(b)?))] = true;
        }
        Some(values)
    }

    /// CPLEX LP text. Output depends only on the model, so repeated exports match byte for byte.
    pub fn to_lp(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "\\ MACC planning model, horizon T = {}", self.horizon);
        let _ = writeln!(
            out,
            "\\ {} action columns, {} block columns, {} rows",
            self.num_actions,
            self.num_blocks,
            self.constraints.len()
        );
        out.push_str("Minimize\n obj:");
        if self.objective.is_empty() {
            let _ = write!(out, " 0 {}", self.column_names[0]);
        }
        self.write_terms(&mut out, &self.objective);
        out.push_str("\nSubject To\n");
        for (name, c) in self.row_names().iter().zip(&self.constraints) {
            let _ = write!(out, " {name}:");
            if c.terms.is_empty() {
                let _ = write!(out, " 0 {}", self.column_names[0]);
            }
            self.write_terms(&mut out, &c.terms);
            let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
        }
        out.push_str("Binary\n");
        for chunk in self.column_names.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
        out.push_str("End\n");
        out
    }

    fn write_terms(&self, out: &mut String, terms: &[(VarRef, i64)]) {
        for (i, (v, c)) in terms.iter().enumerate() {
            if i > 0 && i % 6 == 0 {
                out.push_str("\n   ");
            }
            let sign = if *c < 0 { '-' } else { '+' };
            let _ = write!(out, " {} {} {}", sign, c.abs(), self.name(*v));
        }
    }

    pub fn write_lp(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_lp())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing section {0}")]
    MissingSection(&'static str),
}

/// A parsed LP row.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Contents of a CPLEX LP file restricted to what [`MilpModel::to_lp`] emits:
/// a linear objective, linear rows, and a binary section.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLp {
    pub minimize: bool,
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<LpRow>,
    pub binaries: Vec<String>,
}

impl ParsedLp {
    /// Distinct variables referenced anywhere in the file.
    pub fn columns(&self) -> std::collections::BTreeSet<&str> {
        self.objective
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(
                self.rows
                    .iter()
                    .flat_map(|r| r.terms.iter().map(|(n, _)| n.as_str())),
            )
            .chain(self.binaries.iter().map(String::as_str))
            .collect()
    }
}

#[derive(PartialEq)]
enum Section {
    Objective,
    Constraints,
    Binary,
    Bounds,
}

/// Reads LP text written by [`MilpModel::to_lp`].
pub fn parse_lp(text: &str) -> Result<ParsedLp, LpParseError> {
    let mut section = None;
    let mut minimize = true;
    let mut objective_text = String::new();
    let mut constraint_text = String::new();
    let mut binaries = Vec::new();
    let mut ended = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "minimize" | "minimise" | "min" => {
                section = Some(Section::Objective);
                continue;
            }
            "maximize" | "maximise" | "max" => {
                minimize = false;
                section = Some(Section::Objective);
                continue;
            }
            "subject to" | "st" | "s.t." | "such that" => {
                section = Some(Section::Constraints);
                continue;
            }
            "binary" | "binaries" | "bin" => {
                section = Some(Section::Binary);
                continue;
            }
            "bounds" => {
                section = Some(Section::Bounds);
                continue;
            }
            "end" => {
                ended = true;
                break;
            }
            _ => {}
        }
        match section {
            Some(Section::Objective) => {
                objective_text.push(' ');
                objective_text.push_str(line);
            }
            Some(Section::Constraints) => {
                constraint_text.push(' ');
                constraint_text.push_str(line);
                constraint_text.push('\n');
            }
            Some(Section::Binary) => binaries.extend(line.split_whitespace().map(String::from)),
            Some(Section::Bounds) => {}
            None => {
                return Err(LpParseError::Syntax {
                    line: lineno + 1,
                    msg: "content before the objective section".into(),
                })
            }
        }
    }
    if !ended {
        return Err(LpParseError::MissingSection("End"));
    }
    let objective_text = match objective_text.split_once(':') {
        Some((_, rest)) => rest.to_string(),
        None => objective_text,
    };
    let objective =
        parse_terms(&objective_text).map_err(|msg| LpParseError::Syntax { line: 0, msg })?;

    // Rows are "name: terms sense rhs"; a new row starts at a token ending with ':'.
    let mut rows = Vec::new();
    let tokens: Vec<&str> = constraint_text.split_whitespace().collect();
    let mut i = 0;
    while i < tokens.len() {
        let name = tokens[i]
            .strip_suffix(':')
            .ok_or_else(|| LpParseError::Syntax {
                line: 0,
                msg: format!("expected a row name, found {:?}", tokens[i]),
            })?;
        i += 1;
        let begin = i;
        while i < tokens.len() && !matches!(tokens[i], "<=" | ">=" | "=" | "<" | ">" | "=<" | "=>")
        {
            i += 1;
        }
        if i + 1 >= tokens.len() {
            return Err(LpParseError::Syntax {
                line: 0,
                msg: format!("row {name} has no sense and right-hand side"),
            });
        }
        let sense = match tokens[i] {
            "<=" | "<" | "=<" => Sense::Le,
            ">=" | ">" | "=>" => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs: f64 = tokens[i + 1].parse().map_err(|_| LpParseError::Syntax {
            line: 0,
            msg: format!("bad right-hand side {:?} in row {name}", tokens[i + 1]),
        })?;
        let terms = parse_terms(&tokens[begin..i].join(" "))
            .map_err(|msg| LpParseError::Syntax { line: 0, msg })?;
        rows.push(LpRow {
            name: name.to_string(),
            terms,
            sense,
            rhs,
        });
        i += 2;
    }
    Ok(ParsedLp {
        minimize,
        objective,
        rows,
        binaries,
    })
}

fn parse_terms(text: &str) -> Result<Vec<(String, f64)>, String> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in text.split_whitespace() {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    coef = Some(v);
                } else {
                    terms.push((tok.to_string(), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    if coef.is_some() {
        return Err(format!("dangling coefficient in {text:?}"));
    }
    Ok(terms)
}
