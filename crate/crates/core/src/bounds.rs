//! Makespan bounds and the duration-based makespan estimate.
//!
//! * `l_r`: every column built independently by agents that ignore collisions.
//! * `l_f`: makespan under a coarser duration mapping that never exceeds the target one.
//! * `u_f`: a unit-duration plan executed with target durations, agents
//!   re-synchronizing at every unit timestep.
//! * `u_c`: unit makespan times the longest action.
//! * `T_h = max(l_r, min(u_f, ceil(alpha * T_b)))` with `alpha` the mean of
//!   per-type average durations.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::catalog::{Catalog, MIN_HORIZON};
use crate::durations::{ActionType, ScaledDurations};
use crate::instance::{GridDims, Instance};
use crate::plan::Plan;
use crate::Time;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BoundsError {
    #[error("no {0} actions exist in the catalog, so their average duration is undefined")]
    EmptyType(ActionType),
    #[error("coarse mapping does not dominate: longest coarse {ty} lasts {coarse}, shortest target {ty} lasts {target}")]
    NotDominated {
        ty: ActionType,
        coarse: u32,
        target: u32,
    },
}

/// Exact rational `alpha`, written as `"p/q"` in files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Alpha(pub Ratio<u64>);

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let (n, q) = text.split_once('/').unwrap_or((&text, "1"));
        let n: u64 = n.trim().parse().map_err(serde::de::Error::custom)?;
        let q: u64 = q.trim().parse().map_err(serde::de::Error::custom)?;
        if q == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Alpha(Ratio::new(n, q)))
    }
}

/// All bounds known for one instance and duration mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct BoundReport {
    pub lr: Time,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lf: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tb: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Alpha>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub th: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uf: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uc: Option<Time>,
}

impl BoundReport {
    /// Lowest horizon worth trying: the largest known lower bound, at least 4.
    pub fn start_horizon(&self) -> Time {
        self.lr.max(self.lf.unwrap_or(0)).max(MIN_HORIZON)
    }
}

/// Every bound computable from the instance and, when given, an optimal
/// unit-duration plan.
pub fn bound_report(
    inst: &Instance,
    sd: &ScaledDurations,
    unit_plan: Option<&Plan>,
) -> Result<BoundReport, BoundsError> {
    let mut report = BoundReport {
        lr: lower_bound_lr(inst, sd),
        lf: None,
        tb: None,
        alpha: None,
        th: None,
        uf: None,
        uc: None,
    };
    let Some(unit) = unit_plan else {
        return Ok(report);
    };
    let dims = &inst.dims;
    let tb = unit.horizon;
    let uf = upper_bound_uf(unit, sd);
    // Leave starts at 2 and must end by T - 1, so every type fits once T >= max + 3.
    let horizon = uf.max(MIN_HORIZON).max(sd.global_max(dims) + 3);
    let cat = Catalog::build(inst, sd, horizon).expect("horizon is at least the minimum");
    let alpha = compute_alpha(&cat)?;
    report.tb = Some(tb);
    report.uf = Some(uf);
    report.uc = Some(upper_bound_uc(tb, sd, dims));
    report.lf = lower_bound_lf(tb, &ScaledDurations::unit(), sd, dims).ok();
    report.alpha = Some(Alpha(alpha));
    report.th = Some(estimate_th(report.lr, uf, alpha, tb));
    Ok(report)
}

/// Relaxation lower bound: the slowest column when every block gets its own
/// agent entering at the nearest border cell. Instances without blocks get
/// the minimum horizon 4.
pub fn lower_bound_lr(inst: &Instance, sd: &ScaledDurations) -> Time {
    let dims = &inst.dims;
    let min = |ty| sd.min_duration(ty, dims).unwrap_or(1);
    let entry = min(ActionType::Entry);
    let leave = min(ActionType::Leave);
    let deliver = min(ActionType::Deliver);
    let step = min(ActionType::MoveBlock).min(min(ActionType::MoveEmpty));
    let mut best = 0;
    for y in 0..dims.y {
        for x in 0..dims.x {
            let height = inst.target(x, y) as u32;
            if height == 0 {
                continue;
            }
            let s = inst.min_border_distance(x, y);
            best = best.max(entry + s * step + height * deliver + s * step + leave);
        }
    }
    if best == 0 {
        MIN_HORIZON
    } else {
        best
    }
}

/// Mean over the seven action types of each type's average catalog duration.
pub fn compute_alpha(cat: &Catalog) -> Result<Ratio<u64>, BoundsError> {
    let mut total = Ratio::from_integer(0u64);
    for ty in ActionType::ALL {
        let actions = cat.actions_of(ty);
        if actions.is_empty() {
            return Err(BoundsError::EmptyType(ty));
        }
        let sum: u64 = actions.iter().map(|a| a.duration() as u64).sum();
        total += Ratio::new(sum, actions.len() as u64);
    }
    Ok(total / Ratio::from_integer(ActionType::ALL.len() as u64))
}

/// `max(l_r, min(u_f, ceil(alpha * T_b)))`.
pub fn estimate_th(lr: Time, uf: Time, alpha: Ratio<u64>, tb: Time) -> Time {
    let scaled = (alpha * Ratio::from_integer(tb as u64)).ceil().to_integer();
    let scaled = Time::try_from(scaled).unwrap_or(Time::MAX);
    lr.max(uf.min(scaled))
}

/// Barrier times `u_0 = 0, u_1, .., u_{T'}`: unit step `n - 1` lasts as long as
/// the slowest action starting in it under the target durations, or one
/// timestep when nothing starts.
pub fn uf_schedule(unit_plan: &Plan, target: &ScaledDurations) -> Vec<Time> {
    let steps = unit_plan.horizon as usize;
    let mut width = vec![0u32; steps];
    for a in &unit_plan.actions {
        let w = &mut width[a.ts() as usize];
        *w = (*w).max(target.duration_of(&a.template));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0);
    let mut acc = 0;
    for w in width {
        acc += w.max(1);
        out.push(acc);
    }
    out
}

pub fn upper_bound_uf(unit_plan: &Plan, target: &ScaledDurations) -> Time {
    *uf_schedule(unit_plan, target)
        .last()
        .expect("schedule starts at 0")
}

/// Unit makespan times the longest action duration on this grid.
pub fn upper_bound_uc(t_prime: Time, sd: &ScaledDurations, dims: &GridDims) -> Time {
    t_prime * sd.global_max(dims)
}

/// The coarse mapping's makespan, after checking that no coarse action outlasts
/// the shortest target action of the same type.
pub fn lower_bound_lf(
    coarse_makespan: Time,
    coarse: &ScaledDurations,
    target: &ScaledDurations,
    dims: &GridDims,
) -> Result<Time, BoundsError> {
    for ty in ActionType::ALL {
        if let (Some(c), Some(t)) = (coarse.max_duration(ty, dims), target.min_duration(ty, dims)) {
            if c > t {
                return Err(BoundsError::NotDominated {
                    ty,
                    coarse: c,
                    target: t,
                });
            }
        }
    }
    Ok(coarse_makespan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ActionTemplate, Kind};
    use crate::durations::DurationSpec;
    use crate::instance::{parse_instance, Cell, Position};

    fn e1() -> Instance {
        parse_instance(
            r#"{"x": 3, "y": 3, "z": 2, "agent_limit": 1,
                "heightmap": [[0,0,0],[0,1,0],[0,0,0]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn relaxation_bound() {
        let inst = e1();
        // Unit: 1 + 0 + 1 + 0 + 1.
        assert_eq!(lower_bound_lr(&inst, &ScaledDurations::unit()), 3);
        assert_eq!(
            lower_bound_lr(&inst, &DurationSpec::termes().scale().unwrap()),
            9
        );
        let flat = parse_instance(
            r#"{"x": 3, "y": 3, "z": 1, "agent_limit": 1,
                "heightmap": [[0,0,0],[0,0,0],[0,0,0]]}"#,
        )
        .unwrap();
        assert_eq!(
            lower_bound_lr(&flat, &DurationSpec::termes().scale().unwrap()),
            4
        );
    }

    #[test]
    fn relaxation_bound_uses_border_distance() {
        // Centre column of a 5x5 grid: s = 1, height 2, 1-2-3 durations.
        let inst = parse_instance(
            r#"{"x": 5, "y": 5, "z": 3, "agent_limit": 1,
                "heightmap": [[0,0,0,0,0],[0,0,0,0,0],[0,0,2,0,0],[0,0,0,0,0],[0,0,0,0,0]]}"#,
        )
        .unwrap();
        let sd = DurationSpec::one_two_three().scale().unwrap();
        // entry 3 + 1*1 + 2*3 + 1*1 + leave 2
        assert_eq!(lower_bound_lr(&inst, &sd), 13);
    }

    #[test]
    fn alpha_values() {
        let inst = e1();
        let unit = Catalog::build(&inst, &ScaledDurations::unit(), 8).unwrap();
        assert_eq!(compute_alpha(&unit).unwrap(), Ratio::from_integer(1));
        let termes = Catalog::build(&inst, &DurationSpec::termes().scale().unwrap(), 12).unwrap();
        assert_eq!(compute_alpha(&termes).unwrap(), Ratio::new(17, 7));
        let one_two = Catalog::build(&inst, &DurationSpec::one_two().scale().unwrap(), 12).unwrap();
        // (2 + 1 + 1 + 1 + 2 + 2 + 1) / 7
        assert_eq!(compute_alpha(&one_two).unwrap(), Ratio::new(10, 7));
    }

    #[test]
    fn alpha_requires_every_type() {
        let flat = parse_instance(
            r#"{"x": 3, "y": 3, "z": 1, "agent_limit": 1,
                "heightmap": [[0,0,0],[0,0,0],[0,0,0]]}"#,
        )
        .unwrap();
        let cat = Catalog::build(&flat, &ScaledDurations::unit(), 6).unwrap();
        assert_eq!(
            compute_alpha(&cat),
            Err(BoundsError::EmptyType(ActionType::PickUp))
        );
    }

    #[test]
    fn estimate_clamps() {
        let one = Ratio::from_integer(1);
        assert_eq!(estimate_th(4, 20, one, 9), 9);
        assert_eq!(estimate_th(4, 20, Ratio::new(17, 7), 9), 20);
        assert_eq!(estimate_th(12, 30, Ratio::new(8, 7), 9), 12);
        // ceil(10/7 * 7) = 10 exactly, ceil(10/7 * 8) = ceil(11.43) = 12.
        assert_eq!(estimate_th(4, 40, Ratio::new(10, 7), 7), 10);
        assert_eq!(estimate_th(4, 40, Ratio::new(10, 7), 8), 12);
    }

    #[test]
    fn naive_upper_bound() {
        let dims = e1().dims;
        let termes = DurationSpec::termes().scale().unwrap();
        let one_two = DurationSpec::one_two().scale().unwrap();
        assert_eq!(upper_bound_uc(11, &termes, &dims), 33);
        assert_eq!(upper_bound_uc(11, &one_two, &dims), 22);
        assert_eq!(upper_bound_uc(11, &ScaledDurations::unit(), &dims), 11);
    }

    fn e1_unit_plan() -> Plan {
        let cell = |x, y, z| Position::Cell(Cell::new(x, y, z));
        let t = |ts, start, carry, kind, end| ActionTemplate {
            ts,
            start,
            carry,
            kind,
            end,
        };
        Plan::new(
            4,
            1,
            vec![
                t(0, Position::Start, true, Kind::Move, cell(0, 1, 0)).timed(1),
                t(1, cell(0, 1, 0), true, Kind::Deliver, cell(1, 1, 0)).timed(2),
                t(2, cell(0, 1, 0), false, Kind::Move, Position::End).timed(3),
            ],
            vec![],
        )
    }

    #[test]
    fn wait_padding_bound() {
        let plan = e1_unit_plan();
        assert_eq!(upper_bound_uf(&plan, &ScaledDurations::unit()), 4);
        let termes = DurationSpec::termes().scale().unwrap();
        assert_eq!(uf_schedule(&plan, &termes), vec![0, 3, 6, 9, 10]);
        assert_eq!(upper_bound_uf(&plan, &termes), 10);
        assert!(upper_bound_uf(&plan, &termes) <= upper_bound_uc(4, &termes, &e1().dims));
    }

    #[test]
    fn coarse_bound_dominance() {
        let dims = e1().dims;
        let unit = ScaledDurations::unit();
        let termes = DurationSpec::termes().scale().unwrap();
        assert_eq!(lower_bound_lf(7, &unit, &termes, &dims), Ok(7));
        assert_eq!(lower_bound_lf(10, &termes, &termes, &dims), Ok(10));
        let twos = DurationSpec::per_type_integers([2; 6]).scale().unwrap();
        let threes = DurationSpec::per_type_integers([3; 6]).scale().unwrap();
        assert_eq!(lower_bound_lf(8, &twos, &threes, &dims), Ok(8));
        assert!(matches!(
            lower_bound_lf(8, &termes, &unit, &dims),
            Err(BoundsError::NotDominated { .. })
        ));
    }

    #[test]
    fn report_serializes_alpha_as_rational() {
        let report = BoundReport {
            lr: 9,
            alpha: Some(Alpha(Ratio::new(17, 7))),
            ..Default::default()
        };
        let text = serde_json::to_string(&report).unwrap();
        assert_eq!(text, r#"{"lr":9,"alpha":"17/7"}"#);
        let back: BoundReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn report_with_a_duration_longer_than_uf() {
        let inst = e1();
        let at = Position::Cell(Cell::new(0, 1, 0));
        let tpl = |ts, start, carry, kind, end| ActionTemplate {
            ts,
            start,
            carry,
            kind,
            end,
        };
        let actions = vec![
            tpl(0, Position::Start, true, Kind::Move, at).timed(1),
            tpl(
                1,
                at,
                true,
                Kind::Deliver,
                Position::Cell(Cell::new(1, 1, 0)),
            )
            .timed(2),
            tpl(2, at, false, Kind::Move, Position::End).timed(3),
        ];
        let unit = Plan::new(4, 1, actions, vec![]);
        let slow_pick = DurationSpec::per_type_integers([1, 1, 1, 1, 10, 1])
            .scale()
            .unwrap();
        let report = bound_report(&inst, &slow_pick, Some(&unit)).unwrap();
        assert_eq!(report.uf, Some(4));
        assert_eq!(report.alpha, Some(Alpha(Ratio::new(16, 7))));
        assert_eq!(report.th, Some(4));
    }
}
