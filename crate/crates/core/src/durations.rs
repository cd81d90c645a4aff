//! Action types and their durations.
//!
//! Durations are given per action type as positive rationals and scaled to
//! integer timesteps by the least common multiple of their denominators.
//! `wait` always lasts exactly one scaled timestep and takes no part in the
//! scaling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use serde_json::{json, Value};
use thiserror::Error;

use crate::catalog::ActionTemplate;
use crate::instance::GridDims;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DurationError {
    #[error("invalid duration {0:?}: expected a positive rational \"p\" or \"p/q\"")]
    BadRational(String),
    #[error("unknown action type {0:?}")]
    UnknownType(String),
    #[error("wait duration is fixed at one timestep and cannot be configured")]
    WaitConfigured,
    #[error("missing duration for action type {0}")]
    Missing(ActionType),
    #[error("unknown duration mode {0:?}")]
    UnknownMode(String),
    #[error("malformed duration config: {0}")]
    Malformed(String),
    #[error("scaled durations overflow the supported integer width")]
    Overflow,
    #[error("unknown duration preset {0:?}")]
    UnknownPreset(String),
}

/// The seven action types. Ordering matches [`ActionType::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionType {
    Entry,
    Leave,
    MoveBlock,
    MoveEmpty,
    PickUp,
    Deliver,
    Wait,
}

impl ActionType {
    pub const ALL: [ActionType; 7] = [
        ActionType::Entry,
        ActionType::Leave,
        ActionType::MoveBlock,
        ActionType::MoveEmpty,
        ActionType::PickUp,
        ActionType::Deliver,
        ActionType::Wait,
    ];

    /// Types whose duration is user-configurable.
    pub const CONFIGURABLE: [ActionType; 6] = [
        ActionType::Entry,
        ActionType::Leave,
        ActionType::MoveBlock,
        ActionType::MoveEmpty,
        ActionType::PickUp,
        ActionType::Deliver,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionType::Entry => "entry",
            ActionType::Leave => "leave",
            ActionType::MoveBlock => "move_block",
            ActionType::MoveEmpty => "move_empty",
            ActionType::PickUp => "pick_up",
            ActionType::Deliver => "deliver",
            ActionType::Wait => "wait",
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionType {
    type Err = DurationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "entry" | "enter" => ActionType::Entry,
            "leave" => ActionType::Leave,
            "move_block" => ActionType::MoveBlock,
            "move_empty" => ActionType::MoveEmpty,
            "pick_up" => ActionType::PickUp,
            "deliver" => ActionType::Deliver,
            "wait" => ActionType::Wait,
            other => return Err(DurationError::UnknownType(other.to_string())),
        })
    }
}

/// A positive rational number of (unscaled) timesteps, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalDuration(Ratio<u64>);

impl RationalDuration {
    pub fn new(numer: u64, denom: u64) -> Option<Self> {
        (numer > 0 && denom > 0).then(|| RationalDuration(Ratio::new(numer, denom)))
    }

    pub fn integer(n: u64) -> Option<Self> {
        Self::new(n, 1)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }
}

impl fmt::Display for RationalDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for RationalDuration {
    type Err = DurationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DurationError::BadRational(s.to_string());
        let (n, d) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: u64 = n.parse().map_err(|_| bad())?;
        let d: u64 = d.parse().map_err(|_| bad())?;
        RationalDuration::new(n, d).ok_or_else(bad)
    }
}

/// How action durations are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DurationSpec {
    /// One constant per configurable action type.
    PerType(BTreeMap<ActionType, RationalDuration>),
    /// Durations growing with the agent's level at the end of the action.
    HeightLinear,
}

impl DurationSpec {
    pub fn per_type_integers(values: [u64; 6]) -> Self {
        let map = ActionType::CONFIGURABLE
            .iter()
            .zip(values)
            .map(|(&t, v)| (t, RationalDuration::integer(v).expect("positive duration")))
            .collect();
        DurationSpec::PerType(map)
    }

    /// Every action lasts one timestep.
    pub fn unit() -> Self {
        Self::per_type_integers([1; 6])
    }

    /// Durations in [`ActionType::CONFIGURABLE`] order: entry, leave,
    /// move_block, move_empty, pick_up, deliver.
    pub fn one_two() -> Self {
        Self::per_type_integers([2, 1, 1, 1, 2, 2])
    }

    pub fn one_two_three() -> Self {
        Self::per_type_integers([3, 2, 3, 1, 3, 3])
    }

    /// TERMES robot measurements at ten seconds per timestep.
    pub fn termes() -> Self {
        Self::per_type_integers([3, 3, 3, 2, 2, 3])
    }

    pub fn preset(name: &str) -> Result<Self, DurationError> {
        Ok(match name {
            "unit" | "1" => Self::unit(),
            "1-2" => Self::one_two(),
            "1-2-3" => Self::one_two_three(),
            "termes" | "TERMES" => Self::termes(),
            "height_linear" => DurationSpec::HeightLinear,
            other => return Err(DurationError::UnknownPreset(other.to_string())),
        })
    }

    pub fn from_json_value(value: &Value) -> Result<Self, DurationError> {
        let malformed = |m: &str| DurationError::Malformed(m.to_string());
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("expected an object"))?;
        let mode = obj
            .get("mode")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("missing \"mode\""))?;
        match mode {
            "height_linear" => Ok(DurationSpec::HeightLinear),
            "per_type" => {
                let entries = obj
                    .get("durations")
                    .and_then(Value::as_object)
                    .ok_or_else(|| malformed("missing \"durations\" object"))?;
                let mut map = BTreeMap::new();
                for (key, v) in entries {
                    let ty: ActionType = key.parse()?;
                    if ty == ActionType::Wait {
                        return Err(DurationError::WaitConfigured);
                    }
                    let d = match v {
                        Value::String(s) => s.parse()?,
                        Value::Number(n) => n
                            .as_u64()
                            .and_then(RationalDuration::integer)
                            .ok_or_else(|| DurationError::BadRational(n.to_string()))?,
                        other => return Err(DurationError::BadRational(other.to_string())),
                    };
                    map.insert(ty, d);
                }
                for ty in ActionType::CONFIGURABLE {
                    if !map.contains_key(&ty) {
                        return Err(DurationError::Missing(ty));
                    }
                }
                Ok(DurationSpec::PerType(map))
            }
            other => Err(DurationError::UnknownMode(other.to_string())),
        }
    }

    pub fn parse_json(text: &str) -> Result<Self, DurationError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| DurationError::Malformed(e.to_string()))?;
        Self::from_json_value(&value)
    }

    pub fn to_json_value(&self) -> Value {
        match self {
            DurationSpec::HeightLinear => json!({ "mode": "height_linear" }),
            DurationSpec::PerType(map) => {
                let durations: serde_json::Map<String, Value> = map
                    .iter()
                    .map(|(t, d)| (t.name().to_string(), Value::String(d.to_string())))
                    .collect();
                json!({ "mode": "per_type", "durations": durations })
            }
        }
    }

    /// Short label used in tables, e.g. `entry=3 leave=3 ...` or `height_linear`.
    pub fn label(&self) -> String {
        match self {
            DurationSpec::HeightLinear => "height_linear".to_string(),
            DurationSpec::PerType(map) => map
                .iter()
                .map(|(t, d)| format!("{}={}", t.name(), d))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    pub fn scale(&self) -> Result<ScaledDurations, DurationError> {
        scale(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScaledMode {
    /// Scaled constant per action type, indexed by [`ActionType::index`].
    PerType([u32; 7]),
    HeightLinear,
}

/// Integer durations `f_d` after scaling by `multiple`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScaledDurations {
    pub multiple: u64,
    pub mode: ScaledMode,
}

/// Scales rational durations to integer timesteps.
pub fn scale(spec: &DurationSpec) -> Result<ScaledDurations, DurationError> {
    match spec {
        DurationSpec::HeightLinear => Ok(ScaledDurations {
            multiple: 1,
            mode: ScaledMode::HeightLinear,
        }),
        DurationSpec::PerType(map) => {
            let mut multiple: u64 = 1;
            for ty in ActionType::CONFIGURABLE {
                let d = map.get(&ty).ok_or(DurationError::Missing(ty))?;
                let g = multiple.gcd(&d.denom());
                multiple = (multiple / g)
                    .checked_mul(d.denom())
                    .ok_or(DurationError::Overflow)?;
            }
            let mut table = [1u32; 7];
            for ty in ActionType::CONFIGURABLE {
                let d = map[&ty];
                let scaled = d
                    .numer()
                    .checked_mul(multiple / d.denom())
                    .ok_or(DurationError::Overflow)?;
                table[ty.index()] = u32::try_from(scaled).map_err(|_| DurationError::Overflow)?;
            }
            Ok(ScaledDurations {
                multiple,
                mode: ScaledMode::PerType(table),
            })
        }
    }
}

impl ScaledDurations {
    pub fn unit() -> Self {
        ScaledDurations {
            multiple: 1,
            mode: ScaledMode::PerType([1; 7]),
        }
    }

    /// Duration of an action of type `ty` whose end position sits at level `end_z`
    /// (for pick-up and deliver: the level of the affected block).
    pub fn duration(&self, ty: ActionType, end_z: u8) -> u32 {
        match self.mode {
            ScaledMode::PerType(table) => table[ty.index()],
            ScaledMode::HeightLinear => {
                let z = end_z as u32;
                match ty {
                    ActionType::Entry | ActionType::Leave => 3,
                    ActionType::MoveEmpty => 2 + z,
                    ActionType::MoveBlock => 3 + z,
                    ActionType::PickUp => 2 + 2 * z,
                    ActionType::Deliver => 3 + 2 * z,
                    ActionType::Wait => 1,
                }
            }
        }
    }

    pub fn duration_of(&self, template: &ActionTemplate) -> u32 {
        let end_z = template.end.cell().map_or(0, |c| c.z);
        self.duration(template.action_type(), end_z)
    }

    /// Levels an action of type `ty` can end at on a grid with `dims`.
    fn end_levels(ty: ActionType, dims: &GridDims) -> std::ops::Range<u8> {
        match ty {
            ActionType::Entry | ActionType::Leave => 0..1,
            ActionType::PickUp | ActionType::Deliver => 0..dims.z.saturating_sub(1),
            _ => 0..dims.z,
        }
    }

    /// Smallest and largest duration of a type over all its templates, or `None`
    /// when the grid admits no template of that type.
    pub fn duration_range(&self, ty: ActionType, dims: &GridDims) -> Option<(u32, u32)> {
        let mut levels = Self::end_levels(ty, dims).map(|z| self.duration(ty, z));
        let first = levels.next()?;
        Some(levels.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    pub fn min_duration(&self, ty: ActionType, dims: &GridDims) -> Option<u32> {
        self.duration_range(ty, dims).map(|r| r.0)
    }

    pub fn max_duration(&self, ty: ActionType, dims: &GridDims) -> Option<u32> {
        self.duration_range(ty, dims).map(|r| r.1)
    }

    /// Longest duration over every template type on this grid.
    pub fn global_max(&self, dims: &GridDims) -> u32 {
        ActionType::ALL
            .iter()
            .filter_map(|&t| self.max_duration(t, dims))
            .max()
            .unwrap_or(1)
    }

    pub fn is_unit(&self) -> bool {
        matches!(self.mode, ScaledMode::PerType(t) if t.iter().all(|&d| d == 1))
    }
}
