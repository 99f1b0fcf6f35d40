//! Typed, SI-unit representation of a water distribution network.

use crate::units::FlowUnits;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadlossFormula {
    HazenWilliams,
    DarcyWeisbach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkStatus {
    Open,
    Closed,
}

/// One additional demand category attached through `[DEMANDS]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandCategory {
    /// m³/s
    pub base_demand: f64,
    pub pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub id: String,
    /// m
    pub elevation: f64,
    /// m³/s, primary demand category.
    pub base_demand: f64,
    pub pattern: Option<String>,
    /// Further categories; the junction's total demand is the sum of all.
    pub extra_demands: Vec<DemandCategory>,
}

impl Junction {
    pub fn total_base_demand(&self) -> f64 {
        self.base_demand + self.extra_demands.iter().map(|c| c.base_demand).sum::<f64>()
    }

    /// All demand categories, primary first.
    pub fn categories(&self) -> impl Iterator<Item = (f64, Option<&str>)> {
        std::iter::once((self.base_demand, self.pattern.as_deref())).chain(
            self.extra_demands
                .iter()
                .map(|c| (c.base_demand, c.pattern.as_deref())),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub id: String,
    /// Total head, m.
    pub head: f64,
    pub pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tank {
    pub id: String,
    pub elevation: f64,
    pub init_level: f64,
    pub min_level: f64,
    pub max_level: f64,
    pub diameter: f64,
    /// m³
    pub min_volume: f64,
    pub volume_curve: Option<String>,
}

impl Tank {
    /// Tanks are frozen at their initial level in snapshot mode.
    pub fn fixed_head(&self) -> f64 {
        self.elevation + self.init_level
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipe {
    pub id: String,
    pub from: String,
    pub to: String,
    /// m
    pub length: f64,
    /// m
    pub diameter: f64,
    /// Hazen-Williams C (dimensionless) or Darcy-Weisbach ε (m).
    pub roughness: f64,
    /// Minor loss coefficient K (dimensionless).
    pub minor_loss: f64,
    pub status: LinkStatus,
    /// Parsed from a `CV` status. Carried through serialization only; the
    /// solver treats the pipe as an ordinary open pipe.
    pub check_valve: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pump {
    pub id: String,
    pub from: String,
    pub to: String,
    pub curve: String,
    /// Relative speed ω.
    pub speed: f64,
    pub pattern: Option<String>,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValveKind {
    Prv,
    Psv,
    Pbv,
    Fcv,
    Tcv,
    Gpv,
}

impl ValveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValveKind::Prv => "PRV",
            ValveKind::Psv => "PSV",
            ValveKind::Pbv => "PBV",
            ValveKind::Fcv => "FCV",
            ValveKind::Tcv => "TCV",
            ValveKind::Gpv => "GPV",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "PRV" => ValveKind::Prv,
            "PSV" => ValveKind::Psv,
            "PBV" => ValveKind::Pbv,
            "FCV" => ValveKind::Fcv,
            "TCV" => ValveKind::Tcv,
            "GPV" => ValveKind::Gpv,
            _ => return None,
        })
    }
}

/// Valve setting: pressure (m) for PRV/PSV/PBV, flow (m³/s) for FCV,
/// loss coefficient for TCV, a curve id for GPV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValveSetting {
    Value(f64),
    Curve(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valve {
    pub id: String,
    pub from: String,
    pub to: String,
    pub diameter: f64,
    pub kind: ValveKind,
    pub setting: ValveSetting,
    pub minor_loss: f64,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Options {
    pub flow_units: FlowUnits,
    pub headloss: HeadlossFormula,
    /// Pattern applied to junctions that name none.
    pub default_pattern: Option<String>,
    pub demand_multiplier: f64,
    /// Kinematic viscosity relative to water at 20 °C.
    pub viscosity: f64,
    /// Duration of one pattern period, s.
    pub pattern_timestep: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            flow_units: FlowUnits::Gpm,
            headloss: HeadlossFormula::HazenWilliams,
            default_pattern: None,
            demand_multiplier: 1.0,
            viscosity: 1.0,
            pattern_timestep: 3600.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Junction,
    Reservoir,
    Tank,
}

impl NodeKind {
    pub fn is_fixed_head(self) -> bool {
        !matches!(self, NodeKind::Junction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Pipe,
    Pump,
    Valve,
}

/// Borrowed view of a link regardless of its kind.
#[derive(Debug, Clone, Copy)]
pub struct LinkRef<'a> {
    pub kind: LinkKind,
    /// Index within the kind-specific list.
    pub index: usize,
    pub id: &'a str,
    pub from: &'a str,
    pub to: &'a str,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NetworkModel {
    pub title: Vec<String>,
    pub junctions: Vec<Junction>,
    pub reservoirs: Vec<Reservoir>,
    pub tanks: Vec<Tank>,
    pub pipes: Vec<Pipe>,
    pub pumps: Vec<Pump>,
    pub valves: Vec<Valve>,
    pub patterns: BTreeMap<String, Vec<f64>>,
    /// Points as (x, y). Curves referenced by pumps are stored in SI
    /// (m³/s, m); any other curve keeps the values of the file.
    pub curves: BTreeMap<String, Vec<(f64, f64)>>,
    pub coordinates: BTreeMap<String, (f64, f64)>,
    pub options: Options,
    /// Non-fatal findings of the parser (skipped sections, ignored keys).
    pub warnings: Vec<String>,
}

impl NetworkModel {
    pub fn node_count(&self) -> usize {
        self.junctions.len() + self.reservoirs.len() + self.tanks.len()
    }

    pub fn link_count(&self) -> usize {
        self.pipes.len() + self.pumps.len() + self.valves.len()
    }

    pub fn fixed_head_count(&self) -> usize {
        self.reservoirs.len() + self.tanks.len()
    }

    /// Node ids in canonical order: junctions, reservoirs, tanks.
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.junctions
            .iter()
            .map(|j| j.id.as_str())
            .chain(self.reservoirs.iter().map(|r| r.id.as_str()))
            .chain(self.tanks.iter().map(|t| t.id.as_str()))
    }

    pub fn node_kinds(&self) -> Vec<NodeKind> {
        let mut kinds = vec![NodeKind::Junction; self.junctions.len()];
        kinds.extend(std::iter::repeat_n(NodeKind::Reservoir, self.reservoirs.len()));
        kinds.extend(std::iter::repeat_n(NodeKind::Tank, self.tanks.len()));
        kinds
    }

    /// Map from node id to canonical index. Duplicate ids keep the first.
    pub fn node_index(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::with_capacity(self.node_count());
        for (i, id) in self.node_ids().enumerate() {
            map.entry(id).or_insert(i);
        }
        map
    }

    /// Elevation of every node in canonical order. Reservoirs report their
    /// total head, so their pressure head is zero at base conditions.
    pub fn node_elevations(&self) -> Vec<f64> {
        self.junctions
            .iter()
            .map(|j| j.elevation)
            .chain(self.reservoirs.iter().map(|r| r.head))
            .chain(self.tanks.iter().map(|t| t.elevation))
            .collect()
    }

    /// Links in canonical order: pipes, pumps, valves.
    pub fn links(&self) -> impl Iterator<Item = LinkRef<'_>> {
        let pipes = self.pipes.iter().enumerate().map(|(i, p)| LinkRef {
            kind: LinkKind::Pipe,
            index: i,
            id: &p.id,
            from: &p.from,
            to: &p.to,
            status: p.status,
        });
        let pumps = self.pumps.iter().enumerate().map(|(i, p)| LinkRef {
            kind: LinkKind::Pump,
            index: i,
            id: &p.id,
            from: &p.from,
            to: &p.to,
            status: p.status,
        });
        let valves = self.valves.iter().enumerate().map(|(i, v)| LinkRef {
            kind: LinkKind::Valve,
            index: i,
            id: &v.id,
            from: &v.from,
            to: &v.to,
            status: v.status,
        });
        pipes.chain(pumps).chain(valves)
    }

    /// Pattern a junction category follows, falling back to the default.
    pub fn resolve_pattern<'a>(&'a self, name: Option<&'a str>) -> Option<&'a [f64]> {
        let name = name.or(self.options.default_pattern.as_deref())?;
        self.patterns.get(name).map(Vec::as_slice)
    }

    /// First structural difference between two models, comparing numbers
    /// with the given relative tolerance. Parser warnings are ignored.
    pub fn difference(&self, other: &NetworkModel, rel_tol: f64) -> Option<String> {
        let close = |a: f64, b: f64| {
            a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
        };
        macro_rules! check {
            ($cond:expr, $($msg:tt)*) => {
                if !$cond {
                    return Some(format!($($msg)*));
                }
            };
        }
        check!(self.title == other.title, "title differs");
        check!(self.options.flow_units == other.options.flow_units, "flow units differ");
        check!(self.options.headloss == other.options.headloss, "headloss formula differs");
        check!(
            self.options.default_pattern == other.options.default_pattern,
            "default pattern differs"
        );
        check!(
            close(self.options.demand_multiplier, other.options.demand_multiplier)
                && close(self.options.viscosity, other.options.viscosity)
                && close(self.options.pattern_timestep, other.options.pattern_timestep),
            "numeric options differ"
        );
        check!(self.junctions.len() == other.junctions.len(), "junction count differs");
        for (a, b) in self.junctions.iter().zip(&other.junctions) {
            check!(
                a.id == b.id
                    && close(a.elevation, b.elevation)
                    && close(a.base_demand, b.base_demand)
                    && a.pattern == b.pattern
                    && a.extra_demands.len() == b.extra_demands.len()
                    && a.extra_demands.iter().zip(&b.extra_demands).all(|(x, y)| {
                        close(x.base_demand, y.base_demand) && x.pattern == y.pattern
                    }),
                "junction {} differs",
                a.id
            );
        }
        check!(self.reservoirs.len() == other.reservoirs.len(), "reservoir count differs");
        for (a, b) in self.reservoirs.iter().zip(&other.reservoirs) {
            check!(
                a.id == b.id && close(a.head, b.head) && a.pattern == b.pattern,
                "reservoir {} differs",
                a.id
            );
        }
        check!(self.tanks.len() == other.tanks.len(), "tank count differs");
        for (a, b) in self.tanks.iter().zip(&other.tanks) {
            check!(
                a.id == b.id
                    && close(a.elevation, b.elevation)
                    && close(a.init_level, b.init_level)
                    && close(a.min_level, b.min_level)
                    && close(a.max_level, b.max_level)
                    && close(a.diameter, b.diameter)
                    && close(a.min_volume, b.min_volume)
                    && a.volume_curve == b.volume_curve,
                "tank {} differs",
                a.id
            );
        }
        check!(self.pipes.len() == other.pipes.len(), "pipe count differs");
        for (a, b) in self.pipes.iter().zip(&other.pipes) {
            check!(
                a.id == b.id
                    && a.from == b.from
                    && a.to == b.to
                    && close(a.length, b.length)
                    && close(a.diameter, b.diameter)
                    && close(a.roughness, b.roughness)
                    && close(a.minor_loss, b.minor_loss)
                    && a.status == b.status
                    && a.check_valve == b.check_valve,
                "pipe {} differs",
                a.id
            );
        }
        check!(self.pumps.len() == other.pumps.len(), "pump count differs");
        for (a, b) in self.pumps.iter().zip(&other.pumps) {
            check!(
                a.id == b.id
                    && a.from == b.from
                    && a.to == b.to
                    && a.curve == b.curve
                    && close(a.speed, b.speed)
                    && a.pattern == b.pattern
                    && a.status == b.status,
                "pump {} differs",
                a.id
            );
        }
        check!(self.valves.len() == other.valves.len(), "valve count differs");
        for (a, b) in self.valves.iter().zip(&other.valves) {
            let same_setting = match (&a.setting, &b.setting) {
                (ValveSetting::Value(x), ValveSetting::Value(y)) => close(*x, *y),
                (x, y) => x == y,
            };
            check!(
                a.id == b.id
                    && a.from == b.from
                    && a.to == b.to
                    && close(a.diameter, b.diameter)
                    && a.kind == b.kind
                    && same_setting
                    && close(a.minor_loss, b.minor_loss)
                    && a.status == b.status,
                "valve {} differs",
                a.id
            );
        }
        check!(
            self.patterns.len() == other.patterns.len()
                && self.patterns.iter().zip(&other.patterns).all(|((ka, va), (kb, vb))| {
                    ka == kb && va.len() == vb.len() && va.iter().zip(vb).all(|(x, y)| close(*x, *y))
                }),
            "patterns differ"
        );
        check!(
            self.curves.len() == other.curves.len()
                && self.curves.iter().zip(&other.curves).all(|((ka, va), (kb, vb))| {
                    ka == kb
                        && va.len() == vb.len()
                        && va.iter().zip(vb).all(|(x, y)| close(x.0, y.0) && close(x.1, y.1))
                }),
            "curves differ"
        );
        check!(
            self.coordinates.len() == other.coordinates.len()
                && self.coordinates.iter().zip(&other.coordinates).all(|((ka, a), (kb, b))| {
                    ka == kb && close(a.0, b.0) && close(a.1, b.1)
                }),
            "coordinates differ"
        );
        None
    }
}
