use super::{InpError, PSI_TO_METERS};
use crate::network::*;
use crate::units::FlowUnits;
use std::collections::{BTreeSet, HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Section {
    Title,
    Junctions,
    Reservoirs,
    Tanks,
    Pipes,
    Pumps,
    Valves,
    Demands,
    Patterns,
    Curves,
    Status,
    Options,
    Times,
    Coordinates,
}

impl Section {
    fn from_header(name: &str) -> Option<Section> {
        Some(match name {
            "TITLE" => Section::Title,
            "JUNCTIONS" => Section::Junctions,
            "RESERVOIRS" => Section::Reservoirs,
            "TANKS" => Section::Tanks,
            "PIPES" => Section::Pipes,
            "PUMPS" => Section::Pumps,
            "VALVES" => Section::Valves,
            "DEMANDS" => Section::Demands,
            "PATTERNS" => Section::Patterns,
            "CURVES" => Section::Curves,
            "STATUS" => Section::Status,
            "OPTIONS" => Section::Options,
            "TIMES" => Section::Times,
            "COORDINATES" => Section::Coordinates,
            _ => return None,
        })
    }
}

struct Record<'a> {
    line: usize,
    tokens: Vec<&'a str>,
}

impl Record<'_> {
    fn malformed(&self, message: impl Into<String>) -> InpError {
        InpError::MalformedLine {
            line: self.line,
            message: message.into(),
        }
    }

    fn expect_len(&self, min: usize, what: &str) -> Result<(), InpError> {
        if self.tokens.len() < min {
            Err(self.malformed(format!(
                "{what} needs at least {min} fields, found {}",
                self.tokens.len()
            )))
        } else {
            Ok(())
        }
    }

    fn num(&self, i: usize, field: &str) -> Result<f64, InpError> {
        let tok = self.tokens[i];
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.malformed(format!("{field}: {tok:?} is not a number")))
    }

    fn opt_num(&self, i: usize, field: &str, default: f64) -> Result<f64, InpError> {
        if i < self.tokens.len() {
            self.num(i, field)
        } else {
            Ok(default)
        }
    }

    fn opt_str(&self, i: usize) -> Option<String> {
        self.tokens
            .get(i)
            .filter(|t| **t != "*")
            .map(|t| t.to_string())
    }
}

/// Parse INP text into an SI network model.
pub fn parse_inp(text: &str) -> Result<NetworkModel, InpError> {
    let mut sections: HashMap<Section, Vec<Record<'_>>> = HashMap::new();
    let mut seen: HashSet<Section> = HashSet::new();
    let mut skipped: BTreeSet<String> = BTreeSet::new();
    let mut title_lines = Vec::new();
    let mut current: Option<Section> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw.trim_start_matches('\u{feff}');
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.starts_with('[') {
            let end = content.find(']').ok_or_else(|| InpError::MalformedLine {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            let name = content[1..end].trim().to_ascii_uppercase();
            if name == "END" {
                break;
            }
            current = Section::from_header(&name);
            match current {
                Some(s) => {
                    seen.insert(s);
                }
                None => {
                    skipped.insert(name);
                }
            }
            continue;
        }
        match current {
            Some(Section::Title) => {
                // Title text may legitimately contain semicolons.
                let t = raw.trim();
                if !t.is_empty() {
                    title_lines.push(t.to_string());
                }
            }
            Some(section) if !content.is_empty() => {
                sections.entry(section).or_default().push(Record {
                    line: line_no,
                    tokens: content.split_whitespace().collect(),
                });
            }
            _ => {}
        }
    }

    if !seen.contains(&Section::Junctions) {
        return Err(InpError::MissingRequiredSection("JUNCTIONS"));
    }
    if !seen.contains(&Section::Reservoirs) && !seen.contains(&Section::Tanks) {
        return Err(InpError::MissingRequiredSection("RESERVOIRS"));
    }
    if !seen.contains(&Section::Pipes) {
        return Err(InpError::MissingRequiredSection("PIPES"));
    }

    let mut model = NetworkModel {
        title: title_lines,
        ..Default::default()
    };
    for name in &skipped {
        model
            .warnings
            .push(format!("section [{name}] is not supported and was skipped"));
    }
    let records = |s: Section| sections.get(&s).map(Vec::as_slice).unwrap_or(&[]);

    parse_options(records(Section::Options), &mut model)?;
    parse_times(records(Section::Times), &mut model)?;
    let units = model.options.flow_units;
    let len_si = units.length_to_si();
    let flow_si = units.to_si();

    for r in records(Section::Patterns) {
        r.expect_len(2, "pattern")?;
        let values = (1..r.tokens.len())
            .map(|i| r.num(i, "multiplier"))
            .collect::<Result<Vec<_>, _>>()?;
        model
            .patterns
            .entry(r.tokens[0].to_string())
            .or_default()
            .extend(values);
    }
    for r in records(Section::Curves) {
        r.expect_len(3, "curve point")?;
        let point = (r.num(1, "x")?, r.num(2, "y")?);
        model
            .curves
            .entry(r.tokens[0].to_string())
            .or_default()
            .push(point);
    }

    let mut node_ids: HashSet<String> = HashSet::new();
    let mut claim_node = |id: &str, line: usize| -> Result<(), InpError> {
        if node_ids.insert(id.to_string()) {
            Ok(())
        } else {
            Err(InpError::DuplicateId {
                id: id.to_string(),
                line,
            })
        }
    };

    for r in records(Section::Junctions) {
        r.expect_len(2, "junction")?;
        claim_node(r.tokens[0], r.line)?;
        model.junctions.push(Junction {
            id: r.tokens[0].to_string(),
            elevation: r.num(1, "elevation")? * len_si,
            base_demand: r.opt_num(2, "demand", 0.0)? * flow_si,
            pattern: r.opt_str(3),
            extra_demands: Vec::new(),
        });
    }
    for r in records(Section::Reservoirs) {
        r.expect_len(2, "reservoir")?;
        claim_node(r.tokens[0], r.line)?;
        model.reservoirs.push(Reservoir {
            id: r.tokens[0].to_string(),
            head: r.num(1, "head")? * len_si,
            pattern: r.opt_str(2),
        });
    }
    let volume_si = len_si * len_si * len_si;
    for r in records(Section::Tanks) {
        r.expect_len(6, "tank")?;
        claim_node(r.tokens[0], r.line)?;
        model.tanks.push(Tank {
            id: r.tokens[0].to_string(),
            elevation: r.num(1, "elevation")? * len_si,
            init_level: r.num(2, "initial level")? * len_si,
            min_level: r.num(3, "minimum level")? * len_si,
            max_level: r.num(4, "maximum level")? * len_si,
            diameter: r.num(5, "diameter")? * len_si,
            min_volume: r.opt_num(6, "minimum volume", 0.0)? * volume_si,
            volume_curve: r.opt_str(7),
        });
    }

    let mut link_ids: HashSet<String> = HashSet::new();
    let mut claim_link = |r: &Record<'_>| -> Result<(), InpError> {
        let id = r.tokens[0];
        for node in [r.tokens[1], r.tokens[2]] {
            if !node_ids.contains(node) {
                return Err(InpError::UnknownNodeReference {
                    node: node.to_string(),
                    link: id.to_string(),
                    line: r.line,
                });
            }
        }
        if link_ids.insert(id.to_string()) {
            Ok(())
        } else {
            Err(InpError::DuplicateId {
                id: id.to_string(),
                line: r.line,
            })
        }
    };

    let diam_si = units.diameter_to_si();
    let rough_si = match model.options.headloss {
        HeadlossFormula::HazenWilliams => 1.0,
        HeadlossFormula::DarcyWeisbach => units.dw_roughness_to_si(),
    };
    for r in records(Section::Pipes) {
        r.expect_len(6, "pipe")?;
        claim_link(r)?;
        let (status, check_valve) = match r.tokens.get(7).map(|s| s.to_ascii_uppercase()) {
            None => (LinkStatus::Open, false),
            Some(s) if s == "OPEN" => (LinkStatus::Open, false),
            Some(s) if s == "CLOSED" => (LinkStatus::Closed, false),
            Some(s) if s == "CV" => (LinkStatus::Open, true),
            Some(s) => return Err(r.malformed(format!("unknown pipe status {s:?}"))),
        };
        model.pipes.push(Pipe {
            id: r.tokens[0].to_string(),
            from: r.tokens[1].to_string(),
            to: r.tokens[2].to_string(),
            length: r.num(3, "length")? * len_si,
            diameter: r.num(4, "diameter")? * diam_si,
            roughness: r.num(5, "roughness")? * rough_si,
            minor_loss: r.opt_num(6, "minor loss", 0.0)?,
            status,
            check_valve,
        });
    }
    for r in records(Section::Pumps) {
        r.expect_len(3, "pump")?;
        claim_link(r)?;
        let mut curve = None;
        let mut speed = 1.0;
        let mut pattern = None;
        let mut i = 3;
        while i < r.tokens.len() {
            let key = r.tokens[i].to_ascii_uppercase();
            if i + 1 >= r.tokens.len() {
                return Err(r.malformed(format!("pump keyword {key} has no value")));
            }
            match key.as_str() {
                "HEAD" => curve = Some(r.tokens[i + 1].to_string()),
                "SPEED" => speed = r.num(i + 1, "speed")?,
                "PATTERN" => pattern = Some(r.tokens[i + 1].to_string()),
                "POWER" => {
                    return Err(r.malformed("constant-power pumps are not supported"));
                }
                other => return Err(r.malformed(format!("unknown pump keyword {other:?}"))),
            }
            i += 2;
        }
        let curve = curve.ok_or_else(|| r.malformed("pump has no HEAD curve"))?;
        model.pumps.push(Pump {
            id: r.tokens[0].to_string(),
            from: r.tokens[1].to_string(),
            to: r.tokens[2].to_string(),
            curve,
            speed,
            pattern,
            status: LinkStatus::Open,
        });
    }
    for r in records(Section::Valves) {
        r.expect_len(6, "valve")?;
        claim_link(r)?;
        let kind = ValveKind::parse(r.tokens[4])
            .ok_or_else(|| r.malformed(format!("unknown valve type {:?}", r.tokens[4])))?;
        let setting = match kind {
            ValveKind::Gpv => ValveSetting::Curve(r.tokens[5].to_string()),
            _ => ValveSetting::Value(r.num(5, "setting")? * valve_setting_to_si(kind, units)),
        };
        model.valves.push(Valve {
            id: r.tokens[0].to_string(),
            from: r.tokens[1].to_string(),
            to: r.tokens[2].to_string(),
            diameter: r.num(3, "diameter")? * diam_si,
            kind,
            setting,
            minor_loss: r.opt_num(6, "minor loss", 0.0)?,
            status: LinkStatus::Open,
        });
    }

    // The first [DEMANDS] entry of a junction replaces its [JUNCTIONS]
    // demand, later entries add categories.
    let junction_index: HashMap<String, usize> = model
        .junctions
        .iter()
        .enumerate()
        .map(|(i, j)| (j.id.clone(), i))
        .collect();
    let mut replaced = vec![false; model.junctions.len()];
    for r in records(Section::Demands) {
        r.expect_len(2, "demand")?;
        let &ji = junction_index.get(r.tokens[0]).ok_or_else(|| {
            r.malformed(format!("demand for unknown junction {:?}", r.tokens[0]))
        })?;
        let demand = r.num(1, "demand")? * flow_si;
        let pattern = r.opt_str(2);
        let junction = &mut model.junctions[ji];
        if replaced[ji] {
            junction.extra_demands.push(DemandCategory {
                base_demand: demand,
                pattern,
            });
        } else {
            replaced[ji] = true;
            junction.base_demand = demand;
            junction.pattern = pattern;
        }
    }

    for r in records(Section::Status) {
        r.expect_len(2, "status")?;
        apply_status(r, &mut model, units)?;
    }

    for r in records(Section::Coordinates) {
        r.expect_len(3, "coordinate")?;
        model
            .coordinates
            .insert(r.tokens[0].to_string(), (r.num(1, "x")?, r.num(2, "y")?));
    }

    // Head curves are converted once their role is known.
    let pump_curves: BTreeSet<String> = model.pumps.iter().map(|p| p.curve.clone()).collect();
    for name in pump_curves {
        if let Some(points) = model.curves.get_mut(&name) {
            for p in points.iter_mut() {
                p.0 *= flow_si;
                p.1 *= len_si;
            }
        }
    }

    Ok(model)
}

pub(crate) fn valve_setting_to_si(kind: ValveKind, units: FlowUnits) -> f64 {
    match kind {
        ValveKind::Prv | ValveKind::Psv | ValveKind::Pbv => {
            if units.is_us_customary() {
                PSI_TO_METERS
            } else {
                1.0
            }
        }
        ValveKind::Fcv => units.to_si(),
        ValveKind::Tcv | ValveKind::Gpv => 1.0,
    }
}

fn parse_options(records: &[Record<'_>], model: &mut NetworkModel) -> Result<(), InpError> {
    let mut ignored: Vec<String> = Vec::new();
    for r in records {
        let key = r.tokens[0].to_ascii_uppercase();
        match key.as_str() {
            "UNITS" => {
                r.expect_len(2, "Units option")?;
                model.options.flow_units = r.tokens[1]
                    .parse()
                    .map_err(|e: String| r.malformed(e))?;
            }
            "HEADLOSS" => {
                r.expect_len(2, "Headloss option")?;
                model.options.headloss = match r.tokens[1].to_ascii_uppercase().as_str() {
                    "H-W" => HeadlossFormula::HazenWilliams,
                    "D-W" => HeadlossFormula::DarcyWeisbach,
                    other => {
                        return Err(r.malformed(format!("unsupported headloss formula {other:?}")))
                    }
                };
            }
            "PATTERN" => {
                r.expect_len(2, "Pattern option")?;
                model.options.default_pattern = Some(r.tokens[1].to_string());
            }
            "DEMAND" if r.tokens.len() >= 3 && r.tokens[1].eq_ignore_ascii_case("MULTIPLIER") => {
                model.options.demand_multiplier = r.num(2, "demand multiplier")?;
            }
            "VISCOSITY" => {
                r.expect_len(2, "Viscosity option")?;
                model.options.viscosity = r.num(1, "viscosity")?;
            }
            _ => ignored.push(r.tokens[0].to_string()),
        }
    }
    if !ignored.is_empty() {
        model
            .warnings
            .push(format!("ignored options: {}", ignored.join(", ")));
    }
    Ok(())
}

/// Only the pattern time step matters for snapshots; other keys are noted.
fn parse_times(records: &[Record<'_>], model: &mut NetworkModel) -> Result<(), InpError> {
    let mut ignored: Vec<String> = Vec::new();
    for r in records {
        let is_pattern_step = r.tokens.len() >= 3
            && r.tokens[0].eq_ignore_ascii_case("PATTERN")
            && r.tokens[1].eq_ignore_ascii_case("TIMESTEP");
        if !is_pattern_step {
            ignored.push(r.tokens[..r.tokens.len().min(2)].join(" "));
            continue;
        }
        let seconds = parse_duration(&r.tokens[2..])
            .filter(|s| *s > 0.0)
            .ok_or_else(|| r.malformed(format!("invalid pattern timestep {:?}", r.tokens[2])))?;
        model.options.pattern_timestep = seconds;
    }
    if !ignored.is_empty() {
        model
            .warnings
            .push(format!("ignored times: {}", ignored.join(", ")));
    }
    Ok(())
}

/// `H:MM[:SS]`, or a decimal count with an optional unit (hours by default).
pub(crate) fn parse_duration(tokens: &[&str]) -> Option<f64> {
    let first = *tokens.first()?;
    if first.contains(':') {
        let parts: Vec<f64> = first
            .split(':')
            .map(|p| p.parse::<f64>().ok())
            .collect::<Option<_>>()?;
        return match parts[..] {
            [h, m] => Some(h * 3600.0 + m * 60.0),
            [h, m, s] => Some(h * 3600.0 + m * 60.0 + s),
            _ => None,
        };
    }
    let value: f64 = first.parse().ok()?;
    let scale = match tokens.get(1).map(|u| u.to_ascii_uppercase()) {
        None => 3600.0,
        Some(u) if u.starts_with("SEC") => 1.0,
        Some(u) if u.starts_with("MIN") => 60.0,
        Some(u) if u.starts_with("HOUR") => 3600.0,
        Some(u) if u.starts_with("DAY") => 86400.0,
        Some(_) => return None,
    };
    Some(value * scale)
}

fn apply_status(r: &Record<'_>, model: &mut NetworkModel, units: FlowUnits) -> Result<(), InpError> {
    let id = r.tokens[0];
    let value = r.tokens[1].to_ascii_uppercase();
    let status = match value.as_str() {
        "OPEN" => Some(LinkStatus::Open),
        "CLOSED" => Some(LinkStatus::Closed),
        _ => None,
    };
    if let Some(pipe) = model.pipes.iter_mut().find(|p| p.id == id) {
        pipe.status = status.ok_or_else(|| r.malformed(format!("invalid pipe status {value:?}")))?;
    } else if let Some(pump) = model.pumps.iter_mut().find(|p| p.id == id) {
        match status {
            Some(s) => pump.status = s,
            None => {
                let speed = r.num(1, "pump speed")?;
                if speed == 0.0 {
                    pump.status = LinkStatus::Closed;
                } else {
                    pump.speed = speed;
                    pump.status = LinkStatus::Open;
                }
            }
        }
    } else if let Some(valve) = model.valves.iter_mut().find(|v| v.id == id) {
        match status {
            Some(s) => valve.status = s,
            None => {
                valve.setting =
                    ValveSetting::Value(r.num(1, "valve setting")? * valve_setting_to_si(valve.kind, units));
            }
        }
    } else {
        return Err(r.malformed(format!("status for unknown link {id:?}")));
    }
    Ok(())
}
