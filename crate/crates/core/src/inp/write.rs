use super::parse::valve_setting_to_si;
use crate::network::*;
use std::collections::BTreeSet;
use std::fmt::Write;

fn opt(s: &Option<String>) -> &str {
    s.as_deref().unwrap_or("")
}

/// Write a model back as INP text in the model's own flow units.
///
/// Numbers use the shortest representation that round-trips an `f64`, so
/// `parse_inp(&serialize_inp(m))` reproduces `m` up to the rounding of the
/// unit conversion.
pub fn serialize_inp(model: &NetworkModel) -> String {
    let units = model.options.flow_units;
    let len = 1.0 / units.length_to_si();
    let flow = 1.0 / units.to_si();
    let diam = 1.0 / units.diameter_to_si();
    let rough = match model.options.headloss {
        HeadlossFormula::HazenWilliams => 1.0,
        HeadlossFormula::DarcyWeisbach => 1.0 / units.dw_roughness_to_si(),
    };
    let volume = len * len * len;

    let mut out = String::new();
    // Infallible: writing into a String.
    let w = &mut out;
    let _ = writeln!(w, "[TITLE]");
    for line in &model.title {
        let _ = writeln!(w, "{line}");
    }

    let _ = writeln!(w, "\n[JUNCTIONS]\n;ID\tElev\tDemand\tPattern");
    for j in &model.junctions {
        let _ = writeln!(
            w,
            " {}\t{}\t{}\t{}",
            j.id,
            j.elevation * len,
            j.base_demand * flow,
            opt(&j.pattern)
        );
    }

    let _ = writeln!(w, "\n[RESERVOIRS]\n;ID\tHead\tPattern");
    for r in &model.reservoirs {
        let _ = writeln!(w, " {}\t{}\t{}", r.id, r.head * len, opt(&r.pattern));
    }

    let _ = writeln!(
        w,
        "\n[TANKS]\n;ID\tElevation\tInitLevel\tMinLevel\tMaxLevel\tDiameter\tMinVol\tVolCurve"
    );
    for t in &model.tanks {
        let _ = writeln!(
            w,
            " {}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            t.id,
            t.elevation * len,
            t.init_level * len,
            t.min_level * len,
            t.max_level * len,
            t.diameter * len,
            t.min_volume * volume,
            opt(&t.volume_curve)
        );
    }

    let _ = writeln!(
        w,
        "\n[PIPES]\n;ID\tNode1\tNode2\tLength\tDiameter\tRoughness\tMinorLoss\tStatus"
    );
    for p in &model.pipes {
        let status = match (p.status, p.check_valve) {
            (LinkStatus::Closed, _) => "Closed",
            (LinkStatus::Open, true) => "CV",
            (LinkStatus::Open, false) => "Open",
        };
        let _ = writeln!(
            w,
            " {}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.id,
            p.from,
            p.to,
            p.length * len,
            p.diameter * diam,
            p.roughness * rough,
            p.minor_loss,
            status
        );
    }

    let _ = writeln!(w, "\n[PUMPS]\n;ID\tNode1\tNode2\tParameters");
    for p in &model.pumps {
        let _ = write!(w, " {}\t{}\t{}\tHEAD {}", p.id, p.from, p.to, p.curve);
        if p.speed != 1.0 {
            let _ = write!(w, "\tSPEED {}", p.speed);
        }
        if let Some(pat) = &p.pattern {
            let _ = write!(w, "\tPATTERN {pat}");
        }
        let _ = writeln!(w);
    }

    let _ = writeln!(
        w,
        "\n[VALVES]\n;ID\tNode1\tNode2\tDiameter\tType\tSetting\tMinorLoss"
    );
    for v in &model.valves {
        let setting = match &v.setting {
            ValveSetting::Value(x) => format!("{}", x / valve_setting_to_si(v.kind, units)),
            ValveSetting::Curve(c) => c.clone(),
        };
        let _ = writeln!(
            w,
            " {}\t{}\t{}\t{}\t{}\t{}\t{}",
            v.id,
            v.from,
            v.to,
            v.diameter * diam,
            v.kind.as_str(),
            setting,
            v.minor_loss
        );
    }

    let _ = writeln!(w, "\n[DEMANDS]\n;Junction\tDemand\tPattern");
    for j in model.junctions.iter().filter(|j| !j.extra_demands.is_empty()) {
        for (base, pattern) in j.categories() {
            let _ = writeln!(w, " {}\t{}\t{}", j.id, base * flow, pattern.unwrap_or(""));
        }
    }

    let _ = writeln!(w, "\n[STATUS]\n;ID\tStatus");
    for p in model.pumps.iter().filter(|p| p.status == LinkStatus::Closed) {
        let _ = writeln!(w, " {}\tClosed", p.id);
    }
    for v in model.valves.iter().filter(|v| v.status == LinkStatus::Closed) {
        let _ = writeln!(w, " {}\tClosed", v.id);
    }

    let _ = writeln!(w, "\n[PATTERNS]\n;ID\tMultipliers");
    for (name, values) in &model.patterns {
        for chunk in values.chunks(6) {
            let _ = write!(w, " {name}");
            for v in chunk {
                let _ = write!(w, "\t{v}");
            }
            let _ = writeln!(w);
        }
    }

    let pump_curves: BTreeSet<&str> = model.pumps.iter().map(|p| p.curve.as_str()).collect();
    let _ = writeln!(w, "\n[CURVES]\n;ID\tX-Value\tY-Value");
    for (name, points) in &model.curves {
        let (sx, sy) = if pump_curves.contains(name.as_str()) {
            (flow, len)
        } else {
            (1.0, 1.0)
        };
        for (x, y) in points {
            let _ = writeln!(w, " {name}\t{}\t{}", x * sx, y * sy);
        }
    }

    let o = &model.options;
    let _ = writeln!(w, "\n[OPTIONS]");
    let _ = writeln!(w, " Units\t{}", o.flow_units);
    let _ = writeln!(
        w,
        " Headloss\t{}",
        match o.headloss {
            HeadlossFormula::HazenWilliams => "H-W",
            HeadlossFormula::DarcyWeisbach => "D-W",
        }
    );
    if let Some(p) = &o.default_pattern {
        let _ = writeln!(w, " Pattern\t{p}");
    }
    let _ = writeln!(w, " Demand Multiplier\t{}", o.demand_multiplier);
    let _ = writeln!(w, " Viscosity\t{}", o.viscosity);

    let step = o.pattern_timestep.round() as u64;
    let _ = writeln!(w, "\n[TIMES]");
    let _ = writeln!(
        w,
        " Pattern Timestep\t{}:{:02}:{:02}",
        step / 3600,
        step / 60 % 60,
        step % 60
    );

    let _ = writeln!(w, "\n[COORDINATES]\n;Node\tX-Coord\tY-Coord");
    for (id, (x, y)) in &model.coordinates {
        let _ = writeln!(w, " {id}\t{x}\t{y}");
    }
    let _ = writeln!(w, "\n[END]");
    out
}
