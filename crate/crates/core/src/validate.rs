//! Structural checks a network must pass before it is simulated.

use crate::hydraulics::PumpCurve;
use crate::network::{LinkStatus, NetworkModel};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// One violated model invariant. Serialized with a machine-readable `code`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code")]
pub enum ValidationIssue {
    UnknownNodeReference { link: String, node: String },
    DuplicateNodeId { id: String },
    DuplicateLinkId { id: String },
    NoFixedHeadNode,
    Disconnected { component_sizes: Vec<usize> },
    NonPositive { element: String, field: String, value: f64 },
    NonFinite { element: String, field: String },
    NegativeDemand { junction: String, demand: f64 },
    TankLevels { tank: String },
    UnresolvedCurve { pump: String, curve: String },
    BadPumpCurve { pump: String, reason: String },
    UnknownPattern { element: String, pattern: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    /// One JSON object per line, one line per issue.
    pub fn to_json_lines(&self) -> String {
        self.issues
            .iter()
            .map(|i| serde_json::to_string(i).expect("issue serializes") + "\n")
            .collect()
    }
}

pub fn validate(model: &NetworkModel) -> ValidationReport {
    let mut issues = Vec::new();

    let mut seen = HashSet::new();
    for id in model.node_ids() {
        if !seen.insert(id) {
            issues.push(ValidationIssue::DuplicateNodeId { id: id.to_string() });
        }
    }
    let mut seen = HashSet::new();
    for link in model.links() {
        if !seen.insert(link.id) {
            issues.push(ValidationIssue::DuplicateLinkId {
                id: link.id.to_string(),
            });
        }
    }

    if model.fixed_head_count() == 0 {
        issues.push(ValidationIssue::NoFixedHeadNode);
    }

    let mut positive = |element: &str, field: &str, value: f64| {
        if !value.is_finite() {
            issues.push(ValidationIssue::NonFinite {
                element: element.to_string(),
                field: field.to_string(),
            });
        } else if value <= 0.0 {
            issues.push(ValidationIssue::NonPositive {
                element: element.to_string(),
                field: field.to_string(),
                value,
            });
        }
    };
    for p in &model.pipes {
        positive(&p.id, "length", p.length);
        positive(&p.id, "diameter", p.diameter);
        positive(&p.id, "roughness", p.roughness);
    }
    for v in &model.valves {
        positive(&v.id, "diameter", v.diameter);
    }
    for p in &model.pumps {
        positive(&p.id, "speed", p.speed);
    }
    for t in &model.tanks {
        positive(&t.id, "diameter", t.diameter);
    }

    let mut finite = |element: &str, field: &str, value: f64| {
        if !value.is_finite() {
            issues.push(ValidationIssue::NonFinite {
                element: element.to_string(),
                field: field.to_string(),
            });
        }
    };
    for j in &model.junctions {
        finite(&j.id, "elevation", j.elevation);
        for (base, _) in j.categories() {
            finite(&j.id, "demand", base);
        }
    }
    for r in &model.reservoirs {
        finite(&r.id, "head", r.head);
    }
    for t in &model.tanks {
        finite(&t.id, "elevation", t.elevation);
        finite(&t.id, "init_level", t.init_level);
    }

    for j in &model.junctions {
        for (base, pattern) in j.categories() {
            if base < 0.0 {
                issues.push(ValidationIssue::NegativeDemand {
                    junction: j.id.clone(),
                    demand: base,
                });
            }
            if let Some(p) = pattern {
                if !model.patterns.contains_key(p) {
                    issues.push(ValidationIssue::UnknownPattern {
                        element: j.id.clone(),
                        pattern: p.to_string(),
                    });
                }
            }
        }
    }

    for t in &model.tanks {
        if !(t.min_level <= t.init_level && t.init_level <= t.max_level) {
            issues.push(ValidationIssue::TankLevels { tank: t.id.clone() });
        }
    }

    for p in &model.pumps {
        match model.curves.get(&p.curve) {
            None => issues.push(ValidationIssue::UnresolvedCurve {
                pump: p.id.clone(),
                curve: p.curve.clone(),
            }),
            Some(points) => {
                if let Err(e) = PumpCurve::fit(points) {
                    issues.push(ValidationIssue::BadPumpCurve {
                        pump: p.id.clone(),
                        reason: e.to_string(),
                    });
                }
            }
        }
    }

    let index = model.node_index();
    let mut parent: Vec<usize> = (0..model.node_count()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut references_ok = true;
    for link in model.links() {
        let mut ends = [0usize; 2];
        for (slot, node) in ends.iter_mut().zip([link.from, link.to]) {
            match index.get(node) {
                Some(&i) => *slot = i,
                None => {
                    references_ok = false;
                    issues.push(ValidationIssue::UnknownNodeReference {
                        link: link.id.to_string(),
                        node: node.to_string(),
                    });
                }
            }
        }
        if link.status == LinkStatus::Open && references_ok {
            let (a, b) = (find(&mut parent, ends[0]), find(&mut parent, ends[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    if references_ok && model.node_count() > 0 {
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for i in 0..model.node_count() {
            *sizes.entry(find(&mut parent, i)).or_default() += 1;
        }
        if sizes.len() > 1 {
            let mut component_sizes: Vec<usize> = sizes.into_values().collect();
            component_sizes.sort_unstable_by(|a, b| b.cmp(a));
            issues.push(ValidationIssue::Disconnected { component_sizes });
        }
    }

    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inp::parse_inp;

    fn net(text: &str) -> NetworkModel {
        parse_inp(text).unwrap()
    }

    #[test]
    fn connected_single_reservoir_is_clean() {
        let m = net("[JUNCTIONS]\nJ1 10 1\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 12 100\n");
        assert!(validate(&m).is_empty());
    }

    #[test]
    fn disconnected_components() {
        let m = net(
            "[JUNCTIONS]\nJ1 10\nJ2 10\nJ3 10\n[RESERVOIRS]\nR1 50\n[PIPES]\n\
             P1 R1 J1 1000 12 100\nP2 J2 J3 1000 12 100\n",
        );
        let report = validate(&m);
        assert_eq!(
            report.issues,
            vec![ValidationIssue::Disconnected {
                component_sizes: vec![2, 2]
            }]
        );
        assert!(report.to_json_lines().contains("\"code\":\"Disconnected\""));
    }

    #[test]
    fn closed_links_split_the_graph() {
        let m = net(
            "[JUNCTIONS]\nJ1 10\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 12 100 0 Closed\n",
        );
        assert!(matches!(
            validate(&m).issues[..],
            [ValidationIssue::Disconnected { .. }]
        ));
    }

    #[test]
    fn no_fixed_head() {
        let mut m = net("[JUNCTIONS]\nJ1 10\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 12 100\n");
        m.reservoirs.clear();
        m.pipes.clear();
        assert_eq!(validate(&m).issues, vec![ValidationIssue::NoFixedHeadNode]);
    }

    #[test]
    fn negative_demand_and_geometry() {
        let m = net("[JUNCTIONS]\nJ1 10 -1\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 0 12 100\n");
        let issues = validate(&m).issues;
        assert!(issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::NegativeDemand { .. })));
        assert!(issues.iter().any(
            |i| matches!(i, ValidationIssue::NonPositive { field, .. } if field == "length")
        ));
    }

    #[test]
    fn programmatic_bad_reference() {
        let mut m = net("[JUNCTIONS]\nJ1 10\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 10 12 100\n");
        m.pipes[0].to = "J99".into();
        assert!(validate(&m).issues.contains(&ValidationIssue::UnknownNodeReference {
            link: "P1".into(),
            node: "J99".into()
        }));
    }

    #[test]
    fn pump_curve_must_resolve() {
        let m = net(
            "[JUNCTIONS]\nJ1 10\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 10 12 100\n\
             [PUMPS]\nU R1 J1 HEAD missing\n",
        );
        assert!(matches!(
            validate(&m).issues[..],
            [ValidationIssue::UnresolvedCurve { .. }]
        ));
    }
}
