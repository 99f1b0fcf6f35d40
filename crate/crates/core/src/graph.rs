//! Graph view of a network used by the estimator and the dataset store.

use crate::network::{LinkKind, NetworkModel, NodeKind};
use crate::validate::{validate, ValidationReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `[length, diameter, roughness, is_pipe, is_pump, is_valve]`
pub const EDGE_ATTR_DIM: usize = 6;

#[derive(Debug, Error)]
#[error("model failed validation with {} issue(s)", .0.issues.len())]
pub struct InvalidModel(pub ValidationReport);

/// Nodes in canonical order (junctions, reservoirs, tanks) and every
/// physical link stored as two opposite arcs: arc `2l` runs from→to and arc
/// `2l + 1` to→from for link `l` in canonical link order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTopology {
    pub node_ids: Vec<String>,
    pub node_kinds: Vec<NodeKind>,
    /// Elevation per node, m.
    pub node_static: Vec<f64>,
    pub link_ids: Vec<String>,
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
    pub edge_attr: Vec<[f64; EDGE_ATTR_DIM]>,
}

impl GraphTopology {
    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn arc_count(&self) -> usize {
        self.sources.len()
    }

    pub fn junction_count(&self) -> usize {
        self.node_kinds
            .iter()
            .filter(|k| **k == NodeKind::Junction)
            .count()
    }

    pub fn is_junction(&self, node: usize) -> bool {
        self.node_kinds[node] == NodeKind::Junction
    }

    /// Edge index as a 2×E row-major block of `i64`.
    pub fn edge_index_i64(&self) -> Vec<i64> {
        self.sources
            .iter()
            .chain(&self.targets)
            .map(|&i| i as i64)
            .collect()
    }

    /// Undirected adjacency lists (each physical link once per endpoint).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for (&s, &t) in self.sources.iter().zip(&self.targets) {
            adj[s].push(t);
        }
        adj
    }
}

pub fn to_graph(model: &NetworkModel) -> Result<GraphTopology, InvalidModel> {
    let report = validate(model);
    if !report.is_empty() {
        return Err(InvalidModel(report));
    }
    let index = model.node_index();
    let link_count = model.link_count();
    let mut sources = Vec::with_capacity(2 * link_count);
    let mut targets = Vec::with_capacity(2 * link_count);
    let mut edge_attr = Vec::with_capacity(2 * link_count);
    let mut link_ids = Vec::with_capacity(link_count);
    for link in model.links() {
        let (a, b) = (index[link.from], index[link.to]);
        let attr = match link.kind {
            LinkKind::Pipe => {
                let p = &model.pipes[link.index];
                [p.length, p.diameter, p.roughness, 1.0, 0.0, 0.0]
            }
            LinkKind::Pump => [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            LinkKind::Valve => [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        };
        sources.extend([a, b]);
        targets.extend([b, a]);
        edge_attr.extend([attr, attr]);
        link_ids.push(link.id.to_string());
    }
    Ok(GraphTopology {
        node_ids: model.node_ids().map(str::to_string).collect(),
        node_kinds: model.node_kinds(),
        node_static: model.node_elevations(),
        link_ids,
        sources,
        targets,
        edge_attr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inp::parse_inp;

    #[test]
    fn two_node_graph() {
        let m = parse_inp(
            "[JUNCTIONS]\nJ1 10\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 300 100\n[OPTIONS]\nUnits LPS\n",
        )
        .unwrap();
        let g = to_graph(&m).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.arc_count(), 2);
        assert_eq!(g.sources, vec![1, 0]);
        assert_eq!(g.targets, vec![0, 1]);
        assert_eq!(g.edge_attr[0], [1000.0, 0.3, 100.0, 1.0, 0.0, 0.0]);
        assert_eq!(g.edge_attr[0], g.edge_attr[1]);
        assert_eq!(g.edge_index_i64(), vec![1, 0, 0, 1]);
    }

    #[test]
    fn pump_arcs_use_sentinels() {
        let m = parse_inp(
            "[JUNCTIONS]\nJ1 10\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 300 100\n\
             [PUMPS]\nU R1 J1 HEAD C\n[CURVES]\nC 10 20\n[OPTIONS]\nUnits LPS\n",
        )
        .unwrap();
        let g = to_graph(&m).unwrap();
        assert_eq!(g.edge_attr[2], [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(g.edge_attr[3], g.edge_attr[2]);
    }

    #[test]
    fn invalid_model_is_refused() {
        let mut m = parse_inp("[JUNCTIONS]\nJ1 10\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1 1 100\n").unwrap();
        m.reservoirs.clear();
        assert!(to_graph(&m).is_err());
    }
}
