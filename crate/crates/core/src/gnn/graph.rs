use crate::graph::{GraphTopology, EDGE_ATTR_DIM};
use ndarray::Array2;

/// Arcs grouped by destination, each node's self-loop first, ready for
/// per-node softmax. Edge attributes are compressed with `ln(1 + x)` so that
/// lengths in metres and roughness coefficients stay of order one; the
/// self-loop carries zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    pub nodes: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub edge_attr: Array2<f64>,
    /// Arcs into node `v` are `in_offsets[v]..in_offsets[v + 1]`.
    pub in_offsets: Vec<usize>,
}

impl ModelGraph {
    pub fn from_arcs(
        nodes: usize,
        sources: &[usize],
        targets: &[usize],
        attrs: &[[f64; EDGE_ATTR_DIM]],
    ) -> Self {
        assert_eq!(sources.len(), targets.len());
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for (a, &t) in targets.iter().enumerate() {
            incoming[t].push(a);
        }
        let arcs = nodes + sources.len();
        let mut src = Vec::with_capacity(arcs);
        let mut dst = Vec::with_capacity(arcs);
        let mut edge_attr = Array2::zeros((arcs, EDGE_ATTR_DIM));
        let mut in_offsets = Vec::with_capacity(nodes + 1);
        in_offsets.push(0);
        for (v, list) in incoming.iter().enumerate() {
            src.push(v);
            dst.push(v);
            for &a in list {
                let row = src.len();
                src.push(sources[a]);
                dst.push(v);
                if let Some(attr) = attrs.get(a) {
                    for (c, x) in attr.iter().enumerate() {
                        edge_attr[[row, c]] = x.max(0.0).ln_1p();
                    }
                }
            }
            in_offsets.push(src.len());
        }
        ModelGraph {
            nodes,
            src,
            dst,
            edge_attr,
            in_offsets,
        }
    }

    pub fn new(topology: &GraphTopology) -> Self {
        ModelGraph::from_arcs(
            topology.node_count(),
            &topology.sources,
            &topology.targets,
            &topology.edge_attr,
        )
    }

    pub fn arc_count(&self) -> usize {
        self.src.len()
    }
}
