use super::{Estimator, TrainingError};
use crate::gnn::{MaskedSample, ModelGraph};
use crate::graph::GraphTopology;
use crate::sparse::ProfileMatrix;
use std::collections::VecDeque;

/// Non-learned reference estimator.
#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicBaseline;

impl Estimator for HarmonicBaseline {
    fn predict(
        &self,
        sample: &MaskedSample,
        topology: &GraphTopology,
        _graph: &ModelGraph,
    ) -> Result<Vec<f64>, TrainingError> {
        baseline_interpolate(topology, sample)
    }
}

/// Links as `(a, b, weight)`: `1 / length` for pipes, 1 for pumps and
/// valves.
fn weighted_links(topology: &GraphTopology) -> Vec<(usize, usize, f64)> {
    (0..topology.arc_count() / 2)
        .map(|l| {
            let attr = &topology.edge_attr[2 * l];
            let w = if attr[3] > 0.5 && attr[0] > 0.0 {
                1.0 / attr[0]
            } else {
                1.0
            };
            (topology.sources[2 * l], topology.targets[2 * l], w)
        })
        .collect()
}

/// Graph-harmonic fill-in: sensor values are Dirichlet data and every other
/// node takes the weighted mean of its neighbours. Nodes cut off from all
/// sensors get the mean sensor value.
pub fn baseline_interpolate(
    topology: &GraphTopology,
    sample: &MaskedSample,
) -> Result<Vec<f64>, TrainingError> {
    let n = topology.node_count();
    if sample.node_count() != n {
        return Err(TrainingError::SchemaMismatch(format!(
            "sample has {} nodes, network {n}",
            sample.node_count()
        )));
    }
    let known: Vec<usize> = (0..n).filter(|&i| sample.sensors[i]).collect();
    if known.is_empty() {
        return Err(TrainingError::NoSensors);
    }
    let mut out: Vec<f64> = (0..n)
        .map(|i| if sample.sensors[i] { sample.features[[i, 0]] } else { 0.0 })
        .collect();
    let mean = known.iter().map(|&i| out[i]).sum::<f64>() / known.len() as f64;

    let mut index = vec![usize::MAX; n];
    let unknown: Vec<usize> = (0..n).filter(|&i| !sample.sensors[i]).collect();
    for (k, &i) in unknown.iter().enumerate() {
        index[i] = k;
    }
    if unknown.is_empty() {
        return Ok(out);
    }

    let links = weighted_links(topology);
    let mut adjacency = vec![Vec::new(); n];
    for &(a, b, _) in &links {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut grounded = vec![false; n];
    let mut queue: VecDeque<usize> = known.iter().copied().collect();
    for &i in &known {
        grounded[i] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if !grounded[v] {
                grounded[v] = true;
                queue.push_back(v);
            }
        }
    }

    let pairs: Vec<(usize, usize)> = links
        .iter()
        .filter(|(a, b, _)| !sample.sensors[*a] && !sample.sensors[*b])
        .map(|&(a, b, _)| (index[a], index[b]))
        .collect();
    let mut matrix = ProfileMatrix::new(unknown.len(), &pairs);
    let mut rhs = vec![0.0; unknown.len()];
    for &(a, b, w) in &links {
        match (sample.sensors[a], sample.sensors[b]) {
            (true, true) => {}
            (false, false) if a == b => {}
            (false, false) => {
                matrix.add(index[a], index[a], w);
                matrix.add(index[b], index[b], w);
                matrix.add(index[a], index[b], -w);
            }
            (false, true) => {
                matrix.add(index[a], index[a], w);
                rhs[index[a]] += w * out[b];
            }
            (true, false) => {
                matrix.add(index[b], index[b], w);
                rhs[index[b]] += w * out[a];
            }
        }
    }
    for (k, &i) in unknown.iter().enumerate() {
        if !grounded[i] {
            // Isolated from every sensor: the block is a pure Laplacian, so
            // pin each node to the mean instead.
            matrix.add(k, k, 1.0);
            rhs[k] += mean;
        }
    }
    matrix
        .factor_solve(&mut rhs)
        .map_err(|e| TrainingError::SchemaMismatch(format!("interpolation system singular at {}", e.0)))?;
    for (k, &i) in unknown.iter().enumerate() {
        out[i] = rhs[k];
    }
    Ok(out)
}
