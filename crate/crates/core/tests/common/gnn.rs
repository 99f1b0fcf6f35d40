//! Tiny GATRes instances and the measurements taken on them.

#![allow(clippy::needless_range_loop)]

use gatres_core::generator::Normalization;
use gatres_core::gnn::*;
use gatres_core::graph::GraphTopology;
use gatres_core::network::NodeKind;
use gatres_core::seed::Rng;
use ndarray::Array2;
use rand::{Rng as _, SeedableRng};

/// Random connected undirected graph with `n` nodes; node `n - 1` is a
/// reservoir.
pub fn random_topology(n: usize, rng: &mut Rng) -> GraphTopology {
    let mut sources = Vec::new();
    let mut targets = Vec::new();
    let mut edge_attr = Vec::new();
    let mut link = |a: usize, b: usize, rng: &mut Rng| {
        let attr = [
            rng.random_range(10.0..1000.0),
            rng.random_range(0.1..0.5),
            rng.random_range(80.0..140.0),
            1.0,
            0.0,
            0.0,
        ];
        sources.extend([a, b]);
        targets.extend([b, a]);
        edge_attr.extend([attr, attr]);
    };
    for v in 1..n {
        let u = rng.random_range(0..v);
        link(u, v, rng);
    }
    if n >= 4 {
        link(0, n - 1, rng);
    }
    let mut kinds = vec![NodeKind::Junction; n];
    kinds[n - 1] = NodeKind::Reservoir;
    GraphTopology {
        node_ids: (0..n).map(|i| format!("N{i}")).collect(),
        node_kinds: kinds,
        node_static: (0..n).map(|_| rng.random_range(0.0..30.0)).collect(),
        link_ids: (0..sources.len() / 2).map(|i| format!("L{i}")).collect(),
        sources,
        targets,
        edge_attr,
    }
}

pub fn norm() -> Normalization {
    Normalization {
        pressure: [0.0, 80.0],
        elevation: [0.0, 30.0],
        demand: [0.0, 0.01],
    }
}

pub fn random_sample(topo: &GraphTopology, config: &ModelConfig, ratio: f64, rng: &mut Rng) -> MaskedSample {
    let p: Vec<f64> = (0..topo.node_count()).map(|_| rng.random_range(10.0..70.0)).collect();
    let d: Vec<f64> = (0..topo.node_count()).map(|_| rng.random_range(0.0..0.01)).collect();
    let opts = MaskOptions {
        demand_channel: config.demand_channel,
        fixed_head_sensors: true,
    };
    mask_sample(&p, Some(&d), topo, &norm(), ratio, rng, opts).unwrap()
}

fn perturbed_loss(
    sample: &MaskedSample,
    graph: &ModelGraph,
    weights: &ModelWeights,
    config: &ModelConfig,
    tensor: usize,
    index: usize,
    delta: f64,
) -> f64 {
    let mut w = weights.clone();
    {
        let mut slots = w.tensors_mut();
        let v = slots[tensor].1.iter_mut().nth(index).unwrap();
        *v += delta;
    }
    let out = gatres_forward(&sample.features, graph, &w, config).unwrap().output;
    masked_loss(&out, sample, LossKind::Mae).unwrap()
}

/// Worst relative gap between the analytic gradient and central differences
/// over every parameter of one random instance with at most six nodes and
/// two blocks, with the parameter where it occurs.
pub fn gradient_gap(seed: u64) -> (f64, String) {
    let eps = 1e-5;
    let mut rng = Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=6);
    let heads = rng.random_range(1..=2);
    let config = ModelConfig {
        blocks: rng.random_range(1..=2),
        heads,
        hidden: heads * rng.random_range(1..=3),
        decoder_width: rng.random_range(1..=3),
        use_edge_attr: seed.is_multiple_of(2),
        demand_channel: seed.is_multiple_of(3),
        negative_slope: 0.2,
        activation: if seed % 4 == 1 { Activation::Tanh } else { Activation::Elu },
    };
    let topo = random_topology(n, &mut rng);
    let graph = ModelGraph::new(&topo);
    let mut weights = ModelWeights::init(&config, seed);
    // Non-zero biases exercise every path.
    for (_, t) in weights.tensors_mut() {
        t.mapv_inplace(|v| if v == 0.0 { rng.random_range(-0.3..0.3) } else { v });
    }
    let sample = random_sample(&topo, &config, 0.5, &mut rng);
    let grads = backward(&sample, &graph, &weights, &config, LossKind::Mae).unwrap();
    let mut worst = (0.0, String::new());
    for (ti, (name, g)) in grads.tensors().into_iter().enumerate() {
        for (i, an) in g.iter().enumerate() {
            let up = perturbed_loss(&sample, &graph, &weights, &config, ti, i, eps);
            let down = perturbed_loss(&sample, &graph, &weights, &config, ti, i, -eps);
            let fd = (up - down) / (2.0 * eps);
            // Entries below 1e-6 are effectively compared in absolute terms,
            // well above central-difference round-off near 1e-11.
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{i}]: analytic {an} vs numeric {fd}"));
            }
        }
    }
    worst
}

/// Largest output change when the nodes of a random graph are relabeled.
pub fn permutation_gap(seed: u64, nodes: usize) -> f64 {
    let mut rng = Rng::seed_from_u64(seed);
    let config = ModelConfig {
        use_edge_attr: true,
        ..ModelConfig::default()
    };
    let topo = random_topology(nodes, &mut rng);
    let n = topo.node_count();
    let w = ModelWeights::init(&config, seed);
    let s = random_sample(&topo, &config, 0.7, &mut rng);
    let out = gatres_forward(&s.features, &ModelGraph::new(&topo), &w, &config)
        .unwrap()
        .output;

    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    // perm[old] = new
    let mut features = Array2::zeros(s.features.dim());
    for old in 0..n {
        features.row_mut(perm[old]).assign(&s.features.row(old));
    }
    let sources: Vec<usize> = topo.sources.iter().map(|&u| perm[u]).collect();
    let targets: Vec<usize> = topo.targets.iter().map(|&v| perm[v]).collect();
    let g2 = ModelGraph::from_arcs(n, &sources, &targets, &topo.edge_attr);
    let out2 = gatres_forward(&features, &g2, &w, &config).unwrap().output;
    (0..n).map(|old| (out[old] - out2[perm[old]]).abs()).fold(0.0, f64::max)
}

/// Largest difference between a model whose blocks add nothing and the
/// bare encoder-decoder computed by hand. Zero when the residual path is an
/// exact identity.
pub fn identity_gap(seed: u64) -> f64 {
    let mut rng = Rng::seed_from_u64(seed);
    let config = ModelConfig::default();
    let topo = random_topology(12, &mut rng);
    let graph = ModelGraph::new(&topo);
    let mut w = ModelWeights::init(&config, seed);
    for b in w.blocks.iter_mut() {
        b.w_out.fill(0.0);
        b.b_out.fill(0.0);
    }
    let s = random_sample(&topo, &config, 0.5, &mut rng);
    let out = gatres_forward(&s.features, &graph, &w, &config).unwrap().output;
    let enc = s.features.dot(&w.w_in) + w.b_in.row(0);
    let hidden = (enc.dot(&w.w_d1) + w.b_d1.row(0)).mapv(|v| config.activation.apply(v));
    let direct = hidden.dot(&w.w_d2) + w.b_d2[[0, 0]];
    out.iter()
        .zip(direct.column(0))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Largest deviation from one of any node's incoming attention weights,
/// over every block and head.
pub fn attention_row_gap(seed: u64, nodes: usize) -> f64 {
    let mut rng = Rng::seed_from_u64(seed);
    let config = ModelConfig::default();
    let topo = random_topology(nodes, &mut rng);
    let graph = ModelGraph::new(&topo);
    let w = ModelWeights::init(&config, seed);
    let s = random_sample(&topo, &config, 0.8, &mut rng);
    let trace = gatres_forward(&s.features, &graph, &w, &config).unwrap().trace(&graph);
    assert_eq!(trace.alpha.len(), config.blocks);
    let mut worst: f64 = 0.0;
    for alpha in &trace.alpha {
        for v in 0..graph.nodes {
            for k in 0..config.heads {
                let total: f64 = (graph.in_offsets[v]..graph.in_offsets[v + 1])
                    .map(|a| alpha[[a, k]])
                    .sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
    }
    worst
}
