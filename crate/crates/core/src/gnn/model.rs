use super::sample::loss_with_gradient;
use super::{BlockWeights, GnnError, LossKind, MaskedSample, ModelConfig, ModelGraph, ModelWeights};
use ndarray::{s, Array2, Axis};

/// Attention coefficients of every block: `alpha[b]` is `arcs × heads`, with
/// arcs (self-loops included) listed in [`ModelGraph`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub alpha: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
struct BlockCache {
    x: Array2<f64>,
    z: Array2<f64>,
    e_pre: Array2<f64>,
    alpha: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
}

/// Forward pass with every intermediate kept for the backward sweep.
#[derive(Debug, Clone)]
pub struct Forward {
    pub output: Vec<f64>,
    blocks: Vec<BlockCache>,
    last: Array2<f64>,
    dec_pre: Array2<f64>,
    dec_act: Array2<f64>,
}

impl Forward {
    pub fn trace(&self, graph: &ModelGraph) -> AttentionTrace {
        AttentionTrace {
            src: graph.src.clone(),
            dst: graph.dst.clone(),
            alpha: self.blocks.iter().map(|b| b.alpha.clone()).collect(),
        }
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn add_row(m: &mut Array2<f64>, row: &Array2<f64>) {
    *m += &row.row(0);
}

fn col_sum(m: &Array2<f64>) -> Array2<f64> {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// Attention scores, coefficients and head-concatenated aggregation.
fn attend(
    z: &Array2<f64>,
    graph: &ModelGraph,
    blk: &BlockWeights,
    config: &ModelConfig,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let n = graph.nodes;
    let k_heads = config.heads;
    let fh = config.head_width();
    let arcs = graph.arc_count();
    let mut s_score = Array2::<f64>::zeros((n, k_heads));
    let mut t_score = Array2::<f64>::zeros((n, k_heads));
    for u in 0..n {
        for k in 0..k_heads {
            let zk = z.slice(s![u, k * fh..(k + 1) * fh]);
            s_score[[u, k]] = zk.dot(&blk.a_src.row(k));
            t_score[[u, k]] = zk.dot(&blk.a_dst.row(k));
        }
    }
    let edge_term = config.use_edge_attr.then(|| graph.edge_attr.dot(&blk.w_edge));
    let mut e_pre = Array2::<f64>::zeros((arcs, k_heads));
    let mut alpha = Array2::<f64>::zeros((arcs, k_heads));
    let mut agg = Array2::<f64>::zeros((n, config.hidden));
    for v in 0..n {
        let range = graph.in_offsets[v]..graph.in_offsets[v + 1];
        for k in 0..k_heads {
            let mut max = f64::NEG_INFINITY;
            for a in range.clone() {
                let mut e = s_score[[graph.src[a], k]] + t_score[[v, k]];
                if let Some(et) = &edge_term {
                    e += et[[a, k]];
                }
                e_pre[[a, k]] = e;
                max = max.max(leaky(e, config.negative_slope));
            }
            let mut total = 0.0;
            for a in range.clone() {
                let w = (leaky(e_pre[[a, k]], config.negative_slope) - max).exp();
                alpha[[a, k]] = w;
                total += w;
            }
            for a in range.clone() {
                alpha[[a, k]] /= total;
                let coef = alpha[[a, k]];
                let u = graph.src[a];
                for c in k * fh..(k + 1) * fh {
                    agg[[v, c]] += coef * z[[u, c]];
                }
            }
        }
    }
    (e_pre, alpha, agg)
}

fn check_inputs(
    features: &Array2<f64>,
    graph: &ModelGraph,
    weights: &ModelWeights,
    config: &ModelConfig,
) -> Result<(), GnnError> {
    config.check()?;
    weights.check_shapes(config)?;
    if features.dim() != (graph.nodes, config.input_features()) {
        return Err(GnnError::ShapeMismatch(format!(
            "features are {:?}, expected ({}, {})",
            features.dim(),
            graph.nodes,
            config.input_features()
        )));
    }
    Ok(())
}

/// One attention layer: `act(concat_k Σ_u α_uv W h_u + bias)` together with
/// the attention coefficients (`arcs × heads`).
pub fn gat_layer_forward(
    h: &Array2<f64>,
    graph: &ModelGraph,
    blk: &BlockWeights,
    config: &ModelConfig,
) -> Result<(Array2<f64>, Array2<f64>), GnnError> {
    config.check()?;
    if h.dim() != (graph.nodes, blk.w.nrows()) {
        return Err(GnnError::ShapeMismatch(format!(
            "layer input is {:?}, expected ({}, {})",
            h.dim(),
            graph.nodes,
            blk.w.nrows()
        )));
    }
    let z = h.dot(&blk.w);
    let (_, alpha, mut agg) = attend(&z, graph, blk, config);
    add_row(&mut agg, &blk.bias);
    agg.mapv_inplace(|v| config.activation.apply(v));
    Ok((agg, alpha))
}

fn forward_cached(
    features: &Array2<f64>,
    graph: &ModelGraph,
    weights: &ModelWeights,
    config: &ModelConfig,
) -> Result<Forward, GnnError> {
    check_inputs(features, graph, weights, config)?;
    let act = config.activation;
    let mut x = features.dot(&weights.w_in);
    add_row(&mut x, &weights.b_in);
    let mut blocks = Vec::with_capacity(config.blocks);
    for (b, blk) in weights.blocks.iter().enumerate() {
        let z = x.dot(&blk.w);
        let (e_pre, alpha, mut pre) = attend(&z, graph, blk, config);
        add_row(&mut pre, &blk.bias);
        let a = pre.mapv(|v| act.apply(v));
        let mut next = a.dot(&blk.w_out);
        add_row(&mut next, &blk.b_out);
        next += &x;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(GnnError::NonFiniteActivation(format!("block {b}")));
        }
        blocks.push(BlockCache {
            x: std::mem::replace(&mut x, next),
            z,
            e_pre,
            alpha,
            pre,
            act: a,
        });
    }
    let mut dec_pre = x.dot(&weights.w_d1);
    add_row(&mut dec_pre, &weights.b_d1);
    let dec_act = dec_pre.mapv(|v| act.apply(v));
    let out = dec_act.dot(&weights.w_d2) + weights.b_d2[[0, 0]];
    let output: Vec<f64> = out.column(0).to_vec();
    if output.iter().any(|v| !v.is_finite()) {
        return Err(GnnError::NonFiniteActivation("decoder".into()));
    }
    Ok(Forward {
        output,
        blocks,
        last: x,
        dec_pre,
        dec_act,
    })
}

/// Full forward pass. `output[v]` is the normalized pressure estimate of
/// node `v`.
pub fn gatres_forward(
    features: &Array2<f64>,
    graph: &ModelGraph,
    weights: &ModelWeights,
    config: &ModelConfig,
) -> Result<Forward, GnnError> {
    forward_cached(features, graph, weights, config)
}

fn backward_from(
    fwd: &Forward,
    features: &Array2<f64>,
    d_output: &[f64],
    graph: &ModelGraph,
    weights: &ModelWeights,
    config: &ModelConfig,
) -> ModelWeights {
    let act = config.activation;
    let slope = config.negative_slope;
    let fh = config.head_width();
    let n = graph.nodes;
    let mut g = ModelWeights::zeros(config);

    let d_out = Array2::from_shape_vec((n, 1), d_output.to_vec()).expect("one value per node");
    g.w_d2 = fwd.dec_act.t().dot(&d_out);
    g.b_d2[[0, 0]] = d_out.sum();
    let mut d_dec = d_out.dot(&weights.w_d2.t());
    d_dec.zip_mut_with(&fwd.dec_pre, |d, &p| *d *= act.derivative(p));
    g.w_d1 = fwd.last.t().dot(&d_dec);
    g.b_d1 = col_sum(&d_dec);
    let mut d_x = d_dec.dot(&weights.w_d1.t());

    for (b, cache) in fwd.blocks.iter().enumerate().rev() {
        let blk = &weights.blocks[b];
        let gb = &mut g.blocks[b];
        gb.w_out = cache.act.t().dot(&d_x);
        gb.b_out = col_sum(&d_x);
        let mut d_pre = d_x.dot(&blk.w_out.t());
        d_pre.zip_mut_with(&cache.pre, |d, &p| *d *= act.derivative(p));
        gb.bias = col_sum(&d_pre);

        let mut d_z = Array2::<f64>::zeros(cache.z.dim());
        let mut d_s = Array2::<f64>::zeros((n, config.heads));
        let mut d_t = Array2::<f64>::zeros((n, config.heads));
        for v in 0..n {
            let range = graph.in_offsets[v]..graph.in_offsets[v + 1];
            for k in 0..config.heads {
                let cols = k * fh..(k + 1) * fh;
                let dv = d_pre.slice(s![v, cols.clone()]);
                let mut d_alpha = Vec::with_capacity(range.len());
                let mut weighted = 0.0;
                for a in range.clone() {
                    let u = graph.src[a];
                    let da = dv.dot(&cache.z.slice(s![u, cols.clone()]));
                    weighted += cache.alpha[[a, k]] * da;
                    d_alpha.push(da);
                    let coef = cache.alpha[[a, k]];
                    for c in cols.clone() {
                        d_z[[u, c]] += coef * d_pre[[v, c]];
                    }
                }
                for (a, da) in range.clone().zip(d_alpha) {
                    let de = cache.alpha[[a, k]] * (da - weighted);
                    let de_pre = if cache.e_pre[[a, k]] > 0.0 { de } else { slope * de };
                    d_s[[graph.src[a], k]] += de_pre;
                    d_t[[v, k]] += de_pre;
                    if config.use_edge_attr {
                        for c in 0..graph.edge_attr.ncols() {
                            gb.w_edge[[c, k]] += graph.edge_attr[[a, c]] * de_pre;
                        }
                    }
                }
            }
        }
        for u in 0..n {
            for k in 0..config.heads {
                for (j, c) in (k * fh..(k + 1) * fh).enumerate() {
                    gb.a_src[[k, j]] += d_s[[u, k]] * cache.z[[u, c]];
                    gb.a_dst[[k, j]] += d_t[[u, k]] * cache.z[[u, c]];
                    d_z[[u, c]] += d_s[[u, k]] * blk.a_src[[k, j]] + d_t[[u, k]] * blk.a_dst[[k, j]];
                }
            }
        }
        gb.w = cache.x.t().dot(&d_z);
        d_x = d_x + d_z.dot(&blk.w.t());
    }
    g.w_in = features.t().dot(&d_x);
    g.b_in = col_sum(&d_x);
    g
}

/// Masked loss of one sample and its exact gradient for every parameter.
pub fn loss_and_gradient(
    sample: &MaskedSample,
    graph: &ModelGraph,
    weights: &ModelWeights,
    config: &ModelConfig,
    loss: LossKind,
) -> Result<(f64, ModelWeights), GnnError> {
    let fwd = forward_cached(&sample.features, graph, weights, config)?;
    let (value, d_output) = loss_with_gradient(&fwd.output, sample, loss)?;
    let grads = backward_from(&fwd, &sample.features, &d_output, graph, weights, config);
    if let Some(name) = grads.first_non_finite() {
        return Err(GnnError::NonFiniteGradient(name));
    }
    Ok((value, grads))
}

/// Gradient of the masked loss of `sample` for every parameter.
pub fn backward(
    sample: &MaskedSample,
    graph: &ModelGraph,
    weights: &ModelWeights,
    config: &ModelConfig,
    loss: LossKind,
) -> Result<ModelWeights, GnnError> {
    loss_and_gradient(sample, graph, weights, config, loss).map(|(_, g)| g)
}
