use super::{GnnError, ModelConfig};
use crate::graph::EDGE_ATTR_DIM;
use crate::seed::Rng;
use ndarray::Array2;
use rand::{Rng as _, SeedableRng};

/// Parameters of one attention block. Vectors are stored as `1 × n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    /// `F × F` projection shared by all heads.
    pub w: Array2<f64>,
    /// `K × F/K` source and destination scoring vectors.
    pub a_src: Array2<f64>,
    pub a_dst: Array2<f64>,
    /// `EDGE_ATTR_DIM × K` edge scoring, or `0 × K` when edges are unused.
    pub w_edge: Array2<f64>,
    pub bias: Array2<f64>,
    /// `F × F` output projection of the residual branch.
    pub w_out: Array2<f64>,
    pub b_out: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub w_in: Array2<f64>,
    pub b_in: Array2<f64>,
    pub blocks: Vec<BlockWeights>,
    pub w_d1: Array2<f64>,
    pub b_d1: Array2<f64>,
    pub w_d2: Array2<f64>,
    pub b_d2: Array2<f64>,
}

fn shapes(config: &ModelConfig) -> Vec<(String, (usize, usize))> {
    let f = config.hidden;
    let k = config.heads;
    let d = config.decoder_width;
    let mut out = vec![
        ("w_in".to_string(), (config.input_features(), f)),
        ("b_in".to_string(), (1, f)),
    ];
    for b in 0..config.blocks {
        let edge_rows = if config.use_edge_attr { EDGE_ATTR_DIM } else { 0 };
        out.extend([
            (format!("block{b}.w"), (f, f)),
            (format!("block{b}.a_src"), (k, config.head_width())),
            (format!("block{b}.a_dst"), (k, config.head_width())),
            (format!("block{b}.w_edge"), (edge_rows, k)),
            (format!("block{b}.bias"), (1, f)),
            (format!("block{b}.w_out"), (f, f)),
            (format!("block{b}.b_out"), (1, f)),
        ]);
    }
    out.extend([
        ("w_d1".to_string(), (f, d)),
        ("b_d1".to_string(), (1, d)),
        ("w_d2".to_string(), (d, 1)),
        ("b_d2".to_string(), (1, 1)),
    ]);
    out
}

impl ModelWeights {
    /// All parameters zero, shaped for `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        let mut it = shapes(config)
            .into_iter()
            .map(|(_, s)| Array2::<f64>::zeros(s));
        let mut next = || it.next().expect("shape list matches layout");
        let w_in = next();
        let b_in = next();
        let blocks = (0..config.blocks)
            .map(|_| BlockWeights {
                w: next(),
                a_src: next(),
                a_dst: next(),
                w_edge: next(),
                bias: next(),
                w_out: next(),
                b_out: next(),
            })
            .collect();
        ModelWeights {
            w_in,
            b_in,
            blocks,
            w_d1: next(),
            b_d1: next(),
            w_d2: next(),
            b_d2: next(),
        }
    }

    /// Glorot-uniform matrices and zero biases from a seed.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut w = ModelWeights::zeros(config);
        let mut rng = Rng::seed_from_u64(seed);
        for (name, t) in w.tensors_mut() {
            let is_bias = name.ends_with("bias") || name.contains(".b_") || name.starts_with("b_");
            if is_bias || t.is_empty() {
                continue;
            }
            let (rows, cols) = t.dim();
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            t.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        w
    }

    pub fn names(config: &ModelConfig) -> Vec<String> {
        shapes(config).into_iter().map(|(n, _)| n).collect()
    }

    /// Every tensor with its name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![("w_in".to_string(), &self.w_in), ("b_in".to_string(), &self.b_in)];
        for (b, blk) in self.blocks.iter().enumerate() {
            out.extend([
                (format!("block{b}.w"), &blk.w),
                (format!("block{b}.a_src"), &blk.a_src),
                (format!("block{b}.a_dst"), &blk.a_dst),
                (format!("block{b}.w_edge"), &blk.w_edge),
                (format!("block{b}.bias"), &blk.bias),
                (format!("block{b}.w_out"), &blk.w_out),
                (format!("block{b}.b_out"), &blk.b_out),
            ]);
        }
        out.extend([
            ("w_d1".to_string(), &self.w_d1),
            ("b_d1".to_string(), &self.b_d1),
            ("w_d2".to_string(), &self.w_d2),
            ("b_d2".to_string(), &self.b_d2),
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = vec![
            ("w_in".to_string(), &mut self.w_in),
            ("b_in".to_string(), &mut self.b_in),
        ];
        for (b, blk) in self.blocks.iter_mut().enumerate() {
            out.extend([
                (format!("block{b}.w"), &mut blk.w),
                (format!("block{b}.a_src"), &mut blk.a_src),
                (format!("block{b}.a_dst"), &mut blk.a_dst),
                (format!("block{b}.w_edge"), &mut blk.w_edge),
                (format!("block{b}.bias"), &mut blk.bias),
                (format!("block{b}.w_out"), &mut blk.w_out),
                (format!("block{b}.b_out"), &mut blk.b_out),
            ]);
        }
        out.extend([
            ("w_d1".to_string(), &mut self.w_d1),
            ("b_d1".to_string(), &mut self.b_d1),
            ("w_d2".to_string(), &mut self.w_d2),
            ("b_d2".to_string(), &mut self.b_d2),
        ]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn check_shapes(&self, config: &ModelConfig) -> Result<(), GnnError> {
        if self.blocks.len() != config.blocks {
            return Err(GnnError::ShapeMismatch(format!(
                "{} blocks in weights, {} in config",
                self.blocks.len(),
                config.blocks
            )));
        }
        for ((name, t), (_, want)) in self.tensors().into_iter().zip(shapes(config)) {
            if t.dim() != want {
                return Err(GnnError::ShapeMismatch(format!(
                    "{name} is {:?}, expected {want:?}",
                    t.dim()
                )));
            }
        }
        Ok(())
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelWeights, scale: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(scale, b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_matches_config_and_is_seeded() {
        let c = ModelConfig::default();
        let w = ModelWeights::init(&c, 1);
        w.check_shapes(&c).unwrap();
        assert_eq!(w, ModelWeights::init(&c, 1));
        assert_ne!(w, ModelWeights::init(&c, 2));
        assert!(w.b_in.iter().all(|v| *v == 0.0));
        assert!(w.blocks[0].w.iter().any(|v| *v != 0.0));
        assert_eq!(ModelWeights::names(&c).len(), w.tensors().len());
    }

    #[test]
    fn edge_scoring_only_when_enabled() {
        let mut c = ModelConfig::default();
        assert_eq!(ModelWeights::zeros(&c).blocks[0].w_edge.len(), 0);
        c.use_edge_attr = true;
        assert_eq!(
            ModelWeights::zeros(&c).blocks[0].w_edge.dim(),
            (EDGE_ATTR_DIM, c.heads)
        );
    }
}
