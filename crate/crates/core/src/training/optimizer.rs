use crate::gnn::ModelWeights;
use ndarray::Zip;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Adaptive moment estimation with β = (0.9, 0.999).
    Adam,
    Sgd,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum OptimizerState {
    Adam {
        m: ModelWeights,
        v: ModelWeights,
        t: i32,
    },
    Sgd,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, like: &ModelWeights) -> Self {
        match kind {
            OptimizerKind::Adam => {
                let mut zero = like.clone();
                zero.scale(0.0);
                OptimizerState::Adam {
                    m: zero.clone(),
                    v: zero,
                    t: 0,
                }
            }
            OptimizerKind::Sgd => OptimizerState::Sgd,
        }
    }

    pub fn step(&mut self, weights: &mut ModelWeights, grad: &ModelWeights, lr: f64) {
        match self {
            OptimizerState::Sgd => weights.add_scaled(grad, -lr),
            OptimizerState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                let slots = weights
                    .tensors_mut()
                    .into_iter()
                    .zip(m.tensors_mut())
                    .zip(v.tensors_mut())
                    .zip(grad.tensors());
                for ((((_, w), (_, m)), (_, v)), (_, g)) in slots {
                    Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
                    });
                }
            }
        }
    }
}
