use super::TrainingError;
use crate::generator::{Normalization, SnapshotDataset};
use crate::gnn::{gatres_forward, mask_sample, MaskOptions, MaskedSample, ModelConfig, ModelGraph, ModelWeights};
use crate::graph::GraphTopology;
use crate::seed::{derive_seed, rng_for, stream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Denominator clamp for percentage errors, mH₂O.
pub const MAPE_FLOOR: f64 = 1.0;

/// Anything that fills in masked pressures.
pub trait Estimator: Sync {
    /// Normalized pressure of every node of `sample`.
    fn predict(
        &self,
        sample: &MaskedSample,
        topology: &GraphTopology,
        graph: &ModelGraph,
    ) -> Result<Vec<f64>, TrainingError>;

    fn mask_options(&self) -> MaskOptions {
        MaskOptions::default()
    }

    /// Reject datasets the estimator cannot consume.
    fn check_schema(&self, _dataset: &SnapshotDataset) -> Result<(), TrainingError> {
        Ok(())
    }
}

/// A GATRes weight set viewed as an estimator.
#[derive(Debug, Clone, Copy)]
pub struct Gatres<'a> {
    pub config: &'a ModelConfig,
    pub weights: &'a ModelWeights,
}

impl Estimator for Gatres<'_> {
    fn predict(
        &self,
        sample: &MaskedSample,
        _topology: &GraphTopology,
        graph: &ModelGraph,
    ) -> Result<Vec<f64>, TrainingError> {
        Ok(gatres_forward(&sample.features, graph, self.weights, self.config)?.output)
    }

    fn mask_options(&self) -> MaskOptions {
        MaskOptions {
            demand_channel: self.config.demand_channel,
            fixed_head_sensors: true,
        }
    }

    fn check_schema(&self, dataset: &SnapshotDataset) -> Result<(), TrainingError> {
        self.config
            .check()
            .and_then(|_| self.weights.check_shapes(self.config))
            .map_err(|e| TrainingError::SchemaMismatch(e.to_string()))?;
        check_dataset(dataset)
    }
}

pub(crate) fn check_dataset(dataset: &SnapshotDataset) -> Result<(), TrainingError> {
    let n = dataset.topology.node_count();
    if dataset.pressures.ncols() != n || dataset.demands.ncols() != n {
        return Err(TrainingError::SchemaMismatch(format!(
            "dataset arrays have {} columns for {n} nodes",
            dataset.pressures.ncols()
        )));
    }
    if dataset.topology.node_static.len() != n {
        return Err(TrainingError::SchemaMismatch("node features do not cover every node".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub masking_ratio: f64,
    pub mask_seed: u64,
    pub trials: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            masking_ratio: 0.95,
            mask_seed: 0,
            trials: 10,
        }
    }
}

/// Seed of mask trial `t` under `mask_seed`.
pub fn trial_seed(mask_seed: u64, t: usize) -> u64 {
    derive_seed(mask_seed, stream::EVAL, t as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub seed: u64,
    pub mae: f64,
    pub mape: f64,
    /// Summed absolute error per node, mH₂O.
    pub node_error: Vec<f64>,
    /// Times each node was scored.
    pub node_count: Vec<usize>,
}

/// Errors over masked junctions in mH₂O, averaged over mask trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub dataset: String,
    pub masking_ratio: f64,
    pub mask_seed: u64,
    pub trials: usize,
    pub snapshots: usize,
    pub mae: f64,
    /// Percent.
    pub mape: f64,
    pub trial_mae: Vec<f64>,
    pub trial_mape: Vec<f64>,
    pub node_ids: Vec<String>,
    /// Mean absolute error per node over every time it was masked.
    pub node_mae: Vec<Option<f64>>,
    pub node_count: Vec<usize>,
}

impl Metrics {
    pub fn node_csv(&self) -> String {
        let mut out = String::from("node,mae,count\n");
        for ((id, mae), count) in self.node_ids.iter().zip(&self.node_mae).zip(&self.node_count) {
            let mae = mae.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{id},{mae},{count}\n"));
        }
        out
    }
}

struct RowErrors {
    abs: f64,
    ape: f64,
    count: usize,
    nodes: Vec<(usize, f64)>,
}

/// One mask trial: snapshot `row` is masked with the stream
/// `(seed, MASK, row)` so that any subset of rows sees the same masks.
pub fn evaluate_trial(
    estimator: &impl Estimator,
    dataset: &SnapshotDataset,
    rows: &[usize],
    norm: &Normalization,
    masking_ratio: f64,
    seed: u64,
) -> Result<TrialMetrics, TrainingError> {
    estimator.check_schema(dataset)?;
    let topo = &dataset.topology;
    let graph = ModelGraph::new(topo);
    let options = estimator.mask_options();
    let per_row: Vec<RowErrors> = rows
        .par_iter()
        .map(|&row| {
            let p = dataset.pressures.row(row);
            let p = p.as_slice().expect("standard layout");
            let d = dataset.demands.row(row);
            let mut rng = rng_for(seed, stream::MASK, row as u64);
            let sample = mask_sample(p, d.as_slice(), topo, norm, masking_ratio, &mut rng, options)?;
            let pred = estimator.predict(&sample, topo, &graph)?;
            if pred.len() != p.len() {
                return Err(TrainingError::SchemaMismatch(format!(
                    "{} predictions for {} nodes",
                    pred.len(),
                    p.len()
                )));
            }
            let mut e = RowErrors {
                abs: 0.0,
                ape: 0.0,
                count: 0,
                nodes: Vec::new(),
            };
            for i in (0..p.len()).filter(|&i| sample.scored[i]) {
                let err = (norm.pressure_inverse(pred[i]) - p[i]).abs();
                e.abs += err;
                e.ape += err / p[i].abs().max(MAPE_FLOOR);
                e.count += 1;
                e.nodes.push((i, err));
            }
            Ok(e)
        })
        .collect::<Result<_, TrainingError>>()?;

    let n = topo.node_count();
    let mut node_error = vec![0.0; n];
    let mut node_count = vec![0; n];
    let (mut abs, mut ape, mut count) = (0.0, 0.0, 0usize);
    for r in per_row {
        abs += r.abs;
        ape += r.ape;
        count += r.count;
        for (i, err) in r.nodes {
            node_error[i] += err;
            node_count[i] += 1;
        }
    }
    let denom = count.max(1) as f64;
    Ok(TrialMetrics {
        seed,
        mae: abs / denom,
        mape: 100.0 * ape / denom,
        node_error,
        node_count,
    })
}

/// Evaluate on `rows` (every snapshot when `None`) under `config.trials`
/// independent masks; headline numbers are the mean over trials.
pub fn evaluate(
    estimator: &impl Estimator,
    dataset: &SnapshotDataset,
    rows: Option<&[usize]>,
    norm: &Normalization,
    config: &EvalConfig,
) -> Result<Metrics, TrainingError> {
    if config.trials == 0 {
        return Err(TrainingError::InvalidConfig("zero mask trials".into()));
    }
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..dataset.len()).collect();
            &all
        }
    };
    if rows.is_empty() {
        return Err(TrainingError::EmptyDataset(dataset.manifest.network.clone()));
    }
    let trials: Vec<TrialMetrics> = (0..config.trials)
        .map(|t| {
            evaluate_trial(
                estimator,
                dataset,
                rows,
                norm,
                config.masking_ratio,
                trial_seed(config.mask_seed, t),
            )
        })
        .collect::<Result<_, _>>()?;
    let n = dataset.topology.node_count();
    let mut err = vec![0.0; n];
    let mut cnt = vec![0; n];
    for t in &trials {
        for i in 0..n {
            err[i] += t.node_error[i];
            cnt[i] += t.node_count[i];
        }
    }
    let k = trials.len() as f64;
    let trial_mae: Vec<f64> = trials.iter().map(|t| t.mae).collect();
    let trial_mape: Vec<f64> = trials.iter().map(|t| t.mape).collect();
    Ok(Metrics {
        dataset: dataset.manifest.network.clone(),
        masking_ratio: config.masking_ratio,
        mask_seed: config.mask_seed,
        trials: config.trials,
        snapshots: rows.len(),
        mae: trial_mae.iter().sum::<f64>() / k,
        mape: trial_mape.iter().sum::<f64>() / k,
        trial_mae,
        trial_mape,
        node_ids: dataset.topology.node_ids.clone(),
        node_mae: err
            .iter()
            .zip(&cnt)
            .map(|(e, &c)| (c > 0).then(|| e / c as f64))
            .collect(),
        node_count: cnt,
    })
}
