use super::eval::check_dataset;
use super::{evaluate, EvalConfig, Gatres, OptimizerState, TrainConfig, TrainingError};
use crate::generator::SnapshotDataset;
use crate::gnn::{loss_and_gradient, mask_sample, GnnError, MaskOptions, ModelConfig, ModelGraph, ModelWeights};
use crate::seed::{derive_seed, rng_for, stream, Rng};
use rand::{Rng as _, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Per-epoch record. Contains nothing time-dependent, so equal seeds give
/// equal histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean normalized training loss.
    pub train_loss: Vec<f64>,
    /// Validation MAE in mH₂O, averaged over datasets.
    pub val_mae: Vec<f64>,
    pub val_mape: Vec<f64>,
    /// Validation MAE and MAPE of the starting weights.
    pub initial_val_mae: f64,
    pub initial_val_mape: f64,
    /// Epoch whose weights were returned; `None` keeps the starting weights.
    pub best_epoch: Option<usize>,
    pub best_val_mae: f64,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTiming {
    pub epoch_seconds: Vec<f64>,
    /// Training samples per second.
    pub throughput: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    pub history: TrainHistory,
    pub timing: TrainTiming,
}

struct Prepared<'a> {
    dataset: &'a SnapshotDataset,
    graph: ModelGraph,
}

fn prepare<'a>(datasets: &[&'a SnapshotDataset]) -> Result<Vec<Prepared<'a>>, TrainingError> {
    if datasets.is_empty() {
        return Err(TrainingError::EmptyDataset("no dataset given".into()));
    }
    datasets
        .iter()
        .map(|&ds| {
            check_dataset(ds)?;
            let split = &ds.manifest.split;
            if ds.len() < 2 || split.train.is_empty() || split.validation.is_empty() {
                return Err(TrainingError::EmptyDataset(ds.manifest.network.clone()));
            }
            if split.train.iter().chain(&split.validation).any(|&r| r >= ds.len()) {
                return Err(TrainingError::SchemaMismatch(format!(
                    "split of {} refers past its {} snapshots",
                    ds.manifest.network,
                    ds.len()
                )));
            }
            Ok(Prepared {
                dataset: ds,
                graph: ModelGraph::new(&ds.topology),
            })
        })
        .collect()
}

/// Mean validation `(MAE, MAPE)` over datasets.
fn validate(
    sets: &[Prepared],
    weights: &ModelWeights,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<(f64, f64), TrainingError> {
    let est = Gatres { config: model, weights };
    let eval = EvalConfig {
        masking_ratio: config.masking_ratio,
        mask_seed: derive_seed(config.seed, stream::EVAL, 0),
        trials: config.validation_trials,
    };
    let mut mae = 0.0;
    let mut mape = 0.0;
    for s in sets {
        let ds = s.dataset;
        let m = evaluate(&est, ds, Some(&ds.manifest.split.validation), &ds.manifest.normalization, &eval)?;
        mae += m.mae;
        mape += m.mape;
    }
    let k = sets.len() as f64;
    Ok((mae / k, mape / k))
}

/// One drawn training sample: dataset, snapshot row and mask seed.
type Draw = (usize, usize, u64);

fn draw(rng: &mut Rng, sets: &[Prepared], total: usize) -> Draw {
    let mut pick = rng.random_range(0..total);
    let mut d = 0;
    while pick >= sets[d].dataset.manifest.split.train.len() {
        pick -= sets[d].dataset.manifest.split.train.len();
        d += 1;
    }
    let train = &sets[d].dataset.manifest.split.train;
    let row = train[rng.random_range(0..train.len())];
    (d, row, rng.random())
}

fn diverged(e: TrainingError, epoch: usize, step: usize) -> TrainingError {
    match e {
        TrainingError::Gnn(GnnError::NonFiniteGradient(_) | GnnError::NonFiniteActivation(_)) => {
            TrainingError::DivergedTraining { epoch, step }
        }
        other => other,
    }
}

fn run(
    sets: &[Prepared],
    mut weights: ModelWeights,
    model: &ModelConfig,
    config: &TrainConfig,
    lr: f64,
) -> Result<TrainOutcome, TrainingError> {
    config.check()?;
    model
        .check()
        .and_then(|_| weights.check_shapes(model))
        .map_err(|e| TrainingError::SchemaMismatch(e.to_string()))?;
    let options = MaskOptions {
        demand_channel: model.demand_channel,
        fixed_head_sensors: true,
    };
    let total: usize = sets.iter().map(|s| s.dataset.manifest.split.train.len()).sum();
    let steps = total.div_ceil(config.batch_size);

    let (initial_mae, initial_mape) = validate(sets, &weights, model, config)?;
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_mae: Vec::new(),
        val_mape: Vec::new(),
        initial_val_mae: initial_mae,
        initial_val_mape: initial_mape,
        best_epoch: None,
        best_val_mae: initial_mae,
        stopped_early: false,
    };
    let mut timing = TrainTiming {
        epoch_seconds: Vec::new(),
        throughput: Vec::new(),
    };
    let mut best = weights.clone();
    let mut optimizer = OptimizerState::new(config.optimizer, &weights);
    let mut stale = 0;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut rng = rng_for(config.seed, stream::TRAIN, epoch as u64);
        let mut loss_sum = 0.0;
        let mut samples = 0usize;
        for step in 0..steps {
            let batch = config.batch_size.min(total - step * config.batch_size);
            let draws: Vec<Draw> = (0..batch).map(|_| draw(&mut rng, sets, total)).collect();
            let results: Vec<(f64, ModelWeights)> = draws
                .par_iter()
                .map(|&(d, row, mask_seed)| {
                    let ds = sets[d].dataset;
                    let p = ds.pressures.row(row);
                    let dem = ds.demands.row(row);
                    let mut mrng = Rng::seed_from_u64(mask_seed);
                    let sample = mask_sample(
                        p.as_slice().expect("standard layout"),
                        dem.as_slice(),
                        &ds.topology,
                        &ds.manifest.normalization,
                        config.masking_ratio,
                        &mut mrng,
                        options,
                    )?;
                    Ok(loss_and_gradient(&sample, &sets[d].graph, &weights, model, config.loss)?)
                })
                .collect::<Result<_, TrainingError>>()
                .map_err(|e| diverged(e, epoch, step))?;

            let mut grad = ModelWeights::zeros(model);
            let inv = 1.0 / results.len() as f64;
            for (loss, g) in &results {
                if !loss.is_finite() {
                    return Err(TrainingError::DivergedTraining { epoch, step });
                }
                loss_sum += loss;
                grad.add_scaled(g, inv);
            }
            samples += results.len();
            let norm = grad.l2_norm();
            if norm > config.clip_norm {
                grad.scale(config.clip_norm / norm);
            }
            optimizer.step(&mut weights, &grad, lr);
            if weights.first_non_finite().is_some() {
                return Err(TrainingError::DivergedTraining { epoch, step });
            }
        }
        let (mae, mape) = validate(sets, &weights, model, config)?;
        let secs = started.elapsed().as_secs_f64();
        timing.epoch_seconds.push(secs);
        timing.throughput.push(samples as f64 / secs.max(1e-9));
        history.train_loss.push(loss_sum / samples.max(1) as f64);
        history.val_mae.push(mae);
        history.val_mape.push(mape);
        if mae < history.best_val_mae {
            history.best_val_mae = mae;
            history.best_epoch = Some(epoch);
            best = weights.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        weights: best,
        history,
        timing,
    })
}

/// Train from freshly initialized weights on one dataset.
pub fn train(
    dataset: &SnapshotDataset,
    config: &TrainConfig,
    model: &ModelConfig,
) -> Result<TrainOutcome, TrainingError> {
    pretrain_multi(&[dataset], config, model)
}

/// Train one weight set on several networks at once. Each sample picks a
/// network with probability proportional to its training split, so a single
/// dataset reduces exactly to [`train`].
pub fn pretrain_multi(
    datasets: &[&SnapshotDataset],
    config: &TrainConfig,
    model: &ModelConfig,
) -> Result<TrainOutcome, TrainingError> {
    let sets = prepare(datasets)?;
    model
        .check()
        .map_err(|e| TrainingError::SchemaMismatch(e.to_string()))?;
    let weights = ModelWeights::init(model, derive_seed(config.seed, stream::INIT, 0));
    run(&sets, weights, model, config, config.learning_rate)
}

/// Continue training `weights` on `dataset` at a reduced learning rate. The
/// starting weights compete for best validation score, so the result never
/// validates worse than its input.
pub fn fine_tune(
    weights: &ModelWeights,
    model: &ModelConfig,
    dataset: &SnapshotDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainingError> {
    let sets = prepare(&[dataset])?;
    run(
        &sets,
        weights.clone(),
        model,
        config,
        config.learning_rate * config.fine_tune_factor,
    )
}
