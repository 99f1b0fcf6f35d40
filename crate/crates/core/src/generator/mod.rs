//! Snapshot generation.
//!
//! Training data comes from independent steady states under randomly drawn
//! controls. Test data for the realistic protocol follows the demand
//! patterns of a day, with Gaussian noise injected into the inputs before
//! each solve. Both land in the same [`SnapshotDataset`] layout.

mod shift;
mod store;

pub use shift::{distribution_report, ks_statistic, shift_report, ShiftReport, DEFAULT_BINS};
pub use store::{
    read_dataset, write_dataset, ArraySpec, DatasetManifest, Normalization, SnapshotDataset,
    Split, CHUNK_ROWS, DATASET_FORMAT,
};

use crate::graph::{to_graph, GraphTopology};
use crate::hydraulics::{ControlSettings, HydraulicSolver, SolverConfig, SolverError};
use crate::network::NetworkModel;
use crate::seed::{derive_seed, rng_for, stream};
use crate::validate::ValidationReport;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ranges of the randomized controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Multiplier range applied to each junction's base demand.
    pub demand_range: [f64; 2],
    /// Reservoir heads move uniformly within `±head_delta` metres.
    pub head_delta: f64,
    pub speed_range: [f64; 2],
    /// Draw one demand multiplier per junction. When false a single
    /// multiplier per snapshot scales every junction.
    pub independent: bool,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            demand_range: [0.2, 2.0],
            head_delta: 5.0,
            speed_range: [0.8, 1.2],
            independent: true,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    fn check(&self) -> Result<(), GeneratorError> {
        let [d_lo, d_hi] = self.demand_range;
        let [w_lo, w_hi] = self.speed_range;
        let ok = d_lo.is_finite()
            && d_hi.is_finite()
            && 0.0 <= d_lo
            && d_lo <= d_hi
            && w_lo.is_finite()
            && w_hi.is_finite()
            && 0.0 < w_lo
            && w_lo <= w_hi
            && self.head_delta.is_finite()
            && self.head_delta >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(GeneratorError::InvalidConfig(format!(
                "sampling ranges are empty or out of bounds: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Relative standard deviation of junction demands.
    pub sigma_demand: f64,
    /// Standard deviation of reservoir heads, m.
    pub sigma_head: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_demand: 0.05,
            sigma_head: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternSource {
    /// Each demand category follows its own pattern from the file, falling
    /// back to the default pattern. Files without patterns use the diurnal
    /// template.
    Model,
    /// One named pattern of the file for every junction.
    Named(String),
    /// The built-in diurnal template for every junction.
    Diurnal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    pub timesteps: usize,
    /// Hours between consecutive snapshots.
    pub timestep_hours: f64,
    pub source: PatternSource,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            timesteps: 24,
            timestep_hours: 1.0,
            source: PatternSource::Model,
        }
    }
}

/// Hourly demand multipliers of a day: a night trough and morning and
/// evening peaks, with mean exactly one.
pub const DIURNAL_TEMPLATE: [f64; 24] = [
    0.55, 0.45, 0.5, 0.5, 0.45, 0.65, 1.0, 1.45, 1.55, 1.35, 1.15, 1.1, 1.1, 1.05, 1.0, 1.0, 1.1,
    1.3, 1.5, 1.45, 1.25, 1.0, 0.8, 0.75,
];

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("model failed validation with {} issue(s)", .0.issues.len())]
    InvalidModel(ValidationReport),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pattern {0:?} is not defined in the network")]
    UnknownPattern(String),
    #[error("{failures} of {window} solves failed to converge; the sampling ranges look infeasible")]
    GenerationStalled { window: usize, failures: usize },
    #[error(transparent)]
    Solver(SolverError),
    #[error("datasets are on different topologies")]
    TopologyMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("dataset manifest: {0}")]
    Manifest(String),
}

impl From<SolverError> for GeneratorError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidModel(r) => GeneratorError::InvalidModel(r),
            other => GeneratorError::Solver(other),
        }
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draw one set of controls. Zero-width ranges reproduce the base values
/// exactly.
pub fn sample_controls(
    model: &NetworkModel,
    cfg: &SamplingConfig,
    rng: &mut impl Rng,
) -> ControlSettings {
    let mut c = ControlSettings::base(model);
    if cfg.independent {
        for d in c.demands.iter_mut() {
            *d *= uniform(rng, cfg.demand_range);
        }
    } else {
        let m = uniform(rng, cfg.demand_range);
        c.demands.iter_mut().for_each(|d| *d *= m);
    }
    for h in c.reservoir_heads.iter_mut() {
        *h += uniform(rng, [-cfg.head_delta, cfg.head_delta]);
    }
    for w in c.pump_speeds.iter_mut() {
        *w = uniform(rng, cfg.speed_range);
    }
    c
}

/// One solved steady state in canonical node order.
#[derive(Debug, Clone)]
pub(crate) struct Snapshot {
    pub pressures: Vec<f64>,
    pub heads: Vec<f64>,
    pub demands: Vec<f64>,
    pub controls: Vec<f64>,
}

fn snapshot_of(
    solver: &HydraulicSolver,
    controls: &ControlSettings,
    nodes: usize,
) -> Result<Option<Snapshot>, SolverError> {
    match solver.solve(controls) {
        Ok(state) => {
            let mut demands = controls.demands.clone();
            demands.resize(nodes, 0.0);
            Ok(Some(Snapshot {
                pressures: state.pressures,
                heads: state.heads,
                demands,
                controls: controls.to_vector(),
            }))
        }
        Err(SolverError::NotConverged(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

const WINDOW_MIN: usize = 16;
const WINDOW_MAX: usize = 256;

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
}

/// Generate `count` converged snapshots under randomized controls.
///
/// Attempt `k` always uses the random stream derived from `(seed, k)` and
/// attempts are consumed in index order, so the output does not depend on
/// `workers`. Attempts that fail to converge are discarded and counted.
pub fn generate_snapshots(
    model: &NetworkModel,
    cfg: &SamplingConfig,
    count: usize,
    solver_cfg: &SolverConfig,
    workers: usize,
) -> Result<SnapshotDataset, GeneratorError> {
    cfg.check()?;
    if count == 0 {
        return Err(GeneratorError::InvalidConfig("snapshot count must be positive".into()));
    }
    let topology = to_graph(model).map_err(|e| GeneratorError::InvalidModel(e.0))?;
    let solver = HydraulicSolver::new(model, *solver_cfg)?;
    let nodes = topology.node_count();
    let pool = pool(workers);

    let mut snapshots = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let mut discarded = 0usize;
    let mut next = 0u64;
    while snapshots.len() < count {
        let window = (count - snapshots.len()).clamp(WINDOW_MIN, WINDOW_MAX);
        let results: Vec<Result<Option<Snapshot>, SolverError>> = pool.install(|| {
            (next..next + window as u64)
                .into_par_iter()
                .map(|k| {
                    let mut rng = rng_for(cfg.seed, stream::SNAPSHOT, k);
                    let controls = sample_controls(model, cfg, &mut rng);
                    snapshot_of(&solver, &controls, nodes)
                })
                .collect()
        });
        next += window as u64;
        let failures = results.iter().filter(|r| matches!(r, Ok(None))).count();
        if 2 * failures > window {
            return Err(GeneratorError::GenerationStalled { window, failures });
        }
        for r in results {
            if snapshots.len() == count {
                break;
            }
            attempts += 1;
            match r? {
                Some(s) => snapshots.push(s),
                None => discarded += 1,
            }
        }
    }

    let manifest = DatasetManifest::new(
        model,
        &topology,
        solver_cfg,
        snapshots.len(),
        attempts,
        discarded,
        derive_seed(cfg.seed, stream::SPLIT, 0),
    )
    .with_sampling(cfg.clone());
    Ok(SnapshotDataset::assemble(topology, snapshots, manifest))
}

/// Multiplier of every demand category of every junction at hour `hour`.
fn pattern_multipliers(
    model: &NetworkModel,
    cfg: &PatternConfig,
    hour: f64,
) -> Result<Vec<Vec<f64>>, GeneratorError> {
    let diurnal = DIURNAL_TEMPLATE[(hour.floor() as usize) % DIURNAL_TEMPLATE.len()];
    let from_file = |values: &[f64]| -> f64 {
        let step = (hour * 3600.0 / model.options.pattern_timestep + 1e-9).floor() as usize;
        values[step % values.len()]
    };
    let named = match &cfg.source {
        PatternSource::Named(name) => Some(
            model
                .patterns
                .get(name)
                .filter(|v| !v.is_empty())
                .ok_or_else(|| GeneratorError::UnknownPattern(name.clone()))?,
        ),
        _ => None,
    };
    let use_template =
        cfg.source == PatternSource::Diurnal || (named.is_none() && model.patterns.is_empty());
    let implicit_default = model
        .options
        .default_pattern
        .is_none()
        .then(|| model.patterns.get("1"))
        .flatten();
    Ok(model
        .junctions
        .iter()
        .map(|j| {
            j.categories()
                .map(|(_, pattern)| {
                    if use_template {
                        diurnal
                    } else if let Some(values) = named {
                        from_file(values)
                    } else {
                        match model
                            .resolve_pattern(pattern)
                            .or(implicit_default.map(Vec::as_slice))
                        {
                            Some(values) if !values.is_empty() => from_file(values),
                            _ => 1.0,
                        }
                    }
                })
                .collect()
        })
        .collect())
}

const REALISTIC_ATTEMPTS: u64 = 16;

/// Generate one snapshot per time step of a patterned day with noisy inputs.
///
/// At step `t` junction demand is `Σ base·pattern(t)·(1 + ε)` with
/// `ε ~ N(0, σ_demand²)` per junction, clamped so demand stays non-negative,
/// and reservoir heads receive additive `N(0, σ_head²)` noise. Pump speeds
/// stay at their base values. A step whose noisy inputs fail to converge is
/// redrawn.
pub fn generate_realistic_testset(
    model: &NetworkModel,
    pattern_cfg: &PatternConfig,
    noise_cfg: &NoiseConfig,
    solver_cfg: &SolverConfig,
    workers: usize,
) -> Result<SnapshotDataset, GeneratorError> {
    if pattern_cfg.timesteps == 0 || pattern_cfg.timestep_hours.is_nan() || pattern_cfg.timestep_hours <= 0.0 {
        return Err(GeneratorError::InvalidConfig(
            "pattern timesteps and step length must be positive".into(),
        ));
    }
    if !(noise_cfg.sigma_demand >= 0.0 && noise_cfg.sigma_head >= 0.0)
        || !noise_cfg.sigma_demand.is_finite()
        || !noise_cfg.sigma_head.is_finite()
    {
        return Err(GeneratorError::InvalidConfig(
            "noise standard deviations must be finite and non-negative".into(),
        ));
    }
    let topology = to_graph(model).map_err(|e| GeneratorError::InvalidModel(e.0))?;
    let solver = HydraulicSolver::new(model, *solver_cfg)?;
    let nodes = topology.node_count();
    let mult = model.options.demand_multiplier;
    let steps: Vec<Vec<Vec<f64>>> = (0..pattern_cfg.timesteps)
        .map(|t| pattern_multipliers(model, pattern_cfg, t as f64 * pattern_cfg.timestep_hours))
        .collect::<Result<_, _>>()?;
    if steps.iter().flatten().flatten().any(|m| m.is_nan() || *m < 0.0) {
        return Err(GeneratorError::InvalidConfig(
            "pattern multipliers must be non-negative".into(),
        ));
    }
    let demand_noise = Normal::new(0.0, noise_cfg.sigma_demand)
        .map_err(|e| GeneratorError::InvalidConfig(e.to_string()))?;
    let head_noise = Normal::new(0.0, noise_cfg.sigma_head)
        .map_err(|e| GeneratorError::InvalidConfig(e.to_string()))?;

    let run_step = |t: usize| -> Result<(Option<Snapshot>, usize), SolverError> {
        let step_seed = derive_seed(noise_cfg.seed, stream::REALISTIC, t as u64);
        for attempt in 0..REALISTIC_ATTEMPTS {
            let mut rng = rng_for(step_seed, 0, attempt);
            let mut c = ControlSettings::base(model);
            for ((d, j), m) in c.demands.iter_mut().zip(&model.junctions).zip(&steps[t]) {
                let patterned: f64 = j.categories().zip(m).map(|((b, _), k)| b * k).sum();
                let eps: f64 = demand_noise.sample(&mut rng);
                *d = patterned * mult * (1.0 + eps).max(0.0);
            }
            for h in c.reservoir_heads.iter_mut() {
                *h += head_noise.sample(&mut rng);
            }
            if let Some(s) = snapshot_of(&solver, &c, nodes)? {
                return Ok((Some(s), attempt as usize));
            }
        }
        Ok((None, REALISTIC_ATTEMPTS as usize))
    };
    let results: Vec<Result<(Option<Snapshot>, usize), SolverError>> =
        pool(workers).install(|| (0..pattern_cfg.timesteps).into_par_iter().map(run_step).collect());

    let mut snapshots = Vec::with_capacity(pattern_cfg.timesteps);
    let mut discarded = 0;
    for r in results {
        let (snapshot, failed) = r?;
        discarded += failed;
        match snapshot {
            Some(s) => snapshots.push(s),
            None => {
                return Err(GeneratorError::GenerationStalled {
                    window: REALISTIC_ATTEMPTS as usize,
                    failures: failed,
                })
            }
        }
    }
    let attempts = snapshots.len() + discarded;
    if 2 * discarded > attempts {
        return Err(GeneratorError::GenerationStalled {
            window: attempts,
            failures: discarded,
        });
    }
    let manifest = DatasetManifest::new(
        model,
        &topology,
        solver_cfg,
        snapshots.len(),
        attempts,
        discarded,
        derive_seed(noise_cfg.seed, stream::SPLIT, 0),
    )
    .with_realistic(pattern_cfg.clone(), noise_cfg.clone());
    Ok(SnapshotDataset::assemble(topology, snapshots, manifest))
}

/// Topology check shared by consumers that pair two datasets.
pub fn same_topology(a: &GraphTopology, b: &GraphTopology) -> bool {
    a.node_ids == b.node_ids && a.sources == b.sources && a.targets == b.targets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inp::parse_inp;
    use crate::seed::Rng;
    use rand::SeedableRng;

    fn model() -> NetworkModel {
        parse_inp(
            "[JUNCTIONS]\nJ1 10 5\nJ2 12 3\n[RESERVOIRS]\nR1 60\n[PIPES]\n\
             P1 R1 J1 500 200 110\nP2 J1 J2 400 150 110\n[OPTIONS]\nUnits LPS\n",
        )
        .unwrap()
    }

    #[test]
    fn diurnal_mean_is_one() {
        let mean: f64 = DIURNAL_TEMPLATE.iter().sum::<f64>() / 24.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ranges_give_base_controls() {
        let m = model();
        let cfg = SamplingConfig {
            demand_range: [1.0, 1.0],
            head_delta: 0.0,
            speed_range: [1.0, 1.0],
            ..Default::default()
        };
        let c = sample_controls(&m, &cfg, &mut Rng::seed_from_u64(3));
        assert_eq!(c, ControlSettings::base(&m));
    }

    #[test]
    fn empty_ranges_rejected() {
        let cfg = SamplingConfig {
            demand_range: [2.0, 1.0],
            ..Default::default()
        };
        assert!(matches!(
            generate_snapshots(&model(), &cfg, 1, &SolverConfig::default(), 1),
            Err(GeneratorError::InvalidConfig(_))
        ));
    }

    #[test]
    fn file_patterns_follow_their_timestep() {
        let mut m = model();
        m.patterns.insert("1".into(), vec![1.0, 2.0, 3.0]);
        m.options.pattern_timestep = 7200.0;
        let cfg = PatternConfig::default();
        let at = |h: f64| pattern_multipliers(&m, &cfg, h).unwrap()[0][0];
        assert_eq!([at(0.0), at(1.0), at(2.0), at(4.0), at(6.0)], [1.0, 1.0, 2.0, 3.0, 1.0]);
    }
}
