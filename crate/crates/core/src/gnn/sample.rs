use super::GnnError;
use crate::generator::Normalization;
use crate::graph::GraphTopology;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mae,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskOptions {
    pub demand_channel: bool,
    /// Reservoirs and tanks always report their pressure.
    pub fixed_head_sensors: bool,
}

impl Default for MaskOptions {
    fn default() -> Self {
        MaskOptions {
            demand_channel: false,
            fixed_head_sensors: true,
        }
    }
}

/// One estimation instance.
///
/// Feature columns are `[observed pressure, sensor bit, elevation]` plus an
/// optional demand column, all normalized. The observed pressure is exactly
/// zero wherever the sensor bit is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSample {
    pub features: Array2<f64>,
    /// `true` where a sensor reports the pressure.
    pub sensors: Vec<bool>,
    /// Normalized pressure of every node.
    pub target: Vec<f64>,
    /// Junctions without a sensor: the only nodes scored by the loss.
    pub scored: Vec<bool>,
}

impl MaskedSample {
    pub fn node_count(&self) -> usize {
        self.target.len()
    }

    pub fn scored_count(&self) -> usize {
        self.scored.iter().filter(|s| **s).count()
    }
}

/// Number of junction sensors for masking ratio `ratio`: the nearest integer
/// to `(1 - ratio) * junctions`, at least one, and leaving at least one
/// junction unobserved.
pub fn sensor_count(junctions: usize, ratio: f64) -> Result<usize, GnnError> {
    let err = GnnError::RatioOutOfRange { ratio, junctions };
    if !(ratio > 0.0 && ratio < 1.0) || junctions == 0 {
        return Err(err);
    }
    let k = (((1.0 - ratio) * junctions as f64).round() as usize).max(1);
    if k >= junctions {
        return Err(err);
    }
    Ok(k)
}

/// Hide all but a uniformly drawn subset of junctions.
#[allow(clippy::too_many_arguments)]
pub fn mask_sample(
    pressures: &[f64],
    demands: Option<&[f64]>,
    topology: &GraphTopology,
    norm: &Normalization,
    ratio: f64,
    rng: &mut impl Rng,
    options: MaskOptions,
) -> Result<MaskedSample, GnnError> {
    let n = topology.node_count();
    if pressures.len() != n {
        return Err(GnnError::ShapeMismatch(format!(
            "{} pressures for {n} nodes",
            pressures.len()
        )));
    }
    let junctions: Vec<usize> = (0..n).filter(|&i| topology.is_junction(i)).collect();
    let k = sensor_count(junctions.len(), ratio)?;
    let mut sensors = vec![false; n];
    for pick in rand::seq::index::sample(rng, junctions.len(), k) {
        sensors[junctions[pick]] = true;
    }
    if options.fixed_head_sensors {
        for (i, s) in sensors.iter_mut().enumerate() {
            if !topology.is_junction(i) {
                *s = true;
            }
        }
    }
    let width = 3 + usize::from(options.demand_channel);
    let mut features = Array2::zeros((n, width));
    let target: Vec<f64> = pressures.iter().map(|&p| norm.pressure(p)).collect();
    for i in 0..n {
        if sensors[i] {
            features[[i, 0]] = target[i];
            features[[i, 1]] = 1.0;
        }
        features[[i, 2]] = norm.elevation(topology.node_static[i]);
        if options.demand_channel {
            let d = demands.and_then(|d| d.get(i)).copied().unwrap_or(0.0);
            features[[i, 3]] = norm.demand(d);
        }
    }
    let scored = (0..n)
        .map(|i| topology.is_junction(i) && !sensors[i])
        .collect();
    Ok(MaskedSample {
        features,
        sensors,
        target,
        scored,
    })
}

/// Sample from field readings: every node with a finite entry in `observed`
/// (mH₂O) is a sensor. No targets are known, so `target` is zero.
pub fn observed_sample(
    observed: &[f64],
    demands: Option<&[f64]>,
    topology: &GraphTopology,
    norm: &Normalization,
    demand_channel: bool,
) -> Result<MaskedSample, GnnError> {
    let n = topology.node_count();
    if observed.len() != n {
        return Err(GnnError::ShapeMismatch(format!(
            "{} readings for {n} nodes",
            observed.len()
        )));
    }
    let sensors: Vec<bool> = observed.iter().map(|v| v.is_finite()).collect();
    let width = 3 + usize::from(demand_channel);
    let mut features = Array2::zeros((n, width));
    for i in 0..n {
        if sensors[i] {
            features[[i, 0]] = norm.pressure(observed[i]);
            features[[i, 1]] = 1.0;
        }
        features[[i, 2]] = norm.elevation(topology.node_static[i]);
        if demand_channel {
            let d = demands.and_then(|d| d.get(i)).copied().unwrap_or(0.0);
            features[[i, 3]] = norm.demand(d);
        }
    }
    Ok(MaskedSample {
        features,
        scored: (0..n).map(|i| topology.is_junction(i) && !sensors[i]).collect(),
        sensors,
        target: vec![0.0; n],
    })
}

/// Mean absolute (or squared) error over scored nodes, and its gradient with
/// respect to every prediction.
pub(crate) fn loss_with_gradient(
    pred: &[f64],
    sample: &MaskedSample,
    kind: LossKind,
) -> Result<(f64, Vec<f64>), GnnError> {
    if pred.len() != sample.node_count() {
        return Err(GnnError::ShapeMismatch(format!(
            "{} predictions for {} nodes",
            pred.len(),
            sample.node_count()
        )));
    }
    let m = sample.scored_count();
    if m == 0 {
        return Err(GnnError::EmptyMaskSupport);
    }
    let inv = 1.0 / m as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for i in 0..pred.len() {
        if !sample.scored[i] {
            continue;
        }
        let r = pred[i] - sample.target[i];
        match kind {
            LossKind::Mae => {
                loss += r.abs();
                grad[i] = if r > 0.0 {
                    inv
                } else if r < 0.0 {
                    -inv
                } else {
                    0.0
                };
            }
            LossKind::Mse => {
                loss += r * r;
                grad[i] = 2.0 * r * inv;
            }
        }
    }
    Ok((loss * inv, grad))
}

pub fn masked_loss(pred: &[f64], sample: &MaskedSample, kind: LossKind) -> Result<f64, GnnError> {
    loss_with_gradient(pred, sample, kind).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeKind;
    use crate::seed::Rng;
    use rand::SeedableRng;

    fn path(n: usize) -> GraphTopology {
        let mut kinds = vec![NodeKind::Junction; n];
        kinds[n - 1] = NodeKind::Reservoir;
        GraphTopology {
            node_ids: (0..n).map(|i| i.to_string()).collect(),
            node_kinds: kinds,
            node_static: vec![0.0; n],
            link_ids: vec![],
            sources: vec![],
            targets: vec![],
            edge_attr: vec![],
        }
    }

    fn norm() -> Normalization {
        Normalization {
            pressure: [0.0, 100.0],
            elevation: [0.0, 0.0],
            demand: [0.0, 1.0],
        }
    }

    #[test]
    fn ninety_five_percent_of_a_hundred() {
        assert_eq!(sensor_count(100, 0.95).unwrap(), 5);
    }

    #[test]
    fn too_few_masked_is_rejected() {
        assert!(sensor_count(10, 1e-9).is_err());
        assert!(sensor_count(10, 0.0).is_err());
        assert!(sensor_count(10, 1.0).is_err());
    }

    #[test]
    fn observed_channel_zero_where_masked() {
        let topo = path(21);
        let p: Vec<f64> = (0..21).map(|i| 10.0 + i as f64).collect();
        let s = mask_sample(&p, None, &topo, &norm(), 0.9, &mut Rng::seed_from_u64(1), MaskOptions::default())
            .unwrap();
        assert_eq!(s.sensors[..20].iter().filter(|x| **x).count(), 2);
        assert!(s.sensors[20]);
        for i in 0..21 {
            assert_eq!(s.features[[i, 1]] == 1.0, s.sensors[i]);
            if !s.sensors[i] {
                assert_eq!(s.features[[i, 0]], 0.0);
            }
        }
        assert_eq!(s.scored_count(), 18);
        let again = mask_sample(&p, None, &topo, &norm(), 0.9, &mut Rng::seed_from_u64(1), MaskOptions::default())
            .unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn loss_values() {
        let topo = path(5);
        let p = [10.0, 20.0, 30.0, 40.0, 50.0];
        let s = mask_sample(&p, None, &topo, &norm(), 0.5, &mut Rng::seed_from_u64(4), MaskOptions::default())
            .unwrap();
        assert_eq!(masked_loss(&s.target, &s, LossKind::Mae).unwrap(), 0.0);
        let shifted: Vec<f64> = s.target.iter().map(|t| t + 0.5).collect();
        assert!((masked_loss(&shifted, &s, LossKind::Mae).unwrap() - 0.5).abs() < 1e-15);
    }
}
