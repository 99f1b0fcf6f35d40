use super::{same_topology, GeneratorError, SnapshotDataset};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BINS: usize = 100;

/// Pooled junction-pressure densities of two sample sets on shared bins and
/// their two-sample Kolmogorov-Smirnov distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    /// `bins + 1` shared bin edges, mH₂O.
    pub edges: Vec<f64>,
    pub density_a: Vec<f64>,
    pub density_b: Vec<f64>,
    pub ks: f64,
    pub count_a: usize,
    pub count_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub variance_a: f64,
    pub variance_b: f64,
}

/// Largest gap between the empirical distribution functions of `a` and `b`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Step past every copy of the smaller value before comparing, so tied
        // values are counted on both sides at once.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn moments(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

fn density(values: &[f64], edges: &[f64]) -> Vec<f64> {
    let bins = edges.len() - 1;
    let lo = edges[0];
    let width = (edges[bins] - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let norm = values.len().max(1) as f64 * width;
    counts.iter().map(|&c| c as f64 / norm).collect()
}

/// Shift report of two raw value pools.
pub fn shift_report(a: &[f64], b: &[f64], bins: usize) -> ShiftReport {
    let bins = bins.max(1);
    let (mut lo, mut hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let edges: Vec<f64> = (0..=bins)
        .map(|k| {
            if k == bins {
                hi
            } else {
                lo + (hi - lo) * k as f64 / bins as f64
            }
        })
        .collect();
    let (mean_a, variance_a) = moments(a);
    let (mean_b, variance_b) = moments(b);
    ShiftReport {
        density_a: density(a, &edges),
        density_b: density(b, &edges),
        edges,
        ks: ks_statistic(a, b),
        count_a: a.len(),
        count_b: b.len(),
        mean_a,
        mean_b,
        variance_a,
        variance_b,
    }
}

/// Compare the pooled junction pressures of two datasets on one network.
pub fn distribution_report(
    a: &SnapshotDataset,
    b: &SnapshotDataset,
) -> Result<ShiftReport, GeneratorError> {
    if !same_topology(&a.topology, &b.topology) {
        return Err(GeneratorError::TopologyMismatch);
    }
    Ok(shift_report(
        &a.pooled_junction_pressures(None),
        &b.pooled_junction_pressures(None),
        DEFAULT_BINS,
    ))
}
