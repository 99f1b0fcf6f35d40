use super::{GeneratorError, NoiseConfig, PatternConfig, SamplingConfig, Snapshot};
use crate::graph::{GraphTopology, EDGE_ATTR_DIM};
use crate::hydraulics::SolverConfig;
use crate::network::{NetworkModel, NodeKind};
use crate::seed::Rng;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const DATASET_FORMAT: &str = "gatres-dataset/1";
/// Arrays are written in blocks of this many snapshot rows.
pub const CHUNK_ROWS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub file: String,
    pub dtype: String,
    pub shape: Vec<usize>,
}

/// Snapshot indices of the training and validation parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Split {
    /// Seeded shuffle, one tenth (at least one snapshot) held out when there
    /// are two or more snapshots. Both lists are returned sorted.
    pub fn new(snapshots: usize, seed: u64) -> Split {
        let mut order: Vec<usize> = (0..snapshots).collect();
        order.shuffle(&mut Rng::seed_from_u64(seed));
        let held = if snapshots >= 2 {
            ((snapshots as f64 * 0.1).round() as usize).max(1)
        } else {
            0
        };
        let mut validation = order[..held].to_vec();
        let mut train = order[held..].to_vec();
        validation.sort_unstable();
        train.sort_unstable();
        Split {
            seed,
            train,
            validation,
        }
    }
}

/// Per-channel `[min, max]` of the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub pressure: [f64; 2],
    pub elevation: [f64; 2],
    pub demand: [f64; 2],
}

fn scale(v: f64, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        v - lo
    }
}

fn unscale(v: f64, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        lo + v * (hi - lo)
    } else {
        lo + v
    }
}

impl Normalization {
    pub fn pressure(&self, p: f64) -> f64 {
        scale(p, self.pressure)
    }

    pub fn pressure_inverse(&self, v: f64) -> f64 {
        unscale(v, self.pressure)
    }

    /// Factor turning a normalized pressure difference into mH₂O.
    pub fn pressure_span(&self) -> f64 {
        let [lo, hi] = self.pressure;
        if hi > lo {
            hi - lo
        } else {
            1.0
        }
    }

    pub fn elevation(&self, z: f64) -> f64 {
        scale(z, self.elevation)
    }

    pub fn demand(&self, d: f64) -> f64 {
        scale(d, self.demand)
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> [f64; 2] {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo.is_finite() {
        [lo, hi]
    } else {
        [0.0, 0.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub tool_version: String,
    pub network: String,
    pub input_sha256: Option<String>,
    pub realistic: bool,
    pub sampling: Option<SamplingConfig>,
    pub patterns: Option<PatternConfig>,
    pub noise: Option<NoiseConfig>,
    pub solver: SolverConfig,
    pub snapshots: usize,
    pub attempts: usize,
    pub discarded: usize,
    pub chunk_rows: usize,
    pub arrays: BTreeMap<String, ArraySpec>,
    pub node_ids: Vec<String>,
    pub node_kinds: Vec<NodeKind>,
    pub link_ids: Vec<String>,
    pub split: Split,
    pub normalization: Normalization,
}

impl DatasetManifest {
    pub(crate) fn new(
        model: &NetworkModel,
        topology: &GraphTopology,
        solver: &SolverConfig,
        snapshots: usize,
        attempts: usize,
        discarded: usize,
        split_seed: u64,
    ) -> Self {
        DatasetManifest {
            format: DATASET_FORMAT.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            network: model.title.first().cloned().unwrap_or_default(),
            input_sha256: None,
            realistic: false,
            sampling: None,
            patterns: None,
            noise: None,
            solver: *solver,
            snapshots,
            attempts,
            discarded,
            chunk_rows: CHUNK_ROWS,
            arrays: BTreeMap::new(),
            node_ids: topology.node_ids.clone(),
            node_kinds: topology.node_kinds.clone(),
            link_ids: topology.link_ids.clone(),
            split: Split::new(snapshots, split_seed),
            normalization: Normalization {
                pressure: [0.0, 0.0],
                elevation: [0.0, 0.0],
                demand: [0.0, 0.0],
            },
        }
    }

    pub(crate) fn with_sampling(mut self, cfg: SamplingConfig) -> Self {
        self.sampling = Some(cfg);
        self
    }

    pub(crate) fn with_realistic(mut self, patterns: PatternConfig, noise: NoiseConfig) -> Self {
        self.realistic = true;
        self.patterns = Some(patterns);
        self.noise = Some(noise);
        self
    }
}

/// Snapshots of one network with its graph, stored row-major as
/// `snapshots × nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDataset {
    pub topology: GraphTopology,
    /// mH₂O.
    pub pressures: Array2<f64>,
    /// m³/s; zero at fixed-head nodes.
    pub demands: Array2<f64>,
    /// m.
    pub heads: Array2<f64>,
    /// Demands, reservoir heads and pump speeds of each snapshot.
    pub controls: Array2<f64>,
    pub manifest: DatasetManifest,
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Array2<f64> {
    let flat: Vec<f64> = rows.flatten().collect();
    let height = flat.len().checked_div(width).unwrap_or(0);
    Array2::from_shape_vec((height, width), flat).expect("rows share one width")
}

impl SnapshotDataset {
    pub(crate) fn assemble(
        topology: GraphTopology,
        snapshots: Vec<Snapshot>,
        mut manifest: DatasetManifest,
    ) -> Self {
        let n = topology.node_count();
        let c = snapshots.first().map_or(0, |s| s.controls.len());
        let pressures = stack(snapshots.iter().map(|s| s.pressures.clone()), n);
        let demands = stack(snapshots.iter().map(|s| s.demands.clone()), n);
        let heads = stack(snapshots.iter().map(|s| s.heads.clone()), n);
        let controls = stack(snapshots.into_iter().map(|s| s.controls), c);
        let rows: &[usize] = if manifest.split.train.is_empty() {
            &[0]
        } else {
            &manifest.split.train
        };
        manifest.normalization = Normalization {
            pressure: min_max(rows.iter().flat_map(|&r| pressures.row(r).to_vec())),
            elevation: min_max(topology.node_static.iter().copied()),
            demand: min_max(rows.iter().flat_map(|&r| demands.row(r).to_vec())),
        };
        let mut ds = SnapshotDataset {
            topology,
            pressures,
            demands,
            heads,
            controls,
            manifest,
        };
        ds.manifest.arrays = ds.array_specs();
        ds
    }

    pub fn len(&self) -> usize {
        self.pressures.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Junction pressures of the given rows (all rows when `None`), pooled.
    pub fn pooled_junction_pressures(&self, rows: Option<&[usize]>) -> Vec<f64> {
        let junctions: Vec<usize> = (0..self.node_count())
            .filter(|&i| self.topology.is_junction(i))
            .collect();
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..self.len()).collect();
                &all
            }
        };
        rows.iter()
            .flat_map(|&r| junctions.iter().map(move |&j| self.pressures[[r, j]]))
            .collect()
    }

    fn array_specs(&self) -> BTreeMap<String, ArraySpec> {
        let s = self.len();
        let n = self.node_count();
        let e = self.topology.arc_count();
        let spec = |file: &str, dtype: &str, shape: Vec<usize>| ArraySpec {
            file: file.into(),
            dtype: dtype.into(),
            shape,
        };
        BTreeMap::from([
            ("pressures".into(), spec("pressures.f64", "<f8", vec![s, n])),
            ("demands".into(), spec("demands.f64", "<f8", vec![s, n])),
            ("heads".into(), spec("heads.f64", "<f8", vec![s, n])),
            (
                "controls".into(),
                spec("controls.f64", "<f8", vec![s, self.controls.ncols()]),
            ),
            ("edge_index".into(), spec("edge_index.i64", "<i8", vec![2, e])),
            (
                "edge_attr".into(),
                spec("edge_attr.f64", "<f8", vec![e, EDGE_ATTR_DIM]),
            ),
            ("node_static".into(), spec("node_static.f64", "<f8", vec![n, 1])),
        ])
    }
}

fn write_f64_rows(path: &Path, data: &[f64], row_len: usize) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let block = (CHUNK_ROWS * row_len.max(1)).max(1);
    for chunk in data.chunks(block) {
        let mut bytes = Vec::with_capacity(chunk.len() * 8);
        for v in chunk {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
    }
    w.flush()
}

fn read_bytes(path: &Path, expected: usize) -> Result<Vec<u8>, GeneratorError> {
    let mut bytes = Vec::with_capacity(expected);
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() != expected {
        return Err(GeneratorError::Manifest(format!(
            "{} holds {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes)
}

fn read_f64(path: &Path, count: usize) -> Result<Vec<f64>, GeneratorError> {
    Ok(read_bytes(path, count * 8)?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect())
}

fn read_i64(path: &Path, count: usize) -> Result<Vec<i64>, GeneratorError> {
    Ok(read_bytes(path, count * 8)?
        .chunks_exact(8)
        .map(|b| i64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect())
}

/// Write the dataset as `manifest.json` plus one little-endian binary file
/// per array.
pub fn write_dataset(dir: &Path, ds: &SnapshotDataset) -> Result<(), GeneratorError> {
    std::fs::create_dir_all(dir)?;
    let n = ds.node_count();
    let matrix = |a: &Array2<f64>| a.as_standard_layout().iter().copied().collect::<Vec<_>>();
    write_f64_rows(&dir.join("pressures.f64"), &matrix(&ds.pressures), n)?;
    write_f64_rows(&dir.join("demands.f64"), &matrix(&ds.demands), n)?;
    write_f64_rows(&dir.join("heads.f64"), &matrix(&ds.heads), n)?;
    write_f64_rows(
        &dir.join("controls.f64"),
        &matrix(&ds.controls),
        ds.controls.ncols(),
    )?;
    let mut w = BufWriter::new(File::create(dir.join("edge_index.i64"))?);
    for v in ds.topology.edge_index_i64() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let attrs: Vec<f64> = ds.topology.edge_attr.iter().flatten().copied().collect();
    write_f64_rows(&dir.join("edge_attr.f64"), &attrs, EDGE_ATTR_DIM)?;
    write_f64_rows(&dir.join("node_static.f64"), &ds.topology.node_static, 1)?;
    let mut manifest = ds.manifest.clone();
    manifest.arrays = ds.array_specs();
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| GeneratorError::Manifest(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<SnapshotDataset, GeneratorError> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| GeneratorError::Manifest(e.to_string()))?;
    if manifest.format != DATASET_FORMAT {
        return Err(GeneratorError::Manifest(format!(
            "unsupported format {:?}",
            manifest.format
        )));
    }
    let shape = |name: &str| -> Result<Vec<usize>, GeneratorError> {
        manifest
            .arrays
            .get(name)
            .map(|a| a.shape.clone())
            .ok_or_else(|| GeneratorError::Manifest(format!("array {name} missing")))
    };
    let matrix = |name: &str| -> Result<Array2<f64>, GeneratorError> {
        let s = shape(name)?;
        let data = read_f64(&dir.join(format!("{name}.f64")), s[0] * s[1])?;
        Ok(Array2::from_shape_vec((s[0], s[1]), data).expect("shape checked by size"))
    };
    let pressures = matrix("pressures")?;
    let demands = matrix("demands")?;
    let heads = matrix("heads")?;
    let controls = matrix("controls")?;
    let n = manifest.node_ids.len();
    let e = shape("edge_index")?[1];
    if pressures.ncols() != n || manifest.node_kinds.len() != n || e != 2 * manifest.link_ids.len() {
        return Err(GeneratorError::Manifest("inconsistent array shapes".into()));
    }
    let index = read_i64(&dir.join("edge_index.i64"), 2 * e)?;
    let to_node = |v: i64| -> Result<usize, GeneratorError> {
        usize::try_from(v)
            .ok()
            .filter(|&i| i < n)
            .ok_or_else(|| GeneratorError::Manifest(format!("edge endpoint {v} out of range")))
    };
    let sources = index[..e].iter().map(|&v| to_node(v)).collect::<Result<_, _>>()?;
    let targets = index[e..].iter().map(|&v| to_node(v)).collect::<Result<_, _>>()?;
    let attrs = read_f64(&dir.join("edge_attr.f64"), e * EDGE_ATTR_DIM)?;
    let edge_attr = attrs
        .chunks_exact(EDGE_ATTR_DIM)
        .map(|c| c.try_into().expect("row width"))
        .collect();
    let node_static = read_f64(&dir.join("node_static.f64"), n)?;
    let topology = GraphTopology {
        node_ids: manifest.node_ids.clone(),
        node_kinds: manifest.node_kinds.clone(),
        node_static,
        link_ids: manifest.link_ids.clone(),
        sources,
        targets,
        edge_attr,
    };
    Ok(SnapshotDataset {
        topology,
        pressures,
        demands,
        heads,
        controls,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let s = Split::new(100, 9);
        assert_eq!(s.validation.len(), 10);
        assert_eq!(s.train.len(), 90);
        assert_eq!(Split::new(1, 9).validation.len(), 0);
        assert_eq!(Split::new(3, 9).validation.len(), 1);
        assert_eq!(Split::new(100, 9), s);
    }

    #[test]
    fn normalization_round_trip() {
        let n = Normalization {
            pressure: [10.0, 50.0],
            elevation: [0.0, 0.0],
            demand: [0.0, 1.0],
        };
        assert_eq!(n.pressure(30.0), 0.5);
        assert_eq!(n.pressure_inverse(0.5), 30.0);
        assert_eq!(n.elevation(3.0), 3.0);
    }
}
