//! Dataset ingestion, binary label reframing, stratified splitting and the
//! synthetic benchmark generator.
//!
//! File formats:
//!
//! * Embeddings, binary: magic `"SFL1"`, u32 LE row count N, u32 LE
//!   dimension D, then N·D little-endian f32 values row-major. Ids are
//!   implicit `0..N-1` unless an id sidecar (one id per line) is supplied.
//! * Embeddings, CSV (small fixtures): header `id,e0,...,e{D-1}`. The loader
//!   sniffs the magic bytes to pick the format.
//! * Features CSV: header
//!   `id,rhyme_density,lexical_diversity,pronoun_ratio,popularity[,cluster_label]`.
//! * Labels CSV: header `id,label` with label ∈ {0,1}.
//! * Records CSV (input to feature extraction): header `id,popularity,text`
//!   with quoted multi-line text.
//!
//! Rows are joined by id; row order always follows the embeddings file.
//! `Dataset.aux` holds raw (unscaled) structure features; standardization is
//! applied downstream, fitted on training rows only.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{LyricRecord, StructFeatures, STRUCT_DIM, STRUCT_FEATURE_NAMES};

/// Default embedding dimension, matching the upstream sentence encoder.
pub const DEFAULT_EMBEDDING_DIM: usize = 384;
/// Magic bytes of the binary embeddings format.
pub const EMBEDDINGS_MAGIC: &[u8; 4] = b"SFL1";
/// Number of Class-1 sub-centroids in the synthetic generator (the source
/// data has 11 intrinsic clusters: one dominant plus these ten).
pub const SYNTH_SUB_CLUSTERS: usize = 10;
/// Baseline means of the four auxiliary features in synthetic data.
pub const SYNTH_AUX_BASES: [f64; STRUCT_DIM] = [0.3, 0.5, 0.2, 50.0];
/// Per-feature scale of the class gap `aux_signal`; pronoun_ratio carries
/// the strongest signal, popularity the weakest.
pub const SYNTH_AUX_GAP_PROFILE: [f64; STRUCT_DIM] = [0.5, 0.5, 1.0, 0.25];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: unrecognized embeddings format (no SFL1 magic, no id CSV header)")]
    UnknownMagic { path: PathBuf },
    #[error("{path}: malformed embeddings file: {message}")]
    MalformedBinary { path: PathBuf, message: String },
    #[error("embedding dimension {found} does not match the expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("row counts disagree: {context}")]
    RowCountMismatch { context: String },
    #[error("id {id} from the embeddings file is missing in {path}")]
    MissingId { id: String, path: PathBuf },
    #[error("duplicate id {id} in {path}")]
    DuplicateId { id: String, path: PathBuf },
    #[error("{path}: missing required column \"{column}\"")]
    MissingColumn { path: PathBuf, column: String },
    #[error("non-finite value at row {row}, column {col} of {context}")]
    NonFinite {
        row: usize,
        col: usize,
        context: String,
    },
    #[error("invalid label {value} for id {id}: expected 0 or 1")]
    InvalidLabel { id: String, value: String },
    #[error("invalid cluster label {value} at row {row}: expected -1 or a non-negative id")]
    InvalidClusterLabel { row: usize, value: i64 },
    #[error("cannot reframe: all rows carry the noise label -1")]
    NoDominantCluster,
    #[error("operation requires both classes, found only one")]
    SingleClass,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// A fully joined, validated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N×D embedding matrix (F_deep).
    pub deep: Array2<f64>,
    /// N×4 raw structure features (F_struct), scaled downstream.
    pub aux: Array2<f64>,
    /// Binary labels; Class 1 is the positive class.
    pub labels: Vec<u8>,
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.deep.nrows()
    }

    pub fn deep_dim(&self) -> usize {
        self.deep.ncols()
    }

    /// Checks the structural invariants: agreeing row counts, 4 aux
    /// columns, binary labels, unique ids, finite matrices.
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.deep.nrows();
        if self.aux.nrows() != n || self.labels.len() != n || self.ids.len() != n {
            return Err(DataError::RowCountMismatch {
                context: format!(
                    "deep {} / aux {} / labels {} / ids {}",
                    n,
                    self.aux.nrows(),
                    self.labels.len(),
                    self.ids.len()
                ),
            });
        }
        if self.aux.ncols() != STRUCT_DIM {
            return Err(DataError::DimensionMismatch {
                expected: STRUCT_DIM,
                found: self.aux.ncols(),
            });
        }
        for (id, &y) in self.ids.iter().zip(&self.labels) {
            if y > 1 {
                return Err(DataError::InvalidLabel {
                    id: id.clone(),
                    value: y.to_string(),
                });
            }
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &self.ids {
            if !seen.insert(id.as_str()) {
                return Err(DataError::DuplicateId {
                    id: id.clone(),
                    path: PathBuf::from("<dataset>"),
                });
            }
        }
        check_finite(self.deep.view(), "deep matrix")?;
        check_finite(self.aux.view(), "aux matrix")?;
        Ok(())
    }

    /// Extracts the rows at `indices` (order-preserving, duplicates allowed).
    pub fn select(&self, indices: &[usize]) -> Result<Dataset, DataError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_rows()) {
            return Err(DataError::InvalidParam(format!(
                "row index {bad} out of range for {} rows",
                self.n_rows()
            )));
        }
        Ok(Dataset {
            deep: self.deep.select(Axis(0), indices),
            aux: self.aux.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
        })
    }
}

fn check_finite(matrix: ArrayView2<'_, f64>, context: &str) -> Result<(), DataError> {
    for ((row, col), &v) in matrix.indexed_iter() {
        if !v.is_finite() {
            return Err(DataError::NonFinite {
                row,
                col,
                context: context.to_string(),
            });
        }
    }
    Ok(())
}

/// A train/test partition of row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Outcome of the cluster-to-binary reframing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReframingReport {
    pub dominant_cluster_id: i64,
    pub class0_fraction: f64,
    /// Row count per cluster id, including the noise label -1.
    pub cluster_sizes: BTreeMap<i64, u64>,
}

/// Where binary labels come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelsSource {
    /// A labels CSV (`id,label`).
    Csv(PathBuf),
    /// The `cluster_label` column of the features CSV, reframed binary.
    ClusterColumn,
}

/// Options for [`load_dataset`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// When set, the embeddings dimension must equal this value.
    pub expected_dim: Option<usize>,
    /// Id sidecar (one id per line) for binary embeddings files.
    pub ids_path: Option<PathBuf>,
}

/// Reframes intrinsic cluster labels into the binary task: the largest
/// non-noise cluster becomes Class 0, everything else (smaller clusters and
/// -1 noise) becomes Class 1. Size ties break toward the smallest id.
pub fn reframe_binary(cluster_labels: &[i64]) -> Result<(Vec<u8>, ReframingReport), DataError> {
    let mut cluster_sizes = BTreeMap::new();
    for (row, &c) in cluster_labels.iter().enumerate() {
        if c < -1 {
            return Err(DataError::InvalidClusterLabel { row, value: c });
        }
        *cluster_sizes.entry(c).or_insert(0u64) += 1;
    }
    // BTreeMap iterates in ascending id order, so the first maximum is the
    // smallest-id winner.
    let dominant = cluster_sizes
        .iter()
        .filter(|&(&id, _)| id != -1)
        .max_by_key(|&(&id, &count)| (count, std::cmp::Reverse(id)))
        .map(|(&id, _)| id)
        .ok_or(DataError::NoDominantCluster)?;
    let labels: Vec<u8> = cluster_labels
        .iter()
        .map(|&c| if c == dominant { 0 } else { 1 })
        .collect();
    let class0 = cluster_sizes[&dominant];
    let report = ReframingReport {
        dominant_cluster_id: dominant,
        class0_fraction: class0 as f64 / cluster_labels.len() as f64,
        cluster_sizes,
    };
    Ok((labels, report))
}

/// Splits rows into train/test preserving per-class proportions within one
/// row. Deterministic for a fixed seed; indices are returned sorted.
pub fn stratified_split(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment, DataError> {
    if !test_fraction.is_finite() || test_fraction <= 0.0 || test_fraction >= 1.0 {
        return Err(DataError::InvalidParam(format!(
            "test_fraction must lie in (0,1), got {test_fraction}"
        )));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(DataError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_indices = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|&(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * test_fraction).round() as usize;
        test_indices.extend_from_slice(&idx[..k.min(idx.len())]);
    }
    test_indices.sort_unstable();
    let test_set: HashSet<usize> = test_indices.iter().copied().collect();
    let train_indices: Vec<usize> = (0..labels.len())
        .filter(|i| !test_set.contains(i))
        .collect();
    Ok(SplitAssignment {
        train_indices,
        test_indices,
        seed,
        test_fraction,
    })
}

/// X_full: deep columns first, then the four aux columns.
pub fn concat_features(dataset: &Dataset) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[dataset.deep.view(), dataset.aux.view()])
        .expect("deep and aux row counts agree by Dataset invariant")
}

/// Parameters of the synthetic benchmark generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticParams {
    pub n: usize,
    pub d: usize,
    /// Distance of Class-1 sub-centroids from the Class-0 origin.
    pub separation: f64,
    /// Scale of the class gap on the aux features (see
    /// [`SYNTH_AUX_GAP_PROFILE`]).
    pub aux_signal: f64,
    pub class0_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n: 10_000,
            d: DEFAULT_EMBEDDING_DIM,
            separation: 10.0,
            aux_signal: 2.0,
            class0_fraction: 0.51861,
            seed: 0,
        }
    }
}

/// Generates a deterministic synthetic dataset mirroring the source data's
/// shape: Class 0 is an isotropic Gaussian at the origin, Class 1 draws from
/// ten unit-variance sub-clusters at distance `separation` in random
/// directions. Aux features get class-dependent means (gap = `aux_signal`
/// scaled by [`SYNTH_AUX_GAP_PROFILE`]) plus unit noise; the three ratio
/// features are clamped into [0,1].
///
/// Returns the dataset and ground-truth cluster labels (0 = dominant
/// cluster, 1..=10 = Class-1 sub-clusters).
pub fn generate_synthetic(params: &SyntheticParams) -> Result<(Dataset, Vec<i64>), DataError> {
    if params.n < 2 {
        return Err(DataError::InvalidParam(format!(
            "n must be at least 2, got {}",
            params.n
        )));
    }
    if params.d < 1 {
        return Err(DataError::InvalidParam("d must be at least 1".into()));
    }
    if !params.separation.is_finite() || params.separation < 0.0 {
        return Err(DataError::InvalidParam(format!(
            "separation must be finite and non-negative, got {}",
            params.separation
        )));
    }
    if !params.aux_signal.is_finite() {
        return Err(DataError::InvalidParam("aux_signal must be finite".into()));
    }
    if !params.class0_fraction.is_finite()
        || params.class0_fraction <= 0.0
        || params.class0_fraction >= 1.0
    {
        return Err(DataError::InvalidParam(format!(
            "class0_fraction must lie in (0,1), got {}",
            params.class0_fraction
        )));
    }

    let (n, d) = (params.n, params.d);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Sub-centroid directions are drawn first so the row stream below is
    // independent of how many rows precede a given row.
    let mut centroids = Array2::<f64>::zeros((SYNTH_SUB_CLUSTERS, d));
    for mut row in centroids.rows_mut() {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for (j, x) in v.iter().enumerate() {
                row[j] = x / norm * params.separation;
            }
        } else {
            row[0] = params.separation;
        }
    }

    let n0 = ((n as f64 * params.class0_fraction).round() as usize).clamp(1, n - 1);
    let mut deep = Array2::<f64>::zeros((n, d));
    let mut aux = Array2::<f64>::zeros((n, STRUCT_DIM));
    let mut labels = Vec::with_capacity(n);
    let mut clusters = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);

    for i in 0..n {
        let class1 = i >= n0;
        let sub = if class1 {
            rng.random_range(0..SYNTH_SUB_CLUSTERS)
        } else {
            0
        };
        for j in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            deep[[i, j]] = if class1 {
                centroids[[sub, j]] + noise
            } else {
                noise
            };
        }
        for k in 0..STRUCT_DIM {
            let gap = if class1 {
                params.aux_signal * SYNTH_AUX_GAP_PROFILE[k]
            } else {
                0.0
            };
            let noise: f64 = rng.sample(StandardNormal);
            let mut value = SYNTH_AUX_BASES[k] + gap + noise;
            if k < 3 {
                value = value.clamp(0.0, 1.0);
            }
            aux[[i, k]] = value;
        }
        labels.push(u8::from(class1));
        clusters.push(if class1 { 1 + sub as i64 } else { 0 });
        ids.push(i.to_string());
    }

    let dataset = Dataset {
        deep,
        aux,
        labels,
        ids,
    };
    Ok((dataset, clusters))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> DataError + '_ {
    move |e| DataError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes an embedding matrix in the binary SFL1 format (values cast f32).
pub fn write_embeddings_binary(path: &Path, deep: ArrayView2<'_, f64>) -> Result<(), DataError> {
    let n = u32::try_from(deep.nrows())
        .map_err(|_| DataError::InvalidParam("row count exceeds u32".into()))?;
    let d = u32::try_from(deep.ncols())
        .map_err(|_| DataError::InvalidParam("dimension exceeds u32".into()))?;
    let mut bytes = Vec::with_capacity(12 + deep.len() * 4);
    bytes.extend_from_slice(EMBEDDINGS_MAGIC);
    bytes.extend_from_slice(&n.to_le_bytes());
    bytes.extend_from_slice(&d.to_le_bytes());
    for row in deep.rows() {
        for &v in row {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Reads either embeddings format; returns the matrix and, for the CSV
/// variant, the ids from its id column.
fn read_embeddings(path: &Path) -> Result<(Array2<f64>, Option<Vec<String>>), DataError> {
    let mut file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.starts_with(EMBEDDINGS_MAGIC) {
        return read_embeddings_binary_bytes(path, &bytes).map(|m| (m, None));
    }
    read_embeddings_csv(path, &bytes).map(|(m, ids)| (m, Some(ids)))
}

fn read_embeddings_binary_bytes(path: &Path, bytes: &[u8]) -> Result<Array2<f64>, DataError> {
    let malformed = |message: String| DataError::MalformedBinary {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < 12 {
        return Err(malformed("file shorter than the 12-byte header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + n as u64 * d as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(malformed(format!(
            "expected {expected} bytes for {n}x{d} values, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Array2::from_shape_vec((n, d), values).map_err(|e| malformed(format!("shape error: {e}")))
}

fn read_embeddings_csv(path: &Path, bytes: &[u8]) -> Result<(Array2<f64>, Vec<String>), DataError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    if headers.get(0) != Some("id") || headers.len() < 2 {
        return Err(DataError::UnknownMagic {
            path: path.to_path_buf(),
        });
    }
    let d = headers.len() - 1;
    let mut values = Vec::new();
    let mut ids = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        if record.len() != d + 1 {
            return Err(DataError::Csv {
                path: path.to_path_buf(),
                message: format!(
                    "row {} has {} fields, expected {}",
                    row + 2,
                    record.len(),
                    d + 1
                ),
            });
        }
        ids.push(record[0].to_string());
        for col in 0..d {
            let v: f64 = record[col + 1].parse().map_err(|_| DataError::Csv {
                path: path.to_path_buf(),
                message: format!(
                    "row {}: cannot parse \"{}\" as a number",
                    row + 2,
                    &record[col + 1]
                ),
            })?;
            values.push(v);
        }
    }
    let n = ids.len();
    let matrix = Array2::from_shape_vec((n, d), values).expect("column count fixed per row");
    Ok((matrix, ids))
}

struct FeatureRow {
    values: [f64; STRUCT_DIM],
    cluster: Option<i64>,
}

/// Reads the features CSV into an id-keyed map, preserving the optional
/// cluster_label column.
fn read_features_csv(path: &Path) -> Result<HashMap<String, FeatureRow>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    let expected: Vec<&str> = std::iter::once("id").chain(STRUCT_FEATURE_NAMES).collect();
    for (i, name) in expected.iter().enumerate() {
        if headers.get(i) != Some(name) {
            return Err(DataError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            });
        }
    }
    let has_cluster = match headers.len() {
        5 => false,
        6 if headers.get(5) == Some("cluster_label") => true,
        _ => {
            return Err(DataError::Csv {
                path: path.to_path_buf(),
                message: format!("unexpected header: {:?}", headers),
            })
        }
    };

    let mut rows = HashMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let line = row + 2;
        let field = |i: usize| -> Result<f64, DataError> {
            record
                .get(i)
                .ok_or_else(|| DataError::Csv {
                    path: path.to_path_buf(),
                    message: format!("row {line}: missing field {i}"),
                })?
                .parse()
                .map_err(|_| DataError::Csv {
                    path: path.to_path_buf(),
                    message: format!(
                        "row {line}: cannot parse \"{}\" as a number",
                        record.get(i).unwrap_or("")
                    ),
                })
        };
        let id = record
            .get(0)
            .ok_or_else(|| DataError::Csv {
                path: path.to_path_buf(),
                message: format!("row {line}: missing id"),
            })?
            .to_string();
        let mut values = [0.0; STRUCT_DIM];
        for (k, value) in values.iter_mut().enumerate() {
            *value = field(k + 1)?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    col: k,
                    context: path.display().to_string(),
                });
            }
        }
        let cluster = if has_cluster {
            let raw = record.get(5).unwrap_or("");
            Some(raw.parse::<i64>().map_err(|_| DataError::Csv {
                path: path.to_path_buf(),
                message: format!("row {line}: cannot parse cluster label \"{raw}\""),
            })?)
        } else {
            None
        };
        if rows
            .insert(id.clone(), FeatureRow { values, cluster })
            .is_some()
        {
            return Err(DataError::DuplicateId {
                id,
                path: path.to_path_buf(),
            });
        }
    }
    Ok(rows)
}

/// Reads a labels CSV (`id,label`) into an id-keyed map.
fn read_labels_csv(path: &Path) -> Result<HashMap<String, u8>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    for (i, name) in ["id", "label"].iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(DataError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            });
        }
    }
    let mut map = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let id = record.get(0).unwrap_or("").to_string();
        let raw = record.get(1).unwrap_or("");
        let label = match raw {
            "0" => 0u8,
            "1" => 1u8,
            _ => {
                return Err(DataError::InvalidLabel {
                    id,
                    value: raw.to_string(),
                })
            }
        };
        if map.insert(id.clone(), label).is_some() {
            return Err(DataError::DuplicateId {
                id,
                path: path.to_path_buf(),
            });
        }
    }
    Ok(map)
}

/// Loads and joins a dataset from files. Row order follows the embeddings
/// file; every embedding id must appear in the features CSV (and the labels
/// CSV when used).
pub fn load_dataset(
    embeddings_path: &Path,
    features_path: &Path,
    labels_source: &LabelsSource,
    options: &LoadOptions,
) -> Result<Dataset, DataError> {
    let (deep, csv_ids) = read_embeddings(embeddings_path)?;
    if let Some(expected) = options.expected_dim {
        if deep.ncols() != expected {
            return Err(DataError::DimensionMismatch {
                expected,
                found: deep.ncols(),
            });
        }
    }
    check_finite(deep.view(), "embeddings")?;

    let ids: Vec<String> = match (&options.ids_path, csv_ids) {
        (Some(_), Some(_)) => {
            return Err(DataError::InvalidParam(
                "an id sidecar only applies to binary embeddings files".into(),
            ))
        }
        (Some(sidecar), None) => {
            let text = std::fs::read_to_string(sidecar).map_err(io_err(sidecar))?;
            let ids: Vec<String> = text.lines().map(str::to_string).collect();
            if ids.len() != deep.nrows() {
                return Err(DataError::RowCountMismatch {
                    context: format!(
                        "id sidecar has {} lines, embeddings have {} rows",
                        ids.len(),
                        deep.nrows()
                    ),
                });
            }
            ids
        }
        (None, Some(ids)) => ids,
        (None, None) => (0..deep.nrows()).map(|i| i.to_string()).collect(),
    };

    let features = read_features_csv(features_path)?;
    let mut aux = Array2::<f64>::zeros((deep.nrows(), STRUCT_DIM));
    let mut clusters: Vec<Option<i64>> = Vec::with_capacity(deep.nrows());
    for (i, id) in ids.iter().enumerate() {
        let row = features.get(id).ok_or_else(|| DataError::MissingId {
            id: id.clone(),
            path: features_path.to_path_buf(),
        })?;
        for k in 0..STRUCT_DIM {
            aux[[i, k]] = row.values[k];
        }
        clusters.push(row.cluster);
    }

    let labels: Vec<u8> = match labels_source {
        LabelsSource::Csv(labels_path) => {
            let map = read_labels_csv(labels_path)?;
            ids.iter()
                .map(|id| {
                    map.get(id).copied().ok_or_else(|| DataError::MissingId {
                        id: id.clone(),
                        path: labels_path.clone(),
                    })
                })
                .collect::<Result<_, _>>()?
        }
        LabelsSource::ClusterColumn => {
            let clusters: Vec<i64> = clusters
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    c.ok_or_else(|| DataError::MissingColumn {
                        path: features_path.to_path_buf(),
                        column: format!("cluster_label (row {})", i + 2),
                    })
                })
                .collect::<Result<_, _>>()?;
            reframe_binary(&clusters)?.0
        }
    };

    let dataset = Dataset {
        deep,
        aux,
        labels,
        ids,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Reads a records CSV (`id,popularity,text`).
pub fn read_lyric_records(path: &Path) -> Result<Vec<LyricRecord>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    for (i, name) in ["id", "popularity", "text"].iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(DataError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            });
        }
    }
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let line = row + 2;
        let id = record.get(0).unwrap_or("").to_string();
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId {
                id,
                path: path.to_path_buf(),
            });
        }
        let popularity: f64 = record
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| DataError::Csv {
                path: path.to_path_buf(),
                message: format!(
                    "row {line}: cannot parse popularity \"{}\"",
                    record.get(1).unwrap_or("")
                ),
            })?;
        if !popularity.is_finite() {
            return Err(DataError::NonFinite {
                row,
                col: 1,
                context: path.display().to_string(),
            });
        }
        records.push(LyricRecord {
            id,
            text: record.get(2).unwrap_or("").to_string(),
            popularity,
            cluster_label: None,
        });
    }
    Ok(records)
}

/// Writes a features CSV; includes the cluster_label column when
/// `clusters` is given (one entry per row).
pub fn write_features_csv(
    path: &Path,
    ids: &[String],
    features: &[StructFeatures],
    clusters: Option<&[i64]>,
) -> Result<(), DataError> {
    if ids.len() != features.len() || clusters.is_some_and(|c| c.len() != ids.len()) {
        return Err(DataError::RowCountMismatch {
            context: "features CSV writer inputs".into(),
        });
    }
    let mut out = String::from("id,rhyme_density,lexical_diversity,pronoun_ratio,popularity");
    if clusters.is_some() {
        out.push_str(",cluster_label");
    }
    out.push('\n');
    for (i, (id, f)) in ids.iter().zip(features).enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}",
            csv_escape(id),
            f.rhyme_density,
            f.lexical_diversity,
            f.pronoun_ratio,
            f.popularity
        ));
        if let Some(clusters) = clusters {
            out.push_str(&format!(",{}", clusters[i]));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Writes a labels CSV (`id,label`).
pub fn write_labels_csv(path: &Path, ids: &[String], labels: &[u8]) -> Result<(), DataError> {
    if ids.len() != labels.len() {
        return Err(DataError::RowCountMismatch {
            context: "labels CSV writer inputs".into(),
        });
    }
    let mut out = String::from("id,label\n");
    for (id, &y) in ids.iter().zip(labels) {
        out.push_str(&format!("{},{}\n", csv_escape(id), y));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Quotes a CSV field when it contains separators, quotes or newlines.
fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
