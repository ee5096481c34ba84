//! Batch experiment runner: dataset assembly, the four benchmark
//! configurations, and deterministic report emission.
//!
//! Every component seed is derived from the single global seed by FNV-1a
//! over a fixed tag ([`seed_for`]), so a config file carries exactly one
//! seed and reruns are bit-reproducible. Artifacts are written atomically
//! (write to a temp file, then rename): an aborted run never leaves a
//! partially written report.
//!
//! Numeric formatting: CSV cells use fixed five-decimal formatting and JSON
//! report numbers are rounded to the same precision, keeping artifacts
//! diffable. Full-precision values stay available through [`RunSummary`].

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{
    self, generate_synthetic, load_dataset, reframe_binary, stratified_split, DataError, Dataset,
    LabelsSource, LoadOptions, ReframingReport, SyntheticParams,
};
use crate::features::{
    extract_struct_features, fit_scaler, transform, ScalerError, StructFeatures, STRUCT_DIM,
    STRUCT_FEATURE_NAMES,
};
use crate::forest::{self, fit_forest, predict_proba_forest, ForestConfig, MaxFeatures};
use crate::metrics::{evaluate, EvalReport, MetricsError};
use crate::sfl::{self, predict_proba, TrainConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("evaluation error: {0}")]
    Evaluation(#[from] MetricsError),
    #[error("training error: {0}")]
    Training(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit code: 0 success, 2 config, 3 data, 4 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Training(_) => 4,
            _ => 3,
        }
    }
}

impl From<ScalerError> for ExperimentError {
    fn from(e: ScalerError) -> Self {
        ExperimentError::Training(e.to_string())
    }
}

/// Derives a component seed from the global seed and a role tag (FNV-1a
/// over the seed's little-endian bytes followed by the tag bytes).
pub fn seed_for(global_seed: u64, tag: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for byte in global_seed.to_le_bytes().into_iter().chain(tag.bytes()) {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// The benchmark configurations, named after the comparison-table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    SflGated,
    RfConcat,
    RfLyricsOnly,
    RfAuxOnly,
}

/// Fixed presentation order for reports and tables.
pub const CANONICAL_ABLATIONS: [Ablation; 4] = [
    Ablation::SflGated,
    Ablation::RfConcat,
    Ablation::RfLyricsOnly,
    Ablation::RfAuxOnly,
];

impl Ablation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::SflGated => "sfl_gated",
            Ablation::RfConcat => "rf_concat",
            Ablation::RfLyricsOnly => "rf_lyrics_only",
            Ablation::RfAuxOnly => "rf_aux_only",
        }
    }
}

/// File-based data source: precomputed embeddings plus the features CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesSettings {
    pub embeddings: PathBuf,
    pub features: PathBuf,
    /// Labels CSV; omit to reframe the features CSV's cluster_label column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Id sidecar for binary embeddings files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<PathBuf>,
    /// When set, the embeddings dimension must equal this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_dim: Option<usize>,
}

/// Synthetic-source settings; the generator seed derives from the global
/// seed, so none appears here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSettings {
    pub n: usize,
    pub d: usize,
    pub separation: f64,
    pub aux_signal: f64,
    pub class0_fraction: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        let p = SyntheticParams::default();
        Self {
            n: p.n,
            d: p.d,
            separation: p.separation,
            aux_signal: p.aux_signal,
            class0_fraction: p.class0_fraction,
        }
    }
}

impl SyntheticSettings {
    pub fn to_params(&self, seed: u64) -> SyntheticParams {
        SyntheticParams {
            n: self.n,
            d: self.d,
            separation: self.separation,
            aux_signal: self.aux_signal,
            class0_fraction: self.class0_fraction,
            seed,
        }
    }
}

/// Exactly one of `files` or `synthetic` must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<FilesSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSettings {
    pub test_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self { test_fraction: 0.2 }
    }
}

/// Network training settings; the seed derives from the global seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self {
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            early_stop_patience: c.early_stop_patience,
            validation_fraction: c.validation_fraction,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            adam_epsilon: c.adam_epsilon,
        }
    }
}

impl TrainSettings {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            early_stop_patience: self.early_stop_patience,
            validation_fraction: self.validation_fraction,
            seed,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_epsilon,
        }
    }
}

/// Forest settings; the per-ablation seed derives from the global seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestSettings {
    fn default() -> Self {
        let c = ForestConfig::default();
        Self {
            n_trees: c.n_trees,
            max_features: c.max_features,
            min_samples_leaf: c.min_samples_leaf,
            max_depth: c.max_depth,
            bootstrap: c.bootstrap,
        }
    }
}

impl ForestSettings {
    pub fn to_config(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            max_features: self.max_features,
            min_samples_leaf: self.min_samples_leaf,
            max_depth: self.max_depth,
            bootstrap: self.bootstrap,
            seed,
        }
    }
}

fn default_ablations() -> Vec<Ablation> {
    CANONICAL_ABLATIONS.to_vec()
}

/// Full experiment description; the JSON config file maps onto this struct
/// and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSettings,
    #[serde(default)]
    pub split: SplitSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub forest: ForestSettings,
    #[serde(default = "default_ablations")]
    pub ablations: Vec<Ablation>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self, ExperimentError> {
        let config: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        match (&self.data.files, &self.data.synthetic) {
            (Some(_), Some(_)) => {
                return bad(
                    "data must name exactly one source; both files and synthetic are set".into(),
                )
            }
            (None, None) => {
                return bad("data must name exactly one source; set files or synthetic".into())
            }
            _ => {}
        }
        if self.ablations.is_empty() {
            return bad("ablations must not be empty".into());
        }
        for (i, a) in self.ablations.iter().enumerate() {
            if self.ablations[..i].contains(a) {
                return bad(format!("duplicate ablation {}", a.as_str()));
            }
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad(format!(
                "split.test_fraction must lie in (0,1), got {}",
                self.split.test_fraction
            ));
        }
        self.train
            .to_config(0)
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if self.forest.n_trees == 0 || self.forest.min_samples_leaf == 0 {
            return bad("forest.n_trees and forest.min_samples_leaf must be at least 1".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir must not be empty".into());
        }
        Ok(())
    }
}

/// One row of the combined comparison table (full precision).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub ablation: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub brier: f64,
    pub log_loss: f64,
    pub ece: f64,
}

/// In-memory results of a run; files under `output_dir` carry the rounded
/// presentation copies.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub reports: Vec<(Ablation, EvalReport)>,
    pub table: Vec<TableRow>,
}

/// Writes bytes atomically: temp file in the target directory, then rename.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let err = |source| ExperimentError::Output {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut file = std::fs::File::create(&tmp).map_err(err)?;
    file.write_all(bytes).map_err(err)?;
    file.sync_all().map_err(err)?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(err)
}

/// Rounds to five decimal places (presentation precision of the reports).
fn round5(v: f64) -> f64 {
    (v * 1e5).round() / 1e5
}

/// Rounds every fractional number in a JSON tree to five decimals;
/// integers (counts) pass through unchanged.
fn round_json_floats(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if !n.is_i64() && !n.is_u64() {
                if let Some(f) = n.as_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round5(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json_floats),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json_floats),
        _ => {}
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn file_checksum(path: &Path) -> Result<String, ExperimentError> {
    let bytes = std::fs::read(path).map_err(|source| {
        ExperimentError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    Ok(sha256_hex(&bytes))
}

/// Deterministic digest of an in-memory dataset (LE f64 bytes + labels).
fn dataset_checksum(dataset: &Dataset) -> String {
    let mut hasher = Sha256::new();
    for &v in dataset.deep.iter() {
        hasher.update(v.to_le_bytes());
    }
    for &v in dataset.aux.iter() {
        hasher.update(v.to_le_bytes());
    }
    hasher.update(&dataset.labels);
    format!("{:x}", hasher.finalize())
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact_versions: BTreeMap<&'static str, u32>,
    tool_version: &'static str,
    config: &'a ExperimentConfig,
    derived_seeds: BTreeMap<String, u64>,
    input_checksums: BTreeMap<String, String>,
    scaler_policy: &'static str,
}

struct AblationData {
    /// Probability of Class 1 on the test rows.
    probs: Vec<f64>,
}

/// Columns an ablation sees, sliced out of the full dataset.
fn ablation_views<'a>(
    ablation: Ablation,
    deep: &'a Array2<f64>,
    aux: &'a Array2<f64>,
) -> Vec<ArrayView2<'a, f64>> {
    match ablation {
        Ablation::SflGated => vec![deep.view(), aux.view()],
        Ablation::RfConcat => vec![deep.view(), aux.view()],
        Ablation::RfLyricsOnly => vec![deep.view()],
        Ablation::RfAuxOnly => vec![aux.view()],
    }
}

fn feature_width(ablation: Ablation, d: usize) -> usize {
    match ablation {
        Ablation::SflGated | Ablation::RfConcat => d + STRUCT_DIM,
        Ablation::RfLyricsOnly => d,
        Ablation::RfAuxOnly => STRUCT_DIM,
    }
}

/// Standardizes each block on the training rows only, then concatenates.
fn scale_blocks(
    blocks: &[ArrayView2<'_, f64>],
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<(Array2<f64>, Array2<f64>), ExperimentError> {
    let mut train_parts = Vec::with_capacity(blocks.len());
    let mut test_parts = Vec::with_capacity(blocks.len());
    for block in blocks {
        let train_block = block.select(Axis(0), train_idx);
        let test_block = block.select(Axis(0), test_idx);
        let scaler = fit_scaler(train_block.view())?;
        train_parts.push(transform(train_block.view(), &scaler)?);
        test_parts.push(transform(test_block.view(), &scaler)?);
    }
    let views: Vec<_> = train_parts.iter().map(|m| m.view()).collect();
    let train = ndarray::concatenate(Axis(1), &views).expect("blocks share the train row count");
    let views: Vec<_> = test_parts.iter().map(|m| m.view()).collect();
    let test = ndarray::concatenate(Axis(1), &views).expect("blocks share the test row count");
    Ok((train, test))
}

fn run_ablation(
    ablation: Ablation,
    dataset: &Dataset,
    train_idx: &[usize],
    test_idx: &[usize],
    config: &ExperimentConfig,
    forest_out: &mut Option<forest::Forest>,
) -> Result<AblationData, ExperimentError> {
    let blocks = ablation_views(ablation, &dataset.deep, &dataset.aux);
    let train_labels: Vec<u8> = train_idx.iter().map(|&i| dataset.labels[i]).collect();
    let (train_x, test_x) = scale_blocks(&blocks, train_idx, test_idx)?;

    let probs = match ablation {
        Ablation::SflGated => {
            let d = dataset.deep.ncols();
            let train_cfg = config
                .train
                .to_config(seed_for(config.seed, "train/sfl_gated"));
            let (train_deep, train_aux) = train_x.view().split_at(Axis(1), d);
            let (test_deep, test_aux) = test_x.view().split_at(Axis(1), d);
            let (params, _trace) = sfl::train(train_deep, train_aux, &train_labels, &train_cfg)
                .map_err(|e| ExperimentError::Training(e.to_string()))?;
            predict_proba(&params, test_deep, test_aux)
        }
        _ => {
            let tag = format!("forest/{}", ablation.as_str());
            let forest_cfg = config.forest.to_config(seed_for(config.seed, &tag));
            let forest = fit_forest(train_x.view(), &train_labels, &forest_cfg)
                .map_err(|e| ExperimentError::Training(e.to_string()))?;
            let probs = predict_proba_forest(&forest, test_x.view())
                .map_err(|e| ExperimentError::Training(e.to_string()))?;
            if ablation == Ablation::RfConcat {
                *forest_out = Some(forest);
            }
            probs
        }
    };
    Ok(AblationData { probs })
}

fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("ablation,accuracy,macro_f1,mcc,brier,log_loss,ece\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.5},{:.5},{:.5},{:.5},{:.5},{:.5}\n",
            r.ablation, r.accuracy, r.macro_f1, r.mcc, r.brier, r.log_loss, r.ece
        ));
    }
    out
}

fn curve_csv_5dp(points: &[[f64; 2]]) -> String {
    let mut out = String::from("x,y\n");
    for p in points {
        out.push_str(&format!("{:.5},{:.5}\n", p[0], p[1]));
    }
    out
}

fn reliability_csv_5dp(report: &EvalReport) -> String {
    let mut out = String::from("bin_lower,bin_upper,count,confidence,accuracy\n");
    for b in &report.reliability.bins {
        let conf = b
            .mean_confidence
            .map_or(String::new(), |v| format!("{v:.5}"));
        let acc = b.accuracy.map_or(String::new(), |v| format!("{v:.5}"));
        out.push_str(&format!(
            "{:.5},{:.5},{},{},{}\n",
            b.lower, b.upper, b.count, conf, acc
        ));
    }
    out
}

fn mdi_csv(forest: &forest::Forest, deep_dim: usize) -> String {
    let importances = forest::mdi_importances(forest);
    let mut out = String::from("feature,importance\n");
    for (i, v) in importances.iter().enumerate() {
        let name = if i < deep_dim {
            format!("e{i}")
        } else {
            STRUCT_FEATURE_NAMES[i - deep_dim].to_string()
        };
        out.push_str(&format!("{name},{v:.5}\n"));
    }
    out
}

fn report_json(report: &EvalReport) -> String {
    let mut value = serde_json::to_value(report).expect("report serialization is infallible");
    round_json_floats(&mut value);
    let mut json = serde_json::to_string_pretty(&value).expect("value serialization is infallible");
    json.push('\n');
    json
}

/// Runs the selected ablations on the configured data source and writes the
/// report bundle into `config.output_dir`.
///
/// Config and data problems surface before any training starts. Outputs:
/// `report_<ablation>.json`, `roc_<ablation>.csv`, `pr_<ablation>.csv`,
/// `reliability_<ablation>.csv`, `table1.csv`, `table1.json`,
/// `mdi_rf_concat.csv` (when rf_concat is selected), `manifest.json`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    config.validate()?;

    let mut derived_seeds = BTreeMap::new();
    let mut input_checksums = BTreeMap::new();

    let dataset = match (&config.data.files, &config.data.synthetic) {
        (Some(files), None) => {
            let labels_source = match &files.labels {
                Some(path) => LabelsSource::Csv(path.clone()),
                None => LabelsSource::ClusterColumn,
            };
            let options = LoadOptions {
                expected_dim: files.expected_dim,
                ids_path: files.ids.clone(),
            };
            input_checksums.insert("embeddings".to_string(), file_checksum(&files.embeddings)?);
            input_checksums.insert("features".to_string(), file_checksum(&files.features)?);
            if let Some(labels) = &files.labels {
                input_checksums.insert("labels".to_string(), file_checksum(labels)?);
            }
            if let Some(ids) = &files.ids {
                input_checksums.insert("ids".to_string(), file_checksum(ids)?);
            }
            load_dataset(&files.embeddings, &files.features, &labels_source, &options)?
        }
        (None, Some(synth)) => {
            let seed = seed_for(config.seed, "synthetic");
            derived_seeds.insert("synthetic".to_string(), seed);
            let (dataset, _clusters) = generate_synthetic(&synth.to_params(seed))?;
            dataset
        }
        _ => unreachable!("validate() enforces exactly one source"),
    };
    input_checksums.insert("dataset".to_string(), dataset_checksum(&dataset));

    // Remaining pre-training validation: forest width constraints per
    // selected ablation.
    let selected: Vec<Ablation> = CANONICAL_ABLATIONS
        .into_iter()
        .filter(|a| config.ablations.contains(a))
        .collect();
    for &ablation in &selected {
        if ablation != Ablation::SflGated {
            let width = feature_width(ablation, dataset.deep.ncols());
            forest::validate_config(&config.forest.to_config(0), width).map_err(|e| {
                ExperimentError::Config(format!("{} ablation: {e}", ablation.as_str()))
            })?;
        }
    }

    let split_seed = seed_for(config.seed, "split");
    derived_seeds.insert("split".to_string(), split_seed);
    let split = stratified_split(&dataset.labels, config.split.test_fraction, split_seed)?;
    let test_labels: Vec<u8> = split
        .test_indices
        .iter()
        .map(|&i| dataset.labels[i])
        .collect();

    for &ablation in &selected {
        let tag = match ablation {
            Ablation::SflGated => "train/sfl_gated".to_string(),
            _ => format!("forest/{}", ablation.as_str()),
        };
        derived_seeds.insert(tag.clone(), seed_for(config.seed, &tag));
    }

    std::fs::create_dir_all(&config.output_dir).map_err(|source| ExperimentError::Output {
        path: config.output_dir.clone(),
        source,
    })?;

    let mut reports = Vec::new();
    let mut table = Vec::new();
    let mut concat_forest = None;
    for &ablation in &selected {
        let result = run_ablation(
            ablation,
            &dataset,
            &split.train_indices,
            &split.test_indices,
            config,
            &mut concat_forest,
        )?;
        let report = evaluate(&test_labels, &result.probs)?;

        let name = ablation.as_str();
        let dir = &config.output_dir;
        atomic_write(
            &dir.join(format!("report_{name}.json")),
            report_json(&report).as_bytes(),
        )?;
        atomic_write(
            &dir.join(format!("roc_{name}.csv")),
            curve_csv_5dp(&report.roc.points).as_bytes(),
        )?;
        atomic_write(
            &dir.join(format!("pr_{name}.csv")),
            curve_csv_5dp(&report.pr.points).as_bytes(),
        )?;
        atomic_write(
            &dir.join(format!("reliability_{name}.csv")),
            reliability_csv_5dp(&report).as_bytes(),
        )?;

        table.push(TableRow {
            ablation: name.to_string(),
            accuracy: report.accuracy,
            macro_f1: report.macro_f1,
            mcc: report.mcc,
            brier: report.brier,
            log_loss: report.log_loss,
            ece: report.ece,
        });
        reports.push((ablation, report));
    }

    if let Some(forest) = &concat_forest {
        atomic_write(
            &config.output_dir.join("mdi_rf_concat.csv"),
            mdi_csv(forest, dataset.deep.ncols()).as_bytes(),
        )?;
    }

    atomic_write(
        &config.output_dir.join("table1.csv"),
        table_csv(&table).as_bytes(),
    )?;
    let mut table_value = serde_json::to_value(&table).expect("table serialization is infallible");
    round_json_floats(&mut table_value);
    let mut table_json =
        serde_json::to_string_pretty(&table_value).expect("value serialization is infallible");
    table_json.push('\n');
    atomic_write(
        &config.output_dir.join("table1.json"),
        table_json.as_bytes(),
    )?;

    let manifest = Manifest {
        artifact_versions: BTreeMap::from([
            ("manifest", 1),
            ("report", 1),
            ("table1", 1),
            ("curves", 1),
            ("mdi", 1),
        ]),
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
        derived_seeds,
        input_checksums,
        scaler_policy: "standardization refit per ablation on its own training columns",
    };
    let mut manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization is infallible");
    manifest_json.push('\n');
    atomic_write(
        &config.output_dir.join("manifest.json"),
        manifest_json.as_bytes(),
    )?;

    Ok(RunSummary {
        output_dir: config.output_dir.clone(),
        reports,
        table,
    })
}

/// Reads a lyric records CSV (`id,popularity,text`) and writes the features
/// CSV. Returns the number of rows written. Idempotent: equal input gives
/// byte-identical output.
pub fn run_extract(records_path: &Path, out_path: &Path) -> Result<usize, ExperimentError> {
    let records = data::read_lyric_records(records_path)?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let features: Vec<StructFeatures> = records.iter().map(extract_struct_features).collect();
    let tmp = out_path.with_extension("csv.tmp");
    data::write_features_csv(&tmp, &ids, &features, None)?;
    std::fs::rename(&tmp, out_path).map_err(|source| ExperimentError::Output {
        path: out_path.to_path_buf(),
        source,
    })?;
    Ok(records.len())
}

/// Reads a CSV carrying `id` and `cluster_label` columns (any position),
/// reframes to the binary task, writes the labels CSV and the reframing
/// report JSON.
pub fn run_reframe(
    clusters_path: &Path,
    labels_out: &Path,
    report_out: &Path,
) -> Result<ReframingReport, ExperimentError> {
    let csv_err = |message: String| {
        ExperimentError::Data(DataError::Csv {
            path: clusters_path.to_path_buf(),
            message,
        })
    };
    let mut reader = csv::ReaderBuilder::new()
        .from_path(clusters_path)
        .map_err(|e| csv_err(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            ExperimentError::Data(DataError::MissingColumn {
                path: clusters_path.to_path_buf(),
                column: name.to_string(),
            })
        })
    };
    let id_col = find("id")?;
    let cluster_col = find("cluster_label")?;

    let mut ids = Vec::new();
    let mut clusters = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let id = record
            .get(id_col)
            .ok_or_else(|| csv_err(format!("row {}: missing id field", row + 2)))?;
        let raw = record
            .get(cluster_col)
            .ok_or_else(|| csv_err(format!("row {}: missing cluster_label field", row + 2)))?;
        let cluster: i64 = raw
            .trim()
            .parse()
            .map_err(|_| csv_err(format!("row {}: invalid cluster_label {raw:?}", row + 2)))?;
        ids.push(id.to_string());
        clusters.push(cluster);
    }

    let (labels, report) = reframe_binary(&clusters)?;
    let tmp = labels_out.with_extension("csv.tmp");
    data::write_labels_csv(&tmp, &ids, &labels)?;
    std::fs::rename(&tmp, labels_out).map_err(|source| ExperimentError::Output {
        path: labels_out.to_path_buf(),
        source,
    })?;
    let mut json =
        serde_json::to_string_pretty(&report).expect("report serialization is infallible");
    json.push('\n');
    atomic_write(report_out, json.as_bytes())?;
    Ok(report)
}

/// Files written by [`run_synth`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub embeddings: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub clusters: PathBuf,
}

/// Generates a synthetic dataset and writes it in the ingestible formats:
/// `embeddings.bin` (32-bit storage, so reloading truncates the f64
/// generator output), `features.csv`, `labels.csv` and `clusters.csv`.
pub fn run_synth(params: &SyntheticParams, out_dir: &Path) -> Result<SynthPaths, ExperimentError> {
    let (dataset, clusters) = generate_synthetic(params)?;
    std::fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Output {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let paths = SynthPaths {
        embeddings: out_dir.join("embeddings.bin"),
        features: out_dir.join("features.csv"),
        labels: out_dir.join("labels.csv"),
        clusters: out_dir.join("clusters.csv"),
    };

    data::write_embeddings_binary(&paths.embeddings, dataset.deep.view())?;

    let ids: Vec<String> = (0..dataset.n_rows()).map(|i| i.to_string()).collect();
    let features: Vec<StructFeatures> = dataset
        .aux
        .rows()
        .into_iter()
        .map(|row| StructFeatures {
            rhyme_density: row[0],
            lexical_diversity: row[1],
            pronoun_ratio: row[2],
            popularity: row[3],
        })
        .collect();
    data::write_features_csv(&paths.features, &ids, &features, None)?;
    data::write_labels_csv(&paths.labels, &ids, &dataset.labels)?;

    let mut clusters_csv = String::from("id,cluster_label\n");
    for (id, c) in ids.iter().zip(&clusters) {
        clusters_csv.push_str(&format!("{id},{c}\n"));
    }
    atomic_write(&paths.clusters, clusters_csv.as_bytes())?;
    Ok(paths)
}
