//! Binary classification evaluation: threshold metrics from confusion
//! counts, proper scoring losses, binned calibration error with reliability
//! data, and ranking curves (ROC/AUC, PR/AP).
//!
//! Class 1 is the positive class throughout. All operations are pure; curve
//! computations sort internally and never mutate their inputs.
//!
//! Two exactness guarantees matter here and shape the arithmetic:
//!
//! * AUC is accumulated as an integer numerator (twice the trapezoid area in
//!   units of 1/(2·P·N)) and divided once, which makes the sweep equal the
//!   pairwise Mann-Whitney count (ties worth ½) bit for bit and makes AUC
//!   exactly invariant under strictly increasing score transforms.
//! * AP is the literal sum Σ (R_k − R_{k−1})·P_k over descending distinct
//!   scores with ties grouped, each term formed from integer counts, so an
//!   exhaustive-threshold oracle reproduces it exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default decision threshold: predict Class 1 iff p ≥ 0.5.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Default number of equal-width calibration bins.
pub const DEFAULT_ECE_BINS: usize = 10;
/// Default log-loss probability clip.
pub const DEFAULT_LOG_LOSS_CLIP: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("labels ({labels}) and probabilities ({probs}) differ in length")]
    LengthMismatch { labels: usize, probs: usize },
    #[error("metric requires at least one sample")]
    Empty,
    #[error("metric requires both classes to be present")]
    SingleClass,
    #[error("metric requires at least one positive label")]
    NoPositives,
    #[error("probability at index {index} is not a finite value in [0,1]: {value}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("label at index {index} must be 0 or 1, got {value}")]
    InvalidLabel { index: usize, value: u8 },
    #[error("calibration requires at least one bin")]
    ZeroBins,
}

/// The four confusion-matrix cells; positive class = Class 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

/// Accuracy, macro F1 and MCC derived from one confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mcc: f64,
}

/// Which probability the calibration bins are built on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// Confidence = max(p, 1−p); accuracy = agreement of the thresholded
    /// prediction with the label. The reliability-literature default.
    #[default]
    MaxClass,
    /// Confidence = p itself; accuracy = empirical positive rate.
    PositiveClass,
}

/// One calibration bin. Empty bins carry no confidence/accuracy values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Reliability-diagram data underlying an ECE value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBins {
    pub bins: Vec<ReliabilityBin>,
}

/// ROC curve points (FPR, TPR) from (0,0) to (1,1) plus trapezoid AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<[f64; 2]>,
    pub auc: f64,
}

/// PR curve points (recall, precision) plus step-wise average precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<[f64; 2]>,
    pub average_precision: f64,
}

/// The full evaluation row: the six headline metrics plus curve data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub brier: f64,
    pub log_loss: f64,
    pub ece: f64,
    pub confusion: ConfusionCounts,
    pub roc: RocCurve,
    pub pr: PrCurve,
    pub reliability: ReliabilityBins,
}

fn check_pairs(labels: &[u8], probs: &[f64]) -> Result<(), MetricsError> {
    if labels.len() != probs.len() {
        return Err(MetricsError::LengthMismatch {
            labels: labels.len(),
            probs: probs.len(),
        });
    }
    for (index, &value) in labels.iter().enumerate() {
        if value > 1 {
            return Err(MetricsError::InvalidLabel { index, value });
        }
    }
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(MetricsError::InvalidProbability { index, value });
        }
    }
    Ok(())
}

/// Fills the confusion matrix; predicts Class 1 iff p ≥ threshold.
pub fn confusion(
    labels: &[u8],
    probs: &[f64],
    threshold: f64,
) -> Result<ConfusionCounts, MetricsError> {
    check_pairs(labels, probs)?;
    let mut c = ConfusionCounts::default();
    for (&y, &p) in labels.iter().zip(probs) {
        let predicted = p >= threshold;
        match (y == 1, predicted) {
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (true, true) => c.tp += 1,
        }
    }
    Ok(c)
}

/// Accuracy, macro F1 and MCC from confusion counts.
///
/// Per-class F1 is 2·tp_c/(2·tp_c + fp_c + fn_c) with 0/0 defined as 0; MCC
/// is 0 whenever any marginal is 0. Callers must supply total ≥ 1; empty
/// counts yield all zeros.
pub fn threshold_metrics(c: &ConfusionCounts) -> ThresholdMetrics {
    let total = c.total();
    if total == 0 {
        return ThresholdMetrics {
            accuracy: 0.0,
            macro_f1: 0.0,
            mcc: 0.0,
        };
    }
    let accuracy = (c.tp + c.tn) as f64 / total as f64;

    // Class 1 then class 0; for class 0 the roles of fp and fn swap.
    let f1_pos = f1_cell(c.tp, c.fp, c.fn_);
    let f1_neg = f1_cell(c.tn, c.fn_, c.fp);
    let macro_f1 = (f1_pos + f1_neg) / 2.0;

    let marginals = [c.tp + c.fp, c.tp + c.fn_, c.tn + c.fp, c.tn + c.fn_];
    let mcc = if marginals.contains(&0) {
        0.0
    } else {
        let numer = (c.tp as i128 * c.tn as i128 - c.fp as i128 * c.fn_ as i128) as f64;
        let denom = marginals.iter().map(|&m| m as u128).product::<u128>() as f64;
        numer / denom.sqrt()
    };

    ThresholdMetrics {
        accuracy,
        macro_f1,
        mcc,
    }
}

fn f1_cell(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Mean squared error between probabilities and binary outcomes.
pub fn brier(labels: &[u8], probs: &[f64]) -> Result<f64, MetricsError> {
    check_pairs(labels, probs)?;
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| {
            let d = p - y as f64;
            d * d
        })
        .sum();
    Ok(sum / labels.len() as f64)
}

/// Mean binary cross-entropy with probabilities clipped into [clip, 1−clip].
pub fn log_loss(labels: &[u8], probs: &[f64], clip: f64) -> Result<f64, MetricsError> {
    check_pairs(labels, probs)?;
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| {
            let p = p.clamp(clip, 1.0 - clip);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / labels.len() as f64)
}

/// Expected calibration error with the default max-confidence convention.
pub fn ece(
    labels: &[u8],
    probs: &[f64],
    n_bins: usize,
) -> Result<(f64, ReliabilityBins), MetricsError> {
    ece_with_mode(labels, probs, n_bins, ConfidenceMode::MaxClass)
}

/// Expected calibration error over `n_bins` equal-width bins.
///
/// A value on an interior bin boundary belongs to the higher bin; the top
/// bin is closed at 1.0. Empty bins contribute nothing to the sum.
pub fn ece_with_mode(
    labels: &[u8],
    probs: &[f64],
    n_bins: usize,
    mode: ConfidenceMode,
) -> Result<(f64, ReliabilityBins), MetricsError> {
    check_pairs(labels, probs)?;
    if n_bins == 0 {
        return Err(MetricsError::ZeroBins);
    }
    let n = labels.len();
    let mut counts = vec![0u64; n_bins];
    let mut conf_sums = vec![0.0f64; n_bins];
    let mut hit_sums = vec![0.0f64; n_bins];

    let upper_edge = |b: usize| (b + 1) as f64 / n_bins as f64;
    for (&y, &p) in labels.iter().zip(probs) {
        let (confidence, correct) = match mode {
            ConfidenceMode::MaxClass => {
                let predicted = p >= 0.5;
                (p.max(1.0 - p), predicted == (y == 1))
            }
            ConfidenceMode::PositiveClass => (p, y == 1),
        };
        let bin = (0..n_bins)
            .find(|&b| confidence < upper_edge(b))
            .unwrap_or(n_bins - 1);
        counts[bin] += 1;
        conf_sums[bin] += confidence;
        hit_sums[bin] += if correct { 1.0 } else { 0.0 };
    }

    let mut bins = Vec::with_capacity(n_bins);
    let mut ece = 0.0;
    for b in 0..n_bins {
        let (mean_confidence, accuracy) = if counts[b] > 0 {
            let conf = conf_sums[b] / counts[b] as f64;
            let acc = hit_sums[b] / counts[b] as f64;
            ece += counts[b] as f64 / n as f64 * (acc - conf).abs();
            (Some(conf), Some(acc))
        } else {
            (None, None)
        };
        bins.push(ReliabilityBin {
            lower: b as f64 / n_bins as f64,
            upper: upper_edge(b),
            count: counts[b],
            mean_confidence,
            accuracy,
        });
    }
    Ok((ece, ReliabilityBins { bins }))
}

/// Indices of `probs` sorted by descending score.
fn descending_order(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    order
}

/// ROC curve by threshold sweep over distinct scores (ties grouped).
///
/// Returns points from (0,0) to (1,1) and the trapezoid AUC, which equals
/// the Mann-Whitney concordance probability with ties counted ½, exactly.
pub fn roc_curve(labels: &[u8], probs: &[f64]) -> Result<(Vec<[f64; 2]>, f64), MetricsError> {
    check_pairs(labels, probs)?;
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let order = descending_order(probs);
    let mut points = vec![[0.0, 0.0]];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area under the curve, in units of 1/(2·P·N); stays integral
    // so the final division is the only rounding step.
    let mut numerator: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let score = probs[order[i]];
        let (mut dtp, mut dfp) = (0u64, 0u64);
        while i < order.len() && probs[order[i]] == score {
            if labels[order[i]] == 1 {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        numerator += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        points.push([fp as f64 / n_neg as f64, tp as f64 / n_pos as f64]);
    }
    let auc = numerator as f64 / (2 * n_pos * n_neg) as f64;
    Ok((points, auc))
}

/// Precision-recall curve by descending-score sweep with ties grouped.
///
/// AP = Σ (R_k − R_{k−1})·P_k, step-wise without interpolation. The leading
/// point (0, 1) anchors the curve.
pub fn pr_curve(labels: &[u8], probs: &[f64]) -> Result<(Vec<[f64; 2]>, f64), MetricsError> {
    check_pairs(labels, probs)?;
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    if n_pos == 0 {
        return Err(MetricsError::NoPositives);
    }

    let order = descending_order(probs);
    let mut points = vec![[0.0, 1.0]];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut average_precision = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = probs[order[i]];
        let (mut dtp, mut dfp) = (0u64, 0u64);
        while i < order.len() && probs[order[i]] == score {
            if labels[order[i]] == 1 {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        tp += dtp;
        fp += dfp;
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        average_precision += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push([recall, precision]);
    }
    Ok((points, average_precision))
}

/// Assembles the full report with default settings (threshold 0.5, 10 bins,
/// max-confidence calibration, log-loss clip 1e-15).
pub fn evaluate(labels: &[u8], probs: &[f64]) -> Result<EvalReport, MetricsError> {
    check_pairs(labels, probs)?;
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let confusion_counts = confusion(labels, probs, DEFAULT_THRESHOLD)?;
    let t = threshold_metrics(&confusion_counts);
    let brier_score = brier(labels, probs)?;
    let ll = log_loss(labels, probs, DEFAULT_LOG_LOSS_CLIP)?;
    let (ece_value, reliability) = ece(labels, probs, DEFAULT_ECE_BINS)?;
    let (roc_points, auc) = roc_curve(labels, probs)?;
    let (pr_points, average_precision) = pr_curve(labels, probs)?;
    Ok(EvalReport {
        accuracy: t.accuracy,
        macro_f1: t.macro_f1,
        mcc: t.mcc,
        brier: brier_score,
        log_loss: ll,
        ece: ece_value,
        confusion: confusion_counts,
        roc: RocCurve {
            points: roc_points,
            auc,
        },
        pr: PrCurve {
            points: pr_points,
            average_precision,
        },
        reliability,
    })
}

/// Renders curve points as `x,y` CSV for external plotting.
pub fn curve_to_csv(points: &[[f64; 2]]) -> String {
    let mut out = String::from("x,y\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    out
}

/// Renders reliability bins as CSV; empty bins leave the value fields blank.
pub fn reliability_to_csv(bins: &ReliabilityBins) -> String {
    let mut out = String::from("bin_lower,bin_upper,count,confidence,accuracy\n");
    for b in &bins.bins {
        let conf = b.mean_confidence.map_or(String::new(), |v| v.to_string());
        let acc = b.accuracy.map_or(String::new(), |v| v.to_string());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            b.lower, b.upper, b.count, conf, acc
        ));
    }
    out
}
