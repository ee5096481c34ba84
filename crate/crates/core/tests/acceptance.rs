//! Acceptance checks. Each test measures one release criterion and prints
//! a single `criterion N: PASS/FAIL (...)` line with the measured values
//! (visible with `cargo test --test acceptance -- --nocapture`, or in the
//! failure output when a criterion does not hold).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

use sfl_core::data::{generate_synthetic, reframe_binary, stratified_split, SyntheticParams};
use sfl_core::experiment::{
    run_experiment, Ablation, DataSettings, ExperimentConfig, ForestSettings, SplitSettings,
    SyntheticSettings, TrainSettings, CANONICAL_ABLATIONS,
};
use sfl_core::features::{fit_scaler, transform, STRUCT_DIM};
use sfl_core::forest::{fit_forest, mdi_importances, ForestConfig};
use sfl_core::metrics::{
    brier, ece, log_loss, pr_curve, roc_curve, threshold_metrics, ConfusionCounts,
    DEFAULT_ECE_BINS, DEFAULT_LOG_LOSS_CLIP,
};
use sfl_core::sfl::{backward, fuse, gate, loss, predict_proba, SflGradients, SflParams};

fn verdict(id: u32, pass: bool, detail: &str) {
    println!(
        "criterion {id}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_1_confusion_count_oracle() {
    let started = Instant::now();
    let counts = ConfusionCounts {
        tn: 10_000,
        fp: 105,
        fn_: 105,
        tp: 9_403,
    };
    let m = threshold_metrics(&counts);
    let elapsed = started.elapsed();

    let tol = 2e-4;
    let ok_acc = (m.accuracy - 0.9894).abs() < tol;
    let ok_f1 = (m.macro_f1 - 0.9894).abs() < tol;
    let ok_mcc = (m.mcc - 0.9787).abs() < tol;
    let ok_time = elapsed.as_secs_f64() < 1.0;
    let pass = ok_acc && ok_f1 && ok_mcc && ok_time;
    verdict(
        1,
        pass,
        &format!(
            "accuracy {:.6} vs 0.9894, macro F1 {:.6} vs 0.9894, MCC {:.6} vs 0.9787, tol {tol}, {:?}",
            m.accuracy, m.macro_f1, m.mcc, elapsed
        ),
    );
    assert!(ok_acc, "accuracy {} not within {tol} of 0.9894", m.accuracy);
    assert!(ok_f1, "macro F1 {} not within {tol} of 0.9894", m.macro_f1);
    assert!(ok_mcc, "MCC {} not within {tol} of 0.9787", m.mcc);
    assert!(ok_time, "took {elapsed:?}, budget 1 s");
}

fn flat_param_count(d: usize) -> usize {
    d * STRUCT_DIM + d + d + 1
}

fn get_param(p: &SflParams, idx: usize) -> f64 {
    let d = p.deep_dim();
    let gb = d * STRUCT_DIM;
    let hw = gb + d;
    let hb = hw + d;
    match idx {
        i if i < gb => p.gate_weights[[i / STRUCT_DIM, i % STRUCT_DIM]],
        i if i < hw => p.gate_bias[i - gb],
        i if i < hb => p.head_weights[i - hw],
        _ => p.head_bias,
    }
}

fn set_param(p: &mut SflParams, idx: usize, v: f64) {
    let d = p.deep_dim();
    let gb = d * STRUCT_DIM;
    let hw = gb + d;
    let hb = hw + d;
    match idx {
        i if i < gb => p.gate_weights[[i / STRUCT_DIM, i % STRUCT_DIM]] = v,
        i if i < hw => p.gate_bias[i - gb] = v,
        i if i < hb => p.head_weights[i - hw] = v,
        _ => p.head_bias = v,
    }
}

fn grad_param(g: &SflGradients, d: usize, idx: usize) -> f64 {
    let gb = d * STRUCT_DIM;
    let hw = gb + d;
    let hb = hw + d;
    match idx {
        i if i < gb => g.gate_weights[[i / STRUCT_DIM, i % STRUCT_DIM]],
        i if i < hw => g.gate_bias[i - gb],
        i if i < hb => g.head_weights[i - hw],
        _ => g.head_bias,
    }
}

#[test]
fn criterion_2_gradient_check() {
    let started = Instant::now();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=16);
        let batch = rng.random_range(1..=8);
        let params = SflParams::glorot_init(d, &mut rng);
        let deep = Array2::from_shape_fn((batch, d), |_| rng.sample::<f64, _>(StandardNormal));
        let aux = Array2::from_shape_fn((batch, STRUCT_DIM), |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let labels: Vec<u8> = (0..batch).map(|_| rng.random_range(0..2u8)).collect();

        let analytic = backward(&params, deep.view(), aux.view(), &labels);
        let mut probe = params.clone();
        for idx in 0..flat_param_count(d) {
            let orig = get_param(&probe, idx);
            set_param(&mut probe, idx, orig + h);
            let up = loss(&predict_proba(&probe, deep.view(), aux.view()), &labels);
            set_param(&mut probe, idx, orig - h);
            let down = loss(&predict_proba(&probe, deep.view(), aux.view()), &labels);
            set_param(&mut probe, idx, orig);
            let numeric = (up - down) / (2.0 * h);
            let a = grad_param(&analytic, d, idx);
            // Relative error with a scale floor two orders above the
            // finite-difference noise floor at this step size.
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max(err);
        }
    }
    let elapsed = started.elapsed();
    let ok_err = worst < 1e-5;
    let ok_time = elapsed.as_secs_f64() < 10.0;
    let pass = ok_err && ok_time;
    verdict(
        2,
        pass,
        &format!("max relative error {worst:.3e} over 100 seeds (bound 1e-5), {elapsed:?}"),
    );
    assert!(ok_err, "max relative error {worst:.3e} not below 1e-5");
    assert!(ok_time, "took {elapsed:?}, budget 10 s");
}

#[test]
fn criterion_3_directional_benchmark() {
    let started = Instant::now();
    let dir = TempDir::new().unwrap();
    let config = ExperimentConfig {
        data: DataSettings {
            files: None,
            synthetic: Some(SyntheticSettings {
                n: 20_000,
                d: 64,
                separation: 10.0,
                aux_signal: 2.0,
                ..SyntheticSettings::default()
            }),
        },
        split: SplitSettings::default(),
        train: TrainSettings::default(),
        forest: ForestSettings::default(),
        ablations: CANONICAL_ABLATIONS.to_vec(),
        output_dir: dir.path().to_path_buf(),
        seed: 0,
    };
    let summary = run_experiment(&config).unwrap();
    let elapsed = started.elapsed();
    let row = |a: Ablation| {
        summary
            .table
            .iter()
            .find(|r| r.ablation == a.as_str())
            .unwrap()
    };
    let sfl = row(Ablation::SflGated);
    let concat = row(Ablation::RfConcat);
    let aux = row(Ablation::RfAuxOnly);

    let ok_acc = sfl.accuracy >= 0.98;
    let ok_ece = sfl.ece <= 0.01;
    let ok_ratio = concat.ece >= 2.0 * sfl.ece;
    let ok_gap = aux.accuracy <= concat.accuracy - 0.08;
    let ok_time = elapsed.as_secs_f64() < 300.0;
    let pass = ok_acc && ok_ece && ok_ratio && ok_gap && ok_time;
    verdict(
        3,
        pass,
        &format!(
            "sfl accuracy {:.5} (>= 0.98: {ok_acc}), sfl ECE {:.5} (<= 0.01: {ok_ece}), \
             rf_concat ECE {:.5} (>= 2x sfl: {ok_ratio}), rf_aux_only {:.5} vs rf_concat {:.5} \
             (gap >= 0.08: {ok_gap}), {elapsed:?}",
            sfl.accuracy, sfl.ece, concat.ece, aux.accuracy, concat.accuracy
        ),
    );
    assert!(ok_ece, "sfl ECE {} above 0.01", sfl.ece);
    assert!(
        ok_ratio,
        "rf_concat ECE {} below 2x sfl ECE {}",
        concat.ece, sfl.ece
    );
    assert!(
        ok_gap,
        "rf_aux_only accuracy {} not at least 8 points below rf_concat {}",
        aux.accuracy, concat.accuracy
    );
    assert!(ok_time, "took {elapsed:?}, budget 300 s");
    // The generator's Class-1 geometry (ten unit-variance sub-clusters at
    // radius `separation` in random directions around the Class-0 Gaussian)
    // caps every gated-linear separator near Phi(separation/(2*sqrt(10))):
    // roughly 0.95 here, and a full logistic fit on the concatenated
    // features measures 0.974. The 0.98 accuracy bound is stated for this
    // same geometry, so it cannot be met by this architecture; the check
    // stays as stated rather than being loosened to fit.
    assert!(
        ok_acc,
        "sfl accuracy {} below 0.98 (gated-linear ceiling on this geometry is ~0.96)",
        sfl.accuracy
    );
}

#[test]
fn criterion_4_calibration_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100_000;
    let mut probs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let p: f64 = rng.random();
        probs.push(p);
        labels.push((rng.random::<f64>() < p) as u8);
    }
    let (e, _) = ece(&labels, &probs, DEFAULT_ECE_BINS).unwrap();
    let b = brier(&labels, &probs).unwrap();
    let ll = log_loss(&labels, &probs, DEFAULT_LOG_LOSS_CLIP).unwrap();
    let elapsed = started.elapsed();

    let brier_target = 1.0 / 6.0;
    let ok_ece = e < 0.01;
    let ok_brier = (b - brier_target).abs() < 1e-3;
    let ok_ll = (ll - 0.5).abs() < 5e-3;
    let ok_time = elapsed.as_secs_f64() < 5.0;
    let pass = ok_ece && ok_brier && ok_ll && ok_time;
    verdict(
        4,
        pass,
        &format!(
            "ECE {e:.5} (< 0.01), Brier {b:.5} vs {brier_target:.5} (tol 1e-3), \
             log loss {ll:.5} vs 0.5 (tol 5e-3), {elapsed:?}"
        ),
    );
    assert!(ok_ece, "ECE {e} not below 0.01");
    assert!(ok_brier, "Brier {b} not within 1e-3 of {brier_target}");
    assert!(ok_ll, "log loss {ll} not within 5e-3 of 0.5");
    assert!(ok_time, "took {elapsed:?}, budget 5 s");
}

/// Concordance AUC: over all positive/negative pairs, wins count 2 and
/// ties count 1, divided once by 2·P·N exactly like the sweep.
fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut numerator: u64 = 0;
    let (mut n_pos, mut n_neg) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 1 {
            n_pos += 1;
            for (j, &yj) in labels.iter().enumerate() {
                if yj == 0 {
                    if scores[i] > scores[j] {
                        numerator += 2;
                    } else if scores[i] == scores[j] {
                        numerator += 1;
                    }
                }
            }
        } else {
            n_neg += 1;
        }
    }
    numerator as f64 / (2 * n_pos * n_neg) as f64
}

/// AP by explicit threshold enumeration over the distinct scores,
/// descending, with tied scores entering together.
fn exhaustive_ap(labels: &[u8], scores: &[f64]) -> f64 {
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

#[test]
fn criterion_5_curve_oracles() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0u32;
    while checked < 1000 {
        let n = rng.random_range(2..=12usize);
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        if !labels.contains(&0) || !labels.contains(&1) {
            continue;
        }
        // Half the family uses a five-level score grid to force ties,
        // including cross-class ties; the other half draws continuously.
        let grid = checked.is_multiple_of(2);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if grid {
                    rng.random_range(0..5) as f64 / 4.0
                } else {
                    rng.random()
                }
            })
            .collect();

        let (_, auc) = roc_curve(&labels, &scores).unwrap();
        let auc_oracle = pairwise_auc(&labels, &scores);
        assert!(
            auc == auc_oracle,
            "sweep AUC {auc} != pairwise AUC {auc_oracle} on labels {labels:?} scores {scores:?}"
        );

        let (_, ap) = pr_curve(&labels, &scores).unwrap();
        let ap_oracle = exhaustive_ap(&labels, &scores);
        assert!(
            ap == ap_oracle,
            "sweep AP {ap} != exhaustive AP {ap_oracle} on labels {labels:?} scores {scores:?}"
        );
        checked += 1;
    }

    // Separable data: every positive scores strictly above every negative.
    let labels: Vec<u8> = [vec![0u8; 40], vec![1u8; 60]].concat();
    let mut scores: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..0.45)).collect();
    scores.extend((0..60).map(|_| rng.random_range(0.55..1.0)));
    let (_, auc) = roc_curve(&labels, &scores).unwrap();
    let (_, ap) = pr_curve(&labels, &scores).unwrap();
    let elapsed = started.elapsed();

    let ok_sep = auc == 1.0 && ap == 1.0;
    let ok_time = elapsed.as_secs_f64() < 30.0;
    let pass = ok_sep && ok_time;
    verdict(
        5,
        pass,
        &format!(
            "1000 instances: sweep AUC == pairwise AUC and sweep AP == exhaustive AP exactly; \
             separable AUC {auc}, AP {ap}, {elapsed:?}"
        ),
    );
    assert!(ok_sep, "separable data gave AUC {auc}, AP {ap}");
    assert!(ok_time, "took {elapsed:?}, budget 30 s");
}

#[test]
fn criterion_6_reframing_fixture() {
    // Eleven clusters plus noise, largest holding exactly 51.861% of the
    // 100 000 rows.
    let mut clusters = Vec::with_capacity(100_000);
    clusters.extend(std::iter::repeat_n(0i64, 51_861));
    for c in 1..=10i64 {
        clusters.extend(std::iter::repeat_n(c, 4_500));
    }
    clusters.extend(std::iter::repeat_n(-1i64, 3_139));
    assert_eq!(clusters.len(), 100_000);
    // Interleave rows so the mapping cannot depend on input order.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    use rand::seq::SliceRandom;
    clusters.shuffle(&mut rng);

    let (labels, report) = reframe_binary(&clusters).unwrap();
    let exact = report.class0_fraction == 0.51861;
    let noise_to_one = clusters
        .iter()
        .zip(&labels)
        .all(|(&c, &y)| c != -1 || y == 1);
    let dominant_to_zero = clusters
        .iter()
        .zip(&labels)
        .all(|(&c, &y)| (c == 0) == (y == 0));
    let pass = exact && noise_to_one && dominant_to_zero;
    verdict(
        6,
        pass,
        &format!(
            "class0_fraction {} == 0.51861 exactly: {exact}, all noise rows Class 1: {noise_to_one}",
            report.class0_fraction
        ),
    );
    assert!(
        exact,
        "class0_fraction {} != 0.51861",
        report.class0_fraction
    );
    assert!(noise_to_one, "some noise row mapped to Class 0");
    assert!(dominant_to_zero, "dominant-cluster mapping broken");
}

fn read_reports(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().to_string_lossy().into_owned();
        out.insert(name, std::fs::read(entry.path()).unwrap());
    }
    out
}

#[test]
fn criterion_7_run_determinism() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let config_path = dir.path().join("config.json");
    let config = serde_json::json!({
        "data": {"synthetic": {"n": 800, "d": 6, "separation": 6.0, "aux_signal": 2.0}},
        "train": {"max_epochs": 4, "batch_size": 64, "learning_rate": 0.05},
        "forest": {"n_trees": 15},
        "output_dir": out_dir,
        "seed": 123
    });
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let run = || {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_sfl"))
            .args(["run", "--config"])
            .arg(&config_path)
            .output()
            .expect("binary runs");
        assert!(
            status.status.success(),
            "run failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    };

    run();
    let first = read_reports(&out_dir);
    run();
    let second = read_reports(&out_dir);

    let same_names = first.keys().eq(second.keys());
    let mut diff = Vec::new();
    for (name, bytes) in &first {
        if second.get(name) != Some(bytes) {
            diff.push(name.clone());
        }
    }
    let pass = same_names && diff.is_empty();
    verdict(
        7,
        pass,
        &format!(
            "two CLI runs, identical config and seed: {} artifacts byte-identical{}",
            first.len(),
            if diff.is_empty() {
                String::new()
            } else {
                format!("; differing: {diff:?}")
            }
        ),
    );
    assert!(same_names, "artifact sets differ between runs");
    assert!(diff.is_empty(), "artifacts changed between runs: {diff:?}");
}

/// Re-asserts the named module invariants at fixed seeds, then measures
/// coverage of the metrics module when the tooling is present.
#[test]
fn criterion_8_property_suites_and_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Gate bounds: sigmoid outputs stay inside [0, 1], strictly inside for
    // moderate inputs.
    let params = SflParams::glorot_init(8, &mut rng);
    for _ in 0..200 {
        let s = Array1::from_shape_fn(STRUCT_DIM, |_| rng.random_range(-5.0..5.0));
        let g = gate(&params, s.view());
        assert!(
            g.iter().all(|&v| v > 0.0 && v < 1.0),
            "gate left (0,1): {g}"
        );
    }

    // Hadamard identity: fusion is exactly the componentwise product with
    // the gate.
    for _ in 0..200 {
        let x = Array1::from_shape_fn(8, |_| rng.sample::<f64, _>(StandardNormal));
        let s = Array1::from_shape_fn(STRUCT_DIM, |_| rng.sample::<f64, _>(StandardNormal));
        let g = gate(&params, s.view());
        let fused = fuse(x.view(), g.view()).unwrap();
        let expect = &x * &g;
        assert_eq!(fused, expect, "fusion is not the Hadamard product");
    }

    // MDI normalization on a forest that surely splits.
    let (dataset, _) = generate_synthetic(&SyntheticParams {
        n: 300,
        d: 5,
        separation: 6.0,
        aux_signal: 1.0,
        class0_fraction: 0.5,
        seed: 88,
    })
    .unwrap();
    let forest = fit_forest(
        dataset.deep.view(),
        &dataset.labels,
        &ForestConfig {
            n_trees: 12,
            seed: 9,
            ..ForestConfig::default()
        },
    )
    .unwrap();
    let mdi = mdi_importances(&forest);
    assert!(mdi.iter().all(|&v| v >= 0.0), "negative importance");
    let total: f64 = mdi.iter().sum();
    assert!((total - 1.0).abs() < 1e-12, "importances sum to {total}");

    // Scaler round-trip: standardization is invertible from its parameters.
    let matrix = Array2::from_shape_fn((40, 6), |_| rng.random_range(-30.0..30.0f64));
    let scaler = fit_scaler(matrix.view()).unwrap();
    let z = transform(matrix.view(), &scaler).unwrap();
    for (row, orig) in z.rows().into_iter().zip(matrix.rows()) {
        for (j, (&zv, &xv)) in row.iter().zip(orig).enumerate() {
            let back = zv * scaler.stds[j] + scaler.means[j];
            assert!(
                (back - xv).abs() <= 1e-9 * xv.abs().max(1.0),
                "round trip broke"
            );
        }
    }

    // Split stratification: disjoint cover with per-class test counts at
    // the rounded fraction.
    let labels: Vec<u8> = (0..1000).map(|i| (i % 5 == 0) as u8).collect();
    let split = stratified_split(&labels, 0.3, 17).unwrap();
    let mut seen = vec![false; labels.len()];
    for &i in split.train_indices.iter().chain(&split.test_indices) {
        assert!(!seen[i], "index {i} appears twice");
        seen[i] = true;
    }
    assert!(seen.iter().all(|&s| s), "split does not cover all rows");
    let test_pos = split
        .test_indices
        .iter()
        .filter(|&&i| labels[i] == 1)
        .count();
    let test_neg = split.test_indices.len() - test_pos;
    assert!(
        (test_pos as i64 - 60).abs() <= 1,
        "positive test count {test_pos}"
    );
    assert!(
        (test_neg as i64 - 240).abs() <= 1,
        "negative test count {test_neg}"
    );

    // Coverage of the metrics module. Branch-level instrumentation needs
    // llvm-tools, which this toolchain cannot fetch; tarpaulin's llvm
    // engine measures line coverage, reported here as the closest
    // available substitute.
    let coverage = measure_metrics_line_coverage();
    match coverage {
        Some((hit, total)) => {
            let pct = hit as f64 / total as f64 * 100.0;
            let ok = pct >= 95.0;
            verdict(
                8,
                ok,
                &format!(
                    "module property invariants re-asserted; metrics line coverage {hit}/{total} \
                     = {pct:.1}% (>= 95%; line-level substitute, branch instrumentation \
                     unavailable on this toolchain)"
                ),
            );
            assert!(ok, "metrics module line coverage {pct:.1}% below 95%");
        }
        None => {
            verdict(
                8,
                false,
                "module property invariants re-asserted; coverage UNMEASURED \
                 (cargo-tarpaulin not available)",
            );
            panic!("coverage tooling unavailable; install cargo-tarpaulin to measure");
        }
    }
}

/// Runs the lib test suite under tarpaulin's llvm engine in a separate
/// target directory and parses the metrics-module line counts. Returns
/// None when the tool is missing.
fn measure_metrics_line_coverage() -> Option<(u64, u64)> {
    let manifest_dir = env!("CARGO_MANIFEST_DIR");
    let workspace_root = Path::new(manifest_dir).parent()?.parent()?;
    let output = std::process::Command::new("cargo")
        .args([
            "tarpaulin",
            "--engine",
            "llvm",
            "-p",
            "sfl-core",
            "--lib",
            "--skip-clean",
            "--target-dir",
            "target/tarpaulin-acceptance",
            "-o",
            "stdout",
        ])
        .current_dir(workspace_root)
        .output()
        .map_err(|e| eprintln!("could not spawn cargo tarpaulin: {e}"))
        .ok()?;
    if !output.status.success() {
        eprintln!(
            "tarpaulin exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr)
        );
        return None;
    }
    let text = String::from_utf8_lossy(&output.stdout);
    // The summary section lists "<file>: <hit>/<total>", with a "+x%"
    // delta appended on repeat runs; an uncovered-lines section above it
    // may also name the file, so only ratio-shaped lines parse.
    for line in text.lines() {
        if let Some(rest) = line.split("metrics.rs: ").nth(1) {
            let mut parts = rest.trim().splitn(2, '/');
            let (Some(hit), Some(total)) = (parts.next(), parts.next()) else {
                continue;
            };
            let total = total.split_whitespace().next().unwrap_or(total);
            if let (Ok(hit), Ok(total)) = (hit.parse(), total.parse()) {
                return Some((hit, total));
            }
        }
    }
    eprintln!("tarpaulin output carried no metrics line:\n{text}");
    None
}
