//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no test harness) so the criteria report in order
//! and a failing criterion does not hide the others. Exits nonzero if any
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cash_core::classifiers::boosting::GradientBoosting;
use cash_core::classifiers::logistic::{smooth_gradient, smooth_objective};
use cash_core::classifiers::naive_bayes::GaussianNb;
use cash_core::classifiers::svm::{solve_dual, Kernel};
use cash_core::classifiers::{BoostParams, NbParams, SvmKernel};
use cash_core::dataset::{stratified_split, FeatureDataset};
use cash_core::evaluation::{run_nested_cv, EvaluationConfig, EvaluationReport};
use cash_core::fingerprint::{
    decide_bin_strategy, decide_feature_dimensionality, decide_normalization, decide_resampling, BinStrategy,
    FeatureDimensionality, ImagingMetadata, ModalityKind,
};
use cash_core::matrix::Matrix;
use cash_core::metrics::{auc, f1_weighted, metric_set, roc_curve, threshold_metrics, trapezoid_area, Confusion, RocPoint};
use cash_core::optimizer::{inner_splits, EnsembleMethod, FittedWorkflow, OptimizerConfig};
use cash_core::rng::{derive_seed, rng_from_seed, tags};
use cash_core::search_space::{default_space, WorkflowConfig};
use cash_core::stats::{corrected_resampled_t_ci, roc_band, t_quantile};
use cash_core::synth::{generate, SynthSpec};
use rand::Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------------------
// 1. Metric oracles

/// Pairwise concordance with ties counted one half.
fn brute_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

fn criterion_metrics() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut cases: Vec<(&str, f64, f64)> = Vec::new();
    let f1 = |l: &[u8], p: &[u8]| f1_weighted(l, p).unwrap();
    let au = |l: &[u8], s: &[f64]| auc(l, s).unwrap();
    let tm = |l: &[u8], p: &[u8]| threshold_metrics(l, p).unwrap();

    cases.push(("f1 one miss", f1(&[1, 1, 0, 0], &[1, 0, 0, 0]), 11.0 / 15.0));
    cases.push(("f1 perfect", f1(&[0, 1, 1, 0], &[0, 1, 1, 0]), 1.0));
    cases.push(("f1 constant on balanced", f1(&[0, 0, 1, 1], &[1, 1, 1, 1]), 1.0 / 3.0));
    cases.push(("f1 imbalanced", f1(&[0, 0, 0, 1], &[0, 0, 1, 1]), 23.0 / 30.0));
    cases.push(("f1 inverted", f1(&[0, 1], &[1, 0]), 0.0));
    cases.push(("f1 five samples", f1(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]), 0.6));
    cases.push(("f1 all negative", f1(&[1, 0, 0], &[0, 0, 0]), 8.0 / 15.0));
    cases.push(("f1 six samples", f1(&[0, 0, 1, 1, 1, 1], &[0, 1, 1, 1, 1, 0]), 2.0 / 3.0));

    cases.push(("auc worked example", au(&[1, 0, 1, 0], &[0.9, 0.6, 0.4, 0.2]), 0.75));
    cases.push(("auc reversed", au(&[1, 0, 1, 0], &[-0.9, -0.6, -0.4, -0.2]), 0.25));
    cases.push(("auc all tied", au(&[0, 1, 1, 0], &[0.3, 0.3, 0.3, 0.3]), 0.5));
    cases.push(("auc separable", au(&[0, 0, 1, 1], &[0.1, 0.2, 0.7, 0.9]), 1.0));
    cases.push(("auc partial ties", au(&[0, 1, 0, 1, 1], &[0.1, 0.4, 0.4, 0.8, 0.3]), 0.75));
    cases.push(("auc single pair tie", au(&[0, 1], &[0.5, 0.5]), 0.5));

    let t = tm(&[1, 1, 0, 0], &[1, 0, 0, 0]);
    cases.push(("sensitivity TP1 FN1", t.sensitivity, 0.5));
    cases.push(("specificity TN2 FP0", t.specificity, 1.0));
    cases.push(("bcr TP1 FN1 TN2 FP0", t.bcr, 0.75));
    cases.push(("accuracy TP1 FN1 TN2 FP0", t.accuracy, 0.75));
    let t = tm(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]);
    cases.push(("sensitivity 2/3", t.sensitivity, 2.0 / 3.0));
    cases.push(("precision 2/3", t.precision, 2.0 / 3.0));
    cases.push(("bcr 7/12", t.bcr, 7.0 / 12.0));
    cases.push(("accuracy 3/5", t.accuracy, 0.6));
    let t = tm(&[0, 1, 0, 1], &[1, 0, 1, 0]);
    cases.push(("inverted accuracy", t.accuracy, 0.0));
    let t = tm(&[0, 0, 0, 1], &[0, 0, 1, 1]);
    cases.push(("bcr 5/6", t.bcr, 5.0 / 6.0));
    let t = tm(&[1, 0, 0], &[0, 0, 0]);
    cases.push(("precision with no positive calls", t.precision, 0.0));
    ensure!(t.degenerate, "zero denominator not flagged as degenerate");

    let m = metric_set(&[1, 0, 1, 0], &[0.9, 0.6, 0.4, 0.2]).unwrap();
    for (name, v) in [
        ("set auc", m.auc),
        ("set f1", m.f1_weighted),
        ("set bcr", m.bcr),
        ("set sensitivity", m.sensitivity),
        ("set specificity", m.specificity),
        ("set precision", m.precision),
        ("set accuracy", m.accuracy),
    ] {
        cases.push((name, v, if name == "set auc" { 0.75 } else { 0.5 }));
    }
    cases.push((
        "roc trapezoid",
        trapezoid_area(&roc_curve(&[0, 1, 0, 1, 1], &[0.1, 0.4, 0.4, 0.8, 0.3]).unwrap()),
        0.75,
    ));
    let c = Confusion::new(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]);
    ensure!((c.tp, c.fp, c.tn, c.fn_) == (2, 1, 1, 1), "confusion counts {:?}", c);

    for (name, got, want) in &cases {
        ensure!(close(*got, *want, TOL), "{name}: got {got}, expected {want}");
    }

    let mut rng = rng_from_seed(2024);
    for inst in 0..200 {
        let n = rng.random_range(2..=30);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // Coarse scores so that ties occur.
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..12) as f64) / 11.0).collect();
        let want = brute_auc(&labels, &scores);
        let got = au(&labels, &scores);
        ensure!(close(got, want, TOL), "random instance {inst}: auc {got} vs brute force {want}");
        let area = trapezoid_area(&roc_curve(&labels, &scores).unwrap());
        ensure!(close(area, want, TOL), "random instance {inst}: roc area {area} vs {want}");
    }
    Ok(format!("{} fixed cases, 200 random AUC instances", cases.len() + 1))
}

// ---------------------------------------------------------------------------
// 2. Statistics oracles

/// Value of a curve at `f` on the vertical axis: top of a vertical segment
/// at `f`, otherwise linear between neighbours.
fn curve_at(c: &[RocPoint], f: f64) -> f64 {
    let at: Vec<f64> = c.iter().filter(|p| (p.fpr - f).abs() < 1e-12).map(|p| p.tpr).collect();
    if let Some(m) = at.iter().cloned().reduce(f64::max) {
        return m;
    }
    let right = c.iter().position(|p| p.fpr > f).expect("curve ends at fpr 1");
    let (a, b) = (c[right - 1], c[right]);
    a.tpr + (b.tpr - a.tpr) * (f - a.fpr) / (b.fpr - a.fpr)
}

fn criterion_stats() -> Outcome {
    let ci = corrected_resampled_t_ci(&[0.6, 0.7, 0.8, 0.7], 4, 1).map_err(|e| e.to_string())?;
    ensure!(
        close(ci.lower, 0.516, 1e-3) && close(ci.upper, 0.884, 1e-3) && close(ci.mean, 0.7, 1e-12),
        "corrected CI [{}, {}] mean {}",
        ci.lower,
        ci.upper,
        ci.mean
    );
    for (df, want) in [(1, 12.7062), (3, 3.1824), (10, 2.2281), (100, 1.9840)] {
        let got = t_quantile(df, 0.975);
        ensure!(close(got, want, 1e-4), "t quantile df={df}: {got} vs table {want}");
    }

    let mut rng = rng_from_seed(77);
    let mut worst: f64 = 1.0;
    for family in 0..100 {
        let m = rng.random_range(5..=40);
        let shift: f64 = rng.random_range(0.0..2.5);
        let curves: Vec<Vec<RocPoint>> = (0..m)
            .map(|_| {
                let n = rng.random_range(6..=40);
                let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
                labels[0] = 0;
                labels[1] = 1;
                let scores: Vec<f64> = labels
                    .iter()
                    .map(|&l| l as f64 * shift + rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0))
                    .collect();
                roc_curve(&labels, &scores).unwrap()
            })
            .collect();
        let band = roc_band(&curves).map_err(|e| e.to_string())?;
        let inside = curves
            .iter()
            .filter(|c| {
                band.fpr.iter().enumerate().all(|(g, &f)| {
                    let t = curve_at(c, f);
                    t >= band.lower[g] - 1e-12 && t <= band.upper[g] + 1e-12
                })
            })
            .count();
        let coverage = inside as f64 / m as f64;
        ensure!(coverage >= 0.95, "family {family}: {inside}/{m} curves inside the band");
        worst = worst.min(coverage);
    }
    Ok(format!(
        "CI [{:.4}, {:.4}], 4 t quantiles, 100 band families (lowest coverage {worst:.3})",
        ci.lower, ci.upper
    ))
}

// ---------------------------------------------------------------------------
// 3. Search-space fidelity

fn criterion_search_space() -> Outcome {
    let b = |p: f64| json!({"kind": "bernoulli", "p": p});
    let u = |a: f64, z: f64| json!({"kind": "uniform", "min": a, "max": z});
    let d = |a: i64, z: i64| json!({"kind": "uniform_discrete", "min": a, "max": z});
    let l = |a: f64, z: f64| json!({"kind": "log_uniform", "min": a, "max": z});
    // Row by row: pointer, expected distribution, or the number of
    // categories for categorical rows.
    let table: Vec<(&str, Value)> = vec![
        ("/group_selection/activator", b(1.0)),
        ("/group_selection/group_activator", b(0.5)),
        ("/imputation/selector", json!(5)),
        ("/imputation/knn_neighbors", d(5, 10)),
        ("/variance_threshold/activator", b(1.0)),
        ("/relief/activator", b(0.2)),
        ("/relief/n_neighbors", d(2, 6)),
        ("/relief/sample_size", u(0.75, 0.95)),
        ("/relief/distance_p", d(1, 4)),
        ("/relief/n_features", d(10, 50)),
        ("/select_from_model/activator", b(0.2)),
        ("/select_from_model/model_type", json!(3)),
        ("/select_from_model/lasso_alpha", u(0.1, 1.5)),
        ("/select_from_model/rf_n_trees", d(10, 100)),
        ("/pca/activator", b(0.2)),
        ("/pca/variant", json!(4)),
        ("/univariate/activator", b(0.2)),
        ("/univariate/threshold", l(1e-3, 10f64.powf(-2.5))),
        ("/resampling/activator", b(0.2)),
        ("/resampling/selector/distribution", d(1, 6)),
        ("/resampling/random_under_strategy", json!(4)),
        ("/resampling/random_over_strategy", json!(4)),
        ("/resampling/near_miss_strategy", json!(4)),
        ("/resampling/ncr_strategy", json!(4)),
        ("/resampling/ncr_n_neighbors", d(3, 15)),
        ("/resampling/ncr_cleaning_threshold", u(0.25, 0.75)),
        ("/resampling/smote_kind", json!(4)),
        ("/resampling/smote_strategy", json!(4)),
        ("/resampling/smote_n_neighbors", d(3, 15)),
        ("/resampling/adasyn_strategy", json!(4)),
        ("/resampling/adasyn_n_neighbors", d(3, 15)),
        ("/classification/selector/distribution", d(1, 8)),
        ("/classification/svm/kernel", json!(3)),
        ("/classification/svm/regularization", l(1.0, 1e6)),
        ("/classification/svm/degree", d(1, 7)),
        ("/classification/svm/homogeneity", u(0.0, 1.0)),
        ("/classification/svm/rbf_gamma", l(1e-5, 1e5)),
        ("/classification/random_forest/n_trees", d(10, 100)),
        ("/classification/random_forest/min_samples_split", d(2, 5)),
        ("/classification/random_forest/max_depth", d(5, 10)),
        ("/classification/logistic_regression/regularization", u(0.01, 1.0)),
        ("/classification/logistic_regression/solver", json!(2)),
        ("/classification/logistic_regression/penalty", json!(3)),
        ("/classification/logistic_regression/l1_ratio", u(0.0, 1.0)),
        ("/classification/lda/solver", json!(3)),
        ("/classification/lda/shrinkage", l(1e-5, 1e5)),
        ("/classification/qda/regularization", l(1e-5, 1e5)),
        ("/classification/gaussian_nb/regularization", u(0.0, 1.0)),
        ("/classification/adaboost/n_estimators", d(10, 100)),
        ("/classification/adaboost/learning_rate", l(0.01, 1.0)),
        ("/classification/xgboost/n_rounds", d(10, 100)),
        ("/classification/xgboost/max_depth", d(3, 15)),
        ("/classification/xgboost/learning_rate", l(0.01, 1.0)),
        ("/classification/xgboost/gamma", u(0.01, 10.0)),
        ("/classification/xgboost/min_child_weight", d(1, 7)),
        ("/classification/xgboost/subsample", u(0.3, 1.0)),
    ];
    let space = serde_json::to_value(default_space(true)).unwrap();
    for (ptr, want) in &table {
        let got = space.pointer(ptr).ok_or(format!("{ptr} missing from the space"))?;
        if let Some(c) = want.as_u64() {
            ensure!(got["kind"] == "categorical", "{ptr}: expected a categorical, got {got}");
            let n = got["options"].as_array().map_or(0, |o| o.len());
            ensure!(n as u64 == c, "{ptr}: {n} categories, expected {c}");
            continue;
        }
        ensure!(got["kind"] == want["kind"], "{ptr}: kind {} vs {}", got["kind"], want["kind"]);
        for key in ["p", "min", "max"] {
            if let Some(w) = want[key].as_f64() {
                let g = got[key].as_f64().ok_or(format!("{ptr}: no {key}"))?;
                ensure!(close(g, w, 1e-12 * w.abs().max(1.0)), "{ptr}.{key}: {g} vs {w}");
            }
        }
    }
    let sel = |p: &str| space.pointer(p).and_then(|v| v.as_array()).map_or(0, |a| a.len());
    ensure!(sel("/resampling/selector/options") == 6, "resampling selector options");
    ensure!(sel("/classification/selector/options") == 8, "classifier selector options");
    let off = serde_json::to_value(default_space(false)).unwrap();
    ensure!(off.pointer("/resampling/activator") == Some(&b(0.0)), "disabled resampling not forced off");

    // Empirical checks over 10^4 draws seeded as the optimizer seeds them.
    const DRAWS: usize = 10_000;
    let full = default_space(true);
    let configs: Vec<Value> = (0..DRAWS)
        .map(|j| serde_json::to_value(full.sample(derive_seed(0, &[tags::SAMPLE, j as u64]))).unwrap())
        .collect();
    let num = |v: &Value, p: &str| v.pointer(p).and_then(Value::as_f64).unwrap_or(f64::NAN);
    let flag = |v: &Value, p: &str| v.pointer(p).and_then(Value::as_bool).unwrap_or(false);
    let supports: [(&str, f64, f64, bool); 31] = [
        ("/imputation/knn_neighbors", 5.0, 10.0, true),
        ("/relief/n_neighbors", 2.0, 6.0, true),
        ("/relief/sample_fraction", 0.75, 0.95, false),
        ("/relief/distance_p", 1.0, 4.0, true),
        ("/relief/n_features", 10.0, 50.0, true),
        ("/select_from_model/lasso_alpha", 0.1, 1.5, false),
        ("/select_from_model/rf_n_trees", 10.0, 100.0, true),
        ("/univariate/p_threshold", 1e-3, 10f64.powf(-2.5), false),
        ("/resampling/ncr_n_neighbors", 3.0, 15.0, true),
        ("/resampling/ncr_cleaning_threshold", 0.25, 0.75, false),
        ("/resampling/smote_n_neighbors", 3.0, 15.0, true),
        ("/resampling/adasyn_n_neighbors", 3.0, 15.0, true),
        ("/classifier/svm/c", 1.0, 1e6, false),
        ("/classifier/svm/degree", 1.0, 7.0, true),
        ("/classifier/svm/coef0", 0.0, 1.0, false),
        ("/classifier/svm/gamma", 1e-5, 1e5, false),
        ("/classifier/random_forest/n_trees", 10.0, 100.0, true),
        ("/classifier/random_forest/min_samples_split", 2.0, 5.0, true),
        ("/classifier/random_forest/max_depth", 5.0, 10.0, true),
        ("/classifier/logistic_regression/c", 0.01, 1.0, false),
        ("/classifier/logistic_regression/l1_ratio", 0.0, 1.0, false),
        ("/classifier/lda/shrinkage", 1e-5, 1e5, false),
        ("/classifier/qda/regularization", 1e-5, 1e5, false),
        ("/classifier/gaussian_nb/regularization", 0.0, 1.0, false),
        ("/classifier/adaboost/n_estimators", 10.0, 100.0, true),
        ("/classifier/adaboost/learning_rate", 0.01, 1.0, false),
        ("/classifier/xgboost/n_rounds", 10.0, 100.0, true),
        ("/classifier/xgboost/max_depth", 3.0, 15.0, true),
        ("/classifier/xgboost/learning_rate", 0.01, 1.0, false),
        ("/classifier/xgboost/gamma", 0.01, 10.0, false),
        ("/classifier/xgboost/subsample", 0.3, 1.0, false),
    ];
    for (ptr, lo, hi, discrete) in supports {
        let mut seen = BTreeSet::new();
        for c in &configs {
            let v = num(c, ptr);
            ensure!(v >= lo && v <= hi, "{ptr}: draw {v} outside [{lo}, {hi}]");
            if discrete {
                ensure!(v.fract() == 0.0, "{ptr}: non-integer draw {v}");
                seen.insert(v as i64);
            }
        }
        if discrete {
            let want = (hi - lo) as usize + 1;
            ensure!(seen.len() == want, "{ptr}: hit {} of {want} values", seen.len());
        }
    }
    let mcw: BTreeSet<i64> = configs
        .iter()
        .map(|c| num(c, "/classifier/xgboost/min_child_weight") as i64)
        .collect();
    ensure!(mcw == (1..=7).collect(), "min child weight values {mcw:?}");

    let categories: [(&str, usize); 15] = [
        ("/imputation/method", 5),
        ("/select_from_model/model", 3),
        ("/pca/variant", 4),
        ("/resampling/method", 6),
        ("/resampling/random_under_strategy", 4),
        ("/resampling/random_over_strategy", 4),
        ("/resampling/near_miss_strategy", 4),
        ("/resampling/ncr_strategy", 4),
        ("/resampling/smote_kind", 4),
        ("/resampling/smote_strategy", 4),
        ("/resampling/adasyn_strategy", 4),
        ("/classifier/choice", 8),
        ("/classifier/svm/kernel", 3),
        ("/classifier/logistic_regression/penalty", 3),
        ("/classifier/lda/solver", 3),
    ];
    for (ptr, want) in categories {
        let seen: BTreeSet<String> = configs.iter().map(|c| c.pointer(ptr).unwrap().to_string()).collect();
        ensure!(seen.len() == want, "{ptr}: hit {} of {want} options", seen.len());
    }
    let solvers: BTreeSet<String> = configs
        .iter()
        .map(|c| c.pointer("/classifier/logistic_regression/solver").unwrap().to_string())
        .collect();
    ensure!(solvers.len() == 2, "logistic solver options {solvers:?}");

    // One rate per activator distribution. The group activator is a single
    // distribution drawn once per slot, so its 17 slots are pooled.
    ensure!(configs[0]["group_selection"]["groups"].as_array().map(|g| g.len()) == Some(17), "17 group activators");
    let slot_ptrs: Vec<String> = (0..17).map(|g| format!("/group_selection/groups/{g}")).collect();
    let activators: Vec<(&str, Vec<&str>, f64)> = vec![
        ("group selection", vec!["/group_selection/enabled"], 1.0),
        ("group slots", slot_ptrs.iter().map(String::as_str).collect(), 0.5),
        ("variance threshold", vec!["/variance_threshold"], 1.0),
        ("relief", vec!["/relief/enabled"], 0.2),
        ("select from model", vec!["/select_from_model/enabled"], 0.2),
        ("pca", vec!["/pca/enabled"], 0.2),
        ("univariate", vec!["/univariate/enabled"], 0.2),
        ("resampling", vec!["/resampling/enabled"], 0.2),
    ];
    for (name, ptrs, p) in &activators {
        let n = (DRAWS * ptrs.len()) as f64;
        let hits = ptrs.iter().map(|ptr| configs.iter().filter(|c| flag(c, ptr)).count()).sum::<usize>();
        let f = hits as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        ensure!((f - p).abs() <= 3.0 * se + 1e-12, "{name}: frequency {f} vs p {p}");
    }
    let mut cs: Vec<f64> = configs.iter().map(|c| num(c, "/classifier/svm/c")).collect();
    cs.sort_by(f64::total_cmp);
    let median = (cs[DRAWS / 2 - 1] + cs[DRAWS / 2]) / 2.0;
    ensure!(
        median >= 10f64.powf(2.7) && median <= 10f64.powf(3.3),
        "log-uniform median {median}"
    );
    let off_space = default_space(false);
    ensure!(
        (0..DRAWS).all(|s| !off_space.sample(s as u64).resampling.enabled),
        "resampling drawn while disabled"
    );
    Ok(format!(
        "{} table rows audited; {DRAWS} draws: supports, {} activator rates, option coverage, log-uniform median {median:.0}",
        table.len(),
        activators.len()
    ))
}

// ---------------------------------------------------------------------------
// 4. Leakage

/// Copy of `d` with the feature values of `rows` overwritten.
fn mutate_rows(d: &FeatureDataset, rows: &[usize], seed: u64) -> FeatureDataset {
    let mut rng = rng_from_seed(seed);
    let mut x = d.values().clone();
    for &r in rows {
        for j in 0..x.ncols() {
            let v = if rng.random_range(0..10) == 0 {
                f64::NAN
            } else {
                rng.random_range(-50.0..50.0)
            };
            x.set(r, j, v);
        }
    }
    d.with_values(x).unwrap()
}

fn leakage_data() -> FeatureDataset {
    generate(&SynthSpec {
        n_samples: 80,
        n_signal: 4,
        n_noise: 12,
        class_separation: 1.5,
        class_ratio: 0.7,
        missing_fraction: 0.05,
        seed: 31,
    })
    .unwrap()
}

fn fitted_json(cfg: &WorkflowConfig, d: &FeatureDataset, rows: &[usize]) -> Result<String, String> {
    let x = d.values().select_rows(rows);
    let y: Vec<u8> = rows.iter().map(|&i| d.labels()[i]).collect();
    let (_, slots) = d.group_slots();
    let w = FittedWorkflow::fit(cfg, &x, &y, &slots).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&w).unwrap())
}

fn criterion_leakage() -> Outcome {
    let d = leakage_data();
    let space = default_space(true);
    let opt = OptimizerConfig::default();
    let splits = inner_splits(d.labels(), &opt).unwrap();

    // Validation rows: fitted pipelines on the training part of an inner
    // split ignore the split's validation rows.
    let mut workflows = 0;
    for s in 0..40u64 {
        if workflows == 8 {
            break;
        }
        let mut cfg = space.sample(derive_seed(900, &[s]));
        // Switch on every optional step for half of the configurations.
        if s % 2 == 0 {
            cfg.relief.enabled = true;
            cfg.select_from_model.enabled = true;
            cfg.pca.enabled = true;
            cfg.univariate.enabled = true;
            cfg.resampling.enabled = true;
        }
        let split = &splits[s as usize % splits.len()];
        let Ok(before) = fitted_json(&cfg, &d, &split.train_indices) else { continue };
        let mutated = mutate_rows(&d, &split.test_indices, s);
        let after = fitted_json(&cfg, &mutated, &split.train_indices)?;
        ensure!(before == after, "workflow {s}: fitted state changed when validation rows changed");
        workflows += 1;
    }
    ensure!(workflows >= 5, "only {workflows} configurations fitted");

    // Test rows: the first outer split's ensemble, ranking and member
    // digests are unchanged when that split's test rows change.
    let methods = [
        EnsembleMethod::TopN,
        EnsembleMethod::FitNumber,
        EnsembleMethod::ForwardSelection,
        EnsembleMethod::TopN,
        EnsembleMethod::FitNumber,
    ];
    for (run, method) in methods.into_iter().enumerate() {
        let cfg = EvaluationConfig {
            k_test: 2,
            master_seed: 100 + run as u64,
            optimizer: OptimizerConfig {
                n_random_search: 8,
                n_ensemble: 3,
                ensemble_method: method,
                master_seed: 500 + run as u64,
                ..Default::default()
            },
            ..Default::default()
        };
        let plan = stratified_split(
            &d,
            cfg.test_fraction,
            derive_seed(cfg.master_seed, &[tags::OUTER_SPLIT, 0]),
        )
        .unwrap();
        let mutated = mutate_rows(&d, &plan.test_indices, run as u64);
        let a = run_nested_cv(&d, &space, &cfg, None, None).map_err(|e| e.to_string())?;
        let b = run_nested_cv(&mutated, &space, &cfg, None, None).map_err(|e| e.to_string())?;
        let (ea, eb) = (&a.splits[0].ensemble, &b.splits[0].ensemble);
        ensure!(
            ea == eb,
            "run {run} ({method:?}): ensemble changed when test rows changed: {} vs {}",
            ea.digest,
            eb.digest
        );
        // The comparison has power: the mutation reaches the test metrics,
        // and touching a training row changes the ensemble.
        ensure!(
            a.splits[0].metrics != b.splits[0].metrics,
            "run {run}: test-row mutation did not reach the test metrics"
        );
        let train_row = plan.train_indices[0];
        let touched = mutate_rows(&d, &[train_row], 1000 + run as u64);
        let c = run_nested_cv(&touched, &space, &cfg, None, None).map_err(|e| e.to_string())?;
        ensure!(
            c.splits[0].ensemble.digest != ea.digest,
            "run {run}: ensemble digest insensitive to training rows"
        );
    }
    Ok(format!(
        "{workflows} workflows vs validation-row mutation, 5 optimizer runs vs test-row mutation"
    ))
}

// ---------------------------------------------------------------------------
// 5. Classifier numerics

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn dual_value(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += 0.5 * a[i] * a[j] * q[i][j];
        }
    }
    s - a.iter().sum::<f64>()
}

/// Exact minimum of the SVM dual by enumerating which variables sit at 0,
/// at C, or in between.
fn brute_force_dual(q: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0usize; n];
        let mut v = code;
        for s in state.iter_mut() {
            *s = v % 3;
            v /= 3;
        }
        let mut a: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let m = free.len();
        if m > 0 {
            let mut sys = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    sys[r][s] = q[i][j];
                }
                sys[r][m] = y[i];
                sys[m][r] = y[i];
                rhs[r] = 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>();
            }
            rhs[m] = -(0..n).map(|j| y[j] * a[j]).sum::<f64>();
            let Some(sol) = solve_linear(sys, rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r];
            }
        }
        let feasible = a.iter().all(|&v| (-1e-9..=c + 1e-9).contains(&v))
            && a.iter().zip(y).map(|(v, yi)| v * yi).sum::<f64>().abs() < 1e-9;
        if feasible {
            best = best.min(dual_value(q, &a));
        }
    }
    best
}

/// Maximal KKT violation `m(alpha) - M(alpha)` of the dual.
fn kkt_residual(q: &[Vec<f64>], y: &[f64], c: f64, a: &[f64]) -> f64 {
    let n = a.len();
    let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * a[j]).sum::<f64>() - 1.0).collect();
    let tol = 1e-9 * c.max(1.0);
    let (mut up, mut low) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let v = -y[i] * grad[i];
        let in_up = (y[i] > 0.0 && a[i] < c - tol) || (y[i] < 0.0 && a[i] > tol);
        let in_low = (y[i] > 0.0 && a[i] > tol) || (y[i] < 0.0 && a[i] < c - tol);
        if in_up {
            up = up.max(v);
        }
        if in_low {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}

fn criterion_classifiers() -> Outcome {
    let mut rng = rng_from_seed(55);

    // Logistic gradient against central finite differences.
    let mut worst_lr: f64 = 0.0;
    for _ in 0..10 {
        let (n, p) = (rng.random_range(10..40), rng.random_range(1..6));
        let x = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect());
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let w: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(0.0..0.5);
        let (gw, gb) = smooth_gradient(&x, &y, &w, b, l2);
        let h = 1e-6;
        let mut fd = Vec::with_capacity(p + 1);
        for j in 0..p {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            fd.push((smooth_objective(&x, &y, &wp, b, l2) - smooth_objective(&x, &y, &wm, b, l2)) / (2.0 * h));
        }
        fd.push((smooth_objective(&x, &y, &w, b + h, l2) - smooth_objective(&x, &y, &w, b - h, l2)) / (2.0 * h));
        let g: Vec<f64> = gw.iter().copied().chain([gb]).collect();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
        worst_lr = worst_lr.max(diff / norm);
    }
    ensure!(worst_lr < 1e-5, "logistic gradient relative error {worst_lr}");

    // Boosting training loss never increases.
    for t in 0..10u64 {
        let n = 40;
        let x = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random_range(-2.0..2.0)).collect());
        let y: Vec<u8> = (0..n).map(|i| u8::from(x.get(i, 0) + rng.random_range(-1.0..1.0) > 0.0)).collect();
        let params = BoostParams {
            n_rounds: 40,
            max_depth: rng.random_range(3..=15),
            learning_rate: 10f64.powf(rng.random_range(-2.0..0.0)),
            gamma: rng.random_range(0.01..10.0),
            min_child_weight: rng.random_range(1..=7) as f64,
            subsample: rng.random_range(0.3..1.0),
        };
        let m = GradientBoosting::fit(&x, &y, &params, t);
        for (r, w) in m.loss_history.windows(2).enumerate() {
            ensure!(w[1] <= w[0], "boosting run {t}: loss rose at round {r}: {} -> {}", w[0], w[1]);
        }
    }

    // SVM dual against exhaustive enumeration, plus KKT residual.
    let mut worst_kkt: f64 = 0.0;
    for inst in 0..6 {
        let n = 10;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        // Noisy linear labels; the first two points fix one of each class.
        let y: Vec<f64> = (0..n)
            .map(|i| match i {
                0 => 1.0,
                1 => -1.0,
                _ if pts[i][0] + 0.5 * pts[i][1] + rng.random_range(-1.0..1.0) > 0.0 => 1.0,
                _ => -1.0,
            })
            .collect();
        let (kind, c) = [(SvmKernel::Linear, 1.0), (SvmKernel::Rbf, 10.0), (SvmKernel::Poly, 0.5)][inst % 3];
        let kern = Kernel {
            kind,
            degree: 2,
            coef0: 0.5,
            gamma: 0.5,
        };
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = kern.eval(&pts[i], &pts[j]);
            }
        }
        let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i * n + j]).collect()).collect();
        let sol = solve_dual(&k, &y, c, 1_000_000);
        ensure!(sol.converged, "svm instance {inst} did not converge");
        let oracle = brute_force_dual(&q, &y, c);
        let got = dual_value(&q, &sol.alpha);
        ensure!(
            (got - oracle).abs() < 1e-3 * oracle.abs().max(1.0),
            "svm instance {inst}: dual {got} vs exhaustive {oracle}"
        );
        let r = kkt_residual(&q, &y, c, &sol.alpha);
        ensure!(r < 1e-3, "svm instance {inst}: KKT residual {r}");
        worst_kkt = worst_kkt.max(r);
    }

    // Gaussian naive Bayes against the closed-form posterior in 1-D.
    let mut worst_nb: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(8..30);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        labels[2] = 0;
        labels[3] = 1;
        let xs: Vec<f64> = labels.iter().map(|&l| l as f64 * 1.5 + rng.random_range(-2.0..2.0)).collect();
        let m = GaussianNb::fit(&Matrix::from_vec(n, 1, xs.clone()), &labels, &NbParams { regularization: 0.0 });
        let stats = |c: u8| {
            let v: Vec<f64> = xs.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(x, _)| *x).collect();
            let mu = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64;
            (mu, var, v.len() as f64 / n as f64)
        };
        let (s0, s1) = (stats(0), stats(1));
        let dens = |x: f64, (mu, var, _): (f64, f64, f64)| (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        for q in [-3.0, -1.0, 0.0, 0.4, 1.0, 2.5] {
            let (a, b) = (s1.2 * dens(q, s1), s0.2 * dens(q, s0));
            let want = a / (a + b);
            let got = m.proba_row(&[q]);
            worst_nb = worst_nb.max((got - want).abs());
        }
    }
    ensure!(worst_nb < 1e-6, "naive Bayes posterior error {worst_nb}");
    Ok(format!(
        "LR grad rel err {worst_lr:.1e}, boosting monotone, SVM KKT {worst_kkt:.1e}, NB err {worst_nb:.1e}"
    ))
}

// ---------------------------------------------------------------------------
// 6. Signal recovery, 7. stability trend

fn signal_data(sep: f64) -> FeatureDataset {
    generate(&SynthSpec {
        n_samples: 100,
        n_signal: 5,
        n_noise: 45,
        class_separation: sep,
        class_ratio: 0.5,
        missing_fraction: 0.0,
        seed: 7,
    })
    .unwrap()
}

fn desk_config(n_rs: usize, n_ens: usize, optimizer_seed: u64) -> EvaluationConfig {
    EvaluationConfig {
        k_test: 10,
        master_seed: 1,
        optimizer: OptimizerConfig {
            n_random_search: n_rs,
            n_ensemble: n_ens,
            master_seed: optimizer_seed,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn criterion_signal() -> Outcome {
    let start = Instant::now();
    let space = default_space(true);
    let sig = run_nested_cv(&signal_data(2.0), &space, &desk_config(100, 10, 1), None, None).map_err(|e| e.to_string())?;
    let noise = run_nested_cv(&signal_data(0.0), &space, &desk_config(100, 10, 1), None, None).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let a = &sig.summary["auc"];
    let z = &noise.summary["auc"];
    ensure!(a.mean > 0.90, "signal mean AUC {:.4}", a.mean);
    ensure!(
        z.raw_lower <= 0.5 && z.raw_upper >= 0.5,
        "noise AUC CI [{:.4}, {:.4}] excludes 0.5",
        z.raw_lower,
        z.raw_upper
    );
    ensure!(elapsed <= Duration::from_secs(15 * 60), "took {elapsed:?}");
    Ok(format!(
        "signal AUC {:.3} [{:.3}, {:.3}], noise AUC {:.3} [{:.3}, {:.3}], {:.0?}",
        a.mean, a.lower, a.upper, z.mean, z.raw_lower, z.raw_upper, elapsed
    ))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

fn criterion_stability() -> Outcome {
    let d = signal_data(2.0);
    let space = default_space(true);
    let mut small = Vec::new();
    let mut large = Vec::new();
    for seed in 1..=10u64 {
        let f1 = |n_rs, n_ens| -> Result<f64, String> {
            let r = run_nested_cv(&d, &space, &desk_config(n_rs, n_ens, seed), None, None).map_err(|e| e.to_string())?;
            Ok(r.summary["f1_weighted"].mean)
        };
        small.push(f1(10, 1)?);
        large.push(f1(100, 10)?);
    }
    let (ms, ss) = mean_sd(&small);
    let (ml, sl) = mean_sd(&large);
    let detail = format!("F1 (10,1) {ms:.4} sd {ss:.4}; (100,10) {ml:.4} sd {sl:.4}");
    ensure!(ml >= ms, "mean did not improve: {detail}");
    ensure!(sl < ss, "sd not strictly smaller: {detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 8. Baseline harness, 9. determinism

fn cash(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cash"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "cash {} failed ({}): {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

/// Every key path in a JSON document; map keys under `data_keyed` are
/// data, not schema, and are collapsed.
fn key_paths(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(m) => {
            for (k, c) in m {
                let key = if prefix.ends_with("classifier_histogram") { "*" } else { k.as_str() };
                let p = format!("{prefix}/{key}");
                out.insert(p.clone());
                key_paths(c, &p, out);
            }
        }
        Value::Array(a) => {
            for c in a {
                key_paths(c, &format!("{prefix}/[]"), out);
            }
        }
        _ => {}
    }
}

fn read_json(p: &Path) -> Result<Value, String> {
    serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn criterion_baseline(dir: &Path) -> Outcome {
    let data = dir.join("baseline.csv");
    signal_data(2.0).write_csv(&data, "label").map_err(|e| e.to_string())?;
    let data = data.to_str().unwrap();
    let full = dir.join("full");
    let base = dir.join("base");
    let common = ["--data", data, "--krs", "20", "--ktest", "3", "--seed", "4"];
    cash(&[&["run", "--kens", "5", "--out", full.to_str().unwrap()][..], &common].concat())?;
    cash(&[&["run", "--baseline", "--out", base.to_str().unwrap()][..], &common].concat())?;
    let (rf, rb) = (read_json(&full.join("report.json"))?, read_json(&base.join("report.json"))?);
    let (mut kf, mut kb) = (BTreeSet::new(), BTreeSet::new());
    key_paths(&rf, "", &mut kf);
    key_paths(&rb, "", &mut kb);
    ensure!(kf == kb, "report schemas differ: {:?}", kf.symmetric_difference(&kb).collect::<Vec<_>>());
    for f in ["summary.csv", "per_split.csv", "roc_band.csv"] {
        let a = std::fs::read_to_string(full.join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read_to_string(base.join(f)).map_err(|e| e.to_string())?;
        ensure!(a.lines().next() == b.lines().next(), "{f} headers differ");
        ensure!(a.lines().count() == b.lines().count(), "{f} row counts differ");
    }
    let report: EvaluationReport = serde_json::from_value(rb).map_err(|e| e.to_string())?;
    let hist = report.classifier_histogram();
    ensure!(
        hist.keys().all(|k| k == "logistic_regression"),
        "baseline used other classifiers: {hist:?}"
    );
    Ok(format!(
        "identical schema; baseline AUC {:.3}, full AUC {:.3}",
        report.summary["auc"].mean,
        serde_json::from_value::<EvaluationReport>(rf).map_err(|e| e.to_string())?.summary["auc"].mean
    ))
}

fn criterion_determinism(dir: &Path) -> Outcome {
    let data = dir.join("determinism.csv");
    signal_data(2.0).write_csv(&data, "label").map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.join(format!("det_{workers}"));
        cash(&[
            "run",
            "--data",
            data.to_str().unwrap(),
            "--krs",
            "100",
            "--kens",
            "10",
            "--ktest",
            "10",
            "--seed",
            "11",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ])?;
        reports.push(std::fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure!(reports[0] == reports[1], "report.json differs between 1 and 4 workers");
    Ok(format!("report.json byte-identical with 1 and 4 workers ({} bytes)", reports[0].len()))
}

// ---------------------------------------------------------------------------
// 10. Fingerprint rules

fn criterion_fingerprint() -> Outcome {
    use FeatureDimensionality::*;
    use ModalityKind::*;
    let meta = |pixel: Option<f64>, thick: Option<f64>, single: bool| ImagingMetadata {
        modality_kind: Quantitative,
        mean_pixel_spacing: pixel,
        mean_slice_thickness: thick,
        is_single_slice: single,
    };
    let checks: Vec<(&str, bool)> = vec![
        ("qualitative normalizes", decide_normalization(Qualitative)),
        ("quantitative does not normalize", !decide_normalization(Quantitative)),
        ("qualitative fixed bin count", decide_bin_strategy(Qualitative) == BinStrategy::FixedCount),
        ("quantitative fixed bin width", decide_bin_strategy(Quantitative) == BinStrategy::FixedWidth),
        (
            "0.5 mm / 1.0 mm is 3D",
            decide_feature_dimensionality(&meta(Some(0.5), Some(1.0), false)) == Ok(ThreeD),
        ),
        (
            "0.7 mm / 5.0 mm is 2.5D",
            decide_feature_dimensionality(&meta(Some(0.7), Some(5.0), false)) == Ok(TwoAndHalfD),
        ),
        ("single slice is 2D", decide_feature_dimensionality(&meta(None, None, true)) == Ok(TwoD)),
        ("missing spacing is an error", decide_feature_dimensionality(&meta(None, Some(1.0), false)).is_err()),
        ("60/40 keeps resampling off", decide_resampling([60, 40]) == Ok(false)),
        ("40/60 keeps resampling off", decide_resampling([40, 60]) == Ok(false)),
        ("70/30 enables resampling", decide_resampling([70, 30]) == Ok(true)),
        ("50/50 keeps resampling off", decide_resampling([50, 50]) == Ok(false)),
    ];
    for (name, ok) in &checks {
        ensure!(*ok, "{name}");
    }
    Ok(format!("{} rule checks", checks.len()))
}

// ---------------------------------------------------------------------------

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("metric oracles", Box::new(criterion_metrics)),
        ("statistics oracles", Box::new(criterion_stats)),
        ("search-space fidelity", Box::new(criterion_search_space)),
        ("leakage", Box::new(criterion_leakage)),
        ("classifier numerics", Box::new(criterion_classifiers)),
        ("signal recovery", Box::new(criterion_signal)),
        ("ensemble stability trend", Box::new(criterion_stability)),
        ("baseline harness", Box::new(|| criterion_baseline(dir.path()))),
        ("determinism", Box::new(|| criterion_determinism(dir.path()))),
        ("fingerprint rules", Box::new(criterion_fingerprint)),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failures = 0;
    let mut results = BTreeMap::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string()))
        });
        let secs = start.elapsed().as_secs_f64();
        match &outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(reason) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {reason} ({secs:.1}s)", i + 1);
            }
        }
        results.insert(i + 1, outcome.is_ok());
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        results.values().filter(|ok| **ok).count()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
