//! Cross-validated comparison of a final model on two versions of a table.

use rand::{RngCore, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{fold_of, RoundSummary};
use crate::error::{Error, Result};
use crate::frame::FrameTable;
use crate::learner::{ColumnStore, Features, ForestParams, MaxFeatures, RandomForest, Task};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Final-model and cross-validation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub task: Task,
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub k: usize,
    pub seed: u64,
    pub shuffle_folds: bool,
}

impl EvalSpec {
    pub fn new(task: Task) -> Self {
        EvalSpec {
            task,
            n_trees: 100,
            max_features: MaxFeatures::default_for(task),
            bootstrap: true,
            k: 5,
            seed: 42,
            shuffle_folds: false,
        }
    }

    fn forest_params(&self, seed: u64) -> ForestParams {
        ForestParams::new(self.task, seed)
            .with_trees(self.n_trees)
            .with_max_features(self.max_features)
            .with_bootstrap(self.bootstrap)
    }
}

/// Seed of the model trained with fold `fold` held out.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64);
    rng.next_u64()
}

/// Fold id of every row: contiguous blocks in row order, or a seeded
/// permutation of those blocks when `shuffle` is set.
pub fn fold_assignment(n: usize, k: usize, shuffle: bool, seed: u64) -> Vec<usize> {
    let folds = fold_of(n, k);
    if !shuffle {
        return folds;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        out[row] = folds[pos];
    }
    out
}

/// Out-of-fold predictions for every row, aligned with the input.
pub fn kfold_predict(spec: &EvalSpec, x: &Features<'_>, y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    if spec.k < 2 {
        return Err(Error::validation(format!("k must be at least 2, got {}", spec.k)));
    }
    if n < spec.k {
        return Err(Error::validation(format!(
            "{n} rows cannot be split into {} folds",
            spec.k
        )));
    }
    if x.n_features() > 0 && x.n_rows() != n {
        return Err(Error::validation(format!(
            "{} feature rows but {n} targets",
            x.n_rows()
        )));
    }
    let folds = fold_assignment(n, spec.k, spec.shuffle_folds, spec.seed);
    let per_fold: Vec<Vec<(usize, f64)>> = (0..spec.k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let cols: Vec<Vec<f64>> = (0..x.n_features())
                .map(|j| train.iter().map(|&i| x.value(i, j)).collect())
                .collect();
            let xt = Features::new(
                x.names().to_vec(),
                cols.iter().map(Vec::as_slice).collect(),
            )?;
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = RandomForest::fit(&xt, &yt, spec.forest_params(fold_seed(spec.seed, f)))?;
            Ok(test
                .into_iter()
                .map(|i| (i, model.predict_with(|j| x.value(i, j))))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; n];
    for (i, p) in per_fold.into_iter().flatten() {
        out[i] = p;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub task: Task,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    pub fold_count: usize,
    /// Metrics computed on each fold's predictions alone.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_fold: Vec<MetricsBundle>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Precision, recall and F1 for the positive label 1. Zero denominators
/// yield 0 and a warning.
pub fn classification_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsBundle> {
    if y_true.len() != y_pred.len() {
        return Err(Error::validation(format!(
            "{} labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if let Some(v) = y_true.iter().chain(y_pred).find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::validation(format!(
            "classification metrics need 0/1 values, found {v}"
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == 1.0, p == 1.0) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (false, false) => {}
        }
    }
    let mut warnings = Vec::new();
    let ratio = |num: usize, den: usize, what: &str, warnings: &mut Vec<String>| {
        if den == 0 {
            warnings.push(format!("{what} is ill-defined (no {what} denominator), set to 0"));
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp, "precision", &mut warnings);
    let recall = ratio(tp, tp + fneg, "recall", &mut warnings);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricsBundle {
        task: Task::Classification,
        precision: Some(precision),
        recall: Some(recall),
        f1: Some(f1),
        rmse: None,
        fold_count: 1,
        per_fold: Vec::new(),
        warnings,
    })
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsBundle> {
    if y_true.len() != y_pred.len() {
        return Err(Error::validation(format!(
            "{} targets vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::validation("rmse needs at least one value"));
    }
    let mse = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum::<f64>()
        / y_true.len() as f64;
    Ok(MetricsBundle {
        task: Task::Regression,
        precision: None,
        recall: None,
        f1: None,
        rmse: Some(mse.sqrt()),
        fold_count: 1,
        per_fold: Vec::new(),
        warnings: Vec::new(),
    })
}

pub fn metrics_for(task: Task, y_true: &[f64], y_pred: &[f64]) -> Result<MetricsBundle> {
    match task {
        Task::Classification => classification_metrics(y_true, y_pred),
        Task::Regression => regression_metrics(y_true, y_pred),
    }
}

/// Cross-validates the final model with `target` as label and every other
/// column as features. Headline numbers come from the pooled predictions.
pub fn evaluate_table(t: &FrameTable, target: &str, spec: &EvalSpec) -> Result<MetricsBundle> {
    let j = t.require_column(target)?;
    let store = ColumnStore::from_frame(t);
    let x = store.features_without(&[j])?;
    let y = &store.columns[j];
    let pred = kfold_predict(spec, &x, y)?;
    let mut pooled = metrics_for(spec.task, y, &pred)?;
    let folds = fold_assignment(y.len(), spec.k, spec.shuffle_folds, spec.seed);
    pooled.per_fold = (0..spec.k)
        .map(|f| {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
            let yt: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let yp: Vec<f64> = rows.iter().map(|&i| pred[i]).collect();
            let mut m = metrics_for(spec.task, &yt, &yp)?;
            m.warnings.clear();
            Ok(m)
        })
        .collect::<Result<_>>()?;
    pooled.fold_count = spec.k;
    Ok(pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableShape {
    pub rows: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub rows: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeFitness {
    pub attribute: String,
    pub r_squared: f64,
    pub tss: f64,
    pub rss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSummary {
    pub round: usize,
    pub target: String,
    pub models: usize,
    pub attributes: Vec<AttributeFitness>,
}

/// Side-by-side metrics plus everything needed to audit the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub target: String,
    pub eval: EvalSpec,
    pub stages: Vec<StageCount>,
    pub original: TableShape,
    pub augmented_table: TableShape,
    pub rounds: Vec<RoundSummary>,
    pub banks: Vec<BankSummary>,
    pub baseline: MetricsBundle,
    pub augmented: MetricsBundle,
    pub warnings: Vec<String>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text summary table.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "residual augmentation report (schema v{})", self.schema_version);
        let _ = writeln!(s, "config hash : {}", self.config_hash);
        let _ = writeln!(s, "target      : {} ({})", self.target, self.eval.task.as_str());
        let _ = writeln!(
            s,
            "final model : {} trees, max_features={}, {}-fold CV{}",
            self.eval.n_trees,
            self.eval.max_features,
            self.eval.k,
            if self.eval.shuffle_folds { " (shuffled)" } else { "" }
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<22} {:>8} {:>8}", "stage", "rows", "columns");
        for st in &self.stages {
            let _ = writeln!(s, "{:<22} {:>8} {:>8}", st.stage, st.rows, st.columns);
        }
        for r in &self.rounds {
            let _ = writeln!(
                s,
                "{:<22} {:>8} {:>8}   ({} banks x {} attributes = {} new columns)",
                format!("augment round {}", r.round),
                r.rows,
                r.columns,
                r.banks,
                r.attributes,
                r.new_columns
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<10} {:>12} {:>12}", "metric", "baseline", "augmented");
        let rows: [(&str, Option<f64>, Option<f64>); 4] = [
            ("precision", self.baseline.precision, self.augmented.precision),
            ("recall", self.baseline.recall, self.augmented.recall),
            ("f1", self.baseline.f1, self.augmented.f1),
            ("rmse", self.baseline.rmse, self.augmented.rmse),
        ];
        for (name, b, a) in rows {
            if let (Some(b), Some(a)) = (b, a) {
                let _ = writeln!(s, "{name:<10} {b:>12.5} {a:>12.5}");
            }
        }
        for bank in &self.banks {
            let (lo, hi) = bank
                .attributes
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                    (lo.min(a.r_squared), hi.max(a.r_squared))
                });
            let _ = writeln!(
                s,
                "bank r{} target={}: {} models, r² in [{lo:.4}, {hi:.4}]",
                bank.round, bank.target, bank.models
            );
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(s, "\nwarnings:");
            for w in &self.warnings {
                let _ = writeln!(s, "  - {w}");
            }
        }
        s
    }
}

/// Cross-validates the final model on both tables and assembles a report
/// with the metric bundles and table shapes filled in.
pub fn compare(
    original: &FrameTable,
    augmented: &FrameTable,
    target: &str,
    spec: &EvalSpec,
) -> Result<ComparisonReport> {
    if original.n_rows() != augmented.n_rows() {
        return Err(Error::validation(format!(
            "original has {} rows, augmented has {}",
            original.n_rows(),
            augmented.n_rows()
        )));
    }
    original.require_column(target)?;
    augmented.require_column(target)?;
    if original.column_by_name(target)? != augmented.column_by_name(target)? {
        return Err(Error::validation(format!(
            "target '{target}' differs between the two tables"
        )));
    }
    let baseline = evaluate_table(original, target, spec)?;
    let aug = evaluate_table(augmented, target, spec)?;
    let mut warnings = Vec::new();
    warnings.extend(baseline.warnings.iter().map(|w| format!("baseline: {w}")));
    warnings.extend(aug.warnings.iter().map(|w| format!("augmented: {w}")));
    Ok(ComparisonReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_hash: String::new(),
        config: Default::default(),
        target: target.to_string(),
        eval: *spec,
        stages: Vec::new(),
        original: TableShape {
            rows: original.n_rows(),
            columns: original.n_cols(),
        },
        augmented_table: TableShape {
            rows: augmented.n_rows(),
            columns: augmented.n_cols(),
        },
        rounds: Vec::new(),
        banks: Vec::new(),
        baseline,
        augmented: aug,
        warnings,
    })
}
