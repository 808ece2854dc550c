//! Attribute-model banks and residual feature columns.
//!
//! A bank holds one regression forest per attribute, each trained to predict
//! that attribute from all the others on the rows of one target class (or on
//! every row in single-bank mode). Running every bank over every row and
//! recording the weighted absolute error yields `#banks x #attributes` new
//! columns, which are placed in front of the original table.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameTable;
use crate::learner::codec::{Decoder, Encoder};
use crate::learner::{
    r_squared, split_indices, ColumnStore, Features, ForestParams, MaxFeatures, ModelFitness,
    RandomForest, Task,
};

/// Rows per column below which augmentation is likely to hurt.
pub const MIN_ROWS_PER_COLUMN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BankMode {
    /// One bank per target value; the target must be 0/1.
    PerClass,
    /// A single bank trained on every row.
    SingleBank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Weight by `r²·r²` as measured, negative values included.
    Faithful,
    /// Clamp `r²` into `[0, 1]` before squaring.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualSource {
    /// Every row is scored by the bank's stored model, including the rows
    /// that model was trained on.
    InSample,
    /// Rows of the bank's own partition are scored by a model that never
    /// saw them (k-fold within the partition).
    OutOfFold,
}

/// Auxiliary forest settings shared by every attribute model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxLearner {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
    pub test_fraction: f64,
    pub split_seed: u64,
}

impl Default for AuxLearner {
    fn default() -> Self {
        AuxLearner {
            n_trees: 100,
            max_features: MaxFeatures::All,
            bootstrap: true,
            seed: 42,
            test_fraction: 0.2,
            split_seed: 42,
        }
    }
}

impl AuxLearner {
    fn forest_params(&self) -> ForestParams {
        ForestParams::new(Task::Regression, self.seed)
            .with_trees(self.n_trees)
            .with_max_features(self.max_features)
            .with_bootstrap(self.bootstrap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub target: String,
    pub mode: BankMode,
    pub rounds: usize,
    pub aux: AuxLearner,
    pub weighting: Weighting,
    /// Decimal places the raw residual is rounded to before weighting.
    pub round_decimals: Option<u32>,
    pub residual_source: ResidualSource,
    pub oof_folds: usize,
}

impl AugmentConfig {
    /// In-sample residuals, rounded to 4 decimals, weighted by raw `r²²`.
    pub fn faithful(target: impl Into<String>, mode: BankMode) -> Self {
        AugmentConfig {
            target: target.into(),
            mode,
            rounds: 1,
            aux: AuxLearner::default(),
            weighting: Weighting::Faithful,
            round_decimals: Some(4),
            residual_source: ResidualSource::InSample,
            oof_folds: 5,
        }
    }

    /// Out-of-fold residuals, no rounding, clamped `r²`.
    pub fn hygienic(target: impl Into<String>, mode: BankMode) -> Self {
        AugmentConfig {
            weighting: Weighting::Clamped,
            round_decimals: None,
            residual_source: ResidualSource::OutOfFold,
            ..AugmentConfig::faithful(target, mode)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.aux.n_trees == 0 {
            return Err(Error::Config("aux.n_trees must be at least 1".into()));
        }
        if !(self.aux.test_fraction > 0.0 && self.aux.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "aux.test_fraction must be in (0, 1), got {}",
                self.aux.test_fraction
            )));
        }
        if self.residual_source == ResidualSource::OutOfFold && self.oof_folds < 2 {
            return Err(Error::Config("oof_folds must be at least 2".into()));
        }
        Ok(())
    }

    /// Residual cell value for a raw absolute error and a model fitness.
    pub fn cell(&self, abs_error: f64, r_squared: f64) -> f64 {
        let raw = match self.round_decimals {
            Some(d) => round_half_even(abs_error, d),
            None => abs_error,
        };
        let r = match self.weighting {
            Weighting::Faithful => r_squared,
            Weighting::Clamped => r_squared.clamp(0.0, 1.0),
        };
        raw * (r * r)
    }
}

/// Rounds to `decimals` places with ties going to the even neighbour of the
/// scaled value.
pub fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round_ties_even() / scale
}

/// Which rows a bank was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankTarget {
    Class(i64),
    All,
}

impl BankTarget {
    /// Column suffix for residuals produced by this bank.
    pub fn suffix(&self) -> String {
        match self {
            BankTarget::Class(v) => v.to_string(),
            BankTarget::All => "new".to_string(),
        }
    }

    fn contains(&self, target_value: f64) -> bool {
        match *self {
            BankTarget::Class(v) => target_value == v as f64,
            BankTarget::All => true,
        }
    }
}

impl std::fmt::Display for BankTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BankTarget::Class(v) => write!(f, "{v}"),
            BankTarget::All => write!(f, "all"),
        }
    }
}

/// `<attribute>_<suffix>`.
pub fn residual_column_name(attribute: &str, suffix: &str) -> String {
    format!("{attribute}_{suffix}")
}

/// Splits a residual column name back into `(attribute, suffix)`. Suffixes
/// never contain `_`, so the last underscore is the separator.
pub fn parse_residual_name(name: &str) -> Option<(&str, &str)> {
    let (attr, suffix) = name.rsplit_once('_')?;
    (!attr.is_empty() && !suffix.is_empty()).then_some((attr, suffix))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub target: BankTarget,
    /// Row indices into the source table, ascending.
    pub rows: Vec<usize>,
    /// The partition's rows with the target column removed.
    pub table: FrameTable,
}

/// Splits `t` by target value (per-class) or keeps it whole (single bank),
/// dropping the target column.
pub fn partition_by_target(t: &FrameTable, target: &str, mode: BankMode) -> Result<Vec<Partition>> {
    let j = t.require_column(target)?;
    let y = t.column(j);
    let attrs = t.drop_columns(&[target])?;
    match mode {
        BankMode::SingleBank => Ok(vec![Partition {
            target: BankTarget::All,
            rows: (0..t.n_rows()).collect(),
            table: attrs,
        }]),
        BankMode::PerClass => {
            if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::validation(format!(
                    "per-class mode needs a 0/1 target, '{target}' holds {v}"
                )));
            }
            [0i64, 1]
                .into_iter()
                .map(|label| {
                    let bank = BankTarget::Class(label);
                    let rows: Vec<usize> = (0..y.len()).filter(|&i| bank.contains(y[i])).collect();
                    if rows.is_empty() {
                        return Err(Error::DegeneratePartition {
                            label: label.to_string(),
                        });
                    }
                    Ok(Partition {
                        target: bank,
                        table: attrs.select_rows(&rows),
                        rows,
                    })
                })
                .collect()
        }
    }
}

/// Out-of-fold attribute models of one bank: `models[attribute][fold]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OofModels {
    pub folds: usize,
    pub models: Vec<Vec<RandomForest>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeModelBank {
    pub target: BankTarget,
    pub attributes: Vec<String>,
    pub models: Vec<RandomForest>,
    pub fitness: Vec<ModelFitness>,
    pub oof: Option<OofModels>,
}

impl AttributeModelBank {
    pub fn model(&self, attribute: &str) -> Option<(&RandomForest, &ModelFitness)> {
        let i = self.attributes.iter().position(|a| a == attribute)?;
        Some((&self.models[i], &self.fitness[i]))
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Contiguous fold sizes: the first `n % k` folds get one extra row.
pub fn fold_of(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(n);
    for f in 0..k {
        let size = base + usize::from(f < extra);
        out.extend(std::iter::repeat_n(f, size));
    }
    out
}

/// Fits one forest per attribute of `partition` (an attribute-only table)
/// on a seeded 80/20 split and scores it on the held-out part.
pub fn train_attribute_models(
    partition: &Partition,
    cfg: &AugmentConfig,
) -> Result<AttributeModelBank> {
    let table = &partition.table;
    if table.n_cols() < 2 {
        return Err(Error::DegenerateInput(format!(
            "bank {} needs at least 2 attributes, found {}",
            partition.target,
            table.n_cols()
        )));
    }
    if table.n_rows() < 2 {
        return Err(Error::DegenerateInput(format!(
            "bank {} needs at least 2 rows, found {}",
            partition.target,
            table.n_rows()
        )));
    }
    let (train, test) = split_indices(table.n_rows(), cfg.aux.test_fraction, cfg.aux.split_seed)?;
    let train_store = ColumnStore::from_frame(&table.select_rows(&train));
    let test_store = ColumnStore::from_frame(&table.select_rows(&test));
    let params = cfg.aux.forest_params();
    let attributes = table.column_names().to_vec();

    let fitted: Vec<(RandomForest, ModelFitness)> = (0..attributes.len())
        .into_par_iter()
        .map(|a| {
            let annotate = |e: Error| Error::Attribute {
                attribute: attributes[a].clone(),
                source: Box::new(e),
            };
            let x = train_store.features_without(&[a]).map_err(annotate)?;
            let model = RandomForest::fit(&x, &train_store.columns[a], params).map_err(annotate)?;
            let xt = test_store.features_without(&[a]).map_err(annotate)?;
            let pred = model.predict_features(&xt);
            let fit = r_squared(&test_store.columns[a], &pred).map_err(annotate)?;
            Ok((model, fit))
        })
        .collect::<Result<_>>()?;
    let (models, fitness) = fitted.into_iter().unzip();

    let oof = match cfg.residual_source {
        ResidualSource::InSample => None,
        ResidualSource::OutOfFold => Some(train_oof_models(table, cfg, params)?),
    };
    Ok(AttributeModelBank {
        target: partition.target,
        attributes,
        models,
        fitness,
        oof,
    })
}

fn train_oof_models(
    table: &FrameTable,
    cfg: &AugmentConfig,
    params: ForestParams,
) -> Result<OofModels> {
    let n = table.n_rows();
    let k = cfg.oof_folds.min(n);
    if k < 2 {
        return Err(Error::DegenerateInput(format!(
            "out-of-fold residuals need at least 2 rows per bank, found {n}"
        )));
    }
    let folds = fold_of(n, k);
    let stores: Vec<ColumnStore> = (0..k)
        .map(|f| {
            let rows: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            ColumnStore::from_frame(&table.select_rows(&rows))
        })
        .collect();
    let names = table.column_names();
    let models = (0..names.len())
        .into_par_iter()
        .map(|a| {
            stores
                .iter()
                .map(|s| {
                    let x = s.features_without(&[a])?;
                    RandomForest::fit(&x, &s.columns[a], params)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Attribute {
                    attribute: names[a].clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OofModels { folds: k, models })
}

/// One residual column per (attribute, bank), attribute-major with banks in
/// the given order. `t` must still contain the target column.
pub fn residual_features(
    t: &FrameTable,
    banks: &[AttributeModelBank],
    cfg: &AugmentConfig,
) -> Result<FrameTable> {
    let Some(first) = banks.first() else {
        return Err(Error::validation("residual_features needs at least one bank"));
    };
    if let Some(b) = banks.iter().find(|b| b.attributes != first.attributes) {
        return Err(Error::validation(format!(
            "bank {} covers different attributes than bank {}",
            b.target, first.target
        )));
    }
    let target = t.column_by_name(&cfg.target)?;
    let store = ColumnStore::from_frame(t);

    let pairs: Vec<(usize, usize)> = (0..first.attributes.len())
        .flat_map(|a| (0..banks.len()).map(move |b| (a, b)))
        .collect();
    let columns: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| residual_column(t, &store, &target, &banks[b], a, cfg))
        .collect::<Result<_>>()?;
    let names = pairs
        .iter()
        .map(|&(a, b)| residual_column_name(&first.attributes[a], &banks[b].target.suffix()))
        .collect();
    if columns.is_empty() {
        return FrameTable::new(names, Vec::new(), t.n_rows());
    }
    FrameTable::from_columns(names, columns)
}

fn residual_column(
    t: &FrameTable,
    store: &ColumnStore,
    target: &[f64],
    bank: &AttributeModelBank,
    a: usize,
    cfg: &AugmentConfig,
) -> Result<Vec<f64>> {
    let attr = &bank.attributes[a];
    let model = &bank.models[a];
    let lookup = |names: &[String]| -> Result<Vec<&[f64]>> {
        names
            .iter()
            .map(|n| {
                t.column_index(n)
                    .map(|j| store.columns[j].as_slice())
                    .ok_or_else(|| {
                        Error::validation(format!(
                            "model for '{attr}' needs column '{n}', absent from table"
                        ))
                    })
            })
            .collect()
    };
    let x = Features::new(model.feature_names().to_vec(), lookup(model.feature_names())?)?;
    let actual = &store.columns[t.require_column(attr)?];
    let mut pred = model.predict_features(&x);

    if let (ResidualSource::OutOfFold, Some(oof)) = (cfg.residual_source, &bank.oof) {
        let own: Vec<usize> = (0..t.n_rows())
            .filter(|&i| bank.target.contains(target[i]))
            .collect();
        let folds = fold_of(own.len(), oof.folds.min(own.len().max(1)));
        for (pos, &row) in own.iter().enumerate() {
            let m = &oof.models[a][folds[pos]];
            pred[row] = m.predict_with(|f| x.value(row, f));
        }
    } else if cfg.residual_source == ResidualSource::OutOfFold {
        return Err(Error::validation(format!(
            "bank {} has no out-of-fold models",
            bank.target
        )));
    }
    let r2 = bank.fitness[a].r_squared;
    Ok(actual
        .iter()
        .zip(&pred)
        .map(|(y, p)| cfg.cell((y - p).abs(), r2))
        .collect())
}

/// Residual columns placed in front of every column of `t`.
pub fn augment_with_banks(
    t: &FrameTable,
    banks: &[AttributeModelBank],
    cfg: &AugmentConfig,
) -> Result<FrameTable> {
    let new = residual_features(t, banks, cfg)?;
    let names = new
        .column_names()
        .iter()
        .map(|n| disambiguate(n, t))
        .collect();
    FrameTable::new(names, new.data().to_vec(), new.n_rows())?.hconcat(t)
}

/// Later rounds regenerate `<attr>_<suffix>` for the original attributes,
/// which already exist from round one. Such names get `r<k>` appended with
/// the smallest free k >= 2, which equals the round number when every round
/// runs on the previous one's output.
fn disambiguate(name: &str, t: &FrameTable) -> String {
    if t.column_index(name).is_none() {
        return name.to_string();
    }
    (2..)
        .map(|k| format!("{name}r{k}"))
        .find(|n| t.column_index(n).is_none())
        .unwrap()
}

pub fn train_banks(t: &FrameTable, cfg: &AugmentConfig) -> Result<Vec<AttributeModelBank>> {
    cfg.validate()?;
    if t.n_cols() < 2 {
        return Err(Error::DegenerateInput(format!(
            "table has no attributes besides the target ({} columns)",
            t.n_cols()
        )));
    }
    let parts = partition_by_target(t, &cfg.target, cfg.mode)?;
    parts
        .par_iter()
        .map(|p| train_attribute_models(p, cfg))
        .collect()
}

/// One round: train the banks, then prepend their residual columns.
pub fn augment_dataset(
    t: &FrameTable,
    cfg: &AugmentConfig,
) -> Result<(FrameTable, Vec<AttributeModelBank>)> {
    let banks = train_banks(t, cfg)?;
    let out = augment_with_banks(t, &banks, cfg)?;
    Ok((out, banks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub banks: usize,
    pub attributes: usize,
    pub new_columns: usize,
    pub rows: usize,
    pub columns: usize,
}

#[derive(Debug)]
pub struct RoundsOutcome {
    pub table: FrameTable,
    /// Banks of every round, outermost index is the round.
    pub banks: Vec<Vec<AttributeModelBank>>,
    pub rounds: Vec<RoundSummary>,
    pub warnings: Vec<String>,
}

/// Repeats [`augment_dataset`] `cfg.rounds` times; each round treats every
/// current non-target column as an attribute.
pub fn iterate_rounds(t: &FrameTable, cfg: &AugmentConfig) -> Result<RoundsOutcome> {
    iterate_rounds_with(t, cfg, |_, table| train_banks(table, cfg))
}

/// As [`iterate_rounds`], with banks for round `r` supplied by `banks_for`
/// (which may load them from a cache instead of training).
pub fn iterate_rounds_with(
    t: &FrameTable,
    cfg: &AugmentConfig,
    mut banks_for: impl FnMut(usize, &FrameTable) -> Result<Vec<AttributeModelBank>>,
) -> Result<RoundsOutcome> {
    cfg.validate()?;
    let mut table = t.clone();
    let mut all_banks = Vec::with_capacity(cfg.rounds);
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut warnings = Vec::new();
    for round in 1..=cfg.rounds {
        let banks = banks_for(round, &table)?;
        let next = augment_with_banks(&table, &banks, cfg)?;
        let attributes = banks.first().map_or(0, |b| b.attributes.len());
        let summary = RoundSummary {
            round,
            banks: banks.len(),
            attributes,
            new_columns: next.n_cols() - table.n_cols(),
            rows: next.n_rows(),
            columns: next.n_cols(),
        };
        let ratio = next.n_rows() as f64 / next.n_cols() as f64;
        if ratio < MIN_ROWS_PER_COLUMN {
            let msg = format!(
                "round {round}: rows/columns ratio {ratio:.2} is below {MIN_ROWS_PER_COLUMN} ({} rows, {} columns)",
                next.n_rows(),
                next.n_cols()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        log::info!(
            "round {round}: {} banks x {attributes} attributes -> {} columns",
            summary.banks,
            summary.columns
        );
        rounds.push(summary);
        all_banks.push(banks);
        table = next;
    }
    Ok(RoundsOutcome {
        table,
        banks: all_banks,
        rounds,
        warnings,
    })
}

/// Writes banks to a single binary file (see [`crate::learner::codec`]).
pub fn write_banks(path: &Path, banks: &[AttributeModelBank]) -> Result<()> {
    let mut e = Encoder::with_header();
    e.count(banks.len());
    for b in banks {
        match b.target {
            BankTarget::Class(v) => {
                e.u8(0);
                e.u64(v as u64);
            }
            BankTarget::All => e.u8(1),
        }
        e.count(b.attributes.len());
        for (i, attr) in b.attributes.iter().enumerate() {
            e.str(attr);
            let f = &b.fitness[i];
            e.f64(f.r_squared);
            e.f64(f.tss);
            e.f64(f.rss);
            e.forest(&b.models[i]);
        }
        match &b.oof {
            None => e.u8(0),
            Some(oof) => {
                e.u8(1);
                e.count(oof.folds);
                for per_attr in &oof.models {
                    for m in per_attr {
                        e.forest(m);
                    }
                }
            }
        }
    }
    let bytes = e.finish();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_banks(path: &Path) -> Result<Vec<AttributeModelBank>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut d = Decoder::with_header(&bytes)?;
    let n_banks = d.count()?;
    let mut banks = Vec::with_capacity(n_banks);
    for _ in 0..n_banks {
        let target = match d.u8()? {
            0 => BankTarget::Class(d.u64()? as i64),
            1 => BankTarget::All,
            t => return Err(Error::Format(format!("unknown bank target tag {t}"))),
        };
        let n_attr = d.count()?;
        let mut attributes = Vec::with_capacity(n_attr);
        let mut fitness = Vec::with_capacity(n_attr);
        let mut models = Vec::with_capacity(n_attr);
        for _ in 0..n_attr {
            attributes.push(d.str()?);
            fitness.push(ModelFitness {
                r_squared: d.f64()?,
                tss: d.f64()?,
                rss: d.f64()?,
            });
            models.push(d.forest()?);
        }
        let oof = match d.u8()? {
            0 => None,
            _ => {
                let folds = d.count()?;
                let models = (0..n_attr)
                    .map(|_| (0..folds).map(|_| d.forest()).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                Some(OofModels { folds, models })
            }
        };
        banks.push(AttributeModelBank {
            target,
            attributes,
            models,
            fitness,
            oof,
        });
    }
    if !d.is_done() {
        return Err(Error::Format("trailing bytes after model banks".into()));
    }
    Ok(banks)
}
