//! CART trees, random forests and the fitness measure used to weigh
//! residual features.

pub mod codec;
mod fitness;
mod forest;
mod split;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameTable;

pub use fitness::{r_squared, ModelFitness, TSS_GUARD};
pub use forest::{ForestParams, RandomForest};
pub use split::{split_indices, train_test_split, TrainTestSplit};
pub use tree::{DecisionTree, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            _ => Err(Error::Config(format!(
                "unknown task '{s}' (expected regression|classification)"
            ))),
        }
    }
}

/// How many features a node considers when searching for a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Fixed(usize),
}

impl MaxFeatures {
    /// All features for regression, `ceil(sqrt(p))` for classification.
    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Regression => MaxFeatures::All,
            Task::Classification => MaxFeatures::Sqrt,
        }
    }

    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl std::fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaxFeatures::All => write!(f, "all"),
            MaxFeatures::Sqrt => write!(f, "sqrt"),
            MaxFeatures::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            k => k
                .parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .map(MaxFeatures::Fixed)
                .ok_or_else(|| {
                    Error::Config(format!("max_features must be all|sqrt|<k>, got '{s}'"))
                }),
        }
    }
}

/// Borrowed column-major feature matrix.
#[derive(Debug, Clone)]
pub struct Features<'a> {
    names: Vec<String>,
    cols: Vec<&'a [f64]>,
    n_rows: usize,
}

impl<'a> Features<'a> {
    pub fn new(names: Vec<String>, cols: Vec<&'a [f64]>) -> Result<Self> {
        if names.len() != cols.len() {
            return Err(Error::validation(format!(
                "{} feature names for {} columns",
                names.len(),
                cols.len()
            )));
        }
        let n_rows = cols.first().map_or(0, |c| c.len());
        if let Some(j) = cols.iter().position(|c| c.len() != n_rows) {
            return Err(Error::validation(format!(
                "feature '{}' has {} rows, expected {n_rows}",
                names[j],
                cols[j].len()
            )));
        }
        Ok(Features {
            names,
            cols,
            n_rows,
        })
    }

    /// Anonymous features named `f0`, `f1`, ...
    pub fn unnamed(cols: Vec<&'a [f64]>) -> Result<Self> {
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        Features::new(names, cols)
    }

    /// Views `columns` (as produced by [`FrameTable::to_columns`]) minus the
    /// columns whose index is listed in `skip`.
    pub fn from_columns(
        names: &[String],
        columns: &'a [Vec<f64>],
        skip: &[usize],
    ) -> Result<Self> {
        let keep: Vec<usize> = (0..columns.len()).filter(|j| !skip.contains(j)).collect();
        Features::new(
            keep.iter().map(|&j| names[j].clone()).collect(),
            keep.iter().map(|&j| columns[j].as_slice()).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &'a [f64] {
        self.cols[j]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.cols[feature][row]
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        for (name, col) in self.names.iter().zip(&self.cols) {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "non-finite value in feature '{name}'"
                )));
            }
        }
        Ok(())
    }
}

/// Owns column-major copies of a table so [`Features`] views can borrow them.
pub struct ColumnStore {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl ColumnStore {
    pub fn from_frame(t: &FrameTable) -> Self {
        ColumnStore {
            names: t.column_names().to_vec(),
            columns: t.to_columns(),
        }
    }

    pub fn features_without(&self, skip: &[usize]) -> Result<Features<'_>> {
        Features::from_columns(&self.names, &self.columns, skip)
    }
}
