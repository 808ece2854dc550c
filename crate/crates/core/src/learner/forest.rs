use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, presort, validate};
use super::{DecisionTree, Features, MaxFeatures, Task};
use crate::error::{Error, Result};
use crate::frame::FrameTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestParams {
    pub task: Task,
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    /// 100 bootstrapped trees with the task's default feature policy.
    pub fn new(task: Task, seed: u64) -> Self {
        ForestParams {
            task,
            n_trees: 100,
            max_features: MaxFeatures::default_for(task),
            bootstrap: true,
            seed,
        }
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn with_max_features(mut self, max_features: MaxFeatures) -> Self {
        self.max_features = max_features;
        self
    }

    pub fn with_bootstrap(mut self, bootstrap: bool) -> Self {
        self.bootstrap = bootstrap;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// RNG stream for one tree: the forest seed picks the key, the tree index
/// picks the stream, so trees can be grown in any order.
pub(crate) fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub(crate) params: ForestParams,
    pub(crate) feature_names: Vec<String>,
    /// Sorted class labels seen in training (classification only).
    pub(crate) classes: Vec<f64>,
    pub(crate) trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(x: &Features<'_>, y: &[f64], params: ForestParams) -> Result<Self> {
        if params.n_trees == 0 {
            return Err(Error::validation("forest needs at least one tree"));
        }
        validate(x, y)?;
        let n = y.len();
        let sorted = presort(x);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(params.seed, t);
                let weights = if params.bootstrap {
                    let mut w = vec![0u32; n];
                    for _ in 0..n {
                        w[rng.gen_range(0..n)] += 1;
                    }
                    w
                } else {
                    vec![1u32; n]
                };
                grow(x, y, &weights, &sorted, params.task, params.max_features, &mut rng)
            })
            .collect();
        let classes = match params.task {
            Task::Classification => {
                let mut c = y.to_vec();
                c.sort_by(f64::total_cmp);
                c.dedup();
                c
            }
            Task::Regression => Vec::new(),
        };
        Ok(RandomForest {
            params,
            feature_names: x.names().to_vec(),
            classes,
            trees,
        })
    }

    pub fn fit_frame(x: &FrameTable, y: &[f64], params: ForestParams) -> Result<Self> {
        let cols = x.to_columns();
        let feats = Features::new(
            x.column_names().to_vec(),
            cols.iter().map(Vec::as_slice).collect(),
        )?;
        RandomForest::fit(&feats, y, params)
    }

    pub(crate) fn from_parts(
        params: ForestParams,
        feature_names: Vec<String>,
        classes: Vec<f64>,
        trees: Vec<DecisionTree>,
    ) -> Result<Self> {
        if trees.len() != params.n_trees {
            return Err(Error::Format(format!(
                "forest declares {} trees but holds {}",
                params.n_trees,
                trees.len()
            )));
        }
        Ok(RandomForest {
            params,
            feature_names,
            classes,
            trees,
        })
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Mean of tree outputs (regression) or majority vote with ties going
    /// to the smallest label (classification).
    pub fn predict_with(&self, value: impl Fn(usize) -> f64 + Copy) -> f64 {
        match self.params.task {
            Task::Regression => {
                let sum: f64 = self.trees.iter().map(|t| t.predict_with(value)).sum();
                sum / self.trees.len() as f64
            }
            Task::Classification => {
                let mut votes = vec![0usize; self.classes.len()];
                for t in &self.trees {
                    let label = t.predict_with(value);
                    let c = self
                        .classes
                        .binary_search_by(|l| l.total_cmp(&label))
                        .expect("leaf label seen in training");
                    votes[c] += 1;
                }
                let mut arg = 0;
                for (c, &v) in votes.iter().enumerate() {
                    if v > votes[arg] {
                        arg = c;
                    }
                }
                self.classes[arg]
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_with(|f| row[f])
    }

    /// Batch prediction over borrowed columns; the caller guarantees the
    /// column order matches training.
    pub fn predict_features(&self, x: &Features<'_>) -> Vec<f64> {
        (0..x.n_rows())
            .into_par_iter()
            .map(|i| self.predict_with(|f| x.value(i, f)))
            .collect()
    }

    /// Prediction over a table whose columns must match the training schema
    /// by name and order.
    pub fn predict(&self, x: &FrameTable) -> Result<Vec<f64>> {
        if x.n_cols() != self.feature_names.len() {
            let missing = self
                .feature_names
                .iter()
                .find(|n| x.column_index(n).is_none());
            return Err(Error::validation(match missing {
                Some(name) => format!("prediction input lacks column '{name}'"),
                None => format!(
                    "prediction input has {} columns, model expects {}",
                    x.n_cols(),
                    self.feature_names.len()
                ),
            }));
        }
        if let Some((got, want)) = x
            .column_names()
            .iter()
            .zip(&self.feature_names)
            .find(|(a, b)| a != b)
        {
            return Err(Error::validation(format!(
                "column '{got}' where model expects '{want}'"
            )));
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(x.row(i)))
            .collect())
    }
}
