use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame::FrameTable;

/// Shuffled `(train, test)` row indices. The test side holds
/// `round(test_fraction * n)` rows, clamped so neither side is empty.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "train/test split needs at least 2 rows, got {n}"
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::validation(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = idx.split_off(n_test);
    Ok((train, idx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTestSplit {
    pub x_train: FrameTable,
    pub x_test: FrameTable,
    pub y_train: Vec<f64>,
    pub y_test: Vec<f64>,
}

pub fn train_test_split(
    x: &FrameTable,
    y: &[f64],
    test_fraction: f64,
    seed: u64,
) -> Result<TrainTestSplit> {
    if x.n_rows() != y.len() {
        return Err(Error::validation(format!(
            "{} rows but {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    let (train, test) = split_indices(y.len(), test_fraction, seed)?;
    Ok(TrainTestSplit {
        x_train: x.select_rows(&train),
        x_test: x.select_rows(&test),
        y_train: train.iter().map(|&i| y[i]).collect(),
        y_test: test.iter().map(|&i| y[i]).collect(),
    })
}
