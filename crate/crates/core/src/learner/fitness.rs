use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total sums of squares strictly inside `(-TSS_GUARD, TSS_GUARD)` count as
/// zero variance, and the fit is then scored as perfect.
pub const TSS_GUARD: f64 = 0.00001;

/// Held-out goodness of fit of an attribute model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFitness {
    pub r_squared: f64,
    pub tss: f64,
    pub rss: f64,
}

/// Coefficient of determination `1 - rss/tss`, or 1 when `tss` falls in the
/// guard window.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<ModelFitness> {
    if y_true.len() != y_pred.len() {
        return Err(Error::validation(format!(
            "r_squared: {} true values vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::validation("r_squared needs at least one value"));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let tss: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    let rss: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    let r_squared = if tss < TSS_GUARD && tss > -TSS_GUARD {
        1.0
    } else {
        1.0 - rss / tss
    };
    Ok(ModelFitness { r_squared, tss, rss })
}
