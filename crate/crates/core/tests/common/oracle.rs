//! Brute-force CART: at every node, try every (feature, midpoint) pair,
//! compute child impurities from scratch and keep the best one.

use resaug::learner::Task;

const TOL: f64 = 1e-10;

pub struct Dataset {
    /// Row-major feature values.
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

enum Tree {
    Leaf(f64),
    Split(usize, f64, Box<Tree>, Box<Tree>),
}

fn impurity(task: Task, ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    match task {
        Task::Regression => {
            let m = ys.iter().sum::<f64>() / n;
            ys.iter().map(|y| (y - m) * (y - m)).sum()
        }
        Task::Classification => {
            let mut labels: Vec<f64> = ys.to_vec();
            labels.sort_by(f64::total_cmp);
            labels.dedup();
            let sq: f64 = labels
                .iter()
                .map(|l| ys.iter().filter(|y| *y == l).count() as f64)
                .map(|c| c * c)
                .sum();
            n - sq / n
        }
    }
}

fn leaf_value(task: Task, ys: &[f64]) -> f64 {
    match task {
        Task::Regression => ys.iter().sum::<f64>() / ys.len() as f64,
        Task::Classification => {
            let mut labels: Vec<f64> = ys.to_vec();
            labels.sort_by(f64::total_cmp);
            labels.dedup();
            let mut best = labels[0];
            let mut best_count = 0;
            for l in labels {
                let c = ys.iter().filter(|y| **y == l).count();
                if c > best_count {
                    best = l;
                    best_count = c;
                }
            }
            best
        }
    }
}

fn build(d: &Dataset, rows: &[usize], task: Task) -> Tree {
    let ys: Vec<f64> = rows.iter().map(|&i| d.y[i]).collect();
    let parent = impurity(task, &ys);
    let p = d.rows.first().map_or(0, Vec::len);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..p {
        let mut vals: Vec<f64> = rows.iter().map(|&i| d.rows[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| d.rows[i][f] <= t);
            let yl: Vec<f64> = l.iter().map(|&i| d.y[i]).collect();
            let yr: Vec<f64> = r.iter().map(|&i| d.y[i]).collect();
            let gain = parent - impurity(task, &yl) - impurity(task, &yr);
            // features and thresholds are visited in increasing order, so a
            // strict improvement is needed to replace the incumbent
            if best.is_none_or(|(g, _, _)| gain > g + TOL * parent) {
                best = Some((gain, f, t));
            }
        }
    }
    match best {
        Some((g, f, t)) if g > TOL * parent && rows.len() >= 2 => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| d.rows[i][f] <= t);
            Tree::Split(f, t, Box::new(build(d, &l, task)), Box::new(build(d, &r, task)))
        }
        _ => Tree::Leaf(leaf_value(task, &ys)),
    }
}

fn predict(t: &Tree, row: &[f64]) -> f64 {
    match t {
        Tree::Leaf(v) => *v,
        Tree::Split(f, th, l, r) => {
            if row[*f] <= *th {
                predict(l, row)
            } else {
                predict(r, row)
            }
        }
    }
}

/// Oracle predictions on the training rows.
pub fn fit_predict(d: &Dataset, task: Task) -> Vec<f64> {
    let rows: Vec<usize> = (0..d.y.len()).collect();
    let t = build(d, &rows, task);
    d.rows.iter().map(|r| predict(&t, r)).collect()
}

/// Squared error for regression, misclassified count for classification.
pub fn training_loss(task: Task, y: &[f64], pred: &[f64]) -> f64 {
    match task {
        Task::Regression => y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum(),
        Task::Classification => y.iter().zip(pred).filter(|(a, b)| a != b).count() as f64,
    }
}
