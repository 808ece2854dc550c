use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Features, MaxFeatures, Task};
use crate::error::{Error, Result};

/// Relative tolerance on impurity decrease. A split must beat the node's
/// impurity mass times this factor to count as an improvement, and two
/// candidates within it are treated as tied.
pub(crate) const GAIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`, the rest to `left + 1`.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
    },
    Leaf {
        value: f64,
    },
}

/// A fitted CART tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    task: Task,
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub(crate) fn from_nodes(task: Task, nodes: Vec<Node>) -> Result<Self> {
        let n = nodes.len() as u64;
        if n == 0 {
            return Err(Error::Format("tree without nodes".into()));
        }
        for node in &nodes {
            match *node {
                Node::Split { left, threshold, .. } => {
                    if u64::from(left) + 1 >= n || !threshold.is_finite() {
                        return Err(Error::Format("malformed tree node".into()));
                    }
                }
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(Error::Format("non-finite leaf".into()));
                }
                Node::Leaf { .. } => {}
            }
        }
        Ok(DecisionTree { task, nodes })
    }

    /// Grows an unpruned CART tree on every row of `x`, each with weight 1.
    pub fn fit(
        x: &Features<'_>,
        y: &[f64],
        task: Task,
        max_features: MaxFeatures,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        validate(x, y)?;
        let order = presort(x);
        let weights = vec![1u32; y.len()];
        Ok(grow(x, y, &weights, &order, task, max_features, rng))
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0u32, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i as usize] {
                Node::Leaf { .. } => max = max.max(d),
                Node::Split { left, .. } => {
                    stack.push((left, d + 1));
                    stack.push((left + 1, d + 1));
                }
            }
        }
        max
    }

    /// Prediction for one row, reading feature `f` through `value(f)`.
    #[inline]
    pub fn predict_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                } => {
                    i = if value(feature as usize) <= threshold {
                        left as usize
                    } else {
                        left as usize + 1
                    };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_with(|f| row[f])
    }

    pub fn predict(&self, x: &Features<'_>) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| self.predict_with(|f| x.value(i, f)))
            .collect()
    }
}

pub(crate) fn validate(x: &Features<'_>, y: &[f64]) -> Result<()> {
    if x.n_rows() == 0 && x.n_features() > 0 || y.is_empty() {
        return Err(Error::DegenerateInput("cannot fit on zero rows".into()));
    }
    if x.n_features() > 0 && x.n_rows() != y.len() {
        return Err(Error::validation(format!(
            "{} feature rows but {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite target value"));
    }
    x.check_finite()
}

/// Row indices sorted by each feature, feature-major: `p` blocks of `n`.
pub(crate) fn presort(x: &Features<'_>) -> Vec<u32> {
    let n = x.n_rows();
    let mut order = Vec::with_capacity(n * x.n_features());
    for f in 0..x.n_features() {
        let col = x.column(f);
        let start = order.len();
        order.extend(0..n as u32);
        order[start..].sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
    }
    order
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// Number of sorted positions (from segment start) going left.
    n_left: usize,
}

enum Stats {
    Regression {
        /// Mean of the node's targets; scans accumulate centred sums.
        mean: f64,
        sum_c: f64,
    },
    Classification {
        counts: Vec<f64>,
    },
}

struct Grower<'a, 'x> {
    x: &'a Features<'x>,
    y: &'a [f64],
    w: Vec<f64>,
    class_of: Vec<usize>,
    labels: Vec<f64>,
    task: Task,
    k: usize,
    /// Feature-major sorted active rows; each feature block has `m` slots.
    order: Vec<u32>,
    m: usize,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    feats: Vec<usize>,
    left_counts: Vec<f64>,
}

/// Grows a tree on rows with nonzero `weights`. `sorted` is the full
/// presort from [`presort`]; inactive rows are filtered out here.
pub(crate) fn grow(
    x: &Features<'_>,
    y: &[f64],
    weights: &[u32],
    sorted: &[u32],
    task: Task,
    max_features: MaxFeatures,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let n = x.n_rows().max(y.len());
    let p = x.n_features();
    let m = weights.iter().filter(|&&w| w > 0).count();
    let mut order = Vec::with_capacity(m * p);
    for f in 0..p {
        order.extend(
            sorted[f * n..(f + 1) * n]
                .iter()
                .copied()
                .filter(|&i| weights[i as usize] > 0),
        );
    }
    let (labels, class_of) = match task {
        Task::Classification => class_index(y),
        Task::Regression => (Vec::new(), Vec::new()),
    };
    let mut g = Grower {
        x,
        y,
        w: weights.iter().map(|&w| f64::from(w)).collect(),
        class_of,
        left_counts: vec![0.0; labels.len()],
        labels,
        task,
        k: max_features.resolve(p),
        order,
        m,
        goes_left: vec![false; n],
        scratch: Vec::with_capacity(m),
        feats: (0..p).collect(),
    };
    let active: Vec<u32> = (0..n as u32).filter(|&i| weights[i as usize] > 0).collect();
    g.run(active, rng)
}

fn class_index(y: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut labels = y.to_vec();
    labels.sort_by(f64::total_cmp);
    labels.dedup();
    let class_of = y
        .iter()
        .map(|v| labels.binary_search_by(|l| l.total_cmp(v)).unwrap())
        .collect();
    (labels, class_of)
}

impl Grower<'_, '_> {
    fn run(&mut self, active: Vec<u32>, rng: &mut ChaCha8Rng) -> DecisionTree {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        // (node index, segment start, segment end); with no features the
        // active list stands in for a sorted block
        let mut stack = vec![(0usize, 0usize, self.m)];
        while let Some((node, start, end)) = stack.pop() {
            let seg: Vec<u32> = if self.feats.is_empty() {
                active[start..end].to_vec()
            } else {
                self.order[start..end].to_vec()
            };
            let (stats, weight, leaf_value, pure) = self.node_stats(&seg);
            let best = if pure || end - start < 2 {
                None
            } else {
                self.find_split(start, end, &seg, &stats, weight, rng)
            };
            match best {
                None => nodes[node] = Node::Leaf { value: leaf_value },
                Some(b) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node] = Node::Split {
                        feature: b.feature as u32,
                        threshold: b.threshold,
                        left: left as u32,
                    };
                    self.partition(start, end, &b);
                    let mid = start + b.n_left;
                    stack.push((left + 1, mid, end));
                    stack.push((left, start, mid));
                }
            }
        }
        DecisionTree {
            task: self.task,
            nodes,
        }
    }

    fn node_stats(&self, seg: &[u32]) -> (Stats, f64, f64, bool) {
        let mut weight = 0.0;
        match self.task {
            Task::Regression => {
                let mut sum = 0.0;
                let first = self.y[seg[0] as usize];
                let mut pure = true;
                for &i in seg {
                    let i = i as usize;
                    weight += self.w[i];
                    sum += self.w[i] * self.y[i];
                    pure &= self.y[i] == first;
                }
                let mean = if pure { first } else { sum / weight };
                let sum_c = seg
                    .iter()
                    .map(|&i| self.w[i as usize] * (self.y[i as usize] - mean))
                    .sum();
                (Stats::Regression { mean, sum_c }, weight, mean, pure)
            }
            Task::Classification => {
                let mut counts = vec![0.0; self.labels.len()];
                for &i in seg {
                    let i = i as usize;
                    weight += self.w[i];
                    counts[self.class_of[i]] += self.w[i];
                }
                let mut arg = 0;
                for (c, &v) in counts.iter().enumerate() {
                    if v > counts[arg] {
                        arg = c;
                    }
                }
                let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
                let value = self.labels[arg];
                (Stats::Classification { counts }, weight, value, pure)
            }
        }
    }

    fn find_split(
        &mut self,
        start: usize,
        end: usize,
        seg: &[u32],
        stats: &Stats,
        weight: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<Best> {
        let p = self.feats.len();
        if p == 0 {
            return None;
        }
        let (parent_proxy, mass) = match stats {
            Stats::Regression { mean, sum_c } => {
                let sse: f64 = seg
                    .iter()
                    .map(|&i| {
                        let d = self.y[i as usize] - mean;
                        self.w[i as usize] * d * d
                    })
                    .sum();
                (sum_c * sum_c / weight, sse)
            }
            Stats::Classification { counts } => {
                let sq: f64 = counts.iter().map(|c| c * c).sum::<f64>() / weight;
                (sq, weight - sq)
            }
        };
        let tol = GAIN_TOL * mass;
        let mut best: Option<Best> = None;

        let mut consider = |g: &mut Self, f: usize| {
            if let Some(cand) = g.scan_feature(f, start, end, stats, weight, parent_proxy, tol) {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        cand.gain > b.gain + tol
                            || (cand.gain >= b.gain - tol && cand.feature < b.feature)
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        };

        if self.k >= p {
            for f in 0..p {
                consider(self, f);
            }
        } else {
            for (i, f) in self.feats.iter_mut().enumerate() {
                *f = i;
            }
            let mut visited = 0;
            let mut i = 0;
            while i < p && visited < self.k {
                let j = rng.gen_range(i..p);
                self.feats.swap(i, j);
                let f = self.feats[i];
                i += 1;
                if self.is_constant(f, start, end) {
                    continue;
                }
                visited += 1;
                consider(self, f);
            }
        }
        best.filter(|b| b.gain > tol)
    }

    fn is_constant(&self, f: usize, start: usize, end: usize) -> bool {
        let block = &self.order[f * self.m..(f + 1) * self.m];
        let col = self.x.column(f);
        col[block[start] as usize] == col[block[end - 1] as usize]
    }

    /// Best threshold on feature `f`; the lowest threshold wins ties.
    #[allow(clippy::too_many_arguments)]
    fn scan_feature(
        &mut self,
        f: usize,
        start: usize,
        end: usize,
        stats: &Stats,
        weight: f64,
        parent_proxy: f64,
        tol: f64,
    ) -> Option<Best> {
        let block = &self.order[f * self.m + start..f * self.m + end];
        let col = self.x.column(f);
        let mut best_proxy = f64::NEG_INFINITY;
        let mut best_pos = usize::MAX;
        let mut wl = 0.0;
        match stats {
            Stats::Regression { mean, sum_c } => {
                let mut sl = 0.0;
                for pos in 0..block.len() - 1 {
                    let i = block[pos] as usize;
                    wl += self.w[i];
                    sl += self.w[i] * (self.y[i] - mean);
                    let next = block[pos + 1] as usize;
                    if col[next] <= col[i] {
                        continue;
                    }
                    let wr = weight - wl;
                    let sr = sum_c - sl;
                    let proxy = sl * sl / wl + sr * sr / wr;
                    if proxy > best_proxy + tol {
                        best_proxy = proxy;
                        best_pos = pos;
                    }
                }
            }
            Stats::Classification { counts } => {
                self.left_counts.iter_mut().for_each(|c| *c = 0.0);
                for pos in 0..block.len() - 1 {
                    let i = block[pos] as usize;
                    wl += self.w[i];
                    self.left_counts[self.class_of[i]] += self.w[i];
                    let next = block[pos + 1] as usize;
                    if col[next] <= col[i] {
                        continue;
                    }
                    let wr = weight - wl;
                    let mut sq_l = 0.0;
                    let mut sq_r = 0.0;
                    for (l, t) in self.left_counts.iter().zip(counts) {
                        let r = t - l;
                        sq_l += l * l;
                        sq_r += r * r;
                    }
                    let proxy = sq_l / wl + sq_r / wr;
                    if proxy > best_proxy + tol {
                        best_proxy = proxy;
                        best_pos = pos;
                    }
                }
            }
        }
        if best_pos == usize::MAX {
            return None;
        }
        let lo = col[block[best_pos] as usize];
        let hi = col[block[best_pos + 1] as usize];
        let mut threshold = lo + (hi - lo) * 0.5;
        if !(threshold >= lo && threshold < hi) {
            threshold = lo;
        }
        Some(Best {
            gain: best_proxy - parent_proxy,
            feature: f,
            threshold,
            n_left: best_pos + 1,
        })
    }

    /// Stable-partitions every feature block of the segment into the left
    /// child's rows followed by the right child's rows.
    fn partition(&mut self, start: usize, end: usize, b: &Best) {
        let m = self.m;
        let split_block = &self.order[b.feature * m + start..b.feature * m + end];
        for (pos, &i) in split_block.iter().enumerate() {
            self.goes_left[i as usize] = pos < b.n_left;
        }
        for f in 0..self.feats.len() {
            if f == b.feature {
                continue;
            }
            let seg = &mut self.order[f * m + start..f * m + end];
            self.scratch.clear();
            let mut write = 0;
            for r in 0..seg.len() {
                let i = seg[r];
                if self.goes_left[i as usize] {
                    seg[write] = i;
                    write += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            seg[write..].copy_from_slice(&self.scratch);
        }
    }
}
