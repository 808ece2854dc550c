//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-4 and 7 need the bank marketing CSV (see `common::bank_csv`).
//! Without it they are reported as `FAIL (blocked)`; blocked criteria only
//! fail the process when `RESAUG_REQUIRE_DATA=1`.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracle;
use resaug::augment::{
    augment_dataset, parse_residual_name, residual_column_name, AugmentConfig, BankMode,
    Weighting,
};
use resaug::config::RunConfig;
use resaug::eval::{classification_metrics, fold_assignment, kfold_predict, regression_metrics, EvalSpec};
use resaug::ingest::{one_hot_encode, standardize};
use resaug::learner::{r_squared, DecisionTree, Features, MaxFeatures, Task};
use resaug::pipeline::{self, RunOutput, RunPaths};
use resaug::{Cell, FrameTable, RawTable};

const REFERENCE_F1: f64 = 0.82376;
const F1_BAND: f64 = 0.05;

enum Status {
    Pass,
    Fail,
    Blocked,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome { status: Status::Pass, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { status: Status::Fail, detail: detail.into() }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

/// Runs `f`, turning panics into failures.
fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(format!("panicked: {msg}"))
        }
    }
}

// ---------------------------------------------------------------------------
// bank runs

struct BankRuns {
    csv: PathBuf,
    dir: tempfile::TempDir,
    cache: BTreeMap<String, (RunOutput, PathBuf)>,
}

impl BankRuns {
    fn config(&self, name: &str, seed: Option<u64>) -> RunConfig {
        let mut cfg = common::bundled_config(name);
        cfg.source = self.csv.display().to_string();
        cfg.emit_augmented = true;
        if let Some(s) = seed {
            cfg.sample_seed = s;
            cfg.augment.aux.seed = s;
            cfg.augment.aux.split_seed = s;
            cfg.eval.seed = s;
        }
        cfg
    }

    /// Runs (or recalls) a bundled config; outputs land in a fresh dir.
    fn run(&mut self, name: &str, seed: Option<u64>, threads: usize, tag: &str) -> &(RunOutput, PathBuf) {
        let key = format!("{name}/{seed:?}/{threads}/{tag}");
        if !self.cache.contains_key(&key) {
            let cfg = self.config(name, seed);
            let out_dir = self.dir.path().join(key.replace(['/', ' '], "_"));
            let paths = RunPaths { out_dir: out_dir.clone(), cache_dir: None };
            let t = Instant::now();
            let out = pipeline::with_threads(Some(threads), || pipeline::run(&cfg, &paths))
                .and_then(|r| r)
                .unwrap_or_else(|e| panic!("run {key} failed: {e}"));
            eprintln!("  run {key}: {:.1}s", t.elapsed().as_secs_f64());
            self.cache.insert(key.clone(), (out, out_dir));
        }
        &self.cache[&key]
    }
}

/// At least 4, so the parallel run really interleaves even on one core.
fn max_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).max(4)
}

fn criterion_1(runs: &mut BankRuns) -> Outcome {
    let (out, _) = runs.run("bank-classification.cfg", None, max_threads(), "a");
    let f1 = out.report.augmented.f1.unwrap();
    check(
        (f1 - REFERENCE_F1).abs() <= F1_BAND,
        format!(
            "augmented F1 {f1:.5}, target {REFERENCE_F1} ± {F1_BAND} ({:.0}s total)",
            out.meta.total_seconds
        ),
    )
}

fn criterion_2(runs: &mut BankRuns) -> Outcome {
    let (out, _) = runs.run("bank-classification.cfg", None, max_threads(), "a");
    let (b, a) = (out.report.baseline.f1.unwrap(), out.report.augmented.f1.unwrap());
    let mut extra = Vec::new();
    for s in [1u64, 2, 3, 4] {
        let (o, _) = runs.run("bank-classification.cfg", Some(s), max_threads(), "a");
        extra.push(format!(
            "seed {s}: {:.4} -> {:.4}",
            o.report.baseline.f1.unwrap(),
            o.report.augmented.f1.unwrap()
        ));
    }
    check(
        a >= b,
        format!("seed 42: baseline F1 {b:.5}, augmented {a:.5}; ungated {}", extra.join(", ")),
    )
}

fn criterion_3(runs: &mut BankRuns) -> Outcome {
    let (bin, _) = runs.run("bank-regression-binarized.cfg", None, max_threads(), "a");
    let (bb, ba) = (bin.report.baseline.rmse.unwrap(), bin.report.augmented.rmse.unwrap());
    let (cont, _) = runs.run("bank-regression.cfg", None, max_threads(), "a");
    let (cb, ca) = (cont.report.baseline.rmse.unwrap(), cont.report.augmented.rmse.unwrap());
    let in_unit = |v: f64| v > 0.0 && v < 1.0;
    check(
        bb < 0.05 && ba < 0.05 && in_unit(cb) && in_unit(ca) && (ca - cb).abs() < 0.2,
        format!(
            "binarized rmse {bb:.5}/{ba:.5} (< 0.05); continuous rmse {cb:.5}/{ca:.5} (in (0,1), gap {:.5} < 0.2)",
            (ca - cb).abs()
        ),
    )
}

fn criterion_4(runs: &mut BankRuns) -> Outcome {
    let (out, _) = runs.run("bank-classification.cfg", None, max_threads(), "a");
    let r = &out.report;
    let prepared = r.stages.last().unwrap();
    let attributes = prepared.columns - 1;
    let round = &r.rounds[0];
    let banks: Vec<_> = r.banks.iter().filter(|b| b.round == 1).collect();
    let ok = banks.len() == 2
        && banks.iter().all(|b| b.models == attributes && b.attributes.len() == attributes)
        && round.new_columns == 2 * attributes
        && r.augmented_table.columns == prepared.columns + 2 * attributes;
    check(
        ok,
        format!(
            "{} banks, models per bank {:?}, {attributes} attributes, {} new columns{}",
            banks.len(),
            banks.iter().map(|b| b.models).collect::<Vec<_>>(),
            round.new_columns,
            if attributes == 63 { " (63 x 2 = 126)" } else { "" }
        ),
    )
}

fn criterion_7(runs: &mut BankRuns) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["bank-classification.cfg", "bank-regression.cfg"] {
        let a = runs.run(name, None, max_threads(), "a").1.clone();
        let b = runs.run(name, None, 1, "b").1.clone();
        for file in ["report.json", "augmented.csv"] {
            let same = read(&a.join(file)) == read(&b.join(file));
            ok &= same;
            notes.push(format!("{name} {file}: {}", if same { "identical" } else { "DIFFERS" }));
        }
    }
    check(ok, format!("threads {{{}, 1}}: {}", max_threads(), notes.join("; ")))
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

// ---------------------------------------------------------------------------
// CART oracle

fn tree_matches_oracle(d: &oracle::Dataset, task: Task) -> Result<(), String> {
    let p = d.rows[0].len();
    let cols: Vec<Vec<f64>> = (0..p).map(|f| d.rows.iter().map(|r| r[f]).collect()).collect();
    let x = Features::unnamed(cols.iter().map(Vec::as_slice).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tree = DecisionTree::fit(&x, &d.y, task, MaxFeatures::All, &mut rng).map_err(|e| e.to_string())?;
    let got = tree.predict(&x);
    let want = oracle::fit_predict(d, task);
    let (lg, lw) = (oracle::training_loss(task, &d.y, &got), oracle::training_loss(task, &d.y, &want));
    let same_preds = got.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-9);
    if (lg - lw).abs() > 1e-9 || !same_preds {
        return Err(format!(
            "{task:?} rows {:?} y {:?}: loss {lg} vs oracle {lw}",
            d.rows, d.y
        ));
    }
    Ok(())
}

#[derive(Default)]
struct Tally {
    checked: usize,
    first_err: Option<String>,
}

impl Tally {
    fn record(&mut self, r: Result<(), String>) {
        self.checked += 1;
        if let (Err(e), None) = (r, &self.first_err) {
            self.first_err = Some(e);
        }
    }
}

/// Calls `visit` with every vector of length `len` over `0..base`.
fn for_each_word(len: usize, base: usize, mut visit: impl FnMut(&[usize])) {
    let mut w = vec![0; len];
    loop {
        visit(&w);
        let mut i = 0;
        while i < len {
            w[i] += 1;
            if w[i] < base {
                break;
            }
            w[i] = 0;
            i += 1;
        }
        if i == len {
            return;
        }
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut tally = Tally::default();
    // exhaustive: ternary features (binary ones are a subset), every target
    // assignment, up to 4 rows x 2 features and 3 rows x 3 features
    for (n, p) in [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3), (4, 1), (4, 2)] {
        for_each_word(n * p, 3, |xs| {
            let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..p).map(|f| xs[i * p + f] as f64).collect()).collect();
            for (task, base) in [(Task::Classification, 2), (Task::Regression, 3)] {
                for_each_word(n, base, |ys| {
                    let d = oracle::Dataset {
                        rows: rows.clone(),
                        y: ys.iter().map(|&v| v as f64).collect(),
                    };
                    tally.record(tree_matches_oracle(&d, task));
                });
            }
        });
    }
    let exhaustive = tally.checked;

    // seeded sample of the rest: 5-8 rows, 1-3 features, each binary or
    // ternary; regression targets are small integers or uniform reals
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..40_000 {
        let n = rng.gen_range(5..=8);
        let p = rng.gen_range(1..=3);
        let arity: Vec<u32> = (0..p).map(|_| rng.gen_range(2..=3)).collect();
        let rows = (0..n)
            .map(|_| arity.iter().map(|&a| f64::from(rng.gen_range(0..a))).collect())
            .collect();
        let (task, y) = match i % 3 {
            0 => (Task::Classification, (0..n).map(|_| f64::from(rng.gen_range(0..2u32))).collect()),
            1 => (Task::Regression, (0..n).map(|_| f64::from(rng.gen_range(0..5u32))).collect()),
            _ => (Task::Regression, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        };
        tally.record(tree_matches_oracle(&oracle::Dataset { rows, y }, task));
    }
    let secs = start.elapsed().as_secs_f64();
    let checked = tally.checked;
    match tally.first_err {
        Some(e) => fail(format!("mismatch after {checked} datasets: {e}")),
        None => check(
            secs < 60.0,
            format!("{checked} datasets ({exhaustive} exhaustive), all match; {secs:.1}s (< 60s)"),
        ),
    }
}

// ---------------------------------------------------------------------------
// formulas

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut expect = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let r2 = |t: &[f64], p: &[f64]| r_squared(t, p).unwrap();

    // tss = 8e-6, inside the window: scored 1 whatever the predictions
    let f = r2(&[0.0, 0.004], &[5.0, -5.0]);
    expect("guard inside", f.r_squared == 1.0 && close(f.tss, 8e-6, 1e-18));
    // tss = 1.058e-5, outside: 1 - rss/tss
    let f = r2(&[0.0, 0.0046], &[0.0023, 0.0023]);
    expect("guard outside", close(f.r_squared, 0.0, 1e-9));
    let f = r2(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]);
    expect("negative r2", close(f.r_squared, -3.0, 1e-9));
    expect("perfect r2", r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).r_squared == 1.0);

    let c = AugmentConfig::faithful("y", BankMode::PerClass);
    expect("cell r2=1", close(c.cell((0.5f64 - 0.3).abs(), 1.0), 0.2, 1e-9));
    expect("cell r2=0.5", close(c.cell((0.5f64 - 0.3).abs(), 0.5), 0.05, 1e-9));
    expect("cell round first", close(c.cell(0.123456, 0.5), 0.1235 * 0.25, 1e-12));
    expect("cell negative r2", close(c.cell(0.3, -0.5), 0.075, 1e-12));

    let m = classification_metrics(&[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]).unwrap();
    expect(
        "prf hand case",
        close(m.precision.unwrap(), 1.0, 1e-9) && close(m.recall.unwrap(), 0.5, 1e-9) && close(m.f1.unwrap(), 2.0 / 3.0, 1e-9),
    );
    let y = [1.0, 0.0, 1.0, 1.0];
    let m = classification_metrics(&y, &y).unwrap();
    expect("prf perfect", m.precision == Some(1.0) && m.recall == Some(1.0) && m.f1 == Some(1.0));
    let m = classification_metrics(&y, &[0.0; 4]).unwrap();
    expect("prf all zero", m.precision == Some(0.0) && m.recall == Some(0.0) && m.f1 == Some(0.0));

    expect("rmse equal", regression_metrics(&y, &y).unwrap().rmse == Some(0.0));
    expect(
        "rmse [0,0] vs [3,4]",
        close(regression_metrics(&[0.0, 0.0], &[3.0, 4.0]).unwrap().rmse.unwrap(), 3.5355, 1e-4),
    );
    expect(
        "rmse [1,2,3] vs 2",
        close(regression_metrics(&[1.0, 2.0, 3.0], &[2.0; 3]).unwrap().rmse.unwrap(), 0.8165, 1e-4),
    );
    if failures.is_empty() {
        pass("r2 guard window, residual cell, precision/recall/F1 and rmse hand cases")
    } else {
        fail(format!("failed: {}", failures.join(", ")))
    }
}

// ---------------------------------------------------------------------------
// properties

const CASES: u32 = 128;

fn runner() -> TestRunner {
    let cfg = PropConfig {
        cases: CASES,
        failure_persistence: None,
        ..PropConfig::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn numeric_table() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..30, 1usize..5).prop_flat_map(|(n, c)| {
        prop::collection::vec(
            prop_oneof![
                4 => prop::collection::vec(-1e3..1e3f64, n),
                1 => (-1e3..1e3f64).prop_map(move |v| vec![v; n]),
            ],
            c,
        )
    })
}

fn prop_standardize() -> Result<(), String> {
    runner()
        .run(&numeric_table(), |cols| {
            let names = (0..cols.len()).map(|j| format!("c{j}")).collect();
            let t = FrameTable::from_columns(names, cols.clone()).unwrap();
            let (s, _) = standardize(&t).unwrap();
            for (j, orig) in cols.iter().enumerate() {
                let col = s.column(j);
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let std = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
                prop_assert!(mean.abs() < 1e-9, "mean {mean}");
                if orig.iter().all(|v| *v == orig[0]) {
                    prop_assert!(col.iter().all(|v| *v == 0.0));
                } else {
                    prop_assert!((std - 1.0).abs() < 1e-9, "std {std}");
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
enum Col {
    Num(Vec<f64>),
    Text(Vec<String>),
}

fn mixed_table() -> impl Strategy<Value = Vec<Col>> {
    (1usize..25, 1usize..5).prop_flat_map(|(n, c)| {
        prop::collection::vec(
            prop_oneof![
                prop::collection::vec(-100.0..100.0f64, n).prop_map(Col::Num),
                prop::collection::vec("[a-e]", n).prop_map(Col::Text),
            ],
            c,
        )
    })
}

fn prop_one_hot() -> Result<(), String> {
    runner()
        .run(&mixed_table(), |cols| {
            let names: Vec<String> = (0..cols.len()).map(|j| format!("c{j}")).collect();
            let cells = cols
                .iter()
                .map(|c| match c {
                    Col::Num(v) => v.iter().map(|x| Cell::Number(*x)).collect(),
                    Col::Text(v) => v.iter().map(|s| Cell::Text(s.clone())).collect(),
                })
                .collect();
            let raw = RawTable::new(names.clone(), cells).unwrap();
            let t = one_hot_encode(&raw).unwrap();
            let mut expected = 0;
            for (j, c) in cols.iter().enumerate() {
                match c {
                    Col::Num(_) => expected += 1,
                    Col::Text(v) => {
                        let mut distinct = v.clone();
                        distinct.sort();
                        distinct.dedup();
                        expected += distinct.len();
                        let idx: Vec<usize> = distinct
                            .iter()
                            .map(|d| t.column_index(&format!("{}_{d}", names[j])).unwrap())
                            .collect();
                        for i in 0..t.n_rows() {
                            let s: f64 = idx.iter().map(|&k| t.value(i, k)).sum();
                            prop_assert_eq!(s, 1.0);
                        }
                    }
                }
            }
            prop_assert_eq!(t.n_cols(), expected);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn prop_folds() -> Result<(), String> {
    let strat = (2usize..24)
        .prop_flat_map(|n| (Just(n), 2usize..=n.min(8), any::<u64>(), any::<u64>(), prop::collection::vec(-5.0..5.0f64, n)));
    runner()
        .run(&strat, |(n, k, s1, s2, y)| {
            let a = fold_assignment(n, k, false, s1);
            prop_assert_eq!(&a, &fold_assignment(n, k, false, s2));
            prop_assert!(a.windows(2).all(|w| w[0] <= w[1]));
            for f in 0..k {
                let size = a.iter().filter(|&&x| x == f).count();
                prop_assert_eq!(size, n / k + usize::from(f < n % k));
            }
            // rewriting the labels of one fold leaves that fold's predictions
            // alone: they come only from models that never saw it
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let feats = Features::unnamed(vec![&x]).unwrap();
            let mut spec = EvalSpec::new(Task::Regression);
            spec.n_trees = 3;
            spec.k = k;
            spec.seed = s1;
            let before = kfold_predict(&spec, &feats, &y).unwrap();
            let mut y2 = y.clone();
            for i in 0..n {
                if a[i] == 0 {
                    y2[i] += 100.0;
                }
            }
            let after = kfold_predict(&spec, &feats, &y2).unwrap();
            for i in 0..n {
                if a[i] == 0 {
                    prop_assert_eq!(before[i], after[i]);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn prop_residuals_nonnegative() -> Result<(), String> {
    let strat = (8usize..16, 2usize..4).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), p),
            prop::collection::vec(any::<bool>(), n),
            any::<bool>(),
        )
    });
    runner()
        .run(&strat, |(attrs, labels, clamped)| {
            let n = labels.len();
            let p = attrs.len();
            // at least two rows per class so both partitions can be split
            let y: Vec<f64> = (0..n)
                .map(|i| if i < 2 { 0.0 } else if i < 4 { 1.0 } else { f64::from(u8::from(labels[i])) })
                .collect();
            let mut names: Vec<String> = (0..p).map(|j| format!("a{j}")).collect();
            names.push("y".into());
            let mut cols = attrs.clone();
            cols.push(y);
            let t = FrameTable::from_columns(names, cols).unwrap();
            let mut cfg = AugmentConfig::faithful("y", BankMode::PerClass);
            cfg.aux.n_trees = 3;
            if clamped {
                cfg.weighting = Weighting::Clamped;
            }
            let (out, _) = augment_dataset(&t, &cfg).unwrap();
            for i in 0..n {
                prop_assert!(out.row(i)[..2 * p].iter().all(|v| *v >= 0.0));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn prop_naming() -> Result<(), String> {
    let strat = ("[a-z][a-z0-9_.]{0,12}", "(0|1|new)(r[2-9])?");
    runner()
        .run(&strat, |(attr, suffix)| {
            let name = residual_column_name(&attr, &suffix);
            prop_assert_eq!(parse_residual_name(&name), Some((attr.as_str(), suffix.as_str())));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

type Property = fn() -> Result<(), String>;

fn criterion_8() -> Outcome {
    let props: [(&str, Property); 5] = [
        ("standardization bounds", prop_standardize),
        ("one-hot count identity", prop_one_hot),
        ("fold membership", prop_folds),
        ("residual nonnegativity", prop_residuals_nonnegative),
        ("naming round-trip", prop_naming),
    ];
    let mut failures = Vec::new();
    for (name, f) in props {
        if let Err(e) = f() {
            failures.push(format!("{name}: {e}"));
        }
    }
    if failures.is_empty() {
        pass(format!("5 properties x {CASES} cases"))
    } else {
        fail(failures.join("; "))
    }
}

// ---------------------------------------------------------------------------

fn main() {
    let strict = std::env::var("RESAUG_REQUIRE_DATA").is_ok_and(|v| v == "1");
    let data = common::bank_csv();
    let mut runs = data.as_ref().ok().map(|csv| BankRuns {
        csv: csv.clone(),
        dir: tempfile::tempdir().unwrap(),
        cache: BTreeMap::new(),
    });

    type Bank = fn(&mut BankRuns) -> Outcome;
    let bank: [(u8, &str, Bank); 5] = [
        (1, "reference F1 within band", criterion_1),
        (2, "augmented F1 >= baseline F1", criterion_2),
        (3, "regression modes complete with bounded RMSE", criterion_3),
        (4, "structural bank and column counts", criterion_4),
        (7, "determinism across runs and thread counts", criterion_7),
    ];
    type Local = fn() -> Outcome;
    let local: [(u8, &str, Local); 3] = [
        (5, "CART matches exhaustive-split oracle", criterion_5),
        (6, "formula unit suite", criterion_6),
        (8, "invariant property tests", criterion_8),
    ];

    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    for (id, name, f) in local {
        results.push((id, name, guarded(f)));
    }
    for (id, name, f) in bank {
        let o = match (&mut runs, &data) {
            (Some(r), _) => guarded(|| f(r)),
            (None, Err(e)) => Outcome {
                status: Status::Blocked,
                detail: format!("bank dataset unavailable: {e}"),
            },
            (None, Ok(_)) => unreachable!(),
        };
        results.push((id, name, o));
    }
    results.sort_by_key(|r| r.0);

    println!();
    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Blocked => "FAIL (blocked)",
        };
        println!("criterion {id} [{tag}] {name}: {}", o.detail);
        match o.status {
            Status::Fail => failed += 1,
            Status::Blocked if strict => failed += 1,
            _ => {}
        }
    }
    let blocked = results.iter().filter(|r| matches!(r.2.status, Status::Blocked)).count();
    println!(
        "\n{} passed, {} failed, {blocked} blocked on missing data{}",
        results.iter().filter(|r| matches!(r.2.status, Status::Pass)).count(),
        results.len() - blocked - results.iter().filter(|r| matches!(r.2.status, Status::Pass)).count(),
        if strict { " (strict)" } else { "" }
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
