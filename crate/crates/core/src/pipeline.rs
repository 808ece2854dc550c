//! End-to-end runs: fetch, preprocess, augment, compare, write outputs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::augment::{
    iterate_rounds_with, read_banks, train_banks, write_banks, AttributeModelBank, RoundsOutcome,
};
use crate::config::RunConfig;
use crate::error::Error;
use crate::eval::{compare, AttributeFitness, BankSummary, ComparisonReport, StageCount};
use crate::frame::{FrameTable, RawTable};
use crate::ingest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Learner,
    Augment,
    Eval,
    Output,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Ingest => 3,
            Stage::Learner => 4,
            Stage::Augment => 5,
            Stage::Eval => 6,
            Stage::Output => 7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Learner => "learner",
            Stage::Augment => "augment",
            Stage::Eval => "eval",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage.as_str(), self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Augmentation errors raised while fitting an attribute model belong to
/// the learner stage.
fn augment_stage(e: Error) -> StageError {
    let stage = match e {
        Error::Attribute { .. } => Stage::Learner,
        Error::Config(_) => Stage::Config,
        _ => Stage::Augment,
    };
    StageError { stage, source: e }
}

/// Where a run reads and writes.
#[derive(Debug, Clone, Default)]
pub struct RunPaths {
    pub out_dir: PathBuf,
    /// Download and bank cache; `None` disables bank caching and requires
    /// a local dataset source.
    pub cache_dir: Option<PathBuf>,
}

/// Resolves `cfg.source` to a local CSV file.
///
/// Existing local paths are used directly (zip archives are extracted into
/// the cache); anything else is treated as a URL and fetched through the
/// cache.
pub fn resolve_dataset(cfg: &RunConfig, cache_dir: Option<&Path>) -> StageResult<PathBuf> {
    let local = Path::new(&cfg.source);
    if local.is_file() && !is_zip(local) {
        return Ok(local.to_path_buf());
    }
    let Some(cache) = cache_dir else {
        return Err(StageError {
            stage: Stage::Ingest,
            source: Error::Fetch {
                url: cfg.source.clone(),
                reason: "not a local file and no cache directory configured".into(),
            },
        });
    };
    let url = if local.is_file() {
        let abs = local.canonicalize().map_err(|e| Error::io(local, e)).at(Stage::Ingest)?;
        format!("file://{}", abs.display())
    } else {
        cfg.source.clone()
    };
    ingest::fetch_dataset(&url, &cache.join("datasets"), &cfg.csv_member).at(Stage::Ingest)
}

fn is_zip(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("zip"))
}

/// The preprocessed table plus the row/column count after every stage.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub table: FrameTable,
    pub stages: Vec<StageCount>,
}

fn count(stage: &str, rows: usize, columns: usize) -> StageCount {
    StageCount {
        stage: stage.to_string(),
        rows,
        columns,
    }
}

/// Sample, deduplicate, drop missing, encode, scale, binarize, drop columns.
pub fn prepare(raw: &RawTable, cfg: &RunConfig) -> crate::Result<Prepared> {
    let mut stages = vec![count("loaded", raw.n_rows(), raw.n_cols())];
    let t = ingest::sample_rows(raw, cfg.sample_fraction, cfg.sample_seed)?;
    stages.push(count("sampled", t.n_rows(), t.n_cols()));
    let t = ingest::drop_duplicates(&t);
    stages.push(count("deduplicated", t.n_rows(), t.n_cols()));
    let t = ingest::drop_missing(&t, cfg.missing_sentinel.as_deref());
    stages.push(count("missing dropped", t.n_rows(), t.n_cols()));
    let mut t = ingest::one_hot_encode(&t)?;
    stages.push(count("one-hot encoded", t.n_rows(), t.n_cols()));
    if cfg.standardize {
        t = ingest::standardize(&t)?.0;
    }
    if cfg.binarizes_target() {
        t = ingest::binarize_target(&t, &cfg.target)?;
    } else {
        t.require_column(&cfg.target)?;
    }
    if !cfg.drop_columns.is_empty() {
        t = t.drop_columns(&cfg.drop_columns)?;
    }
    stages.push(count("prepared", t.n_rows(), t.n_cols()));
    Ok(Prepared { table: t, stages })
}

pub fn load_and_prepare(cfg: &RunConfig, cache_dir: Option<&Path>) -> StageResult<Prepared> {
    let path = resolve_dataset(cfg, cache_dir)?;
    log::info!("loading {}", path.display());
    let raw = ingest::load_csv(&path, cfg.separator).at(Stage::Ingest)?;
    let prepared = prepare(&raw, cfg).at(Stage::Ingest)?;
    for s in &prepared.stages {
        log::info!("{:<16} {:>6} rows {:>4} columns", s.stage, s.rows, s.columns);
    }
    Ok(prepared)
}

fn table_digest(t: &FrameTable) -> String {
    let mut h = Sha256::new();
    for n in t.column_names() {
        h.update(n.as_bytes());
        h.update([0]);
    }
    for v in t.data() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Bank cache file for one round: keyed by the bank-relevant config keys
/// and the exact table the round trains on.
pub fn bank_cache_path(cache_dir: &Path, cfg: &RunConfig, input: &FrameTable) -> PathBuf {
    let mut h = Sha256::new();
    h.update(cfg.bank_hash().as_bytes());
    h.update(table_digest(input).as_bytes());
    cache_dir
        .join("banks")
        .join(format!("{}.bin", hex::encode(h.finalize())))
}

fn cached_banks(
    cfg: &RunConfig,
    cache_dir: Option<&Path>,
    table: &FrameTable,
) -> crate::Result<Vec<AttributeModelBank>> {
    let Some(dir) = cache_dir else {
        return train_banks(table, &cfg.augment);
    };
    let path = bank_cache_path(dir, cfg, table);
    if path.is_file() {
        match read_banks(&path) {
            Ok(b) => {
                log::info!("reusing cached banks {}", path.display());
                return Ok(b);
            }
            Err(e) => log::warn!("ignoring unreadable bank cache {}: {e}", path.display()),
        }
    }
    let banks = train_banks(table, &cfg.augment)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let partial = path.with_extension("partial");
    write_banks(&partial, &banks)?;
    std::fs::rename(&partial, &path).map_err(|e| Error::io(&path, e))?;
    Ok(banks)
}

pub fn augment_prepared(
    cfg: &RunConfig,
    table: &FrameTable,
    cache_dir: Option<&Path>,
) -> StageResult<RoundsOutcome> {
    iterate_rounds_with(table, &cfg.augment, |round, t| {
        log::info!(
            "round {round}: training banks on {} rows x {} columns",
            t.n_rows(),
            t.n_cols()
        );
        cached_banks(cfg, cache_dir, t)
    })
    .map_err(augment_stage)
}

pub fn bank_summaries(outcome: &RoundsOutcome) -> Vec<BankSummary> {
    let mut out = Vec::new();
    for (r, banks) in outcome.banks.iter().enumerate() {
        for b in banks {
            out.push(BankSummary {
                round: r + 1,
                target: b.target.to_string(),
                models: b.len(),
                attributes: b
                    .attributes
                    .iter()
                    .zip(&b.fitness)
                    .map(|(a, f)| AttributeFitness {
                        attribute: a.clone(),
                        r_squared: f.r_squared,
                        tss: f.tss,
                        rss: f.rss,
                    })
                    .collect(),
            });
        }
    }
    out
}

/// Wall-clock timings; kept out of the report so reports stay comparable.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub threads: usize,
    pub ingest_seconds: f64,
    pub augment_seconds: f64,
    pub eval_seconds: f64,
    pub total_seconds: f64,
    pub tool_version: String,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: ComparisonReport,
    pub augmented: FrameTable,
    pub meta: RunMeta,
}

/// Runs every stage in memory.
pub fn execute(cfg: &RunConfig, cache_dir: Option<&Path>) -> StageResult<RunOutput> {
    let start = Instant::now();
    let prepared = load_and_prepare(cfg, cache_dir)?;
    let ingest_seconds = start.elapsed().as_secs_f64();

    let t = Instant::now();
    let outcome = augment_prepared(cfg, &prepared.table, cache_dir)?;
    let augment_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    log::info!(
        "cross-validating on {} and {} columns",
        prepared.table.n_cols(),
        outcome.table.n_cols()
    );
    let mut report =
        compare(&prepared.table, &outcome.table, &cfg.target, &cfg.eval).at(Stage::Eval)?;
    let eval_seconds = t.elapsed().as_secs_f64();

    report.config_hash = cfg.hash();
    report.config = cfg.entries();
    report.stages = prepared.stages;
    report.rounds = outcome.rounds.clone();
    report.banks = bank_summaries(&outcome);
    let mut warnings = outcome.warnings.clone();
    warnings.append(&mut report.warnings);
    report.warnings = warnings;

    let meta = RunMeta {
        config_hash: report.config_hash.clone(),
        threads: rayon::current_num_threads(),
        ingest_seconds,
        augment_seconds,
        eval_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(RunOutput {
        report,
        augmented: outcome.table,
        meta,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> StageResult<()> {
    std::fs::write(path, bytes)
        .map_err(|e| Error::io(path, e))
        .at(Stage::Output)
}

fn prepare_out_dir(dir: &Path) -> StageResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(dir, e))
        .at(Stage::Output)
}

/// Full run; writes `report.json`, `report.txt`, `config.cfg`, `meta.json`
/// and, when enabled, `augmented.csv`.
pub fn run(cfg: &RunConfig, paths: &RunPaths) -> StageResult<RunOutput> {
    prepare_out_dir(&paths.out_dir)?;
    let out = execute(cfg, paths.cache_dir.as_deref())?;
    let dir = &paths.out_dir;
    write_file(&dir.join("report.json"), out.report.to_json().as_bytes())?;
    let mut text = out.report.to_text();
    text.push_str(&format!(
        "\ntiming: ingest {:.1}s, augment {:.1}s, eval {:.1}s, total {:.1}s on {} threads\n",
        out.meta.ingest_seconds,
        out.meta.augment_seconds,
        out.meta.eval_seconds,
        out.meta.total_seconds,
        out.meta.threads
    ));
    write_file(&dir.join("report.txt"), text.as_bytes())?;
    write_file(&dir.join("config.cfg"), cfg.echo().as_bytes())?;
    let meta = serde_json::to_string_pretty(&out.meta).expect("meta serializes") + "\n";
    write_file(&dir.join("meta.json"), meta.as_bytes())?;
    if cfg.emit_augmented {
        out.augmented
            .write_csv_file(&dir.join("augmented.csv"))
            .at(Stage::Output)?;
    }
    Ok(out)
}

/// Preprocess and augment only; writes `augmented.csv` and `config.cfg`.
pub fn augment_only(cfg: &RunConfig, paths: &RunPaths) -> StageResult<RoundsOutcome> {
    prepare_out_dir(&paths.out_dir)?;
    let prepared = load_and_prepare(cfg, paths.cache_dir.as_deref())?;
    let outcome = augment_prepared(cfg, &prepared.table, paths.cache_dir.as_deref())?;
    outcome
        .table
        .write_csv_file(&paths.out_dir.join("augmented.csv"))
        .at(Stage::Output)?;
    write_file(&paths.out_dir.join("config.cfg"), cfg.echo().as_bytes())?;
    Ok(outcome)
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> StageResult<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
        .at(Stage::Config)?;
    Ok(pool.install(f))
}
