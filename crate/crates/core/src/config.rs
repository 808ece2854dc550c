//! Run configuration: a flat `key = value` text file.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique.
//! Values run to the end of the line with surrounding whitespace trimmed;
//! there is no quoting. Unknown keys are rejected. The canonical echo
//! ([`RunConfig::echo`]) lists every resolved key in sorted order, so it
//! reproduces a run without depending on defaults.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::augment::{AugmentConfig, AuxLearner, BankMode, ResidualSource, Weighting};
use crate::error::{Error, Result};
use crate::eval::EvalSpec;
use crate::ingest::{BANK_ADDITIONAL_MEMBER, BANK_ADDITIONAL_URL};
use crate::learner::{MaxFeatures, Task};

/// How a regression target is prepared before augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionTarget {
    /// `value > min` becomes 1, everything else 0.
    Binarized,
    /// Standardized values are used as they are.
    Continuous,
}

/// Preset for residual arithmetic; individual keys can still override it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Faithful,
    Hygienic,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Faithful => "faithful",
            Profile::Hygienic => "hygienic",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(Profile::Faithful),
            "hygienic" => Ok(Profile::Hygienic),
            _ => Err(Error::Config(format!("mode must be faithful or hygienic, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: String,
    pub csv_member: String,
    pub separator: u8,
    pub sample_fraction: f64,
    pub sample_seed: u64,
    pub missing_sentinel: Option<String>,
    pub drop_columns: Vec<String>,
    pub standardize: bool,
    pub target: String,
    pub task: Task,
    pub regression_target: RegressionTarget,
    pub profile: Profile,
    pub augment: AugmentConfig,
    pub eval: EvalSpec,
    pub emit_augmented: bool,
}

const KEYS: &[&str] = &[
    "source",
    "csv_member",
    "separator",
    "sample_fraction",
    "sample_seed",
    "missing_sentinel",
    "drop_columns",
    "standardize",
    "target",
    "task",
    "regression_target",
    "augment.mode",
    "augment.banks",
    "augment.rounds",
    "augment.weighting",
    "augment.round_decimals",
    "augment.residual_source",
    "augment.oof_folds",
    "aux.n_trees",
    "aux.max_features",
    "aux.bootstrap",
    "aux.seed",
    "aux.test_fraction",
    "aux.split_seed",
    "eval.k",
    "eval.n_trees",
    "eval.max_features",
    "eval.bootstrap",
    "eval.seed",
    "eval.shuffle_folds",
    "emit_augmented",
];

/// Keys that only affect evaluation or output, not the trained banks.
fn affects_banks(key: &str) -> bool {
    !key.starts_with("eval.") && key != "emit_augmented"
}

/// Keys whose defaults depend on `augment.mode`.
pub const PROFILE_KEYS: &[&str] = &[
    "augment.weighting",
    "augment.round_decimals",
    "augment.residual_source",
];

/// Parses the flat text format into an ordered map.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected 'key = value'", n + 1)));
        };
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", n + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", n + 1)));
        }
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn parse_max_features(key: &str, v: &str) -> Result<MaxFeatures> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: expected all, sqrt or a count, got '{v}'")))
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_entries(&parse_entries(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_entries(m: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = m.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
        let get = |k: &str| m.get(k).map(String::as_str);
        let target = get("target")
            .ok_or_else(|| Error::Config("missing required key 'target'".into()))?
            .to_string();
        let task: Task = match get("task") {
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!("task must be classification or regression, got '{v}'"))
            })?,
            None => Task::Classification,
        };
        let separator = match get("separator").unwrap_or(";") {
            "\\t" | "tab" => b'\t',
            s if s.len() == 1 => s.as_bytes()[0],
            s => return Err(Error::Config(format!("separator must be one byte, got '{s}'"))),
        };
        let regression_target = match get("regression_target").unwrap_or("continuous") {
            "binarized" => RegressionTarget::Binarized,
            "continuous" => RegressionTarget::Continuous,
            v => {
                return Err(Error::Config(format!(
                    "regression_target must be binarized or continuous, got '{v}'"
                )))
            }
        };
        let profile: Profile = get("augment.mode").unwrap_or("faithful").parse()?;
        let banks = match get("augment.banks") {
            Some("per-class") => BankMode::PerClass,
            Some("single-bank") => BankMode::SingleBank,
            Some(v) => {
                return Err(Error::Config(format!(
                    "augment.banks must be per-class or single-bank, got '{v}'"
                )))
            }
            None => match task {
                Task::Classification => BankMode::PerClass,
                Task::Regression => BankMode::SingleBank,
            },
        };
        let mut augment = match profile {
            Profile::Faithful => AugmentConfig::faithful(target.clone(), banks),
            Profile::Hygienic => AugmentConfig::hygienic(target.clone(), banks),
        };
        if let Some(v) = get("augment.rounds") {
            augment.rounds = parse("augment.rounds", v)?;
        }
        if let Some(v) = get("augment.weighting") {
            augment.weighting = match v {
                "faithful" => Weighting::Faithful,
                "clamped" => Weighting::Clamped,
                _ => {
                    return Err(Error::Config(format!(
                        "augment.weighting must be faithful or clamped, got '{v}'"
                    )))
                }
            };
        }
        if let Some(v) = get("augment.round_decimals") {
            augment.round_decimals = match v {
                "none" => None,
                d => Some(parse("augment.round_decimals", d)?),
            };
        }
        if let Some(v) = get("augment.residual_source") {
            augment.residual_source = match v {
                "in-sample" => ResidualSource::InSample,
                "out-of-fold" => ResidualSource::OutOfFold,
                _ => {
                    return Err(Error::Config(format!(
                        "augment.residual_source must be in-sample or out-of-fold, got '{v}'"
                    )))
                }
            };
        }
        if let Some(v) = get("augment.oof_folds") {
            augment.oof_folds = parse("augment.oof_folds", v)?;
        }
        let aux = &mut augment.aux;
        let d = AuxLearner::default();
        aux.n_trees = get("aux.n_trees").map_or(Ok(d.n_trees), |v| parse("aux.n_trees", v))?;
        aux.max_features = get("aux.max_features")
            .map_or(Ok(d.max_features), |v| parse_max_features("aux.max_features", v))?;
        aux.bootstrap = get("aux.bootstrap").map_or(Ok(d.bootstrap), |v| parse_bool("aux.bootstrap", v))?;
        aux.seed = get("aux.seed").map_or(Ok(d.seed), |v| parse("aux.seed", v))?;
        aux.test_fraction =
            get("aux.test_fraction").map_or(Ok(d.test_fraction), |v| parse("aux.test_fraction", v))?;
        aux.split_seed = get("aux.split_seed").map_or(Ok(d.split_seed), |v| parse("aux.split_seed", v))?;

        let mut eval = EvalSpec::new(task);
        if let Some(v) = get("eval.k") {
            eval.k = parse("eval.k", v)?;
        }
        if let Some(v) = get("eval.n_trees") {
            eval.n_trees = parse("eval.n_trees", v)?;
        }
        if let Some(v) = get("eval.max_features") {
            eval.max_features = parse_max_features("eval.max_features", v)?;
        }
        if let Some(v) = get("eval.bootstrap") {
            eval.bootstrap = parse_bool("eval.bootstrap", v)?;
        }
        if let Some(v) = get("eval.seed") {
            eval.seed = parse("eval.seed", v)?;
        }
        if let Some(v) = get("eval.shuffle_folds") {
            eval.shuffle_folds = parse_bool("eval.shuffle_folds", v)?;
        }

        let cfg = RunConfig {
            source: get("source").unwrap_or(BANK_ADDITIONAL_URL).to_string(),
            csv_member: get("csv_member").unwrap_or(BANK_ADDITIONAL_MEMBER).to_string(),
            separator,
            sample_fraction: get("sample_fraction").map_or(Ok(1.0), |v| parse("sample_fraction", v))?,
            sample_seed: get("sample_seed").map_or(Ok(42), |v| parse("sample_seed", v))?,
            missing_sentinel: get("missing_sentinel")
                .filter(|v| !v.is_empty() && *v != "none")
                .map(str::to_string),
            drop_columns: get("drop_columns")
                .map(|v| {
                    v.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                })
                .unwrap_or_default(),
            standardize: get("standardize").map_or(Ok(true), |v| parse_bool("standardize", v))?,
            target,
            task,
            regression_target,
            profile,
            augment,
            eval,
            emit_augmented: get("emit_augmented").map_or(Ok(false), |v| parse_bool("emit_augmented", v))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "sample_fraction must be in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        if self.task == Task::Regression && self.augment.mode == BankMode::PerClass
            && self.regression_target == RegressionTarget::Continuous
        {
            return Err(Error::Config(
                "per-class banks need a binary target; use single-bank or regression_target = binarized".into(),
            ));
        }
        if self.eval.k < 2 {
            return Err(Error::Config(format!("eval.k must be at least 2, got {}", self.eval.k)));
        }
        if self.eval.n_trees == 0 {
            return Err(Error::Config("eval.n_trees must be positive".into()));
        }
        if self.drop_columns.contains(&self.target) {
            return Err(Error::Config(format!("target '{}' is also listed in drop_columns", self.target)));
        }
        self.augment.validate()
    }

    /// True when the target goes through `value > min` binarization.
    pub fn binarizes_target(&self) -> bool {
        self.task == Task::Classification || self.regression_target == RegressionTarget::Binarized
    }

    /// Every key with its resolved value.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let a = &self.augment;
        let sep = match self.separator {
            b'\t' => "tab".to_string(),
            s => (s as char).to_string(),
        };
        let pairs: Vec<(&str, String)> = vec![
            ("source", self.source.clone()),
            ("csv_member", self.csv_member.clone()),
            ("separator", sep),
            ("sample_fraction", self.sample_fraction.to_string()),
            ("sample_seed", self.sample_seed.to_string()),
            ("missing_sentinel", self.missing_sentinel.clone().unwrap_or_else(|| "none".into())),
            ("drop_columns", self.drop_columns.join(",")),
            ("standardize", self.standardize.to_string()),
            ("target", self.target.clone()),
            ("task", self.task.as_str().to_string()),
            (
                "regression_target",
                match self.regression_target {
                    RegressionTarget::Binarized => "binarized",
                    RegressionTarget::Continuous => "continuous",
                }
                .into(),
            ),
            ("augment.mode", self.profile.as_str().into()),
            (
                "augment.banks",
                match a.mode {
                    BankMode::PerClass => "per-class",
                    BankMode::SingleBank => "single-bank",
                }
                .into(),
            ),
            ("augment.rounds", a.rounds.to_string()),
            (
                "augment.weighting",
                match a.weighting {
                    Weighting::Faithful => "faithful",
                    Weighting::Clamped => "clamped",
                }
                .into(),
            ),
            (
                "augment.round_decimals",
                a.round_decimals.map_or("none".into(), |d| d.to_string()),
            ),
            (
                "augment.residual_source",
                match a.residual_source {
                    ResidualSource::InSample => "in-sample",
                    ResidualSource::OutOfFold => "out-of-fold",
                }
                .into(),
            ),
            ("augment.oof_folds", a.oof_folds.to_string()),
            ("aux.n_trees", a.aux.n_trees.to_string()),
            ("aux.max_features", a.aux.max_features.to_string()),
            ("aux.bootstrap", a.aux.bootstrap.to_string()),
            ("aux.seed", a.aux.seed.to_string()),
            ("aux.test_fraction", a.aux.test_fraction.to_string()),
            ("aux.split_seed", a.aux.split_seed.to_string()),
            ("eval.k", self.eval.k.to_string()),
            ("eval.n_trees", self.eval.n_trees.to_string()),
            ("eval.max_features", self.eval.max_features.to_string()),
            ("eval.bootstrap", self.eval.bootstrap.to_string()),
            ("eval.seed", self.eval.seed.to_string()),
            ("eval.shuffle_folds", self.eval.shuffle_folds.to_string()),
            ("emit_augmented", self.emit_augmented.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn echo(&self) -> String {
        let mut s = String::from("# resolved run configuration\n");
        for (k, v) in self.entries() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// sha256 over the canonical echo.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.echo().as_bytes()))
    }

    /// sha256 over the keys that determine the trained banks.
    pub fn bank_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries().iter().filter(|(k, _)| affects_banks(k)) {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        hex::encode(h.finalize())
    }
}
