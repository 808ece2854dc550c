#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use resaug::config::RunConfig;
use resaug::pipeline;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn bundled_config(name: &str) -> RunConfig {
    RunConfig::from_file(&workspace_root().join("configs").join(name))
        .unwrap_or_else(|e| panic!("bundled config {name}: {e}"))
}

/// Locates the bank marketing CSV: `RESAUG_BANK_DATA` (csv or zip), then
/// the download cache (`RESAUG_CACHE_DIR`, default `target/resaug-cache`),
/// fetching into it if needed. The error explains what was tried.
pub fn bank_csv() -> Result<PathBuf, String> {
    let cfg = bundled_config("bank-classification.cfg");
    let cache = std::env::var_os("RESAUG_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("target/resaug-cache"));
    let mut cfg = cfg;
    if let Some(p) = std::env::var_os("RESAUG_BANK_DATA") {
        cfg.source = PathBuf::from(p).display().to_string();
    }
    pipeline::resolve_dataset(&cfg, Some(&cache)).map_err(|e| e.to_string())
}
