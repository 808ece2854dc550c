use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resaug::config::{parse_entries, RunConfig, PROFILE_KEYS};
use resaug::pipeline::{self, RunPaths, Stage, StageError};
use resaug::Error;

/// Residual feature augmentation runner.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download the configured dataset into the cache and print its path.
    Fetch(Common),
    /// Preprocess, augment, cross-validate and write reports.
    Run(Common),
    /// Preprocess and augment only; writes augmented.csv.
    Augment(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Directory for reports and outputs.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Dataset and model-bank cache.
    #[arg(long, env = "RESAUG_CACHE_DIR", default_value = ".resaug-cache")]
    cache_dir: PathBuf,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Residual arithmetic preset, overriding the config file.
    #[arg(long, value_parser = ["faithful", "hygienic"])]
    mode: Option<String>,
    /// Number of augmentation rounds, overriding the config file.
    #[arg(long)]
    rounds: Option<usize>,
    /// Also write augmented.csv on `run`.
    #[arg(long)]
    emit_augmented: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig, StageError> {
        let config_err = |source| StageError {
            stage: Stage::Config,
            source,
        };
        let text = std::fs::read_to_string(&self.config).map_err(|e| {
            config_err(Error::Config(format!("{}: {e}", self.config.display())))
        })?;
        let mut entries = parse_entries(&text).map_err(config_err)?;
        if let Some(mode) = &self.mode {
            // the preset decides these unless the file is overridden as a whole
            for k in PROFILE_KEYS {
                entries.remove(*k);
            }
            entries.insert("augment.mode".into(), mode.clone());
        }
        if let Some(r) = self.rounds {
            entries.insert("augment.rounds".into(), r.to_string());
        }
        if self.emit_augmented {
            entries.insert("emit_augmented".into(), "true".into());
        }
        RunConfig::from_entries(&entries).map_err(config_err)
    }

    fn paths(&self) -> RunPaths {
        RunPaths {
            out_dir: self.out_dir.clone(),
            cache_dir: Some(self.cache_dir.clone()),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), StageError> {
    match cli.command {
        Command::Fetch(c) => {
            let cfg = c.load()?;
            let path = pipeline::resolve_dataset(&cfg, Some(&c.cache_dir))?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Run(c) => {
            let cfg = c.load()?;
            let paths = c.paths();
            let out = pipeline::with_threads(c.threads, || pipeline::run(&cfg, &paths))??;
            let r = &out.report;
            match (r.baseline.f1, r.augmented.f1, r.baseline.rmse, r.augmented.rmse) {
                (Some(b), Some(a), _, _) => log::info!("f1 baseline {b:.5} augmented {a:.5}"),
                (_, _, Some(b), Some(a)) => log::info!("rmse baseline {b:.5} augmented {a:.5}"),
                _ => {}
            }
            log::info!("reports written to {}", paths.out_dir.display());
            Ok(())
        }
        Command::Augment(c) => {
            let cfg = c.load()?;
            let paths = c.paths();
            let outcome =
                pipeline::with_threads(c.threads, || pipeline::augment_only(&cfg, &paths))??;
            log::info!(
                "augmented table {} x {} written to {}",
                outcome.table.n_rows(),
                outcome.table.n_cols(),
                paths.out_dir.join("augmented.csv").display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
