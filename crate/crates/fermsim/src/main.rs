//! Command-line front end: load a plan (bundled name or JSON file), run
//! the requested section(s), and write CSV/JSON artifacts.

use clap::{Parser, Subcommand};
use fermsim::experiments::config::{bundled_config, ExperimentConfig};
use fermsim::experiments::runner::{
    run_echo_files, run_ensemble_files, run_experiment, run_scan_files, RunSummary,
};
use fermsim::experiments::ExperimentError;
use fermsim::fock::enumerate_sector;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "fermsim", version, about = "sector-resolved fermion lattice simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the model, sector, and basis summary for a config.
    ModelInfo { config: String },
    /// Run every section of a config (protocol, ensemble, echo, scan).
    Run {
        config: String,
        /// Output directory (default: config output_dir, then "out").
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the scan section (default: config, then 1).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run only the scan section.
    Scan {
        config: String,
        /// Override the number of repetitions.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run only the echo section.
    Echo {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run only the ensemble section.
    Ensemble {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(name_or_path: &str) -> Result<ExperimentConfig, ExperimentError> {
    if let Some(text) = bundled_config(name_or_path) {
        return ExperimentConfig::from_json(text);
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|e| {
        ExperimentError::Io(std::io::Error::new(
            e.kind(),
            format!("reading config {name_or_path}: {e}"),
        ))
    })?;
    ExperimentConfig::from_json(&text)
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn workers(flag: Option<usize>, cfg: &ExperimentConfig) -> usize {
    flag.or(cfg.workers).unwrap_or(1).max(1)
}

fn report(summary: &RunSummary) {
    for note in &summary.notes {
        println!("{note}");
    }
    for path in &summary.outputs {
        println!("wrote {}", path.display());
    }
}

fn report_files(files: &[PathBuf]) {
    for path in files {
        println!("wrote {}", path.display());
    }
}

fn ensure_dir(dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn model_info(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let model = cfg.model.build()?;
    let counts = cfg.sector_counts(&model)?;
    let basis = enumerate_sector(&model, &counts)?;
    println!("sites: {}", model.num_sites());
    println!("edges: {:?}", model.lattice.edges);
    for (s, spec) in model.species.iter().enumerate() {
        println!(
            "species {} ({}): count {}, hopping {}, sites {:?}",
            s,
            spec.label,
            counts[s],
            spec.hopping,
            model.accessible_sites(s),
        );
    }
    for inter in &model.interactions {
        println!(
            "interaction {}-{}: strength {}, sites {:?}",
            inter.species_pair.0, inter.species_pair.1, inter.strength, inter.sites
        );
    }
    println!("sector dimension: {}", basis.dim());
    println!("model hash: {}", model.canonical_hash());
    Ok(())
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::ModelInfo { config } => {
            let cfg = load_config(&config)?;
            model_info(&cfg)
        }
        Command::Run { config, out, workers: w } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(out, &cfg);
            let summary = run_experiment(&cfg, &dir, workers(w, &cfg))?;
            report(&summary);
            Ok(())
        }
        Command::Scan { config, n_max, out, workers: w } => {
            let cfg = load_config(&config)?;
            if cfg.scan.is_none() {
                return Err(ExperimentError::Config("config has no scan section".into()));
            }
            let dir = out_dir(out, &cfg);
            ensure_dir(&dir)?;
            let files = run_scan_files(&cfg, &dir, n_max, workers(w, &cfg))?;
            report_files(&files);
            Ok(())
        }
        Command::Echo { config, out } => {
            let cfg = load_config(&config)?;
            if cfg.echo.is_none() {
                return Err(ExperimentError::Config("config has no echo section".into()));
            }
            let dir = out_dir(out, &cfg);
            ensure_dir(&dir)?;
            let files = run_echo_files(&cfg, &dir)?;
            report_files(&files);
            Ok(())
        }
        Command::Ensemble { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(out, &cfg);
            ensure_dir(&dir)?;
            let (files, notes) = run_ensemble_files(&cfg, &dir)?;
            for note in &notes {
                println!("{note}");
            }
            report_files(&files);
            Ok(())
        }
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
