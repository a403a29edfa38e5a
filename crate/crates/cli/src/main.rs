//! `lrisomap`: file-backed, reproducible runs of the embedding pipelines.

mod config;
mod input;
mod jobs;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lowrank_isomap::{PipelineConfig, Registry};

use crate::input::InputSpec;
use crate::jobs::{execute, Job};
use crate::manifest::{now, RunManifest};

/// Exit status 2 for usage errors, 1 for everything else.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<lowrank_isomap::Error> for Failure {
    fn from(e: lowrank_isomap::Error) -> Self {
        match e {
            lowrank_isomap::Error::Argument(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "lrisomap", version, about = "Landmark Isomap embeddings with an optional low-rank Fisher stage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Dataset path (csv, idx, image directory) or generator spec such as `blobs` or `swiss:n=800,noise=0.05`.
    #[arg(long)]
    input: String,
    /// csv, idx or image-dir; inferred when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Label file (csv or idx) for inputs that carry none.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct Settings {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set lrr.beta=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    landmarks: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    k_nn: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Settings {
    fn resolve(&self) -> Result<PipelineConfig, Failure> {
        let file = match &self.config {
            Some(p) => config::read_kv_file(p)?,
            None => Vec::new(),
        };
        let mut cli = Vec::new();
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
            cli.push((k.to_string(), v.to_string()));
        }
        let flags = [
            ("variant", self.variant.clone()),
            ("n_landmarks", self.landmarks.map(|v| v.to_string())),
            ("latent_dim", self.dim.map(|v| v.to_string())),
            ("k_nn", self.k_nn.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        cli.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        let mut cfg = config::resolve(&[&file, &cli])?;
        if cfg.latent_dim == 0 {
            return Err(Failure::Usage("--dim must be at least 1".into()));
        }
        cfg.variant = Registry::default().get(&cfg.variant)?.name().to_string();
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Embed a dataset and write the result directory.
    Embed {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-out accuracy of an embedding written by `embed`.
    Eval {
        /// Directory written by `embed`.
        #[arg(long)]
        run: PathBuf,
        /// Defaults to `<run>/eval`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print only the JSON report.
        #[arg(long)]
        json: bool,
    },
    /// Accuracy over a grid of landmark counts or latent dimensions.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        settings: Settings,
        /// `landmarks` or `dim`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "low-rank,clustered")]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalised generalised eigenvalue spectra with and without the low-rank stage.
    Spectrum {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        settings: Settings,
        /// Skip the low-rank stage; only `spectrum_before.csv` is written.
        #[arg(long)]
        no_lrr: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stage timings over increasing dataset sizes.
    Bench {
        /// Generator recipe; its size parameter is replaced by each entry of `--sizes`.
        #[arg(long, default_value = "blobs:classes=4,dim=50")]
        recipe: String,
        #[command(flatten)]
        settings: Settings,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "low-rank,classic")]
        variants: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the registered variants.
    Variants,
}

fn resolve_input(source: &Source, cfg: &PipelineConfig) -> Result<InputSpec, Failure> {
    InputSpec::resolve(&source.input, source.format.as_deref(), source.labels.as_deref(), cfg.seed)
}

fn canonical_variants(names: Vec<String>) -> Result<Vec<String>, Failure> {
    let registry = Registry::default();
    names.iter().map(|n| Ok(registry.get(n)?.name().to_string())).collect()
}

fn create_out(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))
}

fn absolute(p: &Path) -> Result<PathBuf, Failure> {
    std::fs::canonicalize(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
}

fn run_job(
    job: Job,
    cfg: Option<PipelineConfig>,
    out: &Path,
    expect: Option<&str>,
    replayed_from: Option<String>,
) -> Result<(), Failure> {
    let started = now();
    create_out(out)?;
    let input_checksum = execute(&job, cfg.as_ref(), out, expect)?;
    RunManifest {
        command: job.command().to_string(),
        argv: std::env::args().collect(),
        seed: cfg.as_ref().map(|c| c.seed),
        config: cfg,
        job,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_checksum,
        started,
        finished: now(),
        replayed_from,
    }
    .write(out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Embed { source, settings, out } => {
            let cfg = settings.resolve()?;
            let input = resolve_input(&source, &cfg)?;
            run_job(Job::Embed { input }, Some(cfg), &out, None, None)
        }
        Command::Eval { run, out, json } => {
            let run_dir = absolute(&run)?;
            let out = out.unwrap_or_else(|| run_dir.join("eval"));
            run_job(Job::Eval { run_dir, json }, None, &out, None, None)
        }
        Command::Sweep { source, settings, param, values, variants, seeds, out } => {
            let cfg = settings.resolve()?;
            param.parse::<lowrank_isomap::eval::SweepParam>()?;
            let input = resolve_input(&source, &cfg)?;
            let variants = canonical_variants(variants)?;
            let job = Job::Sweep { input, param, values, variants, seeds };
            run_job(job, Some(cfg), &out, None, None)
        }
        Command::Spectrum { source, mut settings, no_lrr, out } => {
            if settings.variant.is_some() {
                return Err(Failure::Usage("spectrum picks its variant from --no-lrr".into()));
            }
            settings.variant = Some(if no_lrr { "extended-clustered" } else { "low-rank" }.to_string());
            let cfg = settings.resolve()?;
            let input = resolve_input(&source, &cfg)?;
            run_job(Job::Spectrum { input, lrr: !no_lrr }, Some(cfg), &out, None, None)
        }
        Command::Bench { recipe, settings, sizes, variants, repeats, out } => {
            let cfg = settings.resolve()?;
            let recipe = input::GenSpec::parse(&recipe, cfg.seed)?
                .ok_or_else(|| Failure::Usage(format!("bench needs a generator recipe, got `{recipe}`")))?
                .to_string();
            let variants = canonical_variants(variants)?;
            run_job(Job::Bench { recipe, sizes, variants, repeats }, Some(cfg), &out, None, None)
        }
        Command::Replay { manifest, out } => {
            let m = RunManifest::read(&manifest)?;
            let from = absolute(&manifest)?.display().to_string();
            run_job(m.job, m.config, &out, Some(&m.input_checksum), Some(from))
        }
        Command::Variants => {
            for v in Registry::default().iter() {
                let aliases = v.aliases().join(", ");
                println!("{:<20} {} (aliases: {aliases})", v.name(), v.summary());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("lrisomap: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("lrisomap: error: {msg}");
            ExitCode::from(1)
        }
    }
}
