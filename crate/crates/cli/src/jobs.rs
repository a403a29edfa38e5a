//! Resolved commands and their execution into an output directory.

use std::path::{Path, PathBuf};

use lowrank_isomap::eval::{energy_fraction, scaling_benchmark, sweep, SweepParam};
use lowrank_isomap::pipeline::write_spectrum_csv;
use lowrank_isomap::{load_matrix, loocv_flda_accuracy, Dataset, MatrixFormat, PipelineConfig, Registry};
use serde::{Deserialize, Serialize};

use crate::input::{read_labels, write_labels, Checksum, GenSpec, InputSpec};
use crate::Failure;

/// Everything a command needs besides the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Job {
    Embed {
        input: InputSpec,
    },
    Eval {
        run_dir: PathBuf,
        json: bool,
    },
    Sweep {
        input: InputSpec,
        param: String,
        values: Vec<usize>,
        variants: Vec<String>,
        seeds: Vec<u64>,
    },
    Spectrum {
        input: InputSpec,
        lrr: bool,
    },
    Bench {
        recipe: String,
        sizes: Vec<usize>,
        variants: Vec<String>,
        repeats: usize,
    },
}

impl Job {
    pub fn command(&self) -> &'static str {
        match self {
            Job::Embed { .. } => "embed",
            Job::Eval { .. } => "eval",
            Job::Sweep { .. } => "sweep",
            Job::Spectrum { .. } => "spectrum",
            Job::Bench { .. } => "bench",
        }
    }
}

fn verify(sum: Checksum, expect: Option<&str>) -> Result<String, Failure> {
    let hex = sum.hex();
    match expect {
        Some(e) if e != hex => Err(Failure::Runtime(format!(
            "input checksum {hex} does not match the manifest ({e})"
        ))),
        _ => Ok(hex),
    }
}

fn load_checked(input: &InputSpec, expect: Option<&str>) -> Result<(Dataset, String), Failure> {
    let data = input.load()?;
    let mut sum = Checksum::default();
    sum.dataset(&data);
    Ok((data, verify(sum, expect)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Runs `job` writing into `out`; returns the input checksum.
pub fn execute(job: &Job, cfg: Option<&PipelineConfig>, out: &Path, expect: Option<&str>) -> Result<String, Failure> {
    let need_cfg = || cfg.ok_or_else(|| Failure::Usage(format!("`{}` needs a pipeline config", job.command())));
    match job {
        Job::Embed { input } => {
            let cfg = need_cfg()?;
            let registry = Registry::default();
            registry.get(&cfg.variant)?;
            let (data, sum) = load_checked(input, expect)?;
            let result = registry.get(&cfg.variant)?.run(&data, cfg)?;
            result.write_dir(out)?;
            if let Some(labels) = data.labels() {
                write_labels(&out.join("labels.csv"), labels)?;
            }
            println!(
                "{}: {}x{} embedding of `{}` written to {}",
                cfg.variant,
                result.embedding.nrows(),
                result.embedding.ncols(),
                data.name,
                out.display()
            );
            Ok(sum)
        }
        Job::Eval { run_dir, json } => {
            let emb_path = run_dir.join("embedding.csv");
            let labels_path = run_dir.join("labels.csv");
            if !labels_path.is_file() {
                return Err(Failure::Runtime(format!(
                    "{} has no labels.csv; evaluation needs a labelled dataset",
                    run_dir.display()
                )));
            }
            let mut sum = Checksum::default();
            sum.file(&emb_path)?;
            sum.file(&labels_path)?;
            let sum = verify(sum, expect)?;
            let embedding = load_matrix(&emb_path, MatrixFormat::Csv)?;
            let labels = read_labels(&labels_path)?;
            let report = loocv_flda_accuracy(embedding.samples(), &labels)?;
            write_json(&out.join("eval.json"), &report)?;
            if *json {
                println!("{}", serde_json::to_string(&report).map_err(|e| Failure::Runtime(e.to_string()))?);
            } else {
                println!("accuracy {:.6} ({}/{})", report.accuracy, report.n_correct, report.n_total);
                for (c, (a, n)) in report.per_class_accuracy.iter().zip(&report.per_class_total).enumerate() {
                    println!("  class {c}: {a:.4} of {n}");
                }
            }
            Ok(sum)
        }
        Job::Sweep { input, param, values, variants, seeds } => {
            let cfg = need_cfg()?;
            let param: SweepParam = param.parse()?;
            if values.is_empty() || variants.is_empty() || seeds.is_empty() {
                return Err(Failure::Usage("sweep grid is empty".into()));
            }
            let registry = Registry::default();
            for v in variants {
                registry.get(v)?;
            }
            let (data, sum) = load_checked(input, expect)?;
            let table = sweep(&data, variants, param, values, seeds, cfg)?;
            table.write_csv(out.join("sweep.csv"), false)?;
            for v in variants {
                for &s in seeds {
                    match table.best(v, s) {
                        Some(a) => println!("{v} seed {s}: best accuracy {a:.4}"),
                        None => println!("{v} seed {s}: no successful run"),
                    }
                }
            }
            Ok(sum)
        }
        Job::Spectrum { input, lrr } => {
            let cfg = need_cfg()?;
            let (data, sum) = load_checked(input, expect)?;
            let result = Registry::default().get(&cfg.variant)?.run(&data, cfg)?;
            let before = result
                .spectrum_before
                .ok_or_else(|| Failure::Runtime(format!("variant `{}` reports no spectrum", cfg.variant)))?;
            write_spectrum_csv(out.join("spectrum_before.csv"), &before)?;
            println!("top-5 energy without low-rank projection: {:.6}", energy_fraction(&before, 5));
            if *lrr {
                let after = result
                    .spectrum_after
                    .ok_or_else(|| Failure::Runtime(format!("variant `{}` reports no projected spectrum", cfg.variant)))?;
                write_spectrum_csv(out.join("spectrum_after.csv"), &after)?;
                println!("top-5 energy with low-rank projection:    {:.6}", energy_fraction(&after, 5));
            }
            Ok(sum)
        }
        Job::Bench { recipe, sizes, variants, repeats } => {
            let cfg = need_cfg()?;
            if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
                return Err(Failure::Usage("--sizes must be a non-empty, strictly ascending list of positive sizes".into()));
            }
            if *repeats == 0 {
                return Err(Failure::Usage("--repeats must be at least 1".into()));
            }
            let spec = GenSpec::parse(recipe, cfg.seed)?
                .ok_or_else(|| Failure::Usage(format!("bench needs a generator recipe, got `{recipe}`")))?;
            let mut sum = Checksum::default();
            let mut datasets = Vec::with_capacity(sizes.len());
            for &n in sizes {
                let data = spec.with_size(n)?.generate()?;
                sum.dataset(&data);
                datasets.push((n, data));
            }
            let sum = verify(sum, expect)?;
            let lookup = |n: usize| {
                Ok(datasets.iter().find(|(m, _)| *m == n).map(|(_, d)| d.clone()).expect("size was generated"))
            };
            let table = scaling_benchmark(&lookup, sizes, variants, cfg, *repeats)?;
            table.write_csv(out.join("scaling.csv"))?;
            for v in variants {
                let ratios: Vec<String> = table.ratios(v, sizes).iter().map(|r| format!("{r:.2}")).collect();
                println!("{v}: doubling ratios [{}]", ratios.join(", "));
            }
            Ok(sum)
        }
    }
}
