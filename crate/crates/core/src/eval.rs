//! Classification accuracy, spectra, parameter sweeps and runtime scaling.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{normalized_spectrum, partial_gevd, scatter_matrices, symmetrize, ScatterPair};
use crate::lrr::LrrSolution;
use crate::pipeline::{PipelineConfig, Registry};

pub use crate::linalg::{effective_rank, energy_fraction, EFFECTIVE_RANK_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    pub per_class_accuracy: Vec<f64>,
    pub per_class_total: Vec<usize>,
    pub wall_clock_s: f64,
}

fn class_counts(labels: &[usize]) -> Vec<usize> {
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0; c];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Leave-one-out accuracy of a Fisher discriminant classifier on fixed latent
/// coordinates. Each fold projects onto `min(C − 1, m)` discriminants fitted
/// on the other rows and assigns the held-out row to the nearest class mean.
pub fn loocv_flda_accuracy(latent: &DMatrix<f64>, labels: &[usize]) -> Result<EvalReport> {
    let start = Instant::now();
    let (n, m) = latent.shape();
    if labels.len() != n {
        return Err(Error::arg(format!("{} labels for {n} rows", labels.len())));
    }
    if n < 3 {
        return Err(Error::arg("leave-one-out needs at least 3 rows"));
    }
    if m == 0 {
        return Err(Error::arg("latent matrix has no columns"));
    }
    let counts = class_counts(labels);
    if counts.len() < 2 {
        return Err(Error::arg("leave-one-out classification needs at least two classes"));
    }
    if let Some((c, &k)) = counts.iter().enumerate().find(|(_, &k)| k < 2) {
        return Err(Error::arg(format!("class {c} has {k} member(s); every class needs at least 2")));
    }
    let n_disc = (counts.len() - 1).min(m);

    let mut correct = vec![0usize; counts.len()];
    let mut fold_labels = Vec::with_capacity(n - 1);
    for i in 0..n {
        let rows = latent.clone().remove_row(i);
        fold_labels.clear();
        fold_labels.extend(labels.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &l)| l));
        let pair = scatter_matrices(&rows, &fold_labels)?;
        let w = partial_gevd(&pair.s_b, &pair.s_w, n_disc)?;
        let means = &pair.class_means * &w.columns;
        let y = latent.row(i) * &w.columns;
        let mut best = (f64::INFINITY, 0);
        for c in 0..means.nrows() {
            let d = (means.row(c) - &y).norm_squared();
            if d < best.0 {
                best = (d, c);
            }
        }
        if best.1 == labels[i] {
            correct[labels[i]] += 1;
        }
    }
    let n_correct = correct.iter().sum();
    Ok(EvalReport {
        accuracy: n_correct as f64 / n as f64,
        n_correct,
        n_total: n,
        per_class_accuracy: correct.iter().zip(&counts).map(|(&c, &k)| c as f64 / k as f64).collect(),
        per_class_total: counts,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub before: Vec<f64>,
    pub after: Option<Vec<f64>>,
}

/// Normalized generalized eigenvalues of `(S_B, S_W)` and, given a solution
/// `Z`, of `(sym(S_B·Z), S_W)`.
pub fn spectrum_report(pair: &ScatterPair, lrr: Option<&LrrSolution>) -> Result<SpectrumReport> {
    let f = pair.feature_dim;
    let before = normalized_spectrum(&partial_gevd(&pair.s_b, &pair.s_w, f)?.eigenvalues);
    let after = match lrr {
        Some(sol) => {
            if sol.z.nrows() != f {
                return Err(Error::arg("coefficient matrix does not match the scatter dimension"));
            }
            let l_b = symmetrize(&(&pair.s_b * &sol.z));
            Some(normalized_spectrum(&partial_gevd(&l_b, &pair.s_w, f)?.eigenvalues))
        }
        None => None,
    };
    Ok(SpectrumReport { before, after })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Landmarks,
    LatentDim,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Landmarks => "landmarks",
            SweepParam::LatentDim => "dim",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "landmarks" | "n_landmarks" => Ok(SweepParam::Landmarks),
            "dim" | "latent_dim" => Ok(SweepParam::LatentDim),
            other => Err(Error::arg(format!("unknown sweep parameter `{other}` (landmarks, dim)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub param: String,
    pub value: usize,
    pub seed: u64,
    pub n_landmarks: usize,
    pub latent_dim: usize,
    pub accuracy: Option<f64>,
    pub wall_clock_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const HEADER: [&'static str; 9] = [
        "variant",
        "param",
        "value",
        "seed",
        "n_landmarks",
        "latent_dim",
        "accuracy",
        "wall_clock_s",
        "error",
    ];

    /// Best accuracy of `variant` for one seed across the swept values.
    pub fn best(&self, variant: &str, seed: u64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.variant == variant && r.seed == seed)
            .filter_map(|r| r.accuracy)
            .reduce(f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, with_timing: bool) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::format(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(Self::HEADER).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.variant.clone(),
                r.param.clone(),
                r.value.to_string(),
                r.seed.to_string(),
                r.n_landmarks.to_string(),
                r.latent_dim.to_string(),
                r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
                if with_timing { r.wall_clock_s.to_string() } else { String::new() },
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs every variant at every grid value and seed, scoring each embedding by
/// [`loocv_flda_accuracy`] against the dataset labels. Rows follow
/// (variant, value, seed) order; failing cells keep their error message.
pub fn sweep(
    data: &Dataset,
    variants: &[String],
    param: SweepParam,
    values: &[usize],
    seeds: &[u64],
    base: &PipelineConfig,
) -> Result<SweepTable> {
    if variants.is_empty() || values.is_empty() || seeds.is_empty() {
        return Err(Error::arg("sweep grid is empty"));
    }
    let labels = data
        .labels()
        .ok_or_else(|| Error::arg("sweeps score accuracy and need a labelled dataset"))?;
    let registry = Registry::default();
    let resolved = variants
        .iter()
        .map(|v| registry.get(v))
        .collect::<Result<Vec<_>>>()?;
    let mut table = SweepTable::default();
    for variant in resolved {
        for &value in values {
            for &seed in seeds {
                let mut cfg = PipelineConfig {
                    variant: variant.name().to_string(),
                    seed,
                    ..base.clone()
                };
                match param {
                    SweepParam::Landmarks => cfg.n_landmarks = value,
                    SweepParam::LatentDim => cfg.latent_dim = value,
                }
                let start = Instant::now();
                let outcome = variant
                    .run(data, &cfg)
                    .and_then(|r| loocv_flda_accuracy(&r.embedding, labels));
                let (accuracy, error) = match outcome {
                    Ok(rep) => (Some(rep.accuracy), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                table.rows.push(SweepRow {
                    variant: variant.name().to_string(),
                    param: param.name().to_string(),
                    value,
                    seed,
                    n_landmarks: cfg.n_landmarks,
                    latent_dim: cfg.latent_dim,
                    accuracy,
                    wall_clock_s: start.elapsed().as_secs_f64(),
                    error,
                });
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub variant: String,
    pub n: usize,
    pub stage: String,
    pub seconds: f64,
}

/// Long-format timing table; stage `total` holds the whole-pipeline time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn total(&self, variant: &str, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.n == n && r.stage == "total")
            .map(|r| r.seconds)
    }

    /// `t(sizes[i+1]) / t(sizes[i])` for consecutive sizes.
    pub fn ratios(&self, variant: &str, sizes: &[usize]) -> Vec<f64> {
        sizes
            .windows(2)
            .filter_map(|w| Some(self.total(variant, w[1])? / self.total(variant, w[0])?))
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::format(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["variant", "n", "stage", "seconds"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([r.variant.clone(), r.n.to_string(), r.stage.clone(), r.seconds.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Times each variant at each size. One warm-up run at the first size is
/// discarded; of `repeats` runs the one with the median total is reported.
pub fn scaling_benchmark(
    recipe: &dyn Fn(usize) -> Result<Dataset>,
    sizes: &[usize],
    variants: &[String],
    base: &PipelineConfig,
    repeats: usize,
) -> Result<ScalingTable> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("benchmark sizes must be non-empty and strictly ascending"));
    }
    if repeats == 0 {
        return Err(Error::arg("repeats must be at least 1"));
    }
    let registry = Registry::default();
    let mut table = ScalingTable::default();
    for name in variants {
        let variant = registry.get(name)?;
        let cfg = PipelineConfig {
            variant: variant.name().to_string(),
            ..base.clone()
        };
        variant.run(&recipe(sizes[0])?, &cfg)?;
        for &n in sizes {
            let data = recipe(n)?;
            let mut runs = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                runs.push(variant.run(&data, &cfg)?.timings);
            }
            runs.sort_by(|a, b| a.total_seconds.total_cmp(&b.total_seconds));
            let median = &runs[runs.len() / 2];
            for s in &median.stages {
                table.rows.push(ScalingRow {
                    variant: variant.name().to_string(),
                    n,
                    stage: s.stage.clone(),
                    seconds: s.seconds,
                });
            }
            table.rows.push(ScalingRow {
                variant: variant.name().to_string(),
                n,
                stage: "total".into(),
                seconds: median.total_seconds,
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_labeled_clusters;

    #[test]
    fn separable_one_dimensional() {
        let x = DMatrix::from_column_slice(4, 1, &[-1.0, -1.1, 1.0, 1.1]);
        let r = loocv_flda_accuracy(&x, &[0, 0, 1, 1]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.n_correct, 4);
        assert_eq!(r.per_class_total, vec![2, 2]);
    }

    #[test]
    fn rejects_singletons_and_one_class() {
        let x = DMatrix::from_column_slice(4, 1, &[-1.0, -1.1, 1.0, 1.1]);
        assert!(matches!(loocv_flda_accuracy(&x, &[0, 0, 0, 1]), Err(Error::Argument(_))));
        assert!(matches!(loocv_flda_accuracy(&x, &[0, 0, 0, 0]), Err(Error::Argument(_))));
    }

    #[test]
    fn sweep_cardinality_and_errors() {
        let data = gen_labeled_clusters(3, 10, 4, 8.0, 0).unwrap();
        let base = PipelineConfig::default();
        let t = sweep(
            &data,
            &["low-rank".into(), "clustered".into()],
            SweepParam::Landmarks,
            &[3, 4, 40],
            &[0, 1],
            &base,
        )
        .unwrap();
        assert_eq!(t.rows.len(), 12);
        assert!(t.rows.iter().filter(|r| r.value == 40).all(|r| r.error.is_some()));
        assert!(t.rows.iter().filter(|r| r.value != 40).all(|r| r.accuracy.is_some()));
        assert_eq!(t.rows[0].variant, "low-rank");
        assert_eq!(t.rows[11].variant, "extended-clustered");
        assert!(matches!(
            sweep(&data, &[], SweepParam::Landmarks, &[3], &[0], &base),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn benchmark_rejects_unsorted_sizes() {
        let recipe = |n: usize| gen_labeled_clusters(2, n / 2, 3, 5.0, 0);
        let r = scaling_benchmark(&recipe, &[40, 20], &["classic".into()], &PipelineConfig::default(), 1);
        assert!(matches!(r, Err(Error::Argument(_))));
    }
}
