//! End-to-end embedding pipelines selected by name at runtime.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_matrix_csv, Dataset};
use crate::error::{Error, Result};
use crate::graph::DEFAULT_K_NN;
use crate::landmarks::DEFAULT_KMEANS_MAX_ITER;
use crate::linalg::{ProjectionMatrix, ScatterPair, WithinForm};
use crate::lrr::{LrrConfig, LrrSolution};

mod variants;

pub use variants::{
    classic_isomap, extended_clustered_isomap, low_rank_isomap, random_landmark_isomap, Classic,
    ExtendedClustered, LowRank, RandomLandmark, CLASSIC_MAX_N,
};

/// Spectral norm the between-class scatter is scaled to before the low-rank solve.
///
/// The solver's thresholds are absolute, so raw scatter magnitudes (which grow
/// with N and with squared geodesic lengths) would otherwise decide whether any
/// low-rank structure is extracted at all.
pub const DEFAULT_LRR_TARGET_NORM: f64 = 100.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpace {
    /// Graph distances to the landmarks.
    #[default]
    Geodesic,
    /// The raw observations.
    Ambient,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterLabels {
    /// k-means assignments act as pseudo-classes.
    #[default]
    Clusters,
    TrueLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Registry name of the variant.
    pub variant: String,
    pub n_landmarks: usize,
    pub latent_dim: usize,
    pub k_nn: usize,
    pub feature_space: FeatureSpace,
    pub scatter_labels: ScatterLabels,
    pub within_form: WithinForm,
    pub kmeans_max_iter: usize,
    pub seed: u64,
    /// `None` feeds the between-class scatter to the solver unscaled.
    pub lrr_target_norm: Option<f64>,
    pub lrr: LrrConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            variant: "low-rank".into(),
            n_landmarks: 20,
            latent_dim: 2,
            k_nn: DEFAULT_K_NN,
            feature_space: FeatureSpace::default(),
            scatter_labels: ScatterLabels::default(),
            within_form: WithinForm::default(),
            kmeans_max_iter: DEFAULT_KMEANS_MAX_ITER,
            seed: 0,
            lrr_target_norm: Some(DEFAULT_LRR_TARGET_NORM),
            lrr: LrrConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub(crate) fn check_common(&self, data: &Dataset) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::arg("latent_dim must be at least 1"));
        }
        if self.k_nn == 0 || self.k_nn >= data.n_samples() {
            return Err(Error::arg(format!("k_nn must lie in [1, N); got {} with N = {}", self.k_nn, data.n_samples())));
        }
        if let Some(t) = self.lrr_target_norm {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::arg("lrr_target_norm must be positive"));
            }
        }
        self.lrr.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Wall-clock seconds per stage, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<StageTiming>,
    pub total_seconds: f64,
}

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn get(&self, stage: &str) -> Option<f64> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| s.seconds)
    }

    pub fn stage_sum(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// `N × latent_dim`
    pub embedding: DMatrix<f64>,
    /// Present for the discriminant variants.
    pub projection: Option<ProjectionMatrix>,
    /// Normalized generalized eigenvalues of `(S_B, S_W)`.
    pub spectrum_before: Option<Vec<f64>>,
    /// Same for the low-rank surrogate of `S_B`.
    pub spectrum_after: Option<Vec<f64>>,
    pub lrr_solution: Option<LrrSolution>,
    /// Factor the between-class scatter was multiplied by before the low-rank solve.
    pub lrr_scale: Option<f64>,
    /// `sym(S_B·Z)`
    pub low_rank_sb: Option<DMatrix<f64>>,
    pub scatter: Option<ScatterPair>,
    pub landmark_indices: Vec<usize>,
    pub assignments: Option<Vec<usize>>,
    /// Landmark-to-all graph distances (`n_landmarks × N`).
    pub landmark_distances: Option<DMatrix<f64>>,
    pub n_bridges: usize,
    /// Clamped negative Gram eigenvalue mass, for the MDS variants.
    pub mds_negative_mass: Option<f64>,
    pub timings: Timings,
    pub config: PipelineConfig,
}

impl PipelineResult {
    pub(crate) fn new(embedding: DMatrix<f64>, config: PipelineConfig) -> Self {
        Self {
            embedding,
            projection: None,
            spectrum_before: None,
            spectrum_after: None,
            lrr_solution: None,
            lrr_scale: None,
            low_rank_sb: None,
            scatter: None,
            landmark_indices: Vec::new(),
            assignments: None,
            landmark_distances: None,
            n_bridges: 0,
            mds_negative_mass: None,
            timings: Timings::default(),
            config,
        }
    }

    /// Writes `embedding.csv`, `spectrum_before.csv`, `spectrum_after.csv`,
    /// `timings.json`, `config.json` and, when the solver ran, `lrr_trace.csv`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header: Vec<String> = (0..self.embedding.ncols()).map(|j| format!("y{j}")).collect();
        write_matrix_csv(dir.join("embedding.csv"), &header, &self.embedding)?;
        if let Some(s) = &self.spectrum_before {
            write_spectrum_csv(dir.join("spectrum_before.csv"), s)?;
        }
        if let Some(s) = &self.spectrum_after {
            write_spectrum_csv(dir.join("spectrum_after.csv"), s)?;
        }
        if let Some(sol) = &self.lrr_solution {
            sol.write_trace_csv(dir.join("lrr_trace.csv"))?;
        }
        write_json(dir.join("timings.json"), &self.timings)?;
        write_json(dir.join("config.json"), &self.config)
    }
}

/// One-column csv with header `value`.
pub fn write_spectrum_csv(path: impl AsRef<Path>, spectrum: &[f64]) -> Result<()> {
    let m = DMatrix::from_column_slice(spectrum.len(), 1, spectrum);
    write_matrix_csv(path, &["value".to_string()], &m)
}

pub(crate) fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// An embedding algorithm that can be selected by name.
pub trait IsomapVariant: Send + Sync {
    /// Canonical registry name.
    fn name(&self) -> &'static str;

    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }

    fn summary(&self) -> &'static str;

    fn run(&self, data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult>;
}

/// Name-indexed set of variants.
pub struct Registry {
    variants: Vec<Box<dyn IsomapVariant>>,
}

fn normalize_name(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('_', "-")
}

impl Registry {
    pub fn empty() -> Self {
        Self { variants: Vec::new() }
    }

    /// Registers `variant`; a clash on any name or alias is an error.
    pub fn register(&mut self, variant: Box<dyn IsomapVariant>) -> Result<()> {
        let names: Vec<String> = std::iter::once(variant.name())
            .chain(variant.aliases().iter().copied())
            .map(normalize_name)
            .collect();
        if let Some(clash) = names.iter().find(|n| self.lookup(n).is_some()) {
            return Err(Error::arg(format!("variant name `{clash}` is already registered")));
        }
        self.variants.push(variant);
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<&dyn IsomapVariant> {
        let key = normalize_name(name);
        self.variants
            .iter()
            .find(|v| normalize_name(v.name()) == key || v.aliases().iter().any(|a| normalize_name(a) == key))
            .map(|v| v.as_ref())
    }

    pub fn get(&self, name: &str) -> Result<&dyn IsomapVariant> {
        self.lookup(name).ok_or_else(|| {
            Error::arg(format!("unknown variant `{name}`; expected one of: {}", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.variants.iter().map(|v| v.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn IsomapVariant> {
        self.variants.iter().map(|v| v.as_ref())
    }
}

impl Default for Registry {
    /// The four built-in variants.
    fn default() -> Self {
        let mut r = Self::empty();
        for v in [
            Box::new(LowRank) as Box<dyn IsomapVariant>,
            Box::new(ExtendedClustered),
            Box::new(RandomLandmark),
            Box::new(Classic),
        ] {
            r.register(v).expect("built-in names are distinct");
        }
        r
    }
}

/// Runs the variant named in `cfg.variant` from the default registry.
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    Registry::default().get(&cfg.variant)?.run(data, cfg)
}
