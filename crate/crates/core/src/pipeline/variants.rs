use std::time::Instant;

use nalgebra::DMatrix;

use super::{FeatureSpace, IsomapVariant, PipelineConfig, PipelineResult, ScatterLabels, Timings};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, connect_components, full_geodesic_matrix, shortest_paths_from, GeodesicGraph};
use crate::landmarks::{canonical_order, kmeans, random_landmarks, ClusterModel};
use crate::linalg::{
    classical_mds, double_center, double_center_matrix, normalized_spectrum, partial_gevd, scatter_matrices_with,
    spectral_norm, symmetrize, ScatterPair,
};
use crate::lrr::lrr_solve;

/// Largest N accepted by [`classic_isomap`].
pub const CLASSIC_MAX_N: usize = 5000;

fn echo(cfg: &PipelineConfig, name: &str) -> PipelineConfig {
    PipelineConfig {
        variant: name.to_string(),
        ..cfg.clone()
    }
}

fn connected_graph(data: &Dataset, k_nn: usize) -> Result<GeodesicGraph> {
    let g = build_knn_graph(data, k_nn)?;
    connect_components(&g, data)
}

struct Upstream {
    model: ClusterModel,
    features: DMatrix<f64>,
    landmark_distances: Option<DMatrix<f64>>,
    scatter: ScatterPair,
    n_bridges: usize,
}

/// Stages shared by the two discriminant variants: landmarks, features, scatter.
fn clustered_upstream(data: &Dataset, cfg: &PipelineConfig, t: &mut Timings) -> Result<Upstream> {
    cfg.check_common(data)?;
    if cfg.n_landmarks < 2 || cfg.n_landmarks > data.n_samples() {
        return Err(Error::arg(format!(
            "n_landmarks must lie in [2, N]; got {} with N = {}",
            cfg.n_landmarks,
            data.n_samples()
        )));
    }
    let feature_dim = match cfg.feature_space {
        FeatureSpace::Geodesic => cfg.n_landmarks,
        FeatureSpace::Ambient => data.n_features(),
    };
    if cfg.latent_dim > feature_dim {
        return Err(Error::arg(format!(
            "latent_dim {} exceeds the feature dimension {feature_dim}",
            cfg.latent_dim
        )));
    }
    let labels = match cfg.scatter_labels {
        ScatterLabels::Clusters => None,
        ScatterLabels::TrueLabels => Some(
            data.labels()
                .ok_or_else(|| Error::arg("scatter_labels = true_labels needs a labelled dataset"))?
                .to_vec(),
        ),
    };

    let model = t.time("kmeans", || kmeans(data, cfg.n_landmarks, cfg.kmeans_max_iter, cfg.seed))?;
    let (features, landmark_distances, n_bridges) = match cfg.feature_space {
        FeatureSpace::Geodesic => {
            let graph = t.time("graph", || connected_graph(data, cfg.k_nn))?;
            let d = t.time("geodesic", || shortest_paths_from(&graph, &model.landmark_indices))?;
            (d.values.transpose(), Some(d.values), graph.bridges().len())
        }
        FeatureSpace::Ambient => (data.samples().clone(), None, 0),
    };
    let groups = labels.as_deref().unwrap_or(&model.assignments);
    let scatter = t.time("scatter", || scatter_matrices_with(&features, groups, cfg.within_form))?;
    Ok(Upstream {
        model,
        features,
        landmark_distances,
        scatter,
        n_bridges,
    })
}

fn finish_clustered(mut r: PipelineResult, up: Upstream) -> PipelineResult {
    r.landmark_indices = up.model.landmark_indices.clone();
    r.assignments = Some(up.model.assignments);
    r.landmark_distances = up.landmark_distances;
    r.n_bridges = up.n_bridges;
    r.scatter = Some(up.scatter);
    r
}

/// Clustered landmarks, geodesic features, a low-rank surrogate of `S_B` from
/// the self-expressive solver, then the top-m Fisher directions.
pub fn low_rank_isomap(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let start = Instant::now();
    let mut t = Timings::default();
    let up = clustered_upstream(data, cfg, &mut t)?;
    let s_b = &up.scatter.s_b;
    let s_w = &up.scatter.s_w;
    let f = up.scatter.feature_dim;

    let before = t.time("spectrum_before", || partial_gevd(s_b, s_w, f))?;
    let (solution, scale) = t.time("lrr", || {
        let scale = match cfg.lrr_target_norm {
            Some(target) => {
                let norm = spectral_norm(s_b, 1e-10);
                if norm == 0.0 {
                    return Err(Error::DegenerateInput("between-class scatter is zero".into()));
                }
                target / norm
            }
            None => 1.0,
        };
        Ok((lrr_solve(&(s_b * scale), &cfg.lrr)?, scale))
    })?;
    let l_b = symmetrize(&(s_b * &solution.z));
    let projection = t.time("gevd", || partial_gevd(&l_b, s_w, cfg.latent_dim))?;
    let after = t.time("spectrum_after", || partial_gevd(&l_b, s_w, f))?;
    let embedding = t.time("project", || Ok(projection.project(&up.features)))?;

    let mut r = PipelineResult::new(embedding, echo(cfg, LowRank.name()));
    r.projection = Some(projection);
    r.spectrum_before = Some(normalized_spectrum(&before.eigenvalues));
    r.spectrum_after = Some(normalized_spectrum(&after.eigenvalues));
    r.lrr_solution = Some(solution);
    r.lrr_scale = Some(scale);
    r.low_rank_sb = Some(l_b);
    t.total_seconds = start.elapsed().as_secs_f64();
    r.timings = t;
    Ok(finish_clustered(r, up))
}

/// Clustered landmarks and geodesic features followed by a full Fisher
/// eigendecomposition, truncated to `latent_dim`.
pub fn extended_clustered_isomap(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let start = Instant::now();
    let mut t = Timings::default();
    let up = clustered_upstream(data, cfg, &mut t)?;
    let full = t.time("gevd", || partial_gevd(&up.scatter.s_b, &up.scatter.s_w, up.scatter.feature_dim))?;
    let projection = full.truncated(cfg.latent_dim);
    let embedding = t.time("project", || Ok(projection.project(&up.features)))?;

    let mut r = PipelineResult::new(embedding, echo(cfg, ExtendedClustered.name()));
    r.spectrum_before = Some(normalized_spectrum(&full.eigenvalues));
    r.projection = Some(projection);
    t.total_seconds = start.elapsed().as_secs_f64();
    r.timings = t;
    Ok(finish_clustered(r, up))
}

/// Landmark MDS from uniformly drawn landmarks.
pub fn random_landmark_isomap(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let start = Instant::now();
    cfg.check_common(data)?;
    let n = data.n_samples();
    if cfg.n_landmarks < 2 || cfg.n_landmarks > n {
        return Err(Error::arg(format!("n_landmarks must lie in [2, N]; got {} with N = {n}", cfg.n_landmarks)));
    }
    if cfg.latent_dim > cfg.n_landmarks {
        return Err(Error::arg("latent_dim exceeds the number of landmarks"));
    }
    let mut t = Timings::default();
    let landmarks = t.time("landmarks", || {
        let order = canonical_order(data.samples());
        Ok(random_landmarks(n, cfg.n_landmarks, cfg.seed)?.into_iter().map(|p| order[p]).collect::<Vec<_>>())
    })?;
    let graph = t.time("graph", || connected_graph(data, cfg.k_nn))?;
    let dist = t.time("geodesic", || shortest_paths_from(&graph, &landmarks))?;
    let (embedding, negative_mass) = t.time("mds", || {
        let block = symmetrize(&dist.source_block());
        let gram = double_center_matrix(&block)?;
        let mds = classical_mds(&gram, cfg.latent_dim)?;
        let nl = landmarks.len();
        // Pseudo-inverse rows v_k/√λ_k; non-positive directions carry no information.
        let mut pinv = mds.eigenvectors.transpose();
        for (k, &lam) in mds.eigenvalues.iter().enumerate() {
            let s = if lam > 0.0 { 1.0 / lam.sqrt() } else { 0.0 };
            pinv.row_mut(k).scale_mut(s);
        }
        let mean_sq: Vec<f64> = (0..nl).map(|j| block.row(j).iter().map(|d| d * d).sum::<f64>() / nl as f64).collect();
        let centered = DMatrix::from_fn(nl, n, |j, x| dist.values[(j, x)].powi(2) - mean_sq[j]);
        Ok(((&pinv * centered).transpose() * -0.5, mds.negative_mass))
    })?;

    let mut r = PipelineResult::new(embedding, echo(cfg, RandomLandmark.name()));
    r.landmark_indices = landmarks;
    r.landmark_distances = Some(dist.values);
    r.n_bridges = graph.bridges().len();
    r.mds_negative_mass = Some(negative_mass);
    t.total_seconds = start.elapsed().as_secs_f64();
    r.timings = t;
    Ok(r)
}

/// Full geodesic matrix, double centering, classical MDS.
pub fn classic_isomap(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let start = Instant::now();
    let n = data.n_samples();
    if n > CLASSIC_MAX_N {
        return Err(Error::Resource(format!(
            "classic Isomap needs an N×N matrix; N = {n} exceeds the limit of {CLASSIC_MAX_N}"
        )));
    }
    cfg.check_common(data)?;
    if cfg.latent_dim > n {
        return Err(Error::arg("latent_dim exceeds N"));
    }
    let mut t = Timings::default();
    let graph = t.time("graph", || connected_graph(data, cfg.k_nn))?;
    let dist = t.time("geodesic", || full_geodesic_matrix(&graph))?;
    let gram = t.time("center", || double_center(&dist))?;
    let mds = t.time("mds", || classical_mds(&gram, cfg.latent_dim))?;

    let mut r = PipelineResult::new(mds.coords, echo(cfg, Classic.name()));
    r.landmark_indices = (0..n).collect();
    r.n_bridges = graph.bridges().len();
    r.mds_negative_mass = Some(mds.negative_mass);
    t.total_seconds = start.elapsed().as_secs_f64();
    r.timings = t;
    Ok(r)
}

pub struct LowRank;
pub struct ExtendedClustered;
pub struct RandomLandmark;
pub struct Classic;

impl IsomapVariant for LowRank {
    fn name(&self) -> &'static str {
        "low-rank"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["lowrank", "lrr"]
    }
    fn summary(&self) -> &'static str {
        "clustered landmarks, geodesic features, low-rank between-class scatter, partial Fisher projection"
    }
    fn run(&self, data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
        low_rank_isomap(data, cfg)
    }
}

impl IsomapVariant for ExtendedClustered {
    fn name(&self) -> &'static str {
        "extended-clustered"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["clustered"]
    }
    fn summary(&self) -> &'static str {
        "clustered landmarks, geodesic features, full Fisher projection"
    }
    fn run(&self, data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
        extended_clustered_isomap(data, cfg)
    }
}

impl IsomapVariant for RandomLandmark {
    fn name(&self) -> &'static str {
        "random-landmark"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["random", "landmark"]
    }
    fn summary(&self) -> &'static str {
        "uniform random landmarks, landmark MDS"
    }
    fn run(&self, data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
        random_landmark_isomap(data, cfg)
    }
}

impl IsomapVariant for Classic {
    fn name(&self) -> &'static str {
        "classic"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["isomap", "full"]
    }
    fn summary(&self) -> &'static str {
        "all-pairs geodesic distances, classical MDS"
    }
    fn run(&self, data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
        classic_isomap(data, cfg)
    }
}
