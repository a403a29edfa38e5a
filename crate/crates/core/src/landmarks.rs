//! Landmark selection: k-means centroids snapped to data points, or uniform random picks.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::generators::rng;

/// Default Lloyd iteration cap.
pub const DEFAULT_KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct ClusterModel {
    /// `n_clusters × F`
    pub centroids: DMatrix<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    /// Data index closest to each centroid, drawn from that centroid's own cluster.
    pub landmark_indices: Vec<usize>,
    pub iterations_run: usize,
    /// Inertia after every assignment step, starting with the seeding.
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn n_clusters(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn check_invariants(&self, features: &DMatrix<f64>) -> Result<()> {
        let k = self.n_clusters();
        if self.cluster_sizes().contains(&0) {
            return Err(Error::Numerical("empty cluster".into()));
        }
        let mut seen = vec![false; features.nrows()];
        for (c, &l) in self.landmark_indices.iter().enumerate() {
            if l >= features.nrows() || std::mem::replace(&mut seen[l], true) {
                return Err(Error::Numerical(format!("landmark {c} is not a distinct valid index")));
            }
            if self.assignments[l] != c {
                return Err(Error::Numerical(format!("landmark {c} lies outside its cluster")));
            }
        }
        if self.landmark_indices.len() != k {
            return Err(Error::Numerical("landmark count differs from cluster count".into()));
        }
        Ok(())
    }
}

struct RowMajor {
    buf: Vec<f64>,
    m: usize,
}

impl RowMajor {
    fn new(x: &DMatrix<f64>) -> Self {
        let m = x.ncols();
        let mut buf = vec![0.0; x.nrows() * m];
        for i in 0..x.nrows() {
            for j in 0..m {
                buf[i * m + j] = x[(i, j)];
            }
        }
        Self { buf, m }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.buf[i * self.m..(i + 1) * self.m]
    }

    fn permuted(&self, order: &[usize]) -> Self {
        let buf = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self { buf, m: self.m }
    }

    fn len(&self) -> usize {
        self.buf.len() / self.m.max(1)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row indices sorted lexicographically by value (index breaks exact ties).
///
/// Random draws are made against this order so that results do not depend on
/// how the observations happen to be listed.
pub fn canonical_order(x: &DMatrix<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| {
        (0..x.ncols())
            .map(|j| x[(a, j)].total_cmp(&x[(b, j)]))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// k-means++ seeding: first centre uniform, then proportional to squared distance.
fn plus_plus(x: &RowMajor, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = x.len();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Round-off can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            taken.iter().position(|t| !t).unwrap()
        };
        chosen.push(next);
        taken[next] = true;
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    chosen
}

/// Nearest centroid per point (lowest index on ties) and the resulting inertia.
fn assign(x: &RowMajor, centroids: &RowMajor) -> (Vec<usize>, Vec<f64>) {
    let k = centroids.len();
    (0..x.len())
        .map(|i| {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let d = sq_dist(x.row(i), centroids.row(c));
                if d < best.0 {
                    best = (d, c);
                }
            }
            (best.1, best.0)
        })
        .unzip()
}

/// Centroid update; empty clusters are reseeded on the point farthest from its own centroid.
fn update(x: &RowMajor, assignments: &[usize], dist: &[f64], k: usize) -> RowMajor {
    let m = x.m;
    let mut sums = vec![0.0; k * m];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums[a * m..(a + 1) * m].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    let mut donated = vec![false; x.len()];
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            sums[c * m..(c + 1) * m].iter_mut().for_each(|s| *s *= inv);
        } else {
            let far = (0..x.len())
                .filter(|&i| !donated[i])
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            donated[far] = true;
            sums[c * m..(c + 1) * m].copy_from_slice(x.row(far));
        }
    }
    RowMajor { buf: sums, m }
}

/// Lloyd's algorithm (squared Euclidean) from k-means++ seeds, iterated until
/// the assignment stops changing or `max_iter` updates have run.
pub fn kmeans_features(features: &DMatrix<f64>, n_clusters: usize, max_iter: usize, seed: u64) -> Result<ClusterModel> {
    let n = features.nrows();
    if n_clusters < 1 || n_clusters > n {
        return Err(Error::arg(format!("n_clusters must be in [1, N]; got {n_clusters} with N = {n}")));
    }
    if max_iter < 1 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    let x = RowMajor::new(features);
    let mut rng = rng(seed);
    let order = canonical_order(features);
    let seeds: Vec<usize> = plus_plus(&x.permuted(&order), n_clusters, &mut rng)
        .into_iter()
        .map(|i| order[i])
        .collect();
    let mut centroids = RowMajor {
        buf: seeds.iter().flat_map(|&i| x.row(i).to_vec()).collect(),
        m: x.m,
    };
    let (mut assignments, mut dist) = assign(&x, &centroids);
    let mut trace = vec![dist.iter().sum::<f64>()];
    let mut iterations_run = 0;
    while iterations_run < max_iter {
        iterations_run += 1;
        centroids = update(&x, &assignments, &dist, n_clusters);
        let (next, next_dist) = assign(&x, &centroids);
        trace.push(next_dist.iter().sum());
        let changed = next != assignments;
        assignments = next;
        dist = next_dist;
        if !changed {
            break;
        }
    }

    let centroid_matrix = DMatrix::from_fn(n_clusters, x.m, |c, j| centroids.row(c)[j]);
    let mut model = ClusterModel {
        centroids: centroid_matrix,
        assignments,
        inertia: *trace.last().unwrap(),
        landmark_indices: Vec::new(),
        iterations_run,
        inertia_trace: trace,
    };
    model.landmark_indices = medoid_indices(&model, features);
    Ok(model)
}

/// Lloyd k-means on the observations (rows) of `data`.
pub fn kmeans(data: &Dataset, n_clusters: usize, max_iter: usize, seed: u64) -> Result<ClusterModel> {
    if n_clusters < 2 {
        return Err(Error::arg("landmark clustering needs at least 2 clusters"));
    }
    kmeans_features(data.samples(), n_clusters, max_iter, seed)
}

fn medoid_indices(model: &ClusterModel, features: &DMatrix<f64>) -> Vec<usize> {
    let k = model.n_clusters();
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); k];
    for (i, &c) in model.assignments.iter().enumerate() {
        let d = (features.row(i) - model.centroids.row(c)).norm_squared();
        if d < best[c].0 {
            best[c] = (d, i);
        }
    }
    best.into_iter().map(|(_, i)| i).collect()
}

/// Replace each centroid's landmark by the closest member of its cluster (lowest index on ties).
pub fn snap_to_medoids(model: &ClusterModel, data: &Dataset) -> Result<ClusterModel> {
    if model.assignments.len() != data.n_samples() || model.centroids.ncols() != data.n_features() {
        return Err(Error::arg("cluster model was not fitted on this dataset"));
    }
    let mut out = model.clone();
    out.landmark_indices = medoid_indices(model, data.samples());
    if out.landmark_indices.contains(&usize::MAX) {
        return Err(Error::Numerical("cluster without members".into()));
    }
    Ok(out)
}

/// `count` distinct indices drawn uniformly from `0..n`, returned in ascending order.
pub fn random_landmarks(n: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > n {
        return Err(Error::arg(format!("cannot pick {count} landmarks from {n} points")));
    }
    let mut rng = rng(seed);
    let mut picks = sample(&mut rng, n, count).into_vec();
    picks.sort_unstable();
    Ok(picks)
}
