mod common;

use common::*;
use lowrank_isomap::eval::{energy_fraction, loocv_flda_accuracy};
use lowrank_isomap::generators::{gen_labeled_clusters, gen_swiss_roll};
use lowrank_isomap::graph::{build_knn_graph, connect_components, full_geodesic_matrix};
use lowrank_isomap::linalg::{effective_rank, EFFECTIVE_RANK_TOL};
use lowrank_isomap::pipeline::*;
use lowrank_isomap::{Dataset, Error};
use nalgebra::DMatrix;

fn cfg(variant: &str, n_landmarks: usize, latent_dim: usize, seed: u64) -> PipelineConfig {
    PipelineConfig {
        variant: variant.into(),
        n_landmarks,
        latent_dim,
        seed,
        ..Default::default()
    }
}

#[test]
fn blob_fixture_is_separable_by_true_means() {
    let data = gen_labeled_clusters(4, 25, 10, 8.0, 3).unwrap();
    let labels = data.labels().unwrap();
    let means = lowrank_isomap::generators::cluster_means(4, 10, 8.0, 3);
    let correct = (0..100)
        .filter(|&i| {
            let best = (0..4)
                .min_by(|&a, &b| {
                    let da = (data.samples().row(i) - means.row(a)).norm();
                    let db = (data.samples().row(i) - means.row(b)).norm();
                    da.total_cmp(&db)
                })
                .unwrap();
            best == labels[i]
        })
        .count();
    assert_eq!(correct, 100);
}

#[test]
fn low_rank_blob_accuracy() {
    for seed in 0..3 {
        let data = gen_labeled_clusters(4, 25, 10, 8.0, seed).unwrap();
        let r = run_pipeline(&data, &cfg("low-rank", 8, 2, seed)).unwrap();
        let acc = loocv_flda_accuracy(&r.embedding, data.labels().unwrap()).unwrap().accuracy;
        assert!(acc >= 0.95, "seed {seed}: {acc}");
    }
}

#[test]
fn low_rank_is_deterministic() {
    let data = gen_labeled_clusters(4, 25, 10, 8.0, 3).unwrap();
    let a = run_pipeline(&data, &cfg("low-rank", 8, 2, 3)).unwrap();
    let b = run_pipeline(&data, &cfg("low-rank", 8, 2, 3)).unwrap();
    assert_eq!(a.embedding, b.embedding);
}

#[test]
fn surrogate_lowers_effective_rank() {
    for seed in 0..3 {
        let data = gen_labeled_clusters(4, 25, 10, 8.0, seed).unwrap();
        let r = run_pipeline(&data, &cfg("low-rank", 8, 2, seed)).unwrap();
        let sb = &r.scatter.as_ref().unwrap().s_b;
        let lb = r.low_rank_sb.as_ref().unwrap();
        assert!(
            effective_rank(lb, EFFECTIVE_RANK_TOL) < effective_rank(sb, EFFECTIVE_RANK_TOL),
            "seed {seed}"
        );
    }
}

#[test]
fn spectrum_concentrates_on_labeled_fixtures() {
    for (data, nl) in [
        (gen_labeled_clusters(4, 25, 10, 8.0, 1).unwrap(), 8),
        (gen_labeled_clusters(8, 25, 50, 8.0, 2).unwrap(), 20),
        (gen_swiss_roll(400, 0.05, 3).unwrap(), 12),
    ] {
        let r = run_pipeline(&data, &cfg("low-rank", nl, 2, 0)).unwrap();
        let before = r.spectrum_before.unwrap();
        let after = r.spectrum_after.unwrap();
        assert_eq!(before[0], 1.0);
        assert_eq!(after[0], 1.0);
        assert!(energy_fraction(&after, 2) >= energy_fraction(&before, 2), "{}", data.name);
    }
}

fn inverse(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

#[test]
fn embedding_is_row_order_invariant() {
    let data = gen_labeled_clusters(4, 20, 6, 8.0, 5).unwrap();
    let order: Vec<usize> = (0..80).map(|i| (i * 37 + 11) % 80).collect();
    let shuffled = data.permuted(&order).unwrap();
    let inv = inverse(&order);
    for variant in ["low-rank", "clustered", "random-landmark", "classic"] {
        let c = cfg(variant, 8, 2, 4);
        let a = run_pipeline(&data, &c).unwrap().embedding;
        let b = run_pipeline(&shuffled, &c).unwrap().embedding;
        let back = DMatrix::from_fn(80, 2, |i, j| b[(inv[i], j)]);
        let scale = a.amax();
        assert!((a - back).amax() <= 1e-8 * scale, "{variant}");
    }
}

#[test]
fn all_landmarks_reproduce_classic() {
    let data = gen_swiss_roll(150, 0.0, 2).unwrap();
    let classic = classic_isomap(&data, &cfg("classic", 2, 2, 0)).unwrap();
    let landmark = random_landmark_isomap(&data, &cfg("random-landmark", 150, 2, 0)).unwrap();
    let res = procrustes_residual(&classic.embedding, &landmark.embedding);
    assert!(res < 1e-6, "procrustes residual {res}");
}

#[test]
fn random_landmarks_unroll_the_swiss_roll() {
    let data = gen_swiss_roll(800, 0.05, 7).unwrap();
    let r = run_pipeline(&data, &cfg("random-landmark", 40, 2, 1)).unwrap();
    let t: Vec<f64> = data.intrinsic.as_ref().unwrap().column(0).iter().copied().collect();
    let y: Vec<f64> = r.embedding.column(0).iter().copied().collect();
    assert!(pearson(&t, &y).abs() > 0.95);
    let other = run_pipeline(&data, &cfg("random-landmark", 40, 2, 2)).unwrap();
    assert_ne!(r.landmark_indices, other.landmark_indices);
    assert_ne!(r.embedding, other.embedding);
}

#[test]
fn classic_swiss_roll() {
    let data = gen_swiss_roll(800, 0.05, 7).unwrap();
    let r = run_pipeline(&data, &cfg("classic", 2, 2, 0)).unwrap();
    let graph = connect_components(&build_knn_graph(&data, 10).unwrap(), &data).unwrap();
    let d = full_geodesic_matrix(&graph).unwrap().values;
    let rv = residual_variance(&d, &pairwise_distances(&r.embedding));
    assert!(rv < 0.05, "residual variance {rv}");
    let t: Vec<f64> = data.intrinsic.as_ref().unwrap().column(0).iter().copied().collect();
    let y: Vec<f64> = r.embedding.column(0).iter().copied().collect();
    assert!(pearson(&t, &y).abs() > 0.95);
}

#[test]
fn classic_on_euclidean_points() {
    let pts = lcg_matrix(12, 2, 4) * 5.0;
    let data = Dataset::new(pts.clone(), None, "plane", "test").unwrap();
    let r = classic_isomap(&data, &PipelineConfig { k_nn: 11, latent_dim: 2, ..Default::default() }).unwrap();
    assert!((pairwise_distances(&r.embedding) - pairwise_distances(&pts)).amax() < 1e-8);
}

#[test]
fn full_basis_projection_is_invertible() {
    let data = gen_labeled_clusters(4, 25, 10, 8.0, 3).unwrap();
    let r = run_pipeline(&data, &cfg("clustered", 6, 6, 0)).unwrap();
    let w = &r.projection.unwrap().columns;
    assert_eq!(w.shape(), (6, 6));
    assert!(w.clone().try_inverse().is_some());
    assert_eq!(effective_rank(w, 1e-10), 6);
}

#[test]
fn stage_timings_cover_total() {
    let data = gen_labeled_clusters(4, 25, 10, 8.0, 3).unwrap();
    for variant in ["low-rank", "clustered", "random-landmark", "classic"] {
        let r = run_pipeline(&data, &cfg(variant, 8, 2, 0)).unwrap();
        let t = &r.timings;
        assert!(!t.stages.is_empty());
        assert!(t.stage_sum() <= t.total_seconds + 1e-6);
        assert!(t.stage_sum() >= 0.5 * t.total_seconds, "{variant}: {:?}", t);
    }
}

#[test]
fn stage_named_in_errors() {
    let data = gen_labeled_clusters(2, 5, 2, 8.0, 0).unwrap();
    let dup = Dataset::new(
        DMatrix::from_fn(10, 2, |i, j| if i < 2 { 1.0 } else { data.samples()[(i, j)] }),
        None,
        "dup",
        "test",
    )
    .unwrap();
    let err = run_pipeline(&dup, &PipelineConfig { k_nn: 3, ..cfg("classic", 2, 2, 0) }).unwrap_err();
    assert!(matches!(err, Error::DegenerateInput(_)));
    assert!(err.to_string().contains("[graph]"), "{err}");
}
