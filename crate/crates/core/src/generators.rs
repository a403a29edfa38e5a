//! Seeded synthetic datasets. Every generator is a pure function of its arguments.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Height of the swiss roll strip.
pub const SWISS_ROLL_HEIGHT: f64 = 21.0;

/// Half-width of the uniform coefficient range used by [`gen_subspace_union`].
///
/// The low-rank solver's error weight is not scale-free: at unit amplitude the
/// trivial split `E = S` is optimal, so the fixture is generated well inside
/// the regime where self-expression wins.
pub const SUBSPACE_COEFF_AMPLITUDE: f64 = 1000.0;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Points `(t cos t, h, t sin t)` with `t ~ U[1.5π, 4.5π]`, `h ~ U[0, 21]`, plus
/// isotropic Gaussian noise. Labels are the quartile of `t` (by rank), and the
/// intrinsic `(t, h)` pairs are kept in [`Dataset::intrinsic`].
pub fn gen_swiss_roll(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::arg(format!("swiss roll needs n >= 10, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::arg("noise must be a finite non-negative number"));
    }
    let mut rng = rng(seed);
    let unit = Uniform::new(0.0, 1.0).unwrap();
    let mut intrinsic = DMatrix::zeros(n, 2);
    let mut samples = DMatrix::zeros(n, 3);
    for i in 0..n {
        let t = 1.5 * PI * (1.0 + 2.0 * unit.sample(&mut rng));
        let h = SWISS_ROLL_HEIGHT * unit.sample(&mut rng);
        intrinsic[(i, 0)] = t;
        intrinsic[(i, 1)] = h;
        let clean = [t * t.cos(), h, t * t.sin()];
        for (j, c) in clean.into_iter().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            samples[(i, j)] = c + noise * eps;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| intrinsic[(a, 0)].total_cmp(&intrinsic[(b, 0)]));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * 4 / n;
    }

    let mut ds = Dataset::new(
        samples,
        Some(labels),
        "swiss-roll",
        format!("swiss:n={n},noise={noise},seed={seed}"),
    )?;
    ds.intrinsic = Some(intrinsic);
    Ok(ds)
}

/// Union of `n_subspaces` random `subspace_dim`-dimensional subspaces of
/// `R^ambient`, `per_subspace` points each.
///
/// Bases are orthonormalised Gaussian matrices; coefficients are uniform on
/// `±SUBSPACE_COEFF_AMPLITUDE`. A `corruption_frac` share of all entries is
/// replaced by uniform noise on `±2·max|entry|` and the positions are listed in
/// [`Dataset::corrupted`]. Points are the rows (the column-wise sample matrix transposed).
pub fn gen_subspace_union(
    ambient: usize,
    subspace_dim: usize,
    n_subspaces: usize,
    per_subspace: usize,
    corruption_frac: f64,
    seed: u64,
) -> Result<Dataset> {
    if subspace_dim == 0 || subspace_dim >= ambient {
        return Err(Error::arg(format!(
            "subspace dimension must be in [1, ambient); got {subspace_dim} with ambient {ambient}"
        )));
    }
    if n_subspaces == 0 || per_subspace == 0 {
        return Err(Error::arg("need at least one subspace with one point"));
    }
    if !(0.0..=1.0).contains(&corruption_frac) {
        return Err(Error::arg("corruption fraction must lie in [0, 1]"));
    }
    let mut rng = rng(seed);
    let coeff = Uniform::new_inclusive(-SUBSPACE_COEFF_AMPLITUDE, SUBSPACE_COEFF_AMPLITUDE).unwrap();
    let n = n_subspaces * per_subspace;
    let mut samples = DMatrix::zeros(n, ambient);
    let mut labels = Vec::with_capacity(n);
    for s in 0..n_subspaces {
        let gauss = DMatrix::from_fn(ambient, subspace_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let basis = gauss.qr().q();
        for p in 0..per_subspace {
            let c = DMatrix::from_fn(subspace_dim, 1, |_, _| coeff.sample(&mut rng));
            let x = &basis * c;
            samples.row_mut(s * per_subspace + p).copy_from(&x.transpose());
            labels.push(s);
        }
    }

    let total = n * ambient;
    let n_bad = (corruption_frac * total as f64).round() as usize;
    let mut corrupted = Vec::with_capacity(n_bad);
    if n_bad > 0 {
        let amax = samples.amax();
        let noise = Uniform::new_inclusive(-2.0 * amax, 2.0 * amax).unwrap();
        let mut picks = sample(&mut rng, total, n_bad).into_vec();
        picks.sort_unstable();
        for flat in picks {
            let (r, c) = (flat / ambient, flat % ambient);
            samples[(r, c)] = noise.sample(&mut rng);
            corrupted.push((r, c));
        }
    }

    let mut ds = Dataset::new(
        samples,
        Some(labels),
        "subspace-union",
        format!(
            "subspaces:ambient={ambient},dim={subspace_dim},n={n_subspaces},per={per_subspace},corruption={corruption_frac},seed={seed}"
        ),
    )?;
    ds.corrupted = corrupted;
    Ok(ds)
}

/// Class means of [`gen_labeled_clusters`]: the first `ambient` classes sit on
/// `+a·e_c`, the next `ambient` on `−a·e_c`, with `a = separation/√2`, so every
/// pair of means is at least `separation` apart. Further classes get random
/// directions of the same radius.
pub fn cluster_means(n_classes: usize, ambient: usize, separation: f64, seed: u64) -> DMatrix<f64> {
    let radius = separation / 2f64.sqrt();
    let mut rng = rng(seed ^ 0x6d65_616e);
    let mut means = DMatrix::zeros(n_classes, ambient);
    for c in 0..n_classes {
        if c < 2 * ambient {
            let sign = if c < ambient { 1.0 } else { -1.0 };
            means[(c, c % ambient)] = sign * radius;
        } else {
            let dir = DMatrix::from_fn(1, ambient, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = dir.norm().max(f64::MIN_POSITIVE);
            means.row_mut(c).copy_from(&(dir * (radius / norm)));
        }
    }
    means
}

/// Isotropic unit-variance Gaussian blobs around [`cluster_means`].
pub fn gen_labeled_clusters(
    n_classes: usize,
    per_class: usize,
    ambient: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_classes == 0 || per_class == 0 || ambient == 0 {
        return Err(Error::arg("class count, class size and dimension must all be >= 1"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::arg("separation must be a finite non-negative number"));
    }
    let means = cluster_means(n_classes, ambient, separation, seed);
    let mut rng = rng(seed);
    let n = n_classes * per_class;
    let mut samples = DMatrix::zeros(n, ambient);
    let mut labels = Vec::with_capacity(n);
    for c in 0..n_classes {
        for p in 0..per_class {
            let row = c * per_class + p;
            for j in 0..ambient {
                let eps: f64 = rng.sample(StandardNormal);
                samples[(row, j)] = means[(c, j)] + eps;
            }
            labels.push(c);
        }
    }
    Dataset::new(
        samples,
        Some(labels),
        "labeled-clusters",
        format!("blobs:classes={n_classes},per={per_class},dim={ambient},sep={separation},seed={seed}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swiss_roll_is_seeded() {
        let a = gen_swiss_roll(800, 0.0, 7).unwrap();
        let b = gen_swiss_roll(800, 0.0, 7).unwrap();
        let c = gen_swiss_roll(800, 0.0, 8).unwrap();
        assert_eq!(a.samples().shape(), (800, 3));
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), c.samples());
        assert_eq!(a.n_classes(), Some(4));
    }

    #[test]
    fn swiss_roll_too_small() {
        assert!(matches!(gen_swiss_roll(5, 0.0, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn swiss_roll_lies_on_roll_without_noise() {
        let ds = gen_swiss_roll(50, 0.0, 1).unwrap();
        let t = ds.intrinsic.as_ref().unwrap();
        for i in 0..50 {
            let r = (ds.samples()[(i, 0)].powi(2) + ds.samples()[(i, 2)].powi(2)).sqrt();
            assert!((r - t[(i, 0)]).abs() < 1e-12);
            assert!((1.5 * PI..=4.5 * PI).contains(&t[(i, 0)]));
        }
    }

    #[test]
    fn subspace_corruption_count() {
        let ds = gen_subspace_union(30, 2, 3, 20, 0.05, 1).unwrap();
        assert_eq!(ds.corrupted.len(), 90);
        let mut uniq = ds.corrupted.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 90);
    }

    #[test]
    fn subspace_dim_must_be_below_ambient() {
        assert!(matches!(
            gen_subspace_union(30, 30, 3, 20, 0.0, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn clusters_shape() {
        let ds = gen_labeled_clusters(4, 25, 10, 8.0, 3).unwrap();
        assert_eq!(ds.samples().shape(), (100, 10));
        assert_eq!(ds.n_classes(), Some(4));
        let single = gen_labeled_clusters(1, 10, 5, 1.0, 0).unwrap();
        assert_eq!(single.n_classes(), Some(1));
    }

    #[test]
    fn cluster_means_are_separated() {
        for (c, m) in [(4, 10), (8, 3), (9, 2)] {
            let mu = cluster_means(c, m, 8.0, 0);
            for a in 0..c {
                for b in 0..a {
                    let d = (mu.row(a) - mu.row(b)).norm();
                    if a < 2 * m {
                        assert!(d >= 8.0 - 1e-9, "{a} {b} {d}");
                    }
                }
            }
        }
    }
}
