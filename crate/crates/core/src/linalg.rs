//! Dense kernels shared by the pipelines: centering, classical MDS, scatter
//! matrices, shrinkage operators and the regularised generalized eigensolver.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DistanceMatrix;

/// Relative ridge added to the right-hand matrix of every generalized eigenproblem.
pub const GEVD_RIDGE: f64 = 1e-6;

/// Above this size [`partial_gevd`] switches to an iterative top-m solver.
pub const DENSE_GEVD_LIMIT: usize = 512;

/// Default relative threshold for [`effective_rank`].
pub const EFFECTIVE_RANK_TOL: f64 = 1e-3;

fn check_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} contains non-finite entries")))
    }
}

fn check_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} must be square, got {}×{}", a.nrows(), a.ncols())))
    }
}

/// Copy of `a` with `(a + aᵀ)/2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Centered inner-product matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// `B = −½ H D² H` for a square distance matrix; distances are squared entrywise.
pub fn double_center_matrix(dist: &DMatrix<f64>) -> Result<GramMatrix> {
    check_square(dist, "distance matrix")?;
    check_finite(dist, "distance matrix")?;
    let n = dist.nrows();
    if n == 0 {
        return Err(Error::arg("distance matrix is empty"));
    }
    let d2 = dist.map(|d| d * d);
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).mean()).collect();
    let col_means: Vec<f64> = (0..n).map(|j| d2.column(j).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - col_means[j] + grand));
    Ok(GramMatrix { values: symmetrize(&b) })
}

/// Double centering of an all-pairs [`DistanceMatrix`].
pub fn double_center(dist: &DistanceMatrix) -> Result<GramMatrix> {
    double_center_matrix(&dist.values)
}

/// Output of [`classical_mds`].
#[derive(Debug, Clone)]
pub struct MdsEmbedding {
    /// `N × m` coordinates.
    pub coords: DMatrix<f64>,
    /// Top-m eigenvalues of the Gram matrix, descending, before clamping.
    pub eigenvalues: Vec<f64>,
    /// Matching unit eigenvectors as columns.
    pub eigenvectors: DMatrix<f64>,
    /// Sum of |λ| over all negative eigenvalues of the Gram matrix.
    pub negative_mass: f64,
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
pub(crate) fn sorted_symmetric_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    fix_signs(&mut vectors);
    (values, vectors)
}

/// Flips each column so that its largest-magnitude entry is positive.
pub(crate) fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}

/// Top-m eigenvectors scaled by `√max(λ, 0)`.
pub fn classical_mds(gram: &GramMatrix, m: usize) -> Result<MdsEmbedding> {
    let n = gram.n();
    if m > n {
        return Err(Error::arg(format!("embedding dimension {m} exceeds N = {n}")));
    }
    check_finite(&gram.values, "Gram matrix")?;
    let (values, vectors) = sorted_symmetric_eigen(symmetrize(&gram.values));
    let negative_mass = values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let eigenvectors = vectors.columns(0, m).into_owned();
    let mut coords = eigenvectors.clone();
    for (c, &lam) in values.iter().take(m).enumerate() {
        coords.column_mut(c).scale_mut(lam.max(0.0).sqrt());
    }
    Ok(MdsEmbedding {
        coords,
        eigenvalues: values[..m].to_vec(),
        eigenvectors,
        negative_mass,
    })
}

/// Centre used for the within-class scatter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinForm {
    /// `Σ_i Σ_{k∈c_i} (x_k − μ_i)(x_k − μ_i)ᵀ`
    #[default]
    ClassMean,
    /// `Σ_k (x_k − μ)(x_k − μ)ᵀ`, the total scatter.
    GlobalMean,
}

#[derive(Debug, Clone)]
pub struct ScatterPair {
    pub s_b: DMatrix<f64>,
    pub s_w: DMatrix<f64>,
    pub feature_dim: usize,
    pub n_classes: usize,
    pub global_mean: DVector<f64>,
    /// `n_classes × F`
    pub class_means: DMatrix<f64>,
    pub class_counts: Vec<usize>,
    pub within_form: WithinForm,
}

impl ScatterPair {
    pub fn total_scatter(features: &DMatrix<f64>) -> DMatrix<f64> {
        let mean = features.row_mean();
        let mut centered = features.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        centered.transpose() * centered
    }
}

/// Between- and within-class scatter of the rows of `features` grouped by `assignments`.
pub fn scatter_matrices(features: &DMatrix<f64>, assignments: &[usize]) -> Result<ScatterPair> {
    scatter_matrices_with(features, assignments, WithinForm::ClassMean)
}

pub fn scatter_matrices_with(features: &DMatrix<f64>, assignments: &[usize], form: WithinForm) -> Result<ScatterPair> {
    let (n, f) = features.shape();
    if assignments.len() != n {
        return Err(Error::arg(format!("{} assignments for {n} rows", assignments.len())));
    }
    check_finite(features, "feature matrix")?;
    let c = assignments.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; c];
    let mut sums = DMatrix::zeros(c, f);
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        let mut row = sums.row_mut(a);
        row += features.row(i);
    }
    if let Some(empty) = counts.iter().position(|&k| k == 0) {
        return Err(Error::arg(format!("class {empty} has no members")));
    }
    if c < 2 {
        return Err(Error::arg("scatter matrices need at least two classes"));
    }
    let mut class_means = sums;
    for (k, mut row) in class_means.row_iter_mut().enumerate() {
        row /= counts[k] as f64;
    }
    let global_mean = features.row_mean().transpose();

    let mut diff = DMatrix::zeros(c, f);
    for k in 0..c {
        let scale = (counts[k] as f64).sqrt();
        for j in 0..f {
            diff[(k, j)] = scale * (class_means[(k, j)] - global_mean[j]);
        }
    }
    let s_b = symmetrize(&(diff.transpose() * &diff));

    let mut centered = features.clone();
    for (i, mut row) in centered.row_iter_mut().enumerate() {
        match form {
            WithinForm::ClassMean => row -= class_means.row(assignments[i]),
            WithinForm::GlobalMean => row -= global_mean.transpose(),
        }
    }
    let s_w = symmetrize(&(centered.transpose() * &centered));

    Ok(ScatterPair {
        s_b,
        s_w,
        feature_dim: f,
        n_classes: c,
        global_mean,
        class_means,
        class_counts: counts,
        within_form: form,
    })
}

/// `sgn(x)·max(|x| − eps, 0)`.
pub fn soft_threshold(x: f64, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::arg(format!("threshold must be non-negative, got {eps}")));
    }
    Ok(shrink(x, eps))
}

#[inline]
pub(crate) fn shrink(x: f64, eps: f64) -> f64 {
    if x > eps {
        x - eps
    } else if x < -eps {
        x + eps
    } else {
        0.0
    }
}

/// Entrywise [`soft_threshold`].
pub fn soft_threshold_matrix(a: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    soft_threshold(0.0, eps)?;
    Ok(a.map(|x| shrink(x, eps)))
}

/// Singular value thresholding `U·diag(max(σ − eps, 0))·Vᵀ`.
pub fn svt(a: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    check_finite(a, "matrix")?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::arg(format!("threshold must be non-negative, got {eps}")));
    }
    Ok(svt_unchecked(a, eps))
}

pub(crate) fn svt_unchecked(a: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let t = s - eps;
        if t > 0.0 {
            out += u.column(k) * v_t.row(k) * t;
        }
    }
    out
}

/// Nuclear norm (sum of singular values).
pub fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    a.singular_values().sum()
}

/// Number of singular values above `rel_tol·σ_max`; zero for the zero matrix.
pub fn effective_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = a.singular_values();
    let top = s.max();
    if top <= 0.0 || !top.is_finite() {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Largest singular value by power iteration on `aᵀa`, stopped at relative change `tol`.
pub fn spectral_norm(a: &DMatrix<f64>, tol: f64) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // A fixed non-symmetric start avoids landing orthogonal to the top vector on structured inputs.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    v.normalize_mut();
    let mut sigma = 0.0;
    for _ in 0..10_000 {
        let av = a * &v;
        let w = a.tr_mul(&av);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        v = w / norm;
        if (next - sigma).abs() <= tol * next {
            return (a * &v).norm();
        }
        sigma = next;
    }
    (a * &v).norm()
}

/// Top generalized eigenpairs, columns normalised so `Wᵀ(b + ridge)W = I`.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    /// `F × m`
    pub columns: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub ridge: f64,
}

impl ProjectionMatrix {
    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    /// Rows of `features` mapped to `y = Wᵀ f`.
    pub fn project(&self, features: &DMatrix<f64>) -> DMatrix<f64> {
        features * &self.columns
    }

    pub fn truncated(&self, m: usize) -> ProjectionMatrix {
        let m = m.min(self.dim());
        ProjectionMatrix {
            columns: self.columns.columns(0, m).into_owned(),
            eigenvalues: self.eigenvalues[..m].to_vec(),
            ridge: self.ridge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GevdMethod {
    /// Dense up to [`DENSE_GEVD_LIMIT`], iterative above.
    Auto,
    Dense,
    Iterative,
}

/// Top-m pairs of `a·w = λ·(b + ridge·I)·w` with `ridge = 1e-6·trace(b)/F`.
pub fn partial_gevd(a: &DMatrix<f64>, b: &DMatrix<f64>, m: usize) -> Result<ProjectionMatrix> {
    partial_gevd_with(a, b, m, GevdMethod::Auto)
}

pub fn partial_gevd_with(a: &DMatrix<f64>, b: &DMatrix<f64>, m: usize, method: GevdMethod) -> Result<ProjectionMatrix> {
    check_square(a, "left matrix")?;
    check_square(b, "right matrix")?;
    let f = a.nrows();
    if b.nrows() != f {
        return Err(Error::arg("generalized eigenproblem matrices differ in size"));
    }
    if m == 0 || m > f {
        return Err(Error::arg(format!("requested {m} eigenpairs from a {f}×{f} problem")));
    }
    check_finite(a, "left matrix")?;
    check_finite(b, "right matrix")?;
    let trace = b.trace();
    let ridge = if trace > 0.0 { GEVD_RIDGE * trace / f as f64 } else { GEVD_RIDGE };
    let mut reg = symmetrize(b);
    for i in 0..f {
        reg[(i, i)] += ridge;
    }
    let chol = Cholesky::new(reg).ok_or_else(|| {
        Error::Numerical("right-hand scatter matrix is indefinite beyond the regularisation ridge".into())
    })?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let la = l.solve_lower_triangular(&symmetrize(a)).expect("non-singular factor");
    let c = symmetrize(&l.solve_lower_triangular(&la.transpose()).expect("non-singular factor"));

    let iterative = match method {
        GevdMethod::Dense => false,
        GevdMethod::Iterative => true,
        GevdMethod::Auto => f > DENSE_GEVD_LIMIT,
    };
    let (values, vectors) = if iterative && m < f {
        top_eigen_subspace(&c, m)?
    } else {
        let (vals, vecs) = sorted_symmetric_eigen(c);
        (vals[..m].to_vec(), vecs.columns(0, m).into_owned())
    };
    // w = L⁻ᵀ v
    let mut columns = l.transpose().solve_upper_triangular(&vectors).expect("non-singular factor");
    fix_signs(&mut columns);
    Ok(ProjectionMatrix {
        columns,
        eigenvalues: values,
        ridge,
    })
}

/// Top-m algebraic eigenpairs of a symmetric matrix by shifted block subspace
/// iteration with Rayleigh–Ritz extraction.
fn top_eigen_subspace(c: &DMatrix<f64>, m: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let f = c.nrows();
    let p = (2 * m + 8).min(f);
    let shift = spectral_norm(c, 1e-6) * 1.01;
    let mut shifted = c.clone();
    for i in 0..f {
        shifted[(i, i)] += shift;
    }
    let mut q = DMatrix::from_fn(f, p, |i, j| ((i * 7919 + j * 104_729) % 1009) as f64 / 1009.0 - 0.5);
    q = q.qr().q();
    let mut prev = vec![f64::INFINITY; m];
    for _ in 0..5_000 {
        let y = &shifted * &q;
        q = y.qr().q();
        let h = symmetrize(&(q.transpose() * &shifted * &q));
        let (vals, vecs) = sorted_symmetric_eigen(h);
        q = &q * vecs;
        let scale = vals[0].abs().max(f64::MIN_POSITIVE);
        let done = vals[..m].iter().zip(&prev).all(|(v, p)| (v - p).abs() <= 1e-13 * scale);
        prev.copy_from_slice(&vals[..m]);
        if done {
            let values = prev.iter().map(|v| v - shift).collect();
            return Ok((values, q.columns(0, m).into_owned()));
        }
    }
    Err(Error::Numerical("subspace iteration did not converge".into()))
}

/// Eigenvalues sorted descending and divided by the largest; all zeros when
/// the largest is not positive.
pub fn normalized_spectrum(eigenvalues: &[f64]) -> Vec<f64> {
    let mut v = eigenvalues.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    match v.first() {
        Some(&top) if top > 0.0 => v.iter().map(|x| x / top).collect(),
        _ => vec![0.0; v.len()],
    }
}

/// Share of the positive spectral mass carried by the first `k` entries.
pub fn energy_fraction(spectrum: &[f64], k: usize) -> f64 {
    let total: f64 = spectrum.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 {
        return 0.0;
    }
    spectrum.iter().take(k).map(|v| v.max(0.0)).sum::<f64>() / total
}
