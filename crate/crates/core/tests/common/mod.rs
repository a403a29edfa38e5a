//! Reference computations used as test oracles. Each takes a route independent
//! of the library code it checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Singular values and vectors by one-sided Jacobi rotations: `a = U diag(s) Vᵀ`.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let n = a.ncols();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for r in 0..m.nrows() {
                        let x = m[(r, p)];
                        let y = m[(r, q)];
                        m[(r, p)] = c * x - s * y;
                        m[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<(f64, usize)> = (0..n).map(|j| (u.column(j).norm(), j)).collect();
    sv.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut uu = DMatrix::zeros(a.nrows(), n);
    let mut vv = DMatrix::zeros(n, n);
    for (k, &(s, j)) in sv.iter().enumerate() {
        if s > 0.0 {
            uu.set_column(k, &(u.column(j) / s));
        }
        vv.set_column(k, &v.column(j));
    }
    (uu, sv.into_iter().map(|x| x.0).collect(), vv)
}

/// `U·max(Σ − eps, 0)·Vᵀ` via [`jacobi_svd`].
pub fn svt_oracle(a: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let (u, s, v) = jacobi_svd(a);
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, sv) in s.iter().enumerate() {
        let t = (sv - eps).max(0.0);
        out += u.column(k) * v.column(k).transpose() * t;
    }
    out
}

pub fn soft_oracle(x: f64, eps: f64) -> f64 {
    x.signum() * (x.abs() - eps).max(0.0)
}

/// Generalized eigenvalues of `(a, b + ridge·I)` through `B^{-1/2} A B^{-1/2}`, descending.
pub fn gevd_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> (Vec<f64>, DMatrix<f64>) {
    let n = b.nrows();
    let breg = b + DMatrix::identity(n, n) * ridge;
    let e = SymmetricEigen::new(breg);
    let inv_sqrt = DMatrix::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let bm = &e.eigenvectors * inv_sqrt * e.eigenvectors.transpose();
    let c = &bm * a * &bm;
    let c = (&c + c.transpose()) * 0.5;
    let ce = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| ce.eigenvalues[j].total_cmp(&ce.eigenvalues[i]));
    let vals = idx.iter().map(|&i| ce.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| ce.eigenvectors[(r, idx[c])]);
    (vals, &bm * vecs)
}

pub fn pairwise_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| (x.row(i) - x.row(j)).norm())
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// `1 − r²` between the upper triangles of two square matrices.
pub fn residual_variance(d_graph: &DMatrix<f64>, d_embed: &DMatrix<f64>) -> f64 {
    let n = d_graph.nrows();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            a.push(d_graph[(i, j)]);
            b.push(d_embed[(i, j)]);
        }
    }
    let r = pearson(&a, &b);
    1.0 - r * r
}

/// Relative residual `‖(Y − ȳ)R − (X − x̄)‖_F / ‖X − x̄‖_F` after the best orthogonal `R`.
pub fn procrustes_residual(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let center = |m: &DMatrix<f64>| {
        let mean = m.row_mean();
        let mut c = m.clone();
        for mut row in c.row_iter_mut() {
            row -= &mean;
        }
        c
    };
    let xc = center(x);
    let yc = center(y);
    let (u, _, v) = jacobi_svd(&(yc.transpose() * &xc));
    let r = u * v.transpose();
    (yc * r - &xc).norm() / xc.norm()
}

/// Share of `|Z|` mass lying in same-group blocks.
pub fn block_mass(z: &DMatrix<f64>, groups: &[usize]) -> f64 {
    let mut inside = 0.0;
    let mut total = 0.0;
    for i in 0..z.nrows() {
        for j in 0..z.ncols() {
            let v = z[(i, j)].abs();
            total += v;
            if groups[i] == groups[j] {
                inside += v;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}

/// Random matrix with entries uniform on `[-1, 1]` from a tiny LCG; keeps the oracles free of library RNG code.
pub fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    DMatrix::from_fn(rows, cols, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    })
}
