//! Non-negative sparse low-rank representation `S = SZ + E` solved by
//! linearized ADMM with an adaptive penalty.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{effective_rank, shrink, spectral_norm, EFFECTIVE_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrrConfig {
    /// Weight of `‖Z‖₁`; drives the `J` threshold.
    pub beta: f64,
    /// Weight of `‖E‖₁`; drives the `E` threshold.
    pub lambda_err: f64,
    pub mu0: f64,
    pub mu_max: f64,
    pub rho0: f64,
    /// Relative residual tolerance.
    pub eps1: f64,
    /// Step tolerance.
    pub eps2: f64,
    pub max_iter: usize,
    /// `η₁ = eta1_slack · μ · (1 + ‖S‖₂²)`
    pub eta1_slack: f64,
}

impl Default for LrrConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            lambda_err: 0.02,
            mu0: 1e-6,
            mu_max: 1e6,
            rho0: 2.5,
            eps1: 1e-6,
            eps2: 1e-2,
            max_iter: 1000,
            eta1_slack: 1.02,
        }
    }
}

impl LrrConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta", self.beta),
            ("lambda_err", self.lambda_err),
            ("mu0", self.mu0),
            ("mu_max", self.mu_max),
            ("rho0", self.rho0),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v >= 0.0) || (v == 0.0 && name != "beta") {
                return Err(Error::arg(format!("lrr {name} must be positive, got {v}")));
            }
        }
        if self.mu0 > self.mu_max {
            return Err(Error::arg("lrr mu0 exceeds mu_max"));
        }
        if self.rho0 < 1.0 {
            return Err(Error::arg("lrr rho0 must be at least 1"));
        }
        if !(self.eta1_slack > 1.0 && self.eta1_slack.is_finite()) {
            return Err(Error::arg("lrr eta1_slack must exceed 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::arg("lrr max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    /// `‖S − SZ − E‖_F / ‖S‖_F`
    pub residual: f64,
    /// `max(η₁‖ΔZ‖_F, μ‖ΔJ‖_F, μ‖ΔE‖_F)`
    pub step_max: f64,
    /// Penalty in effect during the iteration.
    pub mu: f64,
    /// `‖Z‖_*` after the Z update.
    pub nuclear_norm: f64,
    /// Smallest entry of `J` after the J update.
    pub min_j: f64,
}

#[derive(Debug, Clone)]
pub struct LrrState {
    pub z: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub mu: f64,
    pub eta1: f64,
    /// Completed iterations.
    pub k: usize,
    pub trace: Vec<TraceRecord>,
    s_norm2_sq: f64,
    s_fro: f64,
    z_prev: DMatrix<f64>,
    j_prev: DMatrix<f64>,
    e_prev: DMatrix<f64>,
    nuclear: f64,
    residual: f64,
    step_max: f64,
}

impl LrrState {
    /// `Z = J = I`, `E = M₁ = M₂ = 0`, `μ = μ₀`.
    pub fn new(s: &DMatrix<f64>, cfg: &LrrConfig) -> Result<Self> {
        let (m, n) = s.shape();
        if s.is_empty() {
            return Err(Error::arg("lrr input is empty"));
        }
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::arg("lrr input contains non-finite entries"));
        }
        let s_fro = s.norm();
        if s_fro == 0.0 {
            return Err(Error::arg("lrr input is the zero matrix"));
        }
        let s_norm2 = spectral_norm(s, 1e-8);
        let mut state = Self {
            z: DMatrix::identity(n, n),
            j: DMatrix::identity(n, n),
            e: DMatrix::zeros(m, n),
            m1: DMatrix::zeros(m, n),
            m2: DMatrix::zeros(n, n),
            mu: cfg.mu0,
            eta1: 0.0,
            k: 0,
            trace: Vec::new(),
            s_norm2_sq: s_norm2 * s_norm2,
            s_fro,
            z_prev: DMatrix::identity(n, n),
            j_prev: DMatrix::identity(n, n),
            e_prev: DMatrix::zeros(m, n),
            nuclear: n as f64,
            residual: f64::INFINITY,
            step_max: f64::INFINITY,
        };
        state.refresh_eta(cfg);
        Ok(state)
    }

    fn refresh_eta(&mut self, cfg: &LrrConfig) {
        self.eta1 = cfg.eta1_slack * self.mu * (1.0 + self.s_norm2_sq);
    }

    /// `‖S‖₂²` as estimated by power iteration.
    pub fn s_norm2_sq(&self) -> f64 {
        self.s_norm2_sq
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn step_max(&self) -> f64 {
        self.step_max
    }
}

/// `Z ← Θ_{1/η₁}(Z − ∇q(Z)/η₁)`, with
/// `∇q(Z) = μ[−Sᵀ(S − SZ − E + M₁/μ) + (Z − J + M₂/μ)]`.
pub fn z_step(state: &mut LrrState, s: &DMatrix<f64>) {
    let mu = state.mu;
    let inner = s - s * &state.z - &state.e + &state.m1 / mu;
    let grad = (-s.tr_mul(&inner) + &state.z - &state.j + &state.m2 / mu) * mu;
    let arg = &state.z - grad / state.eta1;
    let (next, nuclear) = svt_with_norm(&arg, 1.0 / state.eta1);
    state.z_prev = std::mem::replace(&mut state.z, next);
    state.nuclear = nuclear;
}

fn svt_with_norm(a: &DMatrix<f64>, eps: f64) -> (DMatrix<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    let mut nuclear = 0.0;
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        let t = sv - eps;
        if t > 0.0 {
            out += u.column(k) * v_t.row(k) * t;
            nuclear += t;
        }
    }
    (out, nuclear)
}

/// `J ← max(S_{β/μ}(Z + M₂/μ), 0)`.
pub fn j_step(state: &mut LrrState, cfg: &LrrConfig) {
    let mu = state.mu;
    let thr = cfg.beta / mu;
    let next = DMatrix::from_fn(state.z.nrows(), state.z.ncols(), |r, c| {
        shrink(state.z[(r, c)] + state.m2[(r, c)] / mu, thr).max(0.0)
    });
    state.j_prev = std::mem::replace(&mut state.j, next);
}

/// `E ← S_{λ/μ}(S − SZ + M₁/μ)`.
pub fn e_step(state: &mut LrrState, s: &DMatrix<f64>, cfg: &LrrConfig) {
    let mu = state.mu;
    let thr = cfg.lambda_err / mu;
    let next = (s - s * &state.z + &state.m1 / mu).map(|x| shrink(x, thr));
    state.e_prev = std::mem::replace(&mut state.e, next);
}

/// Dual ascent, penalty update and `η₁` refresh. Closes the iteration and appends to the trace.
pub fn dual_step(state: &mut LrrState, s: &DMatrix<f64>, cfg: &LrrConfig) {
    let mu = state.mu;
    let primal = s - s * &state.z - &state.e;
    state.m1 += &primal * mu;
    state.m2 += (&state.z - &state.j) * mu;

    state.residual = primal.norm() / state.s_fro;
    state.step_max = (state.eta1 * (&state.z - &state.z_prev).norm())
        .max(mu * (&state.j - &state.j_prev).norm())
        .max(mu * (&state.e - &state.e_prev).norm());
    state.k += 1;
    state.trace.push(TraceRecord {
        k: state.k,
        residual: state.residual,
        step_max: state.step_max,
        mu,
        nuclear_norm: state.nuclear,
        min_j: state.j.min(),
    });

    let rho = if state.step_max <= cfg.eps2 { cfg.rho0 } else { 1.0 };
    let next_mu = cfg.mu_max.min(rho * mu);
    if next_mu != mu {
        state.mu = next_mu;
        state.refresh_eta(cfg);
    }
}

/// Both the relative residual and the step criterion must hold.
pub fn check_convergence(state: &LrrState, cfg: &LrrConfig) -> bool {
    state.k > 0 && state.residual < cfg.eps1 && state.step_max <= cfg.eps2
}

#[derive(Debug, Clone)]
pub struct LrrSolution {
    pub z: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// Singular values of `Z` above `1e-3·σ_max`.
    pub effective_rank: usize,
    pub final_mu: f64,
    pub trace: Vec<TraceRecord>,
}

impl LrrSolution {
    /// Writes `k,residual,step_max,mu`.
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut body = String::from("k,residual,step_max,mu\n");
        for r in &self.trace {
            body.push_str(&format!("{},{:?},{:?},{:?}\n", r.k, r.residual, r.step_max, r.mu));
        }
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Runs Z, J, E and dual updates until convergence or `cfg.max_iter`.
pub fn lrr_solve(s: &DMatrix<f64>, cfg: &LrrConfig) -> Result<LrrSolution> {
    cfg.validate()?;
    let mut state = LrrState::new(s, cfg)?;
    let mut converged = false;
    while state.k < cfg.max_iter {
        z_step(&mut state, s);
        j_step(&mut state, cfg);
        e_step(&mut state, s, cfg);
        dual_step(&mut state, s, cfg);
        if check_convergence(&state, cfg) {
            converged = true;
            break;
        }
    }
    if !state.z.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("lrr iterates diverged".into()));
    }
    Ok(LrrSolution {
        effective_rank: effective_rank(&state.z, EFFECTIVE_RANK_TOL),
        converged,
        iterations: state.k,
        final_residual: state.residual,
        final_mu: state.mu,
        z: state.z,
        e: state.e,
        j: state.j,
        trace: state.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> DMatrix<f64> {
        DMatrix::from_fn(5, 4, |i, j| ((i * 3 + j * 7) % 11) as f64 - 5.0)
    }

    #[test]
    fn defaults_validate() {
        LrrConfig::default().validate().unwrap();
        let bad = LrrConfig { eta1_slack: 1.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Argument(_))));
        let bad = LrrConfig { eps1: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_zero_matrix() {
        let s = DMatrix::zeros(3, 3);
        assert!(matches!(lrr_solve(&s, &LrrConfig::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn iteration_cap() {
        let cfg = LrrConfig { max_iter: 1, ..Default::default() };
        let sol = lrr_solve(&small(), &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.trace.len(), 1);
    }

    #[test]
    fn j_step_formula() {
        let s = small();
        let cfg = LrrConfig::default();
        let mut st = LrrState::new(&s, &cfg).unwrap();
        st.mu = 2.0;
        st.z = DMatrix::zeros(4, 4);
        st.z[(0, 0)] = -3.0;
        st.z[(0, 1)] = 2.0;
        st.m2 = DMatrix::zeros(4, 4);
        j_step(&mut st, &cfg);
        assert_eq!(st.j[(0, 0)], 0.0);
        assert_eq!(st.j[(0, 1)], 1.5);
        let zero_beta = LrrConfig { beta: 0.0, ..cfg };
        j_step(&mut st, &zero_beta);
        assert_eq!(st.j[(0, 1)], 2.0);
    }

    #[test]
    fn e_step_formula() {
        let s = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let cfg = LrrConfig::default();
        let mut st = LrrState::new(&s, &cfg).unwrap();
        st.mu = 1.0;
        st.z = DMatrix::zeros(2, 2);
        e_step(&mut st, &s, &cfg);
        assert_relative_eq!(st.e[(0, 0)], 0.98, epsilon = 1e-15);
        assert_eq!(st.e[(0, 1)], 0.0);
        let huge = LrrConfig { lambda_err: 1e300, ..cfg };
        e_step(&mut st, &s, &huge);
        assert_eq!(st.e, DMatrix::zeros(1, 2));
    }

    #[test]
    fn dual_step_penalty() {
        let s = small();
        let cfg = LrrConfig::default();
        let mut st = LrrState::new(&s, &cfg).unwrap();
        // Feasible point with zero step: Z = J = I, E = 0 satisfies S = SZ + E.
        dual_step(&mut st, &s, &cfg);
        assert_eq!(st.m1, DMatrix::zeros(5, 4));
        assert_eq!(st.m2, DMatrix::zeros(4, 4));
        assert_relative_eq!(st.mu, 2.5e-6, max_relative = 1e-15);
        assert_relative_eq!(st.eta1, 1.02 * 2.5e-6 * (1.0 + st.s_norm2_sq()), max_relative = 1e-15);
        assert!(check_convergence(&st, &cfg));

        st.mu = cfg.mu_max;
        dual_step(&mut st, &s, &cfg);
        assert_eq!(st.mu, cfg.mu_max);
    }

    #[test]
    fn convergence_needs_both_criteria() {
        let s = small();
        let cfg = LrrConfig::default();
        let mut st = LrrState::new(&s, &cfg).unwrap();
        st.k = 1;
        st.residual = 1e-5;
        st.step_max = 0.0;
        assert!(!check_convergence(&st, &cfg));
        st.residual = 0.0;
        st.step_max = 1e9;
        assert!(!check_convergence(&st, &cfg));
    }

    #[test]
    fn z_step_at_fixpoint_is_svt() {
        let s = small();
        let cfg = LrrConfig::default();
        let mut st = LrrState::new(&s, &cfg).unwrap();
        st.mu = 10.0;
        st.refresh_eta(&cfg);
        st.z = DMatrix::from_fn(4, 4, |i, j| if i == j { 3.0 + i as f64 } else { 0.1 });
        st.j = st.z.clone();
        st.e = &s - &s * &st.z;
        let expect = crate::linalg::svt(&st.z, 1.0 / st.eta1).unwrap();
        assert!(expect.norm() > 1.0);
        z_step(&mut st, &s);
        assert_relative_eq!(st.z, expect, epsilon = 1e-9);
    }

    #[test]
    fn trace_csv() {
        let sol = lrr_solve(&small(), &LrrConfig { max_iter: 3, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        sol.write_trace_csv(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("k,residual,step_max,mu\n1,"));
        assert_eq!(text.lines().count(), 4);
    }
}
