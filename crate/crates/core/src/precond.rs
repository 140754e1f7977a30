//! Block-elimination preconditioner for the rescaled GDA iteration.
//!
//! With `M = [[I, 0], [sqrt(eta) P'Q^{-1}, I]]` and
//! `N = [[I, -sqrt(eta) Q^{-1}P], [0, I]]` the flow matrix factors as
//! `M (D + sqrt(eta) L) N = diag(Q, eta (R + P'Q^{-1}P))`. Left-multiplying by
//! `N^{-1} S M` with `S = diag(I, I/eta)` and working in `xi = N^{-1} phi`
//! turns the update into `xi <- xi - rho N^{-1} T xi`, `T = diag(Q, R + P'Q^{-1}P)`.

use crate::error::{Error, Result};
use crate::fit::{fit_decay_rate, DecayFit};
use crate::linalg::{
    self, block2x2, block_diag, condition_number, singular_values, spd_inverse, sym_min_eigenvalue,
    Matrix, Vector,
};
use crate::quadratic::QuadraticGame;

const FACTORIZATION_TOL: f64 = 1e-10;
const SPECTRUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PreconditionedSystem {
    pub eta: f64,
    pub n: usize,
    pub m_left: Matrix,
    pub n_right: Matrix,
    pub n_inv: Matrix,
    pub s_scale: Matrix,
    pub t: Matrix,
    /// `N^{-1} T`.
    pub a: Matrix,
    /// Frobenius residual of the factorization identity relative to
    /// `|M| |F| |N|`.
    pub factorization_residual: f64,
}

pub fn build(game: &QuadraticGame) -> Result<PreconditionedSystem> {
    let (n, m) = (game.n(), game.m());
    let q = game.q();
    let qmax = linalg::operator_norm(q);
    let qmin = sym_min_eigenvalue(q)?;
    if qmin <= 1e-10 * qmax.max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!(
            "Q must be positive definite (min eigenvalue {qmin:.3e})"
        )));
    }
    let q_inv = spd_inverse(q)?;
    let p = game.p();
    let se = game.eta().sqrt();
    let in_ = Matrix::identity(n, n);
    let im = Matrix::identity(m, m);
    let znm = Matrix::zeros(n, m);
    let zmn = Matrix::zeros(m, n);

    let m_left = block2x2(&in_, &znm, &(p.transpose() * &q_inv * se), &im)?;
    let q_inv_p = &q_inv * p;
    let n_right = block2x2(&in_, &(&q_inv_p * -se), &zmn, &im)?;
    let n_inv = block2x2(&in_, &(&q_inv_p * se), &zmn, &im)?;
    let s_scale = block_diag(&in_, &(&im / game.eta()))?;
    let schur = game.r() + p.transpose() * &q_inv_p;
    let schur = (&schur + schur.transpose()) * 0.5;
    let t = block_diag(q, &schur)?;

    let flow = game.flow_matrix();
    let target = block_diag(q, &(&schur * game.eta()))?;
    // rounding in the triple product scales with all three norms
    let scale = m_left.norm() * flow.norm() * n_right.norm();
    let residual = (&m_left * &flow * &n_right - target).norm() / scale.max(f64::MIN_POSITIVE);
    if residual > FACTORIZATION_TOL {
        return Err(Error::Precondition(format!(
            "factorization identity residual {residual:.3e}"
        )));
    }
    let a = &n_inv * &t;
    Ok(PreconditionedSystem {
        eta: game.eta(),
        n,
        m_left,
        n_right,
        n_inv,
        s_scale,
        t,
        a,
        factorization_residual: residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumCheck {
    pub real_nonneg: bool,
    pub max_imag: f64,
    pub min_real: f64,
}

/// Eigenvalues of `N^{-1} T` are real and nonnegative up to `1e-8 |T|`.
pub fn spectrum_is_real_nonneg(sys: &PreconditionedSystem) -> Result<SpectrumCheck> {
    let spec = linalg::eigenvalues(&sys.a)?;
    let scale = SPECTRUM_TOL * linalg::operator_norm(&sys.t);
    let max_imag = spec.max_abs_imag();
    let min_real = spec.min_real();
    Ok(SpectrumCheck {
        real_nonneg: max_imag <= scale && min_real >= -scale,
        max_imag,
        min_real,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalStep {
    pub rho: f64,
    pub contraction: f64,
    pub sym_min: f64,
    pub sigma_max: f64,
}

/// `rho = lambda_min(A + A') / (2 sigma_max(A)^2)` for `A = N^{-1} T`.
pub fn optimal_step(sys: &PreconditionedSystem) -> Result<OptimalStep> {
    optimal_step_for(&sys.a)
}

pub fn optimal_step_for(a: &Matrix) -> Result<OptimalStep> {
    let sym = a + a.transpose();
    let sym_min = sym_min_eigenvalue(&sym)?;
    if sym_min <= 0.0 {
        return Err(Error::NoStepGuarantee {
            sym_min_eigenvalue: sym_min,
        });
    }
    let sigma_max = singular_values(a)?[0];
    let ratio = sym_min * sym_min / (4.0 * sigma_max * sigma_max);
    Ok(OptimalStep {
        rho: sym_min / (2.0 * sigma_max * sigma_max),
        contraction: (1.0 - ratio).max(0.0).sqrt(),
        sym_min,
        sigma_max,
    })
}

#[derive(Debug, Clone)]
pub struct PrecondTrajectory {
    pub xi: Vec<Vector>,
    /// `phi = N xi`.
    pub phi: Vec<Vector>,
    pub x: Vec<Vector>,
    pub y: Vec<Vector>,
}

/// `xi_{j+1} = xi_j - rho N^{-1} T xi_j` for `j < k`.
pub fn iterate(sys: &PreconditionedSystem, xi0: &Vector, rho: f64, k: usize) -> Result<PrecondTrajectory> {
    if xi0.len() != sys.a.nrows() {
        return Err(Error::Dimension("xi0 does not match system".into()));
    }
    if k == 0 {
        return Err(Error::Precondition("k >= 1 required".into()));
    }
    let dim = sys.a.nrows();
    let step = Matrix::identity(dim, dim) - &sys.a * rho;
    let se = sys.eta.sqrt();
    let mut out = PrecondTrajectory {
        xi: Vec::with_capacity(k + 1),
        phi: Vec::with_capacity(k + 1),
        x: Vec::with_capacity(k + 1),
        y: Vec::with_capacity(k + 1),
    };
    let mut xi = xi0.clone();
    for j in 0..=k {
        if j > 0 {
            xi = &step * &xi;
        }
        let phi = &sys.n_right * &xi;
        out.x.push(phi.rows(0, sys.n).into_owned() / se);
        out.y.push(phi.rows(sys.n, dim - sys.n).into_owned());
        out.phi.push(phi);
        out.xi.push(xi.clone());
    }
    Ok(out)
}

/// Fit the decay rate of `|xi(t)|` under `xi' = -N^{-1} T xi`.
pub fn continuous_flow_rate(sys: &PreconditionedSystem, xi0: &Vector, horizon: f64, samples: usize) -> Result<DecayFit> {
    if samples < 10 {
        return Err(Error::Precondition("at least 10 samples required".into()));
    }
    let dt = horizon / (samples - 1) as f64;
    let step = linalg::expm(&(&sys.a * -dt))?;
    let mut xi = xi0.clone();
    let mut t = Vec::with_capacity(samples);
    let mut v = Vec::with_capacity(samples);
    for j in 0..samples {
        if j > 0 {
            xi = &step * &xi;
        }
        t.push(j as f64 * dt);
        v.push(xi.norm());
    }
    fit_decay_rate(&t, &v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityRow {
    pub eta: f64,
    pub kappa: f64,
    pub lambda_min: f64,
    pub rho_opt: Option<f64>,
    pub contraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    pub rows: Vec<UniformityRow>,
    /// `max kappa / min kappa` over the grid.
    pub kappa_variation: f64,
    pub kappa_bounded: bool,
    /// `lambda_min` at `eta = 1` (or the grid point closest to it).
    pub c_fitted: f64,
    /// `lambda_min(eta) >= c_fitted max(1, sqrt(eta)) / 2` at every grid point.
    pub lambda_scaling_holds: bool,
}

/// Allowed relative spread of `kappa(N^{-1}T)` across the grid.
pub const KAPPA_VARIATION_LIMIT: f64 = 1.05;

pub fn eta_uniformity_report(game: &QuadraticGame, eta_grid: &[f64]) -> Result<UniformityReport> {
    if eta_grid.is_empty() {
        return Err(Error::Precondition("empty eta grid".into()));
    }
    let mut rows = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let sys = build(&game.with_eta(eta)?)?;
        let kappa = condition_number(&sys.a)?;
        let lambda_min = linalg::eigenvalues(&sys.a)?.min_real();
        let step = optimal_step(&sys).ok();
        rows.push(UniformityRow {
            eta,
            kappa,
            lambda_min,
            rho_opt: step.map(|s| s.rho),
            contraction: step.map(|s| s.contraction),
        });
    }
    let kmax = rows.iter().map(|r| r.kappa).fold(f64::MIN, f64::max);
    let kmin = rows.iter().map(|r| r.kappa).fold(f64::MAX, f64::min);
    let kappa_variation = kmax / kmin;
    let anchor = rows
        .iter()
        .min_by(|a, b| a.eta.ln().abs().total_cmp(&b.eta.ln().abs()))
        .expect("nonempty grid");
    let c_fitted = anchor.lambda_min / anchor.eta.sqrt().max(1.0);
    let lambda_scaling_holds = rows
        .iter()
        .all(|r| r.lambda_min >= 0.5 * c_fitted * r.eta.sqrt().max(1.0));
    Ok(UniformityReport {
        kappa_bounded: kappa_variation <= KAPPA_VARIATION_LIMIT,
        rows,
        kappa_variation,
        c_fitted,
        lambda_scaling_holds,
    })
}
