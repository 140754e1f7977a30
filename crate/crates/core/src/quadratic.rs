//! Two-timescale GDA on the quadratic game
//! `K(x, y) = x'Qx/2 + x'Py - y'Ry/2` with learning-rate ratio `eta`.
//!
//! In the rescaled variable `phi = [sqrt(eta) x, y]` the flow reads
//! `phi' = -(D + sqrt(eta) L) phi` with `D = diag(Q, eta R)` and the skew
//! interaction `L = [[0, P], [-P', 0]]`. This module assembles those
//! matrices, measures the spectral rate, extracts the constants of the
//! hypocoercive Lyapunov argument, and simulates trajectories.

use crate::error::{Error, Result};
use crate::fit::{fit_decay_rate, DecayFit};
use crate::linalg::{
    self, asymmetry, block2x2, block_diag, kernel_projection, operator_norm, projector_range_basis,
    symmetric_eigen, Matrix, Vector, DEFAULT_RANK_TOL,
};
use crate::rng::{NoiseRole, NoiseStream};

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGame {
    q: Matrix,
    r: Matrix,
    p: Matrix,
    eta: f64,
}

impl QuadraticGame {
    pub fn new(q: Matrix, r: Matrix, p: Matrix, eta: f64) -> Result<Self> {
        let (n, m) = (q.nrows(), r.nrows());
        if q.ncols() != n || r.ncols() != m || p.nrows() != n || p.ncols() != m || n == 0 || m == 0
        {
            return Err(Error::Dimension(format!(
                "Q is {}x{}, R is {}x{}, P is {}x{}",
                q.nrows(),
                q.ncols(),
                r.nrows(),
                r.ncols(),
                p.nrows(),
                p.ncols()
            )));
        }
        linalg::check_finite(&q, "Q")?;
        linalg::check_finite(&r, "R")?;
        linalg::check_finite(&p, "P")?;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Precondition(format!("eta > 0 required, got {eta}")));
        }
        for block in [&q, &r] {
            let asym = asymmetry(block);
            if asym > SYMMETRY_TOL {
                return Err(Error::NotSymmetric { asymmetry: asym });
            }
            let min = symmetric_eigen(block)?.0[0];
            if min < -SYMMETRY_TOL {
                return Err(Error::NotPsd {
                    min_eigenvalue: min,
                });
            }
        }
        Ok(Self { q, r, p, eta })
    }

    /// Scalar game, handy for hand-checkable cases.
    pub fn scalar(q: f64, r: f64, p: f64, eta: f64) -> Result<Self> {
        Self::new(
            Matrix::from_element(1, 1, q),
            Matrix::from_element(1, 1, r),
            Matrix::from_element(1, 1, p),
            eta,
        )
    }

    /// Seed-fixed random game: `Q = AA'/k`, `R = BB'/k` with Gaussian `A`
    /// (`n x k`), `B` (`m x k`) and a Gaussian interaction scaled by
    /// `1/sqrt(max(n, m))`.
    pub fn random(n: usize, m: usize, eta: f64, seed: u64, inner: usize) -> Result<Self> {
        let stream = NoiseStream::new(seed);
        let gauss = |rows: usize, cols: usize, tag: u64| {
            let mut slot = stream.slot(tag, 0, NoiseRole::Sampling);
            Matrix::from_fn(rows, cols, |_, _| slot.normal())
        };
        let a = gauss(n, inner, 0);
        let b = gauss(m, inner, 1);
        let p = gauss(n, m, 2) / (n.max(m) as f64).sqrt();
        let q = &a * a.transpose() / inner as f64;
        let r = &b * b.transpose() / inner as f64;
        let sym = |x: Matrix| (&x + x.transpose()) * 0.5;
        Self::new(sym(q), sym(r), p, eta)
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(self.q.clone(), self.r.clone(), self.p.clone(), eta)
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }
    pub fn r(&self) -> &Matrix {
        &self.r
    }
    pub fn p(&self) -> &Matrix {
        &self.p
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn n(&self) -> usize {
        self.q.nrows()
    }
    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    pub fn assemble(&self) -> SystemMatrices {
        let (n, m) = (self.n(), self.m());
        let d = block_diag(&self.q, &(&self.r * self.eta)).expect("validated shapes");
        let l = block2x2(
            &Matrix::zeros(n, n),
            &self.p,
            &(-self.p.transpose()),
            &Matrix::zeros(m, m),
        )
        .expect("validated shapes");
        let s = block_diag(&self.q, &self.r).expect("validated shapes");
        SystemMatrices { d, l, s }
    }

    /// `D + sqrt(eta) L`, the generator of the rescaled flow in time `t`.
    pub fn flow_matrix(&self) -> Matrix {
        let sys = self.assemble();
        &sys.d + &sys.l * self.eta.sqrt()
    }

    /// Generator of the flow in the original variables `(x, y)`.
    pub fn original_flow_matrix(&self) -> Matrix {
        block2x2(
            &self.q,
            &self.p,
            &(-self.p.transpose() * self.eta),
            &(&self.r * self.eta),
        )
        .expect("validated shapes")
    }
}

/// `D = diag(Q, eta R)`, `L = [[0, P], [-P', 0]]`, `S = diag(Q, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub d: Matrix,
    pub l: Matrix,
    pub s: Matrix,
}

pub fn assemble(game: &QuadraticGame) -> SystemMatrices {
    game.assemble()
}

/// `mu_eta = min Re Sp(D + sqrt(eta) L)`.
pub fn spectral_rate(game: &QuadraticGame) -> Result<f64> {
    Ok(linalg::eigenvalues(&game.flow_matrix())?.min_real())
}

/// Least real part of `D / sqrt(eta) + L`, i.e. `mu_eta / sqrt(eta)`: the
/// rate in rescaled time `s = sqrt(eta) t`.
pub fn rescaled_spectral_rate(game: &QuadraticGame) -> Result<f64> {
    let sys = game.assemble();
    let a = &sys.d / game.eta.sqrt() + &sys.l;
    Ok(linalg::eigenvalues(&a)?.min_real())
}

/// `M = -(I + (L Pi)'(L Pi))^{-1} (L Pi)'`.
pub fn build_m(l: &Matrix, pi: &Matrix) -> Result<Matrix> {
    if l.shape() != pi.shape() || l.nrows() != l.ncols() {
        return Err(Error::Dimension("L and projector must be equal square shapes".into()));
    }
    let pl_p = pi * l * pi;
    let norm = pl_p.abs().max();
    if norm > 1e-8 {
        return Err(Error::AssumptionViolated { norm });
    }
    let lp = l * pi;
    let lpt = lp.transpose();
    let n = l.nrows();
    let lhs = Matrix::identity(n, n) + &lpt * &lp;
    let inv = lhs
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite("I + (L Pi)'(L Pi)"))?;
    Ok(-(inv * lpt))
}

/// Which degenerate dissipation the Lyapunov argument is built around.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `eta << 1`: projector onto the kernel of `diag(Q, 0)`.
    SmallEta,
    /// `eta >> 1`: projector onto the kernel of `diag(0, R)`.
    LargeEta,
}

impl Regime {
    pub fn for_eta(eta: f64) -> Self {
        if eta <= 1.0 {
            Regime::SmallEta
        } else {
            Regime::LargeEta
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::SmallEta => "small-eta",
            Regime::LargeEta => "large-eta",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HypocoercivityReport {
    pub regime: Regime,
    pub projector: Matrix,
    pub m: Matrix,
    /// Least nonzero eigenvalue of `Q` (small eta) or `R` (large eta).
    pub lambda_coercive: f64,
    /// Best constant in `|L Pi phi|^2 >= lambda_L |Pi phi|^2`.
    pub lambda_l: f64,
    /// `|M S|`, bounding `<M S phi, phi>` by `Lambda |(I - Pi) phi| |phi|`.
    pub lambda_upper: f64,
    /// `|M L|`.
    pub c_m: f64,
    /// Frobenius norm of the neglected block (`R` or `Q`).
    pub c_perturb: f64,
    pub epsilon: f64,
    /// Smallest eigenvalue of the 2x2 dissipation matrix before the
    /// perturbation term is removed.
    pub schur_min: f64,
    /// Certified dissipation rate of `H` per unit `|phi|^2`, clamped at 0.
    pub predicted_rate: f64,
    pub macroscopic_coercive: bool,
    pub diagnostic: Option<String>,
}

pub fn coercivity_constants(game: &QuadraticGame, regime: Regime) -> Result<HypocoercivityReport> {
    let (n, m) = (game.n(), game.m());
    let sys = game.assemble();
    let eta = game.eta();
    let degenerate = match regime {
        Regime::SmallEta => block_diag(game.q(), &Matrix::zeros(m, m))?,
        Regime::LargeEta => block_diag(&Matrix::zeros(n, n), game.r())?,
    };
    let pi = kernel_projection(&degenerate, DEFAULT_RANK_TOL)?;
    let m_op = build_m(&sys.l, &pi)?;

    let block = match regime {
        Regime::SmallEta => game.q(),
        Regime::LargeEta => game.r(),
    };
    let (vals, _) = symmetric_eigen(block)?;
    let cutoff = DEFAULT_RANK_TOL * vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let lambda_coercive = vals.iter().copied().find(|v| *v > cutoff).unwrap_or(0.0);

    let basis = projector_range_basis(&pi)?;
    let lambda_l = if basis.ncols() == 0 {
        0.0
    } else {
        let ltl = sys.l.transpose() * &sys.l;
        symmetric_eigen(&(basis.transpose() * ltl * &basis))?.0[0].max(0.0)
    };

    let lambda_upper = operator_norm(&(&m_op * &sys.s));
    let c_m = operator_norm(&(&m_op * &sys.l));
    let (c_perturb, epsilon) = match regime {
        Regime::SmallEta => (game.r().norm(), eta.sqrt().min(0.5)),
        Regime::LargeEta => (game.q().norm(), (1.0 / eta.sqrt()).min(0.5)),
    };

    let sqrt_eta = eta.sqrt();
    let (s_pp, s_pm, perturbation) = match regime {
        Regime::SmallEta => (
            lambda_coercive / sqrt_eta,
            -epsilon * (lambda_upper / (2.0 * sqrt_eta) + c_perturb * sqrt_eta / 2.0 + 1.0 + c_m),
            (1.0 + epsilon) * c_perturb * sqrt_eta,
        ),
        Regime::LargeEta => (
            lambda_coercive * sqrt_eta,
            -epsilon * (lambda_upper * sqrt_eta / 2.0 + c_perturb / (2.0 * sqrt_eta) + 1.0 + c_m),
            (1.0 + epsilon) * c_perturb / sqrt_eta,
        ),
    };
    let s_mm = epsilon * lambda_l / (1.0 + lambda_l);
    let schur_min = 0.5 * (s_pp + s_mm - ((s_pp - s_mm).powi(2) + s_pm * s_pm).sqrt());

    let macroscopic_coercive = lambda_l > DEFAULT_RANK_TOL;
    let mut diagnostic = None;
    let predicted_rate = if !macroscopic_coercive {
        diagnostic = Some(format!(
            "macroscopic coercivity fails: min |L Pi phi|^2 / |Pi phi|^2 = {lambda_l:.3e} on range(Pi)"
        ));
        0.0
    } else if lambda_coercive <= 0.0 {
        diagnostic = Some("microscopic coercivity fails: coercive block is zero".into());
        0.0
    } else {
        (schur_min - perturbation).max(0.0)
    };
    if diagnostic.is_none() && predicted_rate == 0.0 {
        diagnostic = Some(format!(
            "no certified contraction: schur minimum {schur_min:.3e} <= perturbation {perturbation:.3e}"
        ));
    }

    Ok(HypocoercivityReport {
        regime,
        projector: pi,
        m: m_op,
        lambda_coercive,
        lambda_l,
        lambda_upper,
        c_m,
        c_perturb,
        epsilon,
        schur_min,
        predicted_rate,
        macroscopic_coercive,
        diagnostic,
    })
}

/// `H(phi) = |phi|^2 / 2 - eps <M phi, phi>`.
pub fn lyapunov_h(phi: &Vector, m: &Matrix, epsilon: f64) -> f64 {
    0.5 * phi.norm_squared() - epsilon * (m * phi).dot(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Matrix exponential of the step propagator.
    Exact,
    Rk4,
    Euler,
}

#[derive(Debug, Clone)]
pub struct GdaSample {
    pub t: f64,
    /// Rescaled time `sqrt(eta) t`.
    pub s: f64,
    pub x: Vector,
    pub y: Vector,
    /// `eta |x|^2 + |y|^2 = |phi|^2`.
    pub norm_sq: f64,
    pub lyapunov: Option<f64>,
}

impl GdaSample {
    /// Rescaled state `z = sqrt(eta) x`.
    pub fn z(&self, eta: f64) -> Vector {
        &self.x * eta.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    NormSq,
    Lyapunov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeAxis {
    Original,
    Rescaled,
}

#[derive(Debug, Clone)]
pub struct GdaTrajectory {
    pub eta: f64,
    pub samples: Vec<GdaSample>,
}

impl GdaTrajectory {
    pub fn series(&self, observable: Observable, axis: TimeAxis) -> (Vec<f64>, Vec<f64>) {
        self.samples
            .iter()
            .map(|s| {
                let t = match axis {
                    TimeAxis::Original => s.t,
                    TimeAxis::Rescaled => s.s,
                };
                let v = match observable {
                    Observable::NormSq => s.norm_sq,
                    Observable::Lyapunov => s.lyapunov.unwrap_or(f64::NAN),
                };
                (t, v)
            })
            .unzip()
    }

    pub fn fit(&self, observable: Observable, axis: TimeAxis) -> Result<DecayFit> {
        if observable == Observable::Lyapunov && self.samples.iter().any(|s| s.lyapunov.is_none()) {
            return Err(Error::Fit("trajectory has no Lyapunov record".into()));
        }
        let (t, v) = self.series(observable, axis);
        fit_decay_rate(&t, &v)
    }
}

/// Lyapunov weights to evaluate along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovSpec<'a> {
    pub m: &'a Matrix,
    pub epsilon: f64,
}

/// Simulate `x' = -Qx - Py`, `y' = -eta R y + eta P'x` sampled every `dt`.
pub fn simulate_gda(
    game: &QuadraticGame,
    x0: &Vector,
    y0: &Vector,
    horizon: f64,
    dt: f64,
    integrator: Integrator,
    lyapunov: Option<LyapunovSpec<'_>>,
) -> Result<GdaTrajectory> {
    let (n, m) = (game.n(), game.m());
    if x0.len() != n || y0.len() != m {
        return Err(Error::Dimension("initial state does not match game".into()));
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::Precondition("dt > 0 and horizon >= 0 required".into()));
    }
    let a = game.original_flow_matrix();
    let steps = (horizon / dt).round() as usize;
    let step_matrix = match integrator {
        Integrator::Exact => linalg::expm(&(&a * -dt))?,
        Integrator::Rk4 => {
            let id = Matrix::identity(n + m, n + m);
            let h = &a * -dt;
            let h2 = &h * &h;
            let h3 = &h2 * &h;
            let h4 = &h3 * &h;
            id + &h + h2 / 2.0 + h3 / 6.0 + h4 / 24.0
        }
        Integrator::Euler => {
            let limit = 1.0 / (2.0 * operator_norm(&game.flow_matrix()));
            if dt >= limit {
                return Err(Error::UnstableStep { dt, limit });
            }
            Matrix::identity(n + m, n + m) - &a * dt
        }
    };
    let eta = game.eta();
    let sqrt_eta = eta.sqrt();
    let mut state = Vector::zeros(n + m);
    state.rows_mut(0, n).copy_from(x0);
    state.rows_mut(n, m).copy_from(y0);
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if k > 0 {
            state = &step_matrix * &state;
        }
        let x = state.rows(0, n).into_owned();
        let y = state.rows(n, m).into_owned();
        let mut phi = state.clone();
        phi.rows_mut(0, n).scale_mut(sqrt_eta);
        let t = k as f64 * dt;
        samples.push(GdaSample {
            t,
            s: sqrt_eta * t,
            norm_sq: phi.norm_squared(),
            lyapunov: lyapunov.map(|l| lyapunov_h(&phi, l.m, l.epsilon)),
            x,
            y,
        });
    }
    Ok(GdaTrajectory { eta, samples })
}
