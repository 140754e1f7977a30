//! Averaged contraction rate for interaction-dominated flows
//! `phi' = -(S + gamma L) phi` with skew `L`.
//!
//! For large `gamma` the solution follows `a(t) v(gamma t)` where
//! `v' = -L v` rotates and `a` decays at the time average
//! `mu = <S v, v> / |v0|^2` over a common period of the rotation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fit::fit_log_linear;
use crate::linalg::{self, asymmetry, operator_norm, symmetric_eigen, Matrix, Vector};

const SKEW_TOL: f64 = 1e-10;
const RATIO_TOL: f64 = 1e-9;
const MAX_DENOMINATOR: u64 = 64;
const MAX_QUADRATURE_NODES: usize = 1 << 22;

fn check_skew(l: &Matrix) -> Result<()> {
    linalg::check_square(l, "L")?;
    let sym = (l + l.transpose()).abs().max();
    let scale = l.abs().max().max(1.0);
    if sym > SKEW_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: sym });
    }
    Ok(())
}

/// Nonnegative rotation frequencies of `v' = -L v`: each conjugate pair
/// `+-i sigma` contributes one `sigma`, zero eigenvalues contribute half
/// their count (rounded up). Sorted descending.
pub fn skew_frequencies(l: &Matrix) -> Result<Vec<f64>> {
    check_skew(l)?;
    let spec = linalg::eigenvalues(l)?;
    let zero_tol = SKEW_TOL * l.abs().max().max(1.0);
    let mut out: Vec<f64> = spec
        .eigenvalues
        .iter()
        .filter(|z| z.im > zero_tol)
        .map(|z| z.im)
        .collect();
    let zeros = spec.eigenvalues.iter().filter(|z| z.im.abs() <= zero_tol).count();
    out.extend(std::iter::repeat_n(0.0, zeros.div_ceil(2)));
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Orthonormal basis adapted to a skew matrix: `L u = sigma w`,
/// `L w = -sigma u` on each rotation plane, plus a basis of the kernel.
#[derive(Debug, Clone)]
pub struct RotationBasis {
    pub planes: Vec<(f64, Vector, Vector)>,
    pub kernel: Vec<Vector>,
}

pub fn rotation_basis(l: &Matrix) -> Result<RotationBasis> {
    check_skew(l)?;
    let dim = l.nrows();
    let neg_sq = -(l * l);
    let neg_sq = (&neg_sq + neg_sq.transpose()) * 0.5;
    let (vals, vecs) = symmetric_eigen(&neg_sq)?;
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let zero_cut = 1e-10 * scale;
    let mut used: Vec<Vector> = Vec::with_capacity(dim);
    let mut planes = Vec::new();
    let mut kernel = Vec::new();
    // largest eigenvalues first so rotation planes are carved out before
    // the kernel
    for k in (0..dim).rev() {
        let mut u = vecs.column(k).into_owned();
        for b in &used {
            let c = b.dot(&u);
            u -= b * c;
        }
        let norm = u.norm();
        if norm < 1e-6 {
            continue;
        }
        u /= norm;
        if vals[k] > zero_cut {
            let sigma = vals[k].sqrt();
            let mut w = (l * &u) / sigma;
            for b in &used {
                let c = b.dot(&w);
                w -= b * c;
            }
            let wn = w.norm();
            w /= wn;
            used.push(u.clone());
            used.push(w.clone());
            planes.push(((l * &u).dot(&w), u, w));
        } else {
            used.push(u.clone());
            kernel.push(u);
        }
    }
    if used.len() != dim {
        return Err(Error::NoConvergence { iterations: used.len() });
    }
    Ok(RotationBasis { planes, kernel })
}

impl RotationBasis {
    /// `exp(-L s) v0` by exact rotation of each plane.
    pub fn propagate(&self, v0: &Vector, s: f64) -> Vector {
        let mut v = Vector::zeros(v0.len());
        for k in &self.kernel {
            v += k * k.dot(v0);
        }
        for (sigma, u, w) in &self.planes {
            let (alpha, beta) = (u.dot(v0), w.dot(v0));
            let (sn, cs) = (sigma * s).sin_cos();
            v += u * (alpha * cs + beta * sn);
            v += w * (beta * cs - alpha * sn);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRate {
    pub mu: f64,
    pub commensurate: bool,
    /// Common period when commensurate, averaging horizon otherwise.
    pub period: f64,
    pub error_estimate: f64,
    /// No rotation at all: `mu` is `<S v0, v0> / |v0|^2`.
    pub degenerate: bool,
}

/// `(p, q)` with `x ~ p/q`, `q <= MAX_DENOMINATOR`, if one exists.
fn rational_approx(x: f64) -> Option<(u64, u64)> {
    (1..=MAX_DENOMINATOR).find_map(|q| {
        let p = (x * q as f64).round();
        (p >= 1.0 && (x - p / q as f64).abs() <= RATIO_TOL * x.max(1.0)).then_some((p as u64, q))
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Common period of the given positive frequencies, if they are
/// commensurate in the sense of small-denominator rationals.
pub fn common_period(freqs: &[f64]) -> Option<f64> {
    let base = freqs.iter().copied().filter(|f| *f > 0.0).fold(f64::INFINITY, f64::min);
    if !base.is_finite() {
        return None;
    }
    let mut fracs = Vec::new();
    for &f in freqs.iter().filter(|f| **f > 0.0) {
        fracs.push(rational_approx(f / base)?);
    }
    let lcm_q = fracs.iter().fold(1u64, |acc, (_, q)| acc / gcd(acc, *q) * q);
    let ints: Vec<u64> = fracs.iter().map(|(p, q)| p * (lcm_q / q)).collect();
    let g = ints.iter().fold(0u64, |acc, n| gcd(acc, *n));
    let omega = base / lcm_q as f64 * g as f64;
    Some(2.0 * PI / omega)
}

/// `mu = (1/T) int_0^T <S v(s), v(s)> ds / |v0|^2` along `v' = -L v`.
///
/// Commensurate frequencies are averaged over exactly one common period;
/// otherwise over `horizon` (default `100 * 2 pi / sigma_min`).
pub fn averaged_rate(s: &Matrix, l: &Matrix, v0: &Vector, horizon: Option<f64>) -> Result<AveragedRate> {
    if s.shape() != l.shape() || v0.len() != s.nrows() {
        return Err(Error::Dimension("S, L and v0 must agree".into()));
    }
    let asym = asymmetry(s);
    if asym > SKEW_TOL * s.abs().max().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let v0n = v0.norm_squared();
    if !(v0n > 0.0) {
        return Err(Error::Precondition("v0 must be nonzero".into()));
    }
    let basis = rotation_basis(l)?;
    let quad = |v: &Vector| (s * v).dot(v) / v0n;
    let freqs: Vec<f64> = basis.planes.iter().map(|p| p.0).collect();
    if freqs.is_empty() {
        return Ok(AveragedRate {
            mu: quad(v0),
            commensurate: true,
            period: 0.0,
            error_estimate: 0.0,
            degenerate: true,
        });
    }
    let sigma_max = freqs.iter().copied().fold(0.0, f64::max);
    let sigma_min = freqs.iter().copied().fold(f64::INFINITY, f64::min);

    let (commensurate, span) = match common_period(&freqs) {
        Some(t0) => {
            if let Some(h) = horizon {
                if h < t0 * (1.0 - 1e-12) {
                    return Err(Error::Precondition(format!(
                        "horizon {h} shorter than the common period {t0}"
                    )));
                }
            }
            (true, t0)
        }
        None => {
            let need = 100.0 * 2.0 * PI / sigma_min;
            let h = horizon.unwrap_or(need);
            if h < need * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "horizon {h} shorter than 100 slow periods ({need})"
                )));
            }
            (false, h)
        }
    };

    // the integrand is a trigonometric polynomial with frequencies up to
    // 2 sigma_max; on a periodic window the trapezoid rule is exact once it
    // resolves them
    let harmonics = 2.0 * sigma_max * span / (2.0 * PI);
    let nodes = if commensurate {
        (4.0 * harmonics).ceil() as usize + 64
    } else {
        (32.0 * harmonics).ceil() as usize + 64
    };
    if nodes > MAX_QUADRATURE_NODES {
        return Err(Error::SizeLimit(format!("{nodes} quadrature nodes")));
    }
    let h = span / nodes as f64;
    let mu = if commensurate {
        (0..nodes).map(|k| quad(&basis.propagate(v0, k as f64 * h))).sum::<f64>() / nodes as f64
    } else {
        let mut acc = 0.5 * (quad(v0) + quad(&basis.propagate(v0, span)));
        for k in 1..nodes {
            acc += quad(&basis.propagate(v0, k as f64 * h));
        }
        acc / nodes as f64
    };
    let error_estimate = if commensurate {
        0.0
    } else {
        let mut nu = f64::INFINITY;
        for (i, a) in freqs.iter().enumerate() {
            nu = nu.min(2.0 * a);
            for b in &freqs[i + 1..] {
                let d = (a - b).abs();
                if d > 0.0 {
                    nu = nu.min(d);
                }
            }
        }
        2.0 * operator_norm(s) * v0.norm_squared() / v0n / (nu * span)
    };
    Ok(AveragedRate {
        mu,
        commensurate,
        period: span,
        error_estimate,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuLowerBound {
    pub bound: f64,
    /// Singular values repeat within `1e-8`; the bound is still returned.
    pub degenerate: bool,
    /// `(sigma_j, (u_j'Q u_j + w_j'R w_j) / 2)` per singular triplet.
    pub modes: Vec<(f64, f64)>,
}

/// `mu >= min_j (u_j'Q u_j + w_j'R w_j) / 2` over the singular triplets of `P`.
pub fn mu_lower_bound(q: &Matrix, r: &Matrix, p: &Matrix) -> Result<MuLowerBound> {
    let n = p.nrows();
    if p.ncols() != n || q.shape() != (n, n) || r.shape() != (n, n) {
        return Err(Error::Dimension("square P with matching Q, R required".into()));
    }
    linalg::check_finite(p, "P")?;
    let svd = p.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let wt = svd.v_t.as_ref().expect("requested");
    let mut modes = Vec::with_capacity(n);
    for j in 0..n {
        let uj = u.column(j).into_owned();
        let wj = wt.row(j).transpose();
        let val = 0.5 * ((q * &uj).dot(&uj) + (r * &wj).dot(&wj));
        modes.push((svd.singular_values[j], val));
    }
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let degenerate = sv.windows(2).any(|w| (w[0] - w[1]).abs() < 1e-8);
    let bound = modes.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    Ok(MuLowerBound {
        bound,
        degenerate,
        modes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingRow {
    pub gamma: f64,
    pub fitted: f64,
    pub mu: f64,
    pub error: f64,
}

/// Samples per fast rotation period in the envelope fit.
const ENVELOPE_SAMPLES: usize = 64;

/// For each `gamma`, fit the decay of the per-period maxima of `|phi(t)|`
/// under `phi' = -(S + gamma L) phi` and compare with `mu`.
pub fn validate_averaging(s: &Matrix, l: &Matrix, gammas: &[f64], v0: &Vector) -> Result<Vec<AveragingRow>> {
    if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Precondition("gammas must be positive".into()));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("gammas must be ascending".into()));
    }
    let avg = averaged_rate(s, l, v0, None)?;
    let freqs = skew_frequencies(l)?;
    let sigma = freqs.iter().copied().filter(|f| *f > 0.0).fold(f64::INFINITY, f64::min);
    let mu = avg.mu;
    let horizon = if mu > 0.0 { 5.0 / mu } else { 10.0 };
    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let period = if sigma.is_finite() {
            2.0 * PI / (gamma * sigma)
        } else {
            horizon / 100.0
        };
        let windows = ((horizon / period).ceil() as usize).max(10);
        let dt = period / ENVELOPE_SAMPLES as f64;
        let a = s + l * gamma;
        let step = linalg::expm(&(&a * -dt))?;
        let mut phi = v0.clone();
        let mut times = Vec::with_capacity(windows);
        let mut maxima = Vec::with_capacity(windows);
        for k in 0..windows {
            let mut best = phi.norm();
            for _ in 1..ENVELOPE_SAMPLES {
                phi = &step * &phi;
                best = best.max(phi.norm());
            }
            phi = &step * &phi;
            times.push(k as f64 * period);
            maxima.push(best);
        }
        let fit = fit_log_linear(&times, &maxima)?;
        rows.push(AveragingRow {
            gamma,
            fitted: fit.rate,
            mu,
            error: (fit.rate - mu).abs(),
        });
    }
    Ok(rows)
}
