//! Concave distance functions and contraction constants for reflection
//! coupling.
//!
//! For a radial convexity profile `kappa(r)` and coefficients `a, b` this
//! builds `f` with `a f'' - b kappa r f' <= -c f`, following the usual
//! `f' = phi g` ansatz with `phi(r) = exp(-(b/a) int_0^r kappa~(s) s ds)`.

use std::f64::consts::{E, FRAC_PI_4, PI};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::meanfield::Geometry;

const SCAN_POINTS: usize = 8192;
const BISECT_ITERS: usize = 200;
const GRID_POINTS: usize = 4096;
const MIN_POINTS_TO_R1: usize = 512;
const MAX_GRID_POINTS: usize = 1 << 22;

/// Radial convexity profile `r -> kappa(r)`.
///
/// `floor` is a certified lower bound for `kappa(r)` at every `r >= scan_max`;
/// below `scan_max` the profile is resolved on a dense grid.
#[derive(Clone)]
pub struct KappaProfile {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    scan_max: f64,
    floor: f64,
}

impl fmt::Debug for KappaProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KappaProfile")
            .field("scan_max", &self.scan_max)
            .field("floor", &self.floor)
            .finish()
    }
}

impl KappaProfile {
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, scan_max: f64, floor: f64) -> Self {
        Self {
            eval: Arc::new(f),
            scan_max,
            floor,
        }
    }

    pub fn constant(k: f64) -> Self {
        Self::from_fn(move |_| k, 1.0, k)
    }

    /// `-m` on `[0, radius]`, `k` beyond.
    pub fn piecewise(m: f64, k: f64, radius: f64) -> Self {
        Self::from_fn(
            move |r| if r <= radius { -m } else { k },
            (2.0 * radius).max(1.0),
            k,
        )
    }

    /// Linear interpolation of samples on an ascending grid, held constant
    /// outside it.
    pub fn table(r: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        if r.len() != kappa.len() || r.is_empty() {
            return Err(Error::Dimension("profile grid and values differ".into()));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) || r[0] < 0.0 {
            return Err(Error::Precondition("profile grid must be ascending and nonnegative".into()));
        }
        if kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::NonFinite("kappa profile"));
        }
        let floor = *kappa.last().expect("nonempty");
        let scan_max = *r.last().expect("nonempty");
        let (rs, ks) = (r, kappa);
        Ok(Self::from_fn(
            move |x| {
                if x <= rs[0] {
                    return ks[0];
                }
                let i = rs.partition_point(|v| *v <= x);
                if i >= rs.len() {
                    return ks[ks.len() - 1];
                }
                let t = (x - rs[i - 1]) / (rs[i] - rs[i - 1]);
                ks[i - 1] + t * (ks[i] - ks[i - 1])
            },
            scan_max.max(f64::MIN_POSITIVE),
            floor,
        ))
    }

    /// Lower bound `kappa - eps w min(w r, 2) / r` for the cosine-perturbed
    /// quadratic, nondecreasing in `r`.
    pub fn benchmark(kappa: f64, eps: f64, omega: f64) -> Self {
        let bound = move |r: f64| {
            if eps == 0.0 || omega == 0.0 {
                kappa
            } else if r * omega <= 2.0 {
                kappa - eps * omega * omega
            } else {
                kappa - 2.0 * eps * omega / r
            }
        };
        let scan_max = if omega > 0.0 { 400.0 / omega } else { 1.0 };
        let floor = bound(scan_max);
        Self::from_fn(bound, scan_max, floor)
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn scan_max(&self) -> f64 {
        self.scan_max
    }

    /// Sampled minimum over `[r1, 2 r1]`, used as the tail constant `K`.
    pub fn tail_value(&self, r1: f64) -> f64 {
        let n = 1024;
        (0..=n)
            .map(|i| self.eval(r1 * (1.0 + i as f64 / n as f64)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `max(0, -kappa)` pointwise.
pub fn negative_part_profile(kappa: &[f64]) -> Vec<f64> {
    kappa.iter().map(|k| (-k).max(0.0)).collect()
}

struct Scan {
    r: Vec<f64>,
    kappa: Vec<f64>,
    suffix_min: Vec<f64>,
}

impl Scan {
    fn new(profile: &KappaProfile) -> Self {
        let h = profile.scan_max / (SCAN_POINTS - 1) as f64;
        let r: Vec<f64> = (0..SCAN_POINTS).map(|i| i as f64 * h).collect();
        let kappa: Vec<f64> = r.iter().map(|x| profile.eval(*x)).collect();
        let mut suffix_min = vec![profile.floor; SCAN_POINTS + 1];
        for i in (0..SCAN_POINTS).rev() {
            suffix_min[i] = suffix_min[i + 1].min(kappa[i]);
        }
        Self { r, kappa, suffix_min }
    }

    /// `inf_{s >= r} kappa(s)` resolved on the scan grid.
    fn inf_beyond(&self, profile: &KappaProfile, r: f64) -> f64 {
        let i = self.r.partition_point(|v| *v <= r);
        profile.eval(r).min(self.suffix_min[i])
    }
}

/// `R0 = inf{R : kappa >= 0 on [R, inf)}` and
/// `R1 = inf{R >= R0 : inf_{r >= R} kappa(r) R (R - R0) >= 2a/b}`.
pub fn compute_r0_r1(profile: &KappaProfile, a: f64, b: f64) -> Result<(f64, f64)> {
    if !(a >= 0.0 && b > 0.0) {
        return Err(Error::Precondition("a >= 0 and b > 0 required".into()));
    }
    if !(profile.floor > 0.0) {
        return Err(Error::NoFiniteRadius(format!(
            "profile tail {:.3e} is not positive",
            profile.floor
        )));
    }
    let scan = Scan::new(profile);
    let r0 = match scan.kappa.iter().rposition(|k| *k < 0.0) {
        None => 0.0,
        Some(i) if i + 1 == scan.r.len() => profile.scan_max,
        Some(i) => {
            let (mut lo, mut hi) = (scan.r[i], scan.r[i + 1]);
            for _ in 0..BISECT_ITERS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if profile.eval(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    let target = 2.0 * a / b;
    let h = |r: f64| scan.inf_beyond(profile, r) * r * (r - r0);
    if h(r0) >= target {
        return Ok((r0, r0));
    }
    let mut hi = r0 + (target / profile.floor).sqrt().max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while h(hi) < target {
        hi = r0 + 2.0 * (hi - r0);
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NoFiniteRadius("R1 search diverged".into()));
        }
    }
    let mut lo = r0;
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((r0, hi))
}

/// Tabulated distance function with its rate constant.
#[derive(Debug, Clone)]
pub struct RateProfile {
    pub a: f64,
    pub b: f64,
    pub r0: f64,
    pub r1: f64,
    pub r: Vec<f64>,
    pub kappa: Vec<f64>,
    pub kappa_tilde: Vec<f64>,
    pub phi: Vec<f64>,
    pub big_phi: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
    /// `int_0^{R1} Phi / phi`.
    pub integral: f64,
    pub c: f64,
    /// Largest `a f'' - b kappa r f' + c f` over the checked grid points.
    pub max_violation: f64,
    pub worst_r: f64,
}

impl RateProfile {
    /// `phi(R0)`, the constant value of `phi` beyond `R0`.
    pub fn phi_tail(&self) -> f64 {
        *self.phi.last().expect("nonempty grid")
    }

    /// `f(r)` by linear interpolation, extended linearly past the grid.
    pub fn eval_f(&self, r: f64) -> f64 {
        let n = self.r.len();
        let h = self.r[1] - self.r[0];
        if r <= 0.0 {
            return 0.0;
        }
        let x = r / h;
        let i = x.floor() as usize;
        if i + 1 >= n {
            return self.f[n - 1] + self.f_prime[n - 1] * (r - self.r[n - 1]);
        }
        let t = x - i as f64;
        self.f[i] + t * (self.f[i + 1] - self.f[i])
    }
}

/// Build `f` on a uniform grid of `[0, max(2 R1, 10)]` and verify the
/// differential inequality by finite differences.
pub fn build_f(profile: &KappaProfile, a: f64, b: f64) -> Result<RateProfile> {
    if !(a > 0.0) {
        return Err(Error::Precondition("a > 0 required".into()));
    }
    let (r0, r1) = compute_r0_r1(profile, a, b)?;
    let upper = (2.0 * r1).max(10.0);
    let mut n = GRID_POINTS;
    if r1 > 0.0 {
        let needed = (MIN_POINTS_TO_R1 as f64 * upper / r1).ceil() as usize + 1;
        n = n.max(needed);
    }
    if n > MAX_GRID_POINTS {
        return Err(Error::SizeLimit(format!("grid would need {n} points")));
    }
    let h = upper / (n - 1) as f64;
    let r: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let kappa: Vec<f64> = r.iter().map(|x| profile.eval(*x)).collect();
    let kappa_tilde = negative_part_profile(&kappa);

    let mut phi = vec![1.0; n];
    let mut exponent = 0.0;
    for i in 1..n {
        exponent += 0.5 * h * (kappa_tilde[i - 1] * r[i - 1] + kappa_tilde[i] * r[i]);
        phi[i] = (-(b / a) * exponent).exp();
    }
    let big_phi = cumulative_trapezoid(&phi, h);
    let ratio: Vec<f64> = big_phi.iter().zip(&phi).map(|(p, q)| p / q).collect();
    let cum_ratio = cumulative_trapezoid(&ratio, h);

    let k1 = ((r1 / h).floor() as usize).min(n - 2);
    let frac = r1 - r[k1];
    let at_r1 = ratio[k1] + (ratio[k1 + 1] - ratio[k1]) * frac / h;
    let integral = cum_ratio[k1] + 0.5 * frac * (ratio[k1] + at_r1);
    if !(integral > 0.0) {
        return Err(Error::Construction {
            r: r1,
            violation: f64::NAN,
        });
    }
    let c = 0.5 * a / integral;

    let g: Vec<f64> = (0..n)
        .map(|i| {
            if r[i] < r1 {
                1.0 - cum_ratio[i] / (2.0 * integral)
            } else {
                0.5
            }
        })
        .collect();
    let f_prime: Vec<f64> = phi.iter().zip(&g).map(|(p, q)| p * q).collect();
    let f = cumulative_trapezoid(&f_prime, h);

    let tol = 1e-6 * a;
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_r = 0.0;
    for i in 1..n - 1 {
        let (lo, hi) = (r[i - 1], r[i + 1]);
        let straddles = |x: f64| x > 0.0 && lo <= x && x <= hi;
        if straddles(r1) || straddles(r0) {
            continue;
        }
        let f2 = (f_prime[i + 1] - f_prime[i - 1]) / (2.0 * h);
        let v = a * f2 - b * kappa[i] * r[i] * f_prime[i] + c * f[i];
        if v > max_violation {
            max_violation = v;
            worst_r = r[i];
        }
    }
    if max_violation > tol {
        return Err(Error::Construction {
            r: worst_r,
            violation: max_violation,
        });
    }
    Ok(RateProfile {
        a,
        b,
        r0,
        r1,
        r,
        kappa,
        kappa_tilde,
        phi,
        big_phi,
        g,
        f,
        f_prime,
        integral,
        c,
        max_violation,
        worst_r,
    })
}

fn cumulative_trapezoid(v: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for i in 1..v.len() {
        out[i] = out[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
    }
    out
}

/// `4/beta ((e-1) R^2/2 + sqrt(8/(beta kappa)) R e^{pi/4} + 4/(beta kappa))^{-1}`.
pub fn closed_form_c(beta: f64, kappa: f64, radius: f64) -> f64 {
    let denom = (E - 1.0) * radius * radius / 2.0
        + (8.0 / (beta * kappa)).sqrt() * radius * FRAC_PI_4.exp()
        + 4.0 / (beta * kappa);
    4.0 / beta / denom
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CBracket {
    pub lower: f64,
    pub upper: f64,
}

impl CBracket {
    /// Containment up to a relative rounding allowance; the constant
    /// profile lands exactly on `lower`.
    pub fn contains(&self, c: f64) -> bool {
        let slack = 1e-9 * self.upper;
        c >= self.lower - slack && c <= self.upper + slack
    }
}

/// Admissible range for `c` when `kappa >= -m` on `[0, R]` and `kappa >= K`
/// beyond, valid for `R <= sqrt(a pi / (2 b m))`.
pub fn bracket_c(a: f64, b: f64, k: f64, m: f64, radius: f64) -> Result<CBracket> {
    if !(a > 0.0 && b > 0.0 && k > 0.0 && m >= 0.0 && radius >= 0.0) {
        return Err(Error::Precondition("a, b, K > 0 and m, R >= 0 required".into()));
    }
    if m > 0.0 {
        let limit = (a * PI / (2.0 * b * m)).sqrt();
        if radius > limit {
            return Err(Error::Precondition(format!(
                "radius {radius} exceeds sqrt(a pi / (2 b m)) = {limit}"
            )));
        }
    }
    let denom = (E - 1.0) * radius * radius / 2.0
        + (2.0 * a / (b * k)).sqrt() * radius * FRAC_PI_4.exp()
        + a / (b * k);
    Ok(CBracket {
        lower: 0.5 * a / denom,
        upper: a / denom,
    })
}

/// Distance weight applied to `|Z|` or `|Q|` in the coupling metric.
#[derive(Debug, Clone)]
pub enum DistanceFn {
    Identity,
    Profile(Arc<RateProfile>),
}

impl DistanceFn {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            DistanceFn::Identity => r,
            DistanceFn::Profile(p) => p.eval_f(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub r_condition: bool,
    pub lx_condition: bool,
    pub ly_condition: bool,
    pub c1: f64,
    pub c2: f64,
    pub phi1_r: f64,
    pub phi2_r: f64,
    /// Largest admissible `L_X`.
    pub lx_bound: f64,
    /// Largest admissible `L_Y`.
    pub ly_bound: f64,
    pub predicted_c: f64,
    pub prefactor_a: f64,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.r_condition && self.lx_condition && self.ly_condition
    }
}

pub const DEFAULT_SLACK: f64 = 0.01;

pub fn admissibility(geometry: &Geometry, beta: f64, eta: f64, gamma: f64) -> AdmissibilityReport {
    admissibility_with_slack(geometry, beta, eta, gamma, DEFAULT_SLACK)
}

/// Conditions of the coupling contraction theorem with `kappa~_i = m_i` on
/// `[0, R]`, so `phi_i(R) = exp(-beta m_i R^2 / 8)`.
pub fn admissibility_with_slack(
    geometry: &Geometry,
    beta: f64,
    eta: f64,
    gamma: f64,
    slack: f64,
) -> AdmissibilityReport {
    let radius = geometry.r;
    let c1 = closed_form_c(beta, geometry.kappa_x, radius);
    let c2 = closed_form_c(beta, geometry.kappa_y, radius);
    let phi = |m: f64| (-beta * m * radius * radius / 8.0).exp();
    let phi1_r = phi(geometry.m_x);
    let phi2_r = phi(geometry.m_y);
    let inv_sqrt = |m: f64| if m > 0.0 { 1.0 / m.sqrt() } else { f64::INFINITY };
    let r_limit = (2.0 * PI / beta).sqrt() * inv_sqrt(geometry.m_x).min(inv_sqrt(geometry.m_y));
    let lx_bound = c1 * phi1_r / (2.0 * gamma * eta);
    let ly_bound = 0.5 * c2 * gamma * eta * phi2_r;
    AdmissibilityReport {
        r_condition: radius <= r_limit,
        lx_condition: geometry.lip_x <= lx_bound,
        ly_condition: geometry.lip_y <= ly_bound,
        c1,
        c2,
        phi1_r,
        phi2_r,
        lx_bound,
        ly_bound,
        predicted_c: (1.0 - slack) * c1.min(eta * c2),
        prefactor_a: 2.0 * (1.0 / phi1_r).max(1.0 / (gamma * phi2_r)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_part_cases() {
        assert_eq!(negative_part_profile(&[1.0, 1.0]), vec![0.0, 0.0]);
        assert_eq!(negative_part_profile(&[-2.0, -2.0]), vec![2.0, 2.0]);
        assert_eq!(negative_part_profile(&[-1.0, 0.0, 3.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn radii_for_constant_profile() {
        let (r0, r1) = compute_r0_r1(&KappaProfile::constant(2.0), 4.0, 1.0).unwrap();
        assert_eq!(r0, 0.0);
        assert!((r1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn radii_for_sign_profile() {
        let k = 1.5;
        let p = KappaProfile::from_fn(move |r| k * (r - 1.0).signum(), 3.0, k);
        let (r0, r1) = compute_r0_r1(&p, 4.0, 1.0).unwrap();
        assert!((r0 - 1.0).abs() < 1e-12);
        let target = 8.0 / k;
        let root = (1.0 + (1.0 + 4.0 * target).sqrt()) / 2.0;
        assert!((r1 - root).abs() < 1e-10);
    }

    #[test]
    fn radii_collapse_as_a_vanishes() {
        let p = KappaProfile::piecewise(0.5, 1.0, 1.0);
        let (r0, r1) = compute_r0_r1(&p, 1e-12, 1.0).unwrap();
        assert!((r1 - r0).abs() < 1e-5);
        let (r0, r1) = compute_r0_r1(&p, 0.0, 1.0).unwrap();
        assert_eq!(r0, r1);
    }

    #[test]
    fn nonpositive_tail_has_no_radius() {
        let p = KappaProfile::constant(-1.0);
        assert!(matches!(compute_r0_r1(&p, 1.0, 1.0), Err(Error::NoFiniteRadius(_))));
    }

    #[test]
    fn globally_convex_profile_is_flat() {
        let rp = build_f(&KappaProfile::constant(1.0), 4.0, 1.0).unwrap();
        assert!(rp.phi.iter().all(|p| *p == 1.0));
        assert!(rp.r.iter().zip(&rp.big_phi).all(|(r, p)| (r - p).abs() < 1e-12));
        assert_eq!(rp.r0, 0.0);
        assert!((rp.c - 0.5).abs() < 1e-6);
    }

    #[test]
    fn closed_form_values() {
        assert!((closed_form_c(2.0, 3.0, 0.0) - 3.0).abs() < 1e-15);
        let v = 4.0 / ((E - 1.0) / 2.0 + 8f64.sqrt() * FRAC_PI_4.exp() + 4.0);
        assert!((closed_form_c(1.0, 1.0, 1.0) - v).abs() < 1e-15);
    }

    #[test]
    fn bracket_ratio_and_regime() {
        let br = bracket_c(4.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(br.upper / br.lower, 2.0);
        assert!(bracket_c(4.0, 1.0, 1.0, 100.0, 1.0).is_err());
    }

    #[test]
    fn f_interpolation_extends_linearly() {
        let rp = build_f(&KappaProfile::constant(1.0), 4.0, 1.0).unwrap();
        let end = *rp.r.last().unwrap();
        let slope = rp.f_prime[rp.f_prime.len() - 1];
        assert!((rp.eval_f(end + 2.0) - rp.eval_f(end) - 2.0 * slope).abs() < 1e-12);
        assert_eq!(rp.eval_f(0.0), 0.0);
    }

    #[test]
    fn decoupled_geometry_is_admissible() {
        let geom = Geometry {
            kappa_x: 1.0,
            kappa_y: 2.0,
            m_x: 0.0,
            m_y: 0.0,
            r: 0.0,
            lip_x: 0.0,
            lip_y: 0.0,
            l_x: 1.0,
            l_y: 2.0,
        };
        let rep = admissibility(&geom, 1.0, 0.3, 1.0);
        assert!(rep.admissible());
        assert!((rep.predicted_c - 0.99 * 0.6).abs() < 1e-12);
    }
}
