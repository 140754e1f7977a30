//! Min-max objectives `K(x, y)` for the particle dynamics.

use crate::error::{Error, Result};
use crate::rates::KappaProfile;
use crate::rng::{NoiseRole, NoiseStream};

/// Convexity and Lipschitz constants of a kernel.
///
/// Outside radius `r` the kernel is `kappa_x`-convex in `x` and
/// `kappa_y`-concave in `y`; inside it is at worst `-m_x` / `m_y`.
/// Gradient bounds: `|dxK(x1,y1) - dxK(x2,y2)| <= l_x |dx| + lip_y |dy|`
/// and `|dyK(x1,y1) - dyK(x2,y2)| <= lip_x |dx| + l_y |dy|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub m_x: f64,
    pub m_y: f64,
    pub r: f64,
    pub lip_x: f64,
    pub lip_y: f64,
    pub l_x: f64,
    pub l_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

pub trait GameKernel: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn evaluate(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn geometry(&self) -> Geometry;

    /// True when `grad_x` is affine in `y` and `grad_y` affine in `x`, so
    /// averaging over the opponent's law reduces to evaluating at its mean.
    fn affine_in_opponent(&self) -> bool {
        false
    }

    /// Analytic lower bound for the radial convexity profile, if known.
    fn kappa_bound(&self, _side: Side) -> Option<KappaProfile> {
        None
    }
}

/// `K = kx/2 |x|^2 + a x.y - ky/2 |y|^2 + eps (cos(w x_1) - cos(w y_1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkKernel {
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub a: f64,
    pub eps: f64,
    pub omega: f64,
    pub dim: usize,
}

impl BenchmarkKernel {
    pub fn new(kappa_x: f64, kappa_y: f64, a: f64, eps: f64, omega: f64, dim: usize) -> Result<Self> {
        let all = [kappa_x, kappa_y, a, eps, omega];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("benchmark kernel parameters"));
        }
        if !(kappa_x > 0.0 && kappa_y > 0.0) {
            return Err(Error::Precondition("kappa_x, kappa_y > 0 required".into()));
        }
        if a < 0.0 || eps < 0.0 || omega < 0.0 {
            return Err(Error::Precondition("a, eps, omega >= 0 required".into()));
        }
        if dim == 0 {
            return Err(Error::Precondition("dim >= 1 required".into()));
        }
        Ok(Self {
            kappa_x,
            kappa_y,
            a,
            eps,
            omega,
            dim,
        })
    }

    fn perturbed(&self) -> bool {
        self.eps > 0.0 && self.omega > 0.0
    }

    /// Radius beyond which the cosine term can no longer halve convexity.
    pub fn radius(&self) -> f64 {
        if !self.perturbed() {
            return 0.0;
        }
        let c = 4.0 * self.eps * self.omega;
        (c / self.kappa_x).max(c / self.kappa_y)
    }

    /// `inf_{s >= r} (kappa - eps w min(w s, 2) / s)`.
    fn far_convexity(&self, kappa: f64, r: f64) -> f64 {
        if !self.perturbed() || r == 0.0 {
            return kappa;
        }
        kappa - self.eps * self.omega * (self.omega * r).min(2.0) / r
    }
}

impl GameKernel for BenchmarkKernel {
    fn dim_x(&self) -> usize {
        self.dim
    }
    fn dim_y(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        0.5 * self.kappa_x * xx + self.a * xy - 0.5 * self.kappa_y * yy
            + self.eps * ((self.omega * x[0]).cos() - (self.omega * y[0]).cos())
    }

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for k in 0..self.dim {
            out[k] = self.kappa_x * x[k] + self.a * y[k];
        }
        out[0] -= self.eps * self.omega * (self.omega * x[0]).sin();
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for k in 0..self.dim {
            out[k] = self.a * x[k] - self.kappa_y * y[k];
        }
        out[0] += self.eps * self.omega * (self.omega * y[0]).sin();
    }

    fn geometry(&self) -> Geometry {
        let r = self.radius();
        let curv = self.eps * self.omega * self.omega;
        Geometry {
            kappa_x: self.far_convexity(self.kappa_x, r),
            kappa_y: self.far_convexity(self.kappa_y, r),
            m_x: (curv - self.kappa_x).max(0.0),
            m_y: (curv - self.kappa_y).max(0.0),
            r,
            lip_x: self.a,
            lip_y: self.a,
            l_x: self.kappa_x + curv,
            l_y: self.kappa_y + curv,
        }
    }

    fn affine_in_opponent(&self) -> bool {
        true
    }

    fn kappa_bound(&self, side: Side) -> Option<KappaProfile> {
        let k = match side {
            Side::X => self.kappa_x,
            Side::Y => self.kappa_y,
        };
        Some(KappaProfile::benchmark(k, self.eps, self.omega))
    }
}

/// Sampled check of the declared geometry. Ratios at most 1 and margins at
/// least 0 mean no sampled pair contradicts the declaration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryCheck {
    pub samples: usize,
    /// `sup |dxK(1) - dxK(2)| / (l_x |dx| + lip_y |dy|)`.
    pub grad_x_ratio: f64,
    /// `sup |dyK(1) - dyK(2)| / (lip_x |dx| + l_y |dy|)`.
    pub grad_y_ratio: f64,
    /// `inf <dxK(x1,y) - dxK(x2,y), dx> / |dx|^2 - kappa_x` over `|dx| >= R`.
    pub far_x_margin: f64,
    pub far_y_margin: f64,
    /// `inf <dxK(x1,y) - dxK(x2,y), dx> / |dx|^2 + m_x` over `|dx| < R`.
    pub near_x_margin: f64,
    pub near_y_margin: f64,
}

impl GeometryCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.grad_x_ratio <= 1.0 + tol
            && self.grad_y_ratio <= 1.0 + tol
            && self.far_x_margin >= -tol
            && self.far_y_margin >= -tol
            && self.near_x_margin >= -tol
            && self.near_y_margin >= -tol
    }
}

/// Draw `samples` random pairs in a box of half-width `spread` and test the
/// declared constants. Separations are drawn on both sides of `R`.
pub fn verify_geometry(kernel: &dyn GameKernel, samples: usize, spread: f64, seed: u64) -> GeometryCheck {
    let (dx, dy) = (kernel.dim_x(), kernel.dim_y());
    let g = kernel.geometry();
    let stream = NoiseStream::new(seed);
    let mut out = GeometryCheck {
        samples,
        grad_x_ratio: 0.0,
        grad_y_ratio: 0.0,
        far_x_margin: f64::INFINITY,
        far_y_margin: f64::INFINITY,
        near_x_margin: f64::INFINITY,
        near_y_margin: f64::INFINITY,
    };
    let (mut gx1, mut gx2) = (vec![0.0; dx], vec![0.0; dx]);
    let (mut gy1, mut gy2) = (vec![0.0; dy], vec![0.0; dy]);
    let diff_norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let inner = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| {
        a.iter().zip(b).zip(c.iter().zip(d)).map(|((u, v), (p, q))| (u - v) * (p - q)).sum::<f64>()
    };
    for s in 0..samples as u64 {
        let mut rng = stream.slot(0, s, NoiseRole::Sampling);
        let mut draw = |n: usize, scale: f64| -> Vec<f64> {
            (0..n).map(|_| scale * (2.0 * rng.uniform() - 1.0)).collect()
        };
        let x1 = draw(dx, spread);
        let y1 = draw(dy, spread);
        // half the pairs are close, half are far
        let sep = if s % 2 == 0 { 0.05 * spread } else { spread };
        let x2: Vec<f64> = x1.iter().zip(draw(dx, sep)).map(|(a, b)| a + b).collect();
        let y2: Vec<f64> = y1.iter().zip(draw(dy, sep)).map(|(a, b)| a + b).collect();
        let (nx, ny) = (diff_norm(&x1, &x2), diff_norm(&y1, &y2));

        kernel.grad_x(&x1, &y1, &mut gx1);
        kernel.grad_x(&x2, &y2, &mut gx2);
        let bound = g.l_x * nx + g.lip_y * ny;
        if bound > 0.0 {
            out.grad_x_ratio = out.grad_x_ratio.max(diff_norm(&gx1, &gx2) / bound);
        }
        kernel.grad_y(&x1, &y1, &mut gy1);
        kernel.grad_y(&x2, &y2, &mut gy2);
        let bound = g.lip_x * nx + g.l_y * ny;
        if bound > 0.0 {
            out.grad_y_ratio = out.grad_y_ratio.max(diff_norm(&gy1, &gy2) / bound);
        }

        if nx > 0.0 {
            kernel.grad_x(&x2, &y1, &mut gx2);
            let q = inner(&gx1, &gx2, &x1, &x2) / (nx * nx);
            if nx >= g.r {
                out.far_x_margin = out.far_x_margin.min(q - g.kappa_x);
            } else {
                out.near_x_margin = out.near_x_margin.min(q + g.m_x);
            }
        }
        if ny > 0.0 {
            kernel.grad_y(&x1, &y2, &mut gy2);
            let q = -inner(&gy1, &gy2, &y1, &y2) / (ny * ny);
            if ny >= g.r {
                out.far_y_margin = out.far_y_margin.min(q - g.kappa_y);
            } else {
                out.near_y_margin = out.near_y_margin.min(q + g.m_y);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unperturbed_kernel_is_globally_convex() {
        let k = BenchmarkKernel::new(1.0, 2.0, 0.3, 0.0, 3.0, 2).unwrap();
        let g = k.geometry();
        assert_eq!(g.r, 0.0);
        assert_eq!(g.kappa_x, 1.0);
        assert_eq!(g.kappa_y, 2.0);
        assert_eq!((g.m_x, g.m_y), (0.0, 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let k = BenchmarkKernel::new(1.0, 0.7, 0.2, 0.3, 1.5, 2).unwrap();
        let x = [0.4, -1.1];
        let y = [0.9, 0.2];
        let mut gx = [0.0; 2];
        let mut gy = [0.0; 2];
        k.grad_x(&x, &y, &mut gx);
        k.grad_y(&x, &y, &mut gy);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (k.evaluate(&xp, &y) - k.evaluate(&xm, &y)) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-8);
            let mut yp = y;
            let mut ym = y;
            yp[i] += h;
            ym[i] -= h;
            let fd = (k.evaluate(&x, &yp) - k.evaluate(&x, &ym)) / (2.0 * h);
            assert!((fd - gy[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn declared_geometry_survives_sampling() {
        let k = BenchmarkKernel::new(1.0, 1.0, 0.1, 0.05, 2.0, 1).unwrap();
        let check = verify_geometry(&k, 10_000, 3.0, 5);
        assert!(check.holds(1e-12), "{check:?}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BenchmarkKernel::new(0.0, 1.0, 0.0, 0.0, 0.0, 1).is_err());
        assert!(BenchmarkKernel::new(1.0, 1.0, -1.0, 0.0, 0.0, 1).is_err());
        assert!(BenchmarkKernel::new(1.0, 1.0, 0.0, 0.0, 0.0, 0).is_err());
    }
}
