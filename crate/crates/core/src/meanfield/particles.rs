//! Interacting particle discretization of the mean-field GDA Langevin flow.

use rayon::prelude::*;

use super::kernel::GameKernel;
use crate::error::{Error, Result};
use crate::rng::{NoiseRole, NoiseStream};

/// `N` paired strategy samples `(X_i, Y_i)` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub n: usize,
    pub dim_x: usize,
    pub dim_y: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Noise key of each particle; permuting particles together with their
    /// ids leaves every draw unchanged.
    pub ids: Vec<u64>,
    pub beta_inv: f64,
    pub eta: f64,
    pub t: f64,
    pub step_count: u64,
}

impl ParticleSystem {
    pub fn new(x: Vec<f64>, y: Vec<f64>, dim_x: usize, dim_y: usize, beta_inv: f64, eta: f64) -> Result<Self> {
        if dim_x == 0 || dim_y == 0 || x.is_empty() || x.len() % dim_x != 0 {
            return Err(Error::Dimension("particle array shape".into()));
        }
        let n = x.len() / dim_x;
        if y.len() != n * dim_y {
            return Err(Error::Dimension(format!("{n} x-particles but {} y-values", y.len())));
        }
        if !(beta_inv >= 0.0 && beta_inv.is_finite()) {
            return Err(Error::Precondition("temperature must be finite and >= 0".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Precondition(format!("eta > 0 required, got {eta}")));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("particle coordinates"));
        }
        Ok(Self {
            n,
            dim_x,
            dim_y,
            x,
            y,
            ids: (0..n as u64).collect(),
            beta_inv,
            eta,
            t: 0.0,
            step_count: 0,
        })
    }

    /// Independent Gaussian particles around `(center_x, center_y)`; `leg`
    /// separates initial draws of systems that share a seed.
    #[allow(clippy::too_many_arguments)]
    pub fn gaussian(
        n: usize,
        dim_x: usize,
        dim_y: usize,
        center_x: f64,
        center_y: f64,
        spread: f64,
        beta_inv: f64,
        eta: f64,
        noise: &NoiseStream,
        leg: u64,
    ) -> Result<Self> {
        let mut x = vec![0.0; n * dim_x];
        let mut y = vec![0.0; n * dim_y];
        for i in 0..n {
            let mut slot = noise.slot(u64::MAX - leg, i as u64, NoiseRole::Init);
            for v in &mut x[i * dim_x..(i + 1) * dim_x] {
                *v = center_x + spread * slot.normal();
            }
            for v in &mut y[i * dim_y..(i + 1) * dim_y] {
                *v = center_y + spread * slot.normal();
            }
        }
        Self::new(x, y, dim_x, dim_y, beta_inv, eta)
    }

    pub fn xi(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim_x..(i + 1) * self.dim_x]
    }

    pub fn yi(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim_y..(i + 1) * self.dim_y]
    }

    pub fn mean_x(&self) -> Vec<f64> {
        column_mean(&self.x, self.dim_x, self.n)
    }

    pub fn mean_y(&self) -> Vec<f64> {
        column_mean(&self.y, self.dim_y, self.n)
    }

    /// Reorder particles (and their noise ids) by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (dst, &src) in perm.iter().enumerate() {
            out.x[dst * self.dim_x..(dst + 1) * self.dim_x].copy_from_slice(self.xi(src));
            out.y[dst * self.dim_y..(dst + 1) * self.dim_y].copy_from_slice(self.yi(src));
            out.ids[dst] = self.ids[src];
        }
        out
    }

    pub fn check_step(&self, kernel: &dyn GameKernel, dt: f64) -> Result<()> {
        if kernel.dim_x() != self.dim_x || kernel.dim_y() != self.dim_y {
            return Err(Error::Dimension("kernel and particle dimensions differ".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Precondition("dt > 0 required".into()));
        }
        let l_y = kernel.geometry().l_y;
        if l_y > 0.0 {
            let limit = 0.5 / (self.eta * l_y);
            if dt >= limit {
                return Err(Error::UnstableStep { dt, limit });
            }
        }
        Ok(())
    }

    /// Per-particle drifts `(-E_q dxK(X_i, .), eta E_p dyK(., Y_i))`.
    pub fn drifts(&self, kernel: &dyn GameKernel) -> (Vec<f64>, Vec<f64>) {
        let (dx, dy) = (self.dim_x, self.dim_y);
        let mut fx = vec![0.0; self.n * dx];
        let mut fy = vec![0.0; self.n * dy];
        if kernel.affine_in_opponent() {
            let my = self.mean_y();
            let mx = self.mean_x();
            fx.par_chunks_mut(dx).enumerate().for_each(|(i, out)| {
                kernel.grad_x(self.xi(i), &my, out);
                out.iter_mut().for_each(|v| *v = -*v);
            });
            fy.par_chunks_mut(dy).enumerate().for_each(|(i, out)| {
                kernel.grad_y(&mx, self.yi(i), out);
                out.iter_mut().for_each(|v| *v *= self.eta);
            });
        } else {
            let inv_n = 1.0 / self.n as f64;
            fx.par_chunks_mut(dx).enumerate().for_each(|(i, out)| {
                let mut g = vec![0.0; dx];
                for j in 0..self.n {
                    kernel.grad_x(self.xi(i), self.yi(j), &mut g);
                    out.iter_mut().zip(&g).for_each(|(o, v)| *o -= v * inv_n);
                }
            });
            fy.par_chunks_mut(dy).enumerate().for_each(|(i, out)| {
                let mut g = vec![0.0; dy];
                for j in 0..self.n {
                    kernel.grad_y(self.xi(j), self.yi(i), &mut g);
                    out.iter_mut().zip(&g).for_each(|(o, v)| *o += self.eta * v * inv_n);
                }
            });
        }
        (fx, fy)
    }

    fn finish_step(&mut self, dt: f64) -> Result<()> {
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: self.step_count });
        }
        self.step_count += 1;
        self.t = self.step_count as f64 * dt;
        Ok(())
    }

    /// One Euler-Maruyama step with independent noise per particle.
    pub fn step(&mut self, kernel: &dyn GameKernel, dt: f64, noise: &NoiseStream) -> Result<()> {
        self.check_step(kernel, dt)?;
        let (fx, fy) = self.drifts(kernel);
        let sx = (2.0 * self.beta_inv * dt).sqrt();
        let sy = (2.0 * self.eta * self.beta_inv * dt).sqrt();
        let step = self.step_count;
        let (dx, dy) = (self.dim_x, self.dim_y);
        let ids = &self.ids;
        self.x.par_chunks_mut(dx).enumerate().for_each(|(i, xi)| {
            let mut slot = noise.slot(step, ids[i], NoiseRole::X);
            for (k, v) in xi.iter_mut().enumerate() {
                *v += dt * fx[i * dx + k] + sx * slot.normal();
            }
        });
        self.y.par_chunks_mut(dy).enumerate().for_each(|(i, yi)| {
            let mut slot = noise.slot(step, ids[i], NoiseRole::Y);
            for (k, v) in yi.iter_mut().enumerate() {
                *v += dt * fy[i * dy + k] + sy * slot.normal();
            }
        });
        self.finish_step(dt)
    }

    pub(crate) fn advance_clock(&mut self, dt: f64) -> Result<()> {
        self.finish_step(dt)
    }
}

fn column_mean(v: &[f64], dim: usize, n: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for row in v.chunks(dim) {
        m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= n as f64);
    m
}

/// Functional form of [`ParticleSystem::step`].
pub fn step_particles(
    sys: &ParticleSystem,
    kernel: &dyn GameKernel,
    dt: f64,
    noise: &NoiseStream,
) -> Result<ParticleSystem> {
    let mut next = sys.clone();
    next.step(kernel, dt, noise)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::kernel::BenchmarkKernel;

    #[test]
    fn deterministic_ode_limit() {
        let k = BenchmarkKernel::new(1.0, 1.0, 0.0, 0.0, 0.0, 1).unwrap();
        let noise = NoiseStream::new(1);
        let mut sys = ParticleSystem::new(vec![1.0], vec![0.5], 1, 1, 0.0, 1.0).unwrap();
        let dt = 1e-3;
        for _ in 0..1000 {
            sys.step(&k, dt, &noise).unwrap();
        }
        let exact = (-1.0f64).exp();
        assert!((sys.x[0] - exact).abs() < 1e-3);
        assert!((sys.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stiffness_guard() {
        let k = BenchmarkKernel::new(1.0, 10.0, 0.0, 0.0, 0.0, 1).unwrap();
        let mut sys = ParticleSystem::new(vec![1.0], vec![0.5], 1, 1, 1.0, 1.0).unwrap();
        let err = sys.step(&k, 0.1, &NoiseStream::new(0)).unwrap_err();
        assert!(matches!(err, Error::UnstableStep { .. }));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ParticleSystem::new(vec![1.0, 2.0], vec![0.5], 1, 1, 1.0, 1.0).is_err());
        assert!(ParticleSystem::new(vec![1.0], vec![0.5], 1, 1, 1.0, 0.0).is_err());
        assert!(ParticleSystem::new(vec![f64::NAN], vec![0.5], 1, 1, 1.0, 1.0).is_err());
    }
}
