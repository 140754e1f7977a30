//! Mixed reflection-synchronous coupling of two particle systems.
//!
//! Particle `i` of the primary and of the mirror share one Gaussian increment
//! split into a reflection part (weight `rc`) and a synchronous part (weight
//! `sc`); the mirror sees the reflection part mirrored across the hyperplane
//! orthogonal to the current separation.

use rayon::prelude::*;

use super::kernel::GameKernel;
use super::particles::ParticleSystem;
use crate::error::{Error, Result};
use crate::rates::DistanceFn;
use crate::rng::{NoiseRole, NoiseStream};

/// `clamp(2r/delta - 1, 0, 1)`: zero below `delta/2`, one from `delta` on.
pub fn rc_ramp(r: f64, delta: f64) -> f64 {
    (2.0 * r / delta - 1.0).clamp(0.0, 1.0)
}

pub fn sc_of(rc: f64) -> f64 {
    (1.0 - rc * rc).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    /// Mean over particles of `f1(|Z_i|) + gamma f2(|Q_i|)`.
    pub rho: f64,
    pub z: f64,
    pub q: f64,
}

#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub primary: ParticleSystem,
    pub mirror: ParticleSystem,
    pub delta: f64,
    pub gamma: f64,
    pub f1: DistanceFn,
    pub f2: DistanceFn,
    pub trace: Vec<TracePoint>,
}

impl CoupledPair {
    pub fn new(
        primary: ParticleSystem,
        mirror: ParticleSystem,
        delta: f64,
        gamma: f64,
        f1: DistanceFn,
        f2: DistanceFn,
    ) -> Result<Self> {
        if primary.n != mirror.n || primary.dim_x != mirror.dim_x || primary.dim_y != mirror.dim_y {
            return Err(Error::Dimension("coupled legs differ in shape".into()));
        }
        if primary.beta_inv != mirror.beta_inv || primary.eta != mirror.eta {
            return Err(Error::Precondition("coupled legs differ in temperature or eta".into()));
        }
        if primary.ids != mirror.ids {
            return Err(Error::Precondition("coupled legs must share particle ids".into()));
        }
        if !(delta > 0.0 && gamma > 0.0) {
            return Err(Error::Precondition("delta > 0 and gamma > 0 required".into()));
        }
        let mut pair = Self {
            primary,
            mirror,
            delta,
            gamma,
            f1,
            f2,
            trace: Vec::new(),
        };
        pair.record();
        Ok(pair)
    }

    fn separations(&self) -> (Vec<f64>, Vec<f64>) {
        let (p, m) = (&self.primary, &self.mirror);
        let z = (0..p.n).map(|i| dist(p.xi(i), m.xi(i))).collect();
        let q = (0..p.n).map(|i| dist(p.yi(i), m.yi(i))).collect();
        (z, q)
    }

    /// Append the current distances to the trace.
    pub fn record(&mut self) {
        let (z, q) = self.separations();
        let n = z.len() as f64;
        let rho = z
            .iter()
            .zip(&q)
            .map(|(a, b)| self.f1.eval(*a) + self.gamma * self.f2.eval(*b))
            .sum::<f64>()
            / n;
        self.trace.push(TracePoint {
            t: self.primary.t,
            rho,
            z: z.iter().sum::<f64>() / n,
            q: q.iter().sum::<f64>() / n,
        });
    }

    /// One coupled Euler-Maruyama step; records the trace when `record`.
    pub fn step(&mut self, kernel: &dyn GameKernel, dt: f64, noise: &NoiseStream, record: bool) -> Result<()> {
        self.primary.check_step(kernel, dt)?;
        self.mirror.check_step(kernel, dt)?;
        let (pfx, pfy) = self.primary.drifts(kernel);
        let (mfx, mfy) = self.mirror.drifts(kernel);
        let sx = (2.0 * self.primary.beta_inv * dt).sqrt();
        let sy = (2.0 * self.primary.eta * self.primary.beta_inv * dt).sqrt();
        let step = self.primary.step_count;
        let delta = self.delta;
        let ids = &self.primary.ids;

        let dx = self.primary.dim_x;
        couple_side(
            &mut self.primary.x,
            &mut self.mirror.x,
            dx,
            &pfx,
            &mfx,
            dt,
            sx,
            delta,
            |i| {
                (
                    noise.slot(step, ids[i], NoiseRole::XReflect),
                    noise.slot(step, ids[i], NoiseRole::XSync),
                )
            },
        );
        let dy = self.primary.dim_y;
        couple_side(
            &mut self.primary.y,
            &mut self.mirror.y,
            dy,
            &pfy,
            &mfy,
            dt,
            sy,
            delta,
            |i| {
                (
                    noise.slot(step, ids[i], NoiseRole::YReflect),
                    noise.slot(step, ids[i], NoiseRole::YSync),
                )
            },
        );
        self.primary.advance_clock(dt)?;
        self.mirror.advance_clock(dt)?;
        if record {
            self.record();
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn couple_side<F>(
    a: &mut [f64],
    b: &mut [f64],
    dim: usize,
    fa: &[f64],
    fb: &[f64],
    dt: f64,
    sigma: f64,
    delta: f64,
    slots: F,
) where
    F: Fn(usize) -> (crate::rng::SlotRng, crate::rng::SlotRng) + Sync,
{
    a.par_chunks_mut(dim)
        .zip(b.par_chunks_mut(dim))
        .enumerate()
        .for_each(|(i, (ai, bi))| {
            let sep: Vec<f64> = ai.iter().zip(bi.iter()).map(|(u, v)| u - v).collect();
            let r = sep.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut e = vec![0.0; dim];
            if r > 0.0 {
                e.iter_mut().zip(&sep).for_each(|(o, s)| *o = s / r);
            } else {
                e[0] = 1.0;
            }
            let rc = rc_ramp(r, delta);
            let sc = sc_of(rc);
            let (mut refl, mut sync) = slots(i);
            let xi_r: Vec<f64> = (0..dim).map(|_| refl.normal()).collect();
            let xi_s: Vec<f64> = (0..dim).map(|_| sync.normal()).collect();
            let proj: f64 = e.iter().zip(&xi_r).map(|(u, v)| u * v).sum();
            for k in 0..dim {
                let mirrored = xi_r[k] - 2.0 * proj * e[k];
                ai[k] += dt * fa[i * dim + k] + sigma * (rc * xi_r[k] + sc * xi_s[k]);
                bi[k] += dt * fb[i * dim + k] + sigma * (rc * mirrored + sc * xi_s[k]);
            }
        });
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

/// Functional form of [`CoupledPair::step`] that always records.
pub fn coupled_step(pair: &CoupledPair, kernel: &dyn GameKernel, dt: f64, noise: &NoiseStream) -> Result<CoupledPair> {
    let mut next = pair.clone();
    next.step(kernel, dt, noise, true)?;
    Ok(next)
}
