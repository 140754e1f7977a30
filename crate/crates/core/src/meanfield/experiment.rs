//! Coupled-pair contraction runs averaged over seeds.

use std::sync::Arc;

use rayon::prelude::*;

use super::coupling::CoupledPair;
use super::kernel::{GameKernel, Side};
use super::mne::GridMeasurePair;
use super::particles::ParticleSystem;
use super::transport::{wasserstein1, WeightedPoints};
use crate::error::{Error, Result};
use crate::fit::{fit_decay_rate, DecayFit};
use crate::rates::{admissibility, build_f, AdmissibilityReport, DistanceFn, KappaProfile};
use crate::rng::NoiseStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub beta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Steps between trace samples.
    pub record_every: usize,
}

/// Gaussian clouds the two legs start from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingInit {
    pub primary: (f64, f64),
    pub mirror: (f64, f64),
    pub spread: f64,
}

impl Default for CouplingInit {
    fn default() -> Self {
        Self {
            primary: (2.0, 2.0),
            mirror: (-2.0, -2.0),
            spread: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct W1Sample {
    pub t: f64,
    pub w1_x: f64,
    pub w1_y: f64,
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    pub z: Vec<f64>,
    pub q: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub admissibility: AdmissibilityReport,
    pub predicted_c: f64,
    /// True when the kernel fails the admissibility conditions.
    pub outside_guarantee: bool,
    /// Fitted rate is at least half the predicted rate.
    pub ratio_ok: bool,
    pub strictly_decreasing: bool,
    /// Seed-averaged marginal distances from the primary leg to the MNE.
    pub w1_to_mne: Vec<W1Sample>,
}

/// Distance weights for the coupling metric: identity when the kernel is
/// globally convex-concave, otherwise the constructed concave profile.
pub fn distance_functions(kernel: &dyn GameKernel, beta: f64) -> Result<(DistanceFn, DistanceFn)> {
    let g = kernel.geometry();
    if g.r == 0.0 {
        return Ok((DistanceFn::Identity, DistanceFn::Identity));
    }
    let a = 4.0 / beta;
    let side = |side: Side, m: f64, k: f64| -> Result<DistanceFn> {
        let profile = kernel
            .kappa_bound(side)
            .unwrap_or_else(|| KappaProfile::piecewise(m, k, g.r));
        Ok(DistanceFn::Profile(Arc::new(build_f(&profile, a, 1.0)?)))
    };
    Ok((side(Side::X, g.m_x, g.kappa_x)?, side(Side::Y, g.m_y, g.kappa_y)?))
}

fn marginal_w1(sys: &ParticleSystem, mne: &GridMeasurePair) -> Result<(f64, f64)> {
    let px = WeightedPoints::uniform(sys.dim_x, sys.x.clone())?;
    let py = WeightedPoints::uniform(sys.dim_y, sys.y.clone())?;
    let gx = WeightedPoints::weighted(mne.dim_x, mne.x_points.clone(), mne.p.clone())?;
    let gy = WeightedPoints::weighted(mne.dim_y, mne.y_points.clone(), mne.q.clone())?;
    Ok((wasserstein1(&px, &gx)?, wasserstein1(&py, &gy)?))
}

struct SeedRun {
    times: Vec<f64>,
    rho: Vec<f64>,
    z: Vec<f64>,
    q: Vec<f64>,
    w1: Vec<(f64, f64)>,
}

pub fn contraction_experiment(
    kernel: &dyn GameKernel,
    params: CouplingParams,
    seeds: &[u64],
    init: CouplingInit,
    mne: Option<&GridMeasurePair>,
) -> Result<ContractionReport> {
    if seeds.is_empty() {
        return Err(Error::Precondition("at least one seed required".into()));
    }
    if !(params.beta > 0.0) || params.n == 0 || params.record_every == 0 {
        return Err(Error::Precondition("beta > 0, n >= 1, record_every >= 1 required".into()));
    }
    if !(params.horizon > 0.0 && params.dt > 0.0) {
        return Err(Error::Precondition("horizon > 0 and dt > 0 required".into()));
    }
    let steps = (params.horizon / params.dt).round() as usize;
    let (f1, f2) = distance_functions(kernel, params.beta)?;
    let (dx, dy) = (kernel.dim_x(), kernel.dim_y());

    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| -> Result<SeedRun> {
            let noise = NoiseStream::new(seed);
            let leg = |c: (f64, f64), id: u64| {
                ParticleSystem::gaussian(
                    params.n,
                    dx,
                    dy,
                    c.0,
                    c.1,
                    init.spread,
                    1.0 / params.beta,
                    params.eta,
                    &noise,
                    id,
                )
            };
            let mut pair = CoupledPair::new(
                leg(init.primary, 0)?,
                leg(init.mirror, 1)?,
                params.delta,
                params.gamma,
                f1.clone(),
                f2.clone(),
            )?;
            let mut w1 = Vec::new();
            if let Some(m) = mne {
                w1.push(marginal_w1(&pair.primary, m)?);
            }
            for s in 1..=steps {
                let record = s % params.record_every == 0;
                pair.step(kernel, params.dt, &noise, record)?;
                if record {
                    if let Some(m) = mne {
                        w1.push(marginal_w1(&pair.primary, m)?);
                    }
                }
            }
            Ok(SeedRun {
                times: pair.trace.iter().map(|p| p.t).collect(),
                rho: pair.trace.iter().map(|p| p.rho).collect(),
                z: pair.trace.iter().map(|p| p.z).collect(),
                q: pair.trace.iter().map(|p| p.q).collect(),
                w1,
            })
        })
        .collect::<Result<_>>()?;

    let k = runs.len() as f64;
    let avg = |pick: fn(&SeedRun) -> &Vec<f64>| -> Vec<f64> {
        let len = pick(&runs[0]).len();
        (0..len).map(|i| runs.iter().map(|r| pick(r)[i]).sum::<f64>() / k).collect()
    };
    let times = runs[0].times.clone();
    let rho = avg(|r| &r.rho);
    let z = avg(|r| &r.z);
    let q = avg(|r| &r.q);
    let w1_to_mne = if mne.is_some() {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| W1Sample {
                t,
                w1_x: runs.iter().map(|r| r.w1[i].0).sum::<f64>() / k,
                w1_y: runs.iter().map(|r| r.w1[i].1).sum::<f64>() / k,
            })
            .collect()
    } else {
        Vec::new()
    };

    let adm = admissibility(&kernel.geometry(), params.beta, params.eta, params.gamma);
    let fit = fit_decay_rate(&times, &rho).ok();
    let predicted_c = adm.predicted_c;
    Ok(ContractionReport {
        ratio_ok: fit.is_some_and(|f| f.rate >= 0.5 * predicted_c),
        strictly_decreasing: rho.windows(2).all(|w| w[1] < w[0]),
        outside_guarantee: !adm.admissible(),
        times,
        rho,
        z,
        q,
        fit,
        predicted_c,
        admissibility: adm,
        w1_to_mne,
    })
}
