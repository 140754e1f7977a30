//! Monte Carlo estimate of the radial convexity profile against a measure.

use rayon::prelude::*;

use super::kernel::{GameKernel, Side};
use super::mne::GridMeasurePair;
use super::particles::ParticleSystem;
use crate::error::{Error, Result};
use crate::rates::negative_part_profile;
use crate::rng::{NoiseRole, NoiseStream, SlotRng};

/// Measure the profile is taken against: base points come from the
/// marginal on `side`, the expectation runs over the opposite marginal.
#[derive(Debug, Clone, Copy)]
pub enum MeasureRef<'a> {
    Particles(&'a ParticleSystem),
    Grid(&'a GridMeasurePair),
}

struct Marginal {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl Marginal {
    fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Precondition("empty measure".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Precondition("measure has no mass".into()));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            dim,
            points,
            weights,
            cdf,
        })
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn sample(&self, rng: &mut SlotRng) -> usize {
        let u = rng.uniform() * self.cdf[self.cdf.len() - 1];
        self.cdf.partition_point(|c| *c < u).min(self.weights.len() - 1)
    }

    fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (i, w) in self.weights.iter().enumerate() {
            m.iter_mut().zip(self.point(i)).for_each(|(a, b)| *a += w * b);
        }
        m
    }
}

fn marginals(measure: MeasureRef<'_>) -> Result<(Marginal, Marginal)> {
    match measure {
        MeasureRef::Particles(s) => {
            let w = vec![1.0; s.n];
            Ok((
                Marginal::new(s.dim_x, s.x.clone(), w.clone())?,
                Marginal::new(s.dim_y, s.y.clone(), w)?,
            ))
        }
        MeasureRef::Grid(g) => Ok((
            Marginal::new(g.dim_x, g.x_points.clone(), g.p.clone())?,
            Marginal::new(g.dim_y, g.y_points.clone(), g.q.clone())?,
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KappaSampling {
    pub base_points: usize,
    pub directions: usize,
    pub seed: u64,
}

impl Default for KappaSampling {
    fn default() -> Self {
        Self {
            base_points: 1000,
            directions: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaEstimate {
    pub r: Vec<f64>,
    /// Sample minimum minus one standard error.
    pub kappa: Vec<f64>,
    pub sample_min: Vec<f64>,
    pub std_error: Vec<f64>,
    pub kappa_tilde: Vec<f64>,
}

/// Estimate `kappa(r) = r^{-2} inf <x - x', E dK(x) - E dK(x')>` over pairs at
/// distance exactly `r` (sign flipped for the concave side).
pub fn kappa_profile(
    kernel: &dyn GameKernel,
    measure: MeasureRef<'_>,
    side: Side,
    r_grid: &[f64],
    sampling: KappaSampling,
) -> Result<KappaEstimate> {
    if r_grid.is_empty() || r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("r grid must be positive and ascending".into()));
    }
    let (mx, my) = marginals(measure)?;
    let (base, other) = match side {
        Side::X => (&mx, &my),
        Side::Y => (&my, &mx),
    };
    if base.dim != side_dim(kernel, side) || other.dim != side_dim(kernel, flip(side)) {
        return Err(Error::Dimension("measure and kernel dimensions differ".into()));
    }
    let dim = base.dim;
    let noise = NoiseStream::new(sampling.seed);
    let affine = kernel.affine_in_opponent();
    let other_mean = other.mean();

    // expected gradient on `side` at point `p`, averaging over the opponent
    let expected_grad = |p: &[f64], out: &mut [f64]| {
        let mut g = vec![0.0; dim];
        let eval = |opp: &[f64], g: &mut [f64]| match side {
            Side::X => kernel.grad_x(p, opp, g),
            Side::Y => kernel.grad_y(opp, p, g),
        };
        if affine {
            eval(&other_mean, out);
            return;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, w) in other.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            eval(other.point(j), &mut g);
            out.iter_mut().zip(&g).for_each(|(o, v)| *o += w * v);
        }
    };

    let sign = match side {
        Side::X => 1.0,
        Side::Y => -1.0,
    };
    let rows: Vec<(f64, f64)> = r_grid
        .par_iter()
        .enumerate()
        .map(|(ri, &r)| {
            let mut min = f64::INFINITY;
            let (mut mean, mut m2) = (0.0, 0.0);
            let mut count = 0.0;
            let (mut g1, mut g2) = (vec![0.0; dim], vec![0.0; dim]);
            let mut dir = vec![0.0; dim];
            for b in 0..sampling.base_points {
                let mut rng = noise.slot(ri as u64, b as u64, NoiseRole::Sampling);
                let p = base.point(base.sample(&mut rng)).to_vec();
                expected_grad(&p, &mut g1);
                for _ in 0..sampling.directions {
                    let norm = loop {
                        dir.iter_mut().for_each(|v| *v = rng.normal());
                        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if n > 0.0 {
                            break n;
                        }
                    };
                    let p2: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + r * d / norm).collect();
                    expected_grad(&p2, &mut g2);
                    let val = sign
                        * p.iter()
                            .zip(&p2)
                            .zip(g1.iter().zip(&g2))
                            .map(|((a, b), (u, v))| (a - b) * (u - v))
                            .sum::<f64>()
                        / (r * r);
                    min = min.min(val);
                    count += 1.0;
                    let d = val - mean;
                    mean += d / count;
                    m2 += d * (val - mean);
                }
            }
            (min, (m2 / count / count).sqrt())
        })
        .collect();
    let sample_min: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let std_error: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let kappa: Vec<f64> = rows.iter().map(|(m, s)| m - s).collect();
    Ok(KappaEstimate {
        r: r_grid.to_vec(),
        kappa_tilde: negative_part_profile(&kappa),
        kappa,
        sample_min,
        std_error,
    })
}

/// Pointwise infimum over estimates taken at several times.
pub fn infimum_over_times(estimates: &[KappaEstimate]) -> Result<KappaEstimate> {
    let first = estimates.first().ok_or_else(|| Error::Precondition("no estimates".into()))?;
    let mut out = first.clone();
    for e in &estimates[1..] {
        if e.r != out.r {
            return Err(Error::Dimension("estimates on different grids".into()));
        }
        for i in 0..out.r.len() {
            if e.kappa[i] < out.kappa[i] {
                out.kappa[i] = e.kappa[i];
                out.sample_min[i] = e.sample_min[i];
                out.std_error[i] = e.std_error[i];
            }
        }
    }
    out.kappa_tilde = negative_part_profile(&out.kappa);
    Ok(out)
}

fn side_dim(kernel: &dyn GameKernel, side: Side) -> usize {
    match side {
        Side::X => kernel.dim_x(),
        Side::Y => kernel.dim_y(),
    }
}

fn flip(side: Side) -> Side {
    match side {
        Side::X => Side::Y,
        Side::Y => Side::X,
    }
}
