//! Entropy-regularized mixed Nash equilibrium on quadrature grids.
//!
//! The equilibrium solves `p ~ exp(-beta int K q)`, `q ~ exp(beta int K p)`;
//! on grids this is a pair of softmax maps iterated with damping.

use rayon::prelude::*;

use super::kernel::GameKernel;
use crate::error::{Error, Result};

/// Discrete measures on grids. Masses sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasurePair {
    pub dim_x: usize,
    pub dim_y: usize,
    /// Row-major grid points.
    pub x_points: Vec<f64>,
    pub y_points: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Tensor grid of `n` points per axis on `[lo, hi]^dim`.
pub fn tensor_grid(lo: f64, hi: f64, n: usize, dim: usize) -> Result<Vec<f64>> {
    if !(hi > lo) || n < 2 || dim == 0 {
        return Err(Error::Precondition("grid needs hi > lo, n >= 2, dim >= 1".into()));
    }
    let total = n
        .checked_pow(dim as u32)
        .filter(|t| *t <= 1 << 20)
        .ok_or_else(|| Error::SizeLimit(format!("{n}^{dim} grid points")))?;
    let h = (hi - lo) / (n - 1) as f64;
    let mut out = Vec::with_capacity(total * dim);
    for idx in 0..total {
        let mut rem = idx;
        for _ in 0..dim {
            out.push(lo + (rem % n) as f64 * h);
            rem /= n;
        }
    }
    Ok(out)
}

impl GridMeasurePair {
    /// Uniform masses on the given grids.
    pub fn uniform(dim_x: usize, x_points: Vec<f64>, dim_y: usize, y_points: Vec<f64>) -> Result<Self> {
        if dim_x == 0 || dim_y == 0 || x_points.is_empty() || y_points.is_empty() {
            return Err(Error::Precondition("grids must be nonempty".into()));
        }
        if x_points.len() % dim_x != 0 || y_points.len() % dim_y != 0 {
            return Err(Error::Dimension("grid arrays do not match dimension".into()));
        }
        let (nx, ny) = (x_points.len() / dim_x, y_points.len() / dim_y);
        Ok(Self {
            dim_x,
            dim_y,
            x_points,
            y_points,
            p: vec![1.0 / nx as f64; nx],
            q: vec![1.0 / ny as f64; ny],
        })
    }

    pub fn nx(&self) -> usize {
        self.p.len()
    }

    pub fn ny(&self) -> usize {
        self.q.len()
    }

    pub fn x_point(&self, i: usize) -> &[f64] {
        &self.x_points[i * self.dim_x..(i + 1) * self.dim_x]
    }

    pub fn y_point(&self, j: usize) -> &[f64] {
        &self.y_points[j * self.dim_y..(j + 1) * self.dim_y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MneOptions {
    pub beta: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MneOptions {
    fn default() -> Self {
        Self {
            beta: 1.0,
            damping: 0.5,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MneResult {
    pub measures: GridMeasurePair,
    pub iterations: usize,
    /// Sup-norm of both update maps at the returned point.
    pub residual: f64,
    /// Same in log-masses, which also controls the smallest weights.
    pub log_residual: f64,
    /// `K q` on the x-grid at the returned point.
    pub potential_x: Vec<f64>,
    /// `K' p` on the y-grid at the returned point.
    pub potential_y: Vec<f64>,
}

/// `exp(sign * beta * v)` normalized, computed stably.
fn softmax(v: &[f64], scale: f64) -> Vec<f64> {
    let m = v.iter().map(|x| scale * x).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (scale * x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

fn sup_log_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u.ln() - v.ln()).abs()).fold(0.0, f64::max)
}

/// Damped alternating fixed-point iteration starting from `init`.
///
/// Stops once both maps move the masses by less than `tol` in sup-norm and
/// in log-sup-norm; the latter keeps the first-order condition accurate on
/// grid points with tiny mass.
pub fn mne_fixed_point(kernel: &dyn GameKernel, init: &GridMeasurePair, opts: MneOptions) -> Result<MneResult> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Precondition("damping must lie in (0, 1]".into()));
    }
    if !(opts.beta > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::Precondition("beta > 0 and tol > 0 required".into()));
    }
    if init.dim_x != kernel.dim_x() || init.dim_y != kernel.dim_y() {
        return Err(Error::Dimension("grid and kernel dimensions differ".into()));
    }
    let (nx, ny) = (init.nx(), init.ny());
    // k[i * ny + j] = K(x_i, y_j)
    let mut k = vec![0.0; nx * ny];
    k.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.evaluate(init.x_point(i), init.y_point(j));
        }
    });
    let kq = |q: &[f64]| -> Vec<f64> {
        k.par_chunks(ny)
            .map(|row| row.iter().zip(q).map(|(a, b)| a * b).sum())
            .collect()
    };
    let ktp = |p: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; ny];
        for (i, row) in k.chunks(ny).enumerate() {
            let w = p[i];
            out.iter_mut().zip(row).for_each(|(o, v)| *o += w * v);
        }
        out
    };
    let beta = opts.beta;
    let theta = opts.damping;
    let mut p = init.p.clone();
    let mut q = init.q.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let tp = softmax(&kq(&q), -beta);
        let rp = sup_diff(&tp, &p).max(sup_log_diff(&tp, &p));
        p.iter_mut().zip(&tp).for_each(|(a, b)| *a = (1.0 - theta) * *a + theta * b);
        let tq = softmax(&ktp(&p), beta);
        let rq = sup_diff(&tq, &q).max(sup_log_diff(&tq, &q));
        q.iter_mut().zip(&tq).for_each(|(a, b)| *a = (1.0 - theta) * *a + theta * b);
        residual = rp.max(rq);
        if residual < opts.tol {
            // finish with an exact p-update so the x-side condition holds
            // to rounding
            let potential_x = kq(&q);
            let p = softmax(&potential_x, -beta);
            let potential_y = ktp(&p);
            let (tq, tp) = (softmax(&potential_y, beta), softmax(&kq(&q), -beta));
            let res = sup_diff(&tq, &q).max(sup_diff(&tp, &p));
            let log_res = sup_log_diff(&tq, &q).max(sup_log_diff(&tp, &p));
            return Ok(MneResult {
                measures: GridMeasurePair {
                    p,
                    q,
                    ..init.clone()
                },
                iterations: it,
                residual: res,
                log_residual: log_res,
                potential_x,
                potential_y,
            });
        }
    }
    Err(Error::FixedPoint {
        iterations: opts.max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::kernel::{BenchmarkKernel, Geometry};

    struct Separable;

    impl GameKernel for Separable {
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_y(&self) -> usize {
            1
        }
        fn evaluate(&self, x: &[f64], _y: &[f64]) -> f64 {
            0.5 * x[0] * x[0]
        }
        fn grad_x(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
            out[0] = x[0];
        }
        fn grad_y(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn geometry(&self) -> Geometry {
            Geometry {
                kappa_x: 1.0,
                kappa_y: 0.0,
                m_x: 0.0,
                m_y: 0.0,
                r: 0.0,
                lip_x: 0.0,
                lip_y: 0.0,
                l_x: 1.0,
                l_y: 0.0,
            }
        }
    }

    #[test]
    fn tensor_grid_layout() {
        let g = tensor_grid(0.0, 1.0, 3, 2).unwrap();
        assert_eq!(g.len(), 18);
        assert_eq!(&g[0..2], &[0.0, 0.0]);
        assert_eq!(&g[2..4], &[0.5, 0.0]);
        assert_eq!(&g[6..8], &[0.0, 0.5]);
    }

    #[test]
    fn zero_kernel_gives_uniform_measures() {
        let k = BenchmarkKernel::new(1.0, 1.0, 0.0, 0.0, 0.0, 1).unwrap();
        // K is of order 1e-18 on this grid
        let grid = tensor_grid(-1e-9, 1e-9, 5, 1).unwrap();
        let init = GridMeasurePair::uniform(1, grid.clone(), 1, grid).unwrap();
        let res = mne_fixed_point(&k, &init, MneOptions::default()).unwrap();
        for v in res.measures.p.iter().chain(&res.measures.q) {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_kernel_gives_gibbs_and_uniform() {
        let grid = tensor_grid(-3.0, 3.0, 61, 1).unwrap();
        let init = GridMeasurePair::uniform(1, grid.clone(), 1, grid.clone()).unwrap();
        let res = mne_fixed_point(&Separable, &init, MneOptions::default()).unwrap();
        let w: Vec<f64> = grid.iter().map(|x| (-0.5 * x * x).exp()).collect();
        let z: f64 = w.iter().sum();
        for (p, w) in res.measures.p.iter().zip(&w) {
            assert!((p - w / z).abs() < 1e-12);
        }
        for q in &res.measures.q {
            assert!((q - 1.0 / 61.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_damping() {
        let grid = tensor_grid(-1.0, 1.0, 3, 1).unwrap();
        let init = GridMeasurePair::uniform(1, grid.clone(), 1, grid).unwrap();
        let opts = MneOptions {
            damping: 0.0,
            ..MneOptions::default()
        };
        assert!(mne_fixed_point(&Separable, &init, opts).is_err());
    }
}
