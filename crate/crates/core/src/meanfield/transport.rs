//! Wasserstein-1 distance between finitely supported measures.

use crate::error::{Error, Result};

/// Largest support handled by the dense solvers in dimension > 1.
pub const MAX_SUPPORT: usize = 2000;

const MASS_EPS: f64 = 1e-14;

/// Weighted point cloud; weights are normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    pub dim: usize,
    /// Row-major coordinates.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    uniform: bool,
}

impl WeightedPoints {
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::Dimension("point array shape".into()));
        }
        let n = points.len() / dim;
        Self::build(dim, points, vec![1.0 / n as f64; n], true)
    }

    pub fn weighted(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() != weights.len() * dim {
            return Err(Error::Dimension("point and weight arrays disagree".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Precondition("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Precondition("measure has no mass".into()));
        }
        let w = weights.iter().map(|w| w / total).collect();
        Self::build(dim, points, w, false)
    }

    fn build(dim: usize, points: Vec<f64>, weights: Vec<f64>, uniform: bool) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Self {
            dim,
            points,
            weights,
            uniform,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn wasserstein1(a: &WeightedPoints, b: &WeightedPoints) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Dimension(format!("dimension {} vs {}", a.dim, b.dim)));
    }
    if a.dim == 1 {
        return Ok(w1_line(a, b));
    }
    if a.len() > MAX_SUPPORT || b.len() > MAX_SUPPORT {
        return Err(Error::SizeLimit(format!(
            "supports of size {} and {} exceed {MAX_SUPPORT}",
            a.len(),
            b.len()
        )));
    }
    let cost = |i: usize, j: usize| {
        a.point(i)
            .iter()
            .zip(b.point(j))
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    if a.uniform && b.uniform && a.len() == b.len() {
        let n = a.len();
        let c: Vec<f64> = (0..n * n).map(|k| cost(k / n, k % n)).collect();
        let assignment = hungarian(&c, n);
        return Ok(assignment.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum::<f64>() / n as f64);
    }
    let (n, m) = (a.len(), b.len());
    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    Ok(transport(&c, &a.weights, &b.weights))
}

/// Integral of `|F_a - F_b|` over the merged support.
fn w1_line(a: &WeightedPoints, b: &WeightedPoints) -> f64 {
    let mut events: Vec<(f64, f64)> = a
        .points
        .iter()
        .zip(&a.weights)
        .map(|(x, w)| (*x, *w))
        .chain(b.points.iter().zip(&b.weights).map(|(x, w)| (*x, -*w)))
        .collect();
    events.sort_by(|u, v| u.0.total_cmp(&v.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for k in 0..events.len() - 1 {
        diff += events[k].1;
        total += diff.abs() * (events[k + 1].0 - events[k].0);
    }
    total
}

/// Minimum-cost perfect matching on a dense `n x n` cost matrix; returns the
/// column matched to each row.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // potentials u (rows), v (columns) and the matching p[col] = row, all
    // 1-based with index 0 as the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// Balanced transportation problem by successive shortest augmenting paths
/// with Johnson potentials. `cost` is `n x m` row-major.
pub fn transport(cost: &[f64], supply: &[f64], demand: &[f64]) -> f64 {
    let (n, m) = (supply.len(), demand.len());
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let mut flow = vec![0.0; n * m];
    // node k < n is a source, n + j a sink
    let mut pot = vec![0.0; n + m];
    let mut dist = vec![0.0; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];
    loop {
        if sup.iter().all(|s| *s <= MASS_EPS) || dem.iter().all(|d| *d <= MASS_EPS) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if sup[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        // dense Dijkstra on reduced costs
        let mut target = None;
        loop {
            let mut best = f64::INFINITY;
            let mut k = usize::MAX;
            for (node, d) in dist.iter().enumerate() {
                if !done[node] && *d < best {
                    best = *d;
                    k = node;
                }
            }
            if k == usize::MAX {
                break;
            }
            done[k] = true;
            if k >= n && dem[k - n] > MASS_EPS {
                target = Some(k);
                break;
            }
            if k < n {
                for j in 0..m {
                    let t = n + j;
                    if done[t] {
                        continue;
                    }
                    let nd = best + (cost[k * m + j] + pot[k] - pot[t]).max(0.0);
                    if nd < dist[t] {
                        dist[t] = nd;
                        prev[t] = k;
                    }
                }
            } else {
                let j = k - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= MASS_EPS {
                        continue;
                    }
                    let nd = best + (-cost[i * m + j] + pot[k] - pot[i]).max(0.0);
                    if nd < dist[i] {
                        dist[i] = nd;
                        prev[i] = k;
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let reach = dist[t];
        for k in 0..n + m {
            pot[k] += dist[k].min(reach);
        }
        // bottleneck along the path
        let mut amount = dem[t - n];
        let mut k = t;
        while prev[k] != usize::MAX {
            let pk = prev[k];
            if pk >= n {
                amount = amount.min(flow[k * m + (pk - n)]);
            }
            k = pk;
        }
        amount = amount.min(sup[k]);
        dem[t - n] -= amount;
        sup[k] -= amount;
        let mut k = t;
        while prev[k] != usize::MAX {
            let pk = prev[k];
            if pk < n {
                flow[pk * m + (k - n)] += amount;
            } else {
                flow[k * m + (pk - n)] -= amount;
            }
            k = pk;
        }
    }
    flow.iter().zip(cost).map(|(f, c)| f * c).sum()
}
