use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::distance::squared_distance;
use super::{AnalyticsError, FeatureMatrix};

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 300;

/// Relative slack allowed when checking that inertia never increases.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub seed: u64,
    pub iterations_run: usize,
    /// Inertia after each assignment pass, ending with the final one.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn dims(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Index of the nearest centroid (ties to the lowest index) and the
    /// squared distance to it.
    pub fn nearest(&self, x: &[f64]) -> Result<(usize, f64), AnalyticsError> {
        if x.len() != self.dims() {
            return Err(AnalyticsError::DimensionMismatch(self.dims(), x.len()));
        }
        Ok(nearest(&self.centroids, x))
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Member row indices of each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>], out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (a, x) in out.iter_mut().zip(rows) {
        let (j, d) = nearest(centroids, x);
        *a = j;
        inertia += d;
    }
    inertia
}

/// k-means++: first centre uniform, each next one drawn with probability
/// proportional to squared distance from the nearest chosen centre.
fn seed_centroids(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows
        .iter()
        .map(|x| squared_distance(x, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen.expect("positive total has a positive weight")
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].clone();
        for (d, x) in d2.iter_mut().zip(rows) {
            *d = d.min(squared_distance(x, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from a seeded k-means++ start.
///
/// Stops once no centroid moves by `tol` or more, or after `max_iter`
/// update passes. An empty cluster takes the point farthest from its own
/// centroid.
pub fn kmeans(
    m: &FeatureMatrix,
    k: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<ClusterModel, AnalyticsError> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(AnalyticsError::KTooLarge { k, n });
    }
    if !(tol > 0.0) {
        return Err(AnalyticsError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let rows = &m.rows;
    let dims = m.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(rows, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut history = Vec::new();
    let mut iterations_run = 0;

    for _ in 0..max_iter {
        let inertia = assign(rows, &centroids, &mut assignments);
        push_checked(&mut history, inertia);

        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in rows.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| {
                if c == 0 {
                    s
                } else {
                    s.into_iter().map(|v| v / c as f64).collect()
                }
            })
            .collect();

        let mut taken = vec![false; n];
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = (0..n)
                .filter(|&i| !taken[i])
                .map(|i| (i, squared_distance(&rows[i], &centroids[assignments[i]])))
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                })
                .map(|(i, _)| i)
                .expect("k <= n leaves a free point");
            taken[far] = true;
            next[j] = rows[far].clone();
        }

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        iterations_run += 1;
        if shift < tol {
            break;
        }
    }

    let inertia = assign(rows, &centroids, &mut assignments);
    push_checked(&mut history, inertia);
    Ok(ClusterModel {
        k,
        centroids,
        assignments,
        inertia,
        seed,
        iterations_run,
        inertia_history: history,
    })
}

fn push_checked(history: &mut Vec<f64>, inertia: f64) {
    if let Some(&prev) = history.last() {
        assert!(
            inertia <= prev + MONOTONE_SLACK * prev.abs().max(1.0),
            "k-means inertia rose from {prev} to {inertia}"
        );
    }
    history.push(inertia);
}

/// Best of `restarts` seeded runs by final inertia. Run `r` uses seed
/// `seed + r`; ties keep the earliest run.
pub fn kmeans_restarts(
    m: &FeatureMatrix,
    k: usize,
    seed: u64,
    restarts: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ClusterModel, AnalyticsError> {
    let mut best: Option<ClusterModel> = None;
    for r in 0..restarts.max(1) as u64 {
        let model = kmeans(m, k, seed.wrapping_add(r), tol, max_iter)?;
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one run"))
}
