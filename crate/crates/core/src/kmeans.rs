//! k-means with k-means++ seeding, used to initialize EM.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matnorm::ObsMatrix;

const MAX_ATTEMPTS: usize = 10;
const MAX_LLOYD_ITERS: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_seeds<R: Rng + ?Sized>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd iterations to a fixed point. Returns 0-based assignments.
fn lloyd(points: &[&[f64]], mut centers: Vec<Vec<f64>>) -> Vec<usize> {
    let dim = points[0].len();
    let k = centers.len();
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for ((c, s), &m) in centers.iter_mut().zip(sums).zip(&counts) {
            if m > 0 {
                *c = s.into_iter().map(|x| x / m as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    assign
}

/// Clusters the row-major vectorized observations into `g` groups. Labels are
/// 1-based and every cluster is non-empty.
pub fn kmeans_init<R: Rng + ?Sized>(
    obs: &[ObsMatrix],
    g: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if g == 0 {
        return Err(Error::InvalidValue(
            "number of clusters must be positive".into(),
        ));
    }
    if obs.len() < g {
        return Err(Error::InsufficientData(format!(
            "{} observations for {g} clusters",
            obs.len()
        )));
    }
    let points: Vec<&[f64]> = obs.iter().map(|x| x.as_slice()).collect();
    for _ in 0..MAX_ATTEMPTS {
        let centers = plus_plus_seeds(&points, g, rng);
        let assign = lloyd(&points, centers);
        let mut counts = vec![0usize; g];
        for &a in &assign {
            counts[a] += 1;
        }
        if counts.iter().all(|&c| c > 0) {
            return Ok(assign.into_iter().map(|a| a + 1).collect());
        }
    }
    Err(Error::DegenerateData(format!(
        "k-means left a cluster empty in {MAX_ATTEMPTS} attempts"
    )))
}
