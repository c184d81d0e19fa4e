//! Lloyd k-means with k-means++ seeding, refined by Hartigan single-point
//! transfers, over generic scalar points.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::num::Scalar;
use crate::rng::{derive_seed, seeded};

pub const MAX_ITERATIONS: usize = 100;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;
/// Independent k-means++ restarts; the lowest-WCSS run wins.
pub const RESTARTS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering<T = f64> {
    pub k: usize,
    pub centroids: Vec<Point2<T>>,
    /// Cluster index per input point.
    pub assignments: Vec<usize>,
    pub wcss: T,
}

pub fn kmeans_wcss<T: Scalar>(points: &[Point2<T>], k: usize, seed: u64) -> Result<Clustering<T>> {
    if points.is_empty() || k == 0 || k > points.len() {
        return Err(Error::KOutOfRange { k, n: points.len() });
    }
    let mut best: Option<Clustering<T>> = None;
    for restart in 0..RESTARTS {
        let run = single_run(points, k, derive_seed(seed, restart));
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn single_run<T: Scalar>(points: &[Point2<T>], k: usize, seed: u64) -> Clustering<T> {
    let mut centroids = plus_plus_init(points, k, seed);
    let mut assignments = vec![0; points.len()];
    lloyd(points, &mut centroids, &mut assignments);
    if hartigan(points, &mut centroids, &mut assignments) {
        lloyd(points, &mut centroids, &mut assignments);
    }
    let wcss = wcss(points, &centroids, &assignments);
    Clustering {
        k,
        centroids,
        assignments,
        wcss,
    }
}

fn plus_plus_init<T: Scalar>(points: &[Point2<T>], k: usize, seed: u64) -> Vec<Point2<T>> {
    let mut rng = seeded(seed);
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<T> = points.iter().map(|p| p.dist_sq(&centroids[0])).collect();
    while centroids.len() < k {
        let total = d2.iter().fold(0.0, |acc, d| acc + d.as_f64());
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                let d = d.as_f64();
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[idx];
        centroids.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            let nd = p.dist_sq(&c);
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

fn nearest<T: Scalar>(p: &Point2<T>, centroids: &[Point2<T>]) -> usize {
    let mut best = 0;
    let mut best_d = p.dist_sq(&centroids[0]);
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = p.dist_sq(c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn recompute<T: Scalar>(points: &[Point2<T>], assignments: &[usize], k: usize) -> Vec<Option<Point2<T>>> {
    let mut sums = vec![(T::zero(), T::zero(), 0usize); k];
    for (p, &a) in points.iter().zip(assignments) {
        let s = &mut sums[a];
        s.0 = s.0 + p.x;
        s.1 = s.1 + p.y;
        s.2 += 1;
    }
    sums.into_iter()
        .map(|(sx, sy, n)| {
            (n > 0).then(|| {
                let n = T::from_usize_lossy(n);
                Point2::new(sx / n, sy / n)
            })
        })
        .collect()
}

fn lloyd<T: Scalar>(points: &[Point2<T>], centroids: &mut [Point2<T>], assignments: &mut [usize]) {
    let k = centroids.len();
    let tol = T::from_f64_lossy(CONVERGENCE_TOLERANCE);
    for _ in 0..MAX_ITERATIONS {
        for (a, p) in assignments.iter_mut().zip(points) {
            *a = nearest(p, centroids);
        }
        let mut updated = recompute(points, assignments, k);
        // Re-seed empty clusters at the point farthest from its centroid.
        for c in 0..k {
            if updated[c].is_some() {
                continue;
            }
            let far = points
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let a = assignments[*i];
                    assignments.iter().filter(|&&x| x == a).count() > 1
                })
                .max_by(|(i, p), (j, q)| {
                    let di = p.dist_sq(&centroids[assignments[*i]]);
                    let dj = q.dist_sq(&centroids[assignments[*j]]);
                    di.partial_cmp(&dj).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(i))
                })
                .map(|(i, _)| i);
            if let Some(i) = far {
                assignments[i] = c;
                updated = recompute(points, assignments, k);
            }
        }
        let mut movement = T::zero();
        for (c, u) in centroids.iter_mut().zip(updated) {
            if let Some(u) = u {
                movement = movement.max(c.dist(&u));
                *c = u;
            }
        }
        if movement < tol {
            break;
        }
    }
    for (a, p) in assignments.iter_mut().zip(points) {
        *a = nearest(p, centroids);
    }
}

/// Single-point transfers that strictly lower WCSS. Returns whether any
/// point moved.
fn hartigan<T: Scalar>(points: &[Point2<T>], centroids: &mut [Point2<T>], assignments: &mut [usize]) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let mut moved_any = false;
    for _ in 0..MAX_ITERATIONS {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if sizes[a] <= 1 {
                continue;
            }
            let na = T::from_usize_lossy(sizes[a]);
            let cost_out = na / (na - T::one()) * p.dist_sq(&centroids[a]);
            let mut best: Option<(usize, T)> = None;
            for b in (0..k).filter(|&b| b != a) {
                let nb = T::from_usize_lossy(sizes[b]);
                let cost_in = nb / (nb + T::one()) * p.dist_sq(&centroids[b]);
                let delta = cost_in - cost_out;
                if delta < -T::EPS && best.is_none_or(|(_, d)| delta < d) {
                    best = Some((b, delta));
                }
            }
            if let Some((b, _)) = best {
                assignments[i] = b;
                sizes[a] -= 1;
                sizes[b] += 1;
                let updated = recompute(points, assignments, k);
                centroids[a] = updated[a].expect("source cluster keeps members");
                centroids[b] = updated[b].expect("target cluster has the moved point");
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    moved_any
}

fn wcss<T: Scalar>(points: &[Point2<T>], centroids: &[Point2<T>], assignments: &[usize]) -> T {
    points
        .iter()
        .zip(assignments)
        .fold(T::zero(), |acc, (p, &a)| acc + p.dist_sq(&centroids[a]))
}

/// Smallest `k` whose relative WCSS improvement to `k + 1` falls below
/// `threshold`; a zero WCSS stops immediately. Falls back to the largest
/// `k` on the curve.
pub fn select_k_elbow<T: Scalar>(curve: &[(usize, T)], threshold: f64) -> Result<usize> {
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    for (i, (k, w)) in curve.iter().enumerate() {
        if *k != i + 1 {
            return Err(Error::validation("wcss_curve", "k values must run 1..K contiguously"));
        }
        if *w < T::zero() {
            return Err(Error::validation("wcss_curve", "negative wcss"));
        }
    }
    for pair in curve.windows(2) {
        let (k, w) = pair[0];
        let (_, w_next) = pair[1];
        if w == T::zero() {
            return Ok(k);
        }
        let drop = ((w - w_next) / w).as_f64();
        if drop < threshold {
            return Ok(k);
        }
    }
    Ok(curve.last().expect("non-empty").0)
}
