//! Lloyd's K-means with k-means++ seeding and silhouette scoring.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    /// Cluster index of each input point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step, starting with the seeding.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterResult {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter(move |(_, c)| **c == cluster)
            .map(|(i, _)| i)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "point {i} has dimension {} (expected {dim})",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("point {i} is not finite")));
        }
    }
    Ok(())
}

/// k-means++ seeding. Sampling walks the cumulative weights in index order, so
/// ties resolve toward the lower point index.
fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > r {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave r at the very top of the range
            pick.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).expect("positive weight"))
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Nearest centroid per point, ties toward the lower cluster index. Empty
/// clusters take the point farthest from its centroid among clusters with
/// more than one member; the centroid moves onto that point.
fn assign(points: &[Vec<f64>], centroids: &mut [Vec<f64>]) -> (Vec<usize>, f64) {
    let k = centroids.len();
    let mut labels: Vec<usize> = points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = sq_dist(p, &centroids[0]);
            for (j, c) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(p, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    loop {
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|s| *s == 0) else {
            break;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if sizes[labels[i]] > 1 {
                let d = sq_dist(p, &centroids[labels[i]]);
                if d > far_d {
                    far = Some(i);
                    far_d = d;
                }
            }
        }
        let i = far.expect("k <= n leaves a cluster with spare members");
        labels[i] = empty;
        centroids[empty] = points[i].clone();
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    (labels, inertia)
}

fn update(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= *c as f64;
        }
    }
    sums
}

/// Cluster `points` into `k` groups. Deterministic for a given `seed`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<ClusterResult> {
    check_points(points, k)?;
    let mut rng = stream_rng(seed, "kmeans", "init");
    let mut centroids = seed_centroids(points, k, &mut rng);
    let (mut labels, mut inertia) = assign(points, &mut centroids);
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = update(points, &labels, k);
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        (labels, inertia) = assign(points, &mut centroids);
        history.push(inertia);
        iterations += 1;
        if shift <= tol {
            converged = true;
            break;
        }
    }
    Ok(ClusterResult {
        k,
        assignments: labels,
        centroids,
        inertia,
        inertia_history: history,
        iterations,
        converged,
    })
}

/// Mean silhouette coefficient. Points alone in their cluster score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = points.len();
    if k < 2 || n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for j in 0..n {
            if i != j {
                sum[labels[j]] += sq_dist(&points[i], &points[j]).sqrt();
                count[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if count[own] == 0 {
            continue;
        }
        let a = sum[own] / count[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && count[c] > 0)
            .map(|c| sum[c] / count[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() && a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

/// Best silhouette over candidate k values; ties keep the smaller k.
pub fn select_k(points: &[Vec<f64>], candidates: &[usize], seed: u64) -> Result<ClusterResult> {
    let mut best: Option<(f64, ClusterResult)> = None;
    for &k in candidates.iter().filter(|&&k| k >= 2 && k <= points.len()) {
        let r = kmeans(points, k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        let s = silhouette(points, &r.assignments, k);
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, r));
        }
    }
    best.map(|(_, r)| r)
        .ok_or_else(|| Error::InvalidArgument("no candidate k fits the number of points".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn separable_four_points() {
        let r = kmeans(&pts(&[0.0, 0.1, 10.0, 10.1]), 2, 0, 100, 1e-9).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        let mut c: Vec<f64> = r.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.05).abs() < 1e-12 && (c[1] - 10.05).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let r = kmeans(&pts(&[3.0, -1.0, 7.5, 2.2, 9.0]), 5, 4, 100, 1e-9).unwrap();
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn duplicates_keep_clusters_non_empty() {
        let r = kmeans(&pts(&[1.0, 1.0, 1.0, 1.0]), 3, 0, 100, 1e-9).unwrap();
        for c in 0..3 {
            assert!(r.members(c).count() > 0);
        }
    }

    #[test]
    fn errors() {
        assert!(kmeans(&pts(&[1.0, 2.0]), 3, 0, 10, 1e-9).is_err());
        assert!(kmeans(&pts(&[1.0, 2.0]), 0, 0, 10, 1e-9).is_err());
        assert!(kmeans(&[vec![f64::NAN]], 1, 0, 10, 1e-9).is_err());
    }

    #[test]
    fn silhouette_prefers_true_k() {
        let mut v = Vec::new();
        for c in [0.0, 10.0, 20.0] {
            for d in [-0.2, 0.0, 0.2] {
                v.push(vec![c + d, c - d]);
            }
        }
        assert_eq!(select_k(&v, &[2, 3, 4], 1).unwrap().k, 3);
    }

    fn random_points(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()
    }

    // Inertia of an arbitrary labelling with centroids at the group means.
    fn labelling_inertia(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
        let c = update(points, labels, k);
        points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &c[l])).sum()
    }

    #[test]
    fn beats_random_assignments() {
        for seed in 0..5 {
            let points = random_points(seed, 50, 2);
            let r = kmeans(&points, 3, seed, 100, 1e-9).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
            for _ in 0..100 {
                let mut labels: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
                labels[0] = 0;
                labels[1] = 1;
                labels[2] = 2;
                assert!(r.inertia <= labelling_inertia(&points, &labels, 3));
            }
        }
    }

    proptest! {
        #[test]
        fn inertia_non_increasing(seed in 0u64..1000, n in 3usize..40, k in 1usize..5) {
            let points = random_points(seed, n, 3);
            let k = k.min(n);
            let r = kmeans(&points, k, seed, 100, 1e-9).unwrap();
            for w in r.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
            for c in 0..k {
                prop_assert!(r.members(c).count() > 0);
            }
        }

        #[test]
        fn stable_at_convergence(seed in 0u64..1000, n in 4usize..40) {
            let points = random_points(seed, n, 2);
            let r = kmeans(&points, 3, seed, 300, 1e-12).unwrap();
            prop_assume!(r.converged);
            let mut c = r.centroids.clone();
            let (labels, _) = assign(&points, &mut c);
            prop_assert_eq!(&labels, &r.assignments);
            let again = update(&points, &labels, 3);
            for (a, b) in again.iter().zip(&r.centroids) {
                prop_assert!(sq_dist(a, b).sqrt() <= 1e-9);
            }
        }

        #[test]
        fn deterministic(seed in 0u64..1000) {
            let points = random_points(seed, 20, 2);
            prop_assert_eq!(kmeans(&points, 3, seed, 100, 1e-9).unwrap(), kmeans(&points, 3, seed, 100, 1e-9).unwrap());
        }
    }
}
