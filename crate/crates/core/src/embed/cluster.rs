use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Embedding2D;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

pub const RESTARTS: usize = 20;
const MAX_LLOYD: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = sq(p, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq(p, centroids.last().expect("non-empty")));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeans {
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        for (l, p) in labels.iter_mut().zip(points) {
            let (c, _) = nearest(p, &centroids);
            if *l != c {
                *l = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (&l, p) in labels.iter().zip(points) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for (c, (s, &cnt)) in sums.into_iter().zip(&counts).enumerate() {
            // Empty clusters keep their previous centre.
            if cnt > 0 {
                centroids[c] = s.into_iter().map(|v| v / cnt as f64).collect();
            }
        }
    }
    let inertia = labels.iter().zip(points).map(|(&l, p)| sq(p, &centroids[l])).sum();
    KMeans {
        labels,
        centroids,
        inertia,
    }
}

/// k-means++ seeding, Lloyd iterations, best inertia over [`RESTARTS`] runs.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-means needs k >= 2, got {k}")));
    }
    if k > points.len() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds {} points", points.len())));
    }
    let mut best: Option<KMeans> = None;
    for r in 0..RESTARTS {
        let mut rng: Rng = stream(seed, 0x4B4D_0000 + r as u64);
        let run = lloyd(points, plus_plus(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash + Clone,
    B: Eq + std::hash::Hash + Clone,
{
    if a.len() != b.len() {
        return Err(Error::shape("ari", format!("{} vs {} labels", a.len(), b.len())));
    }
    let n = a.len() as u64;
    if n < 2 {
        return Ok(1.0);
    }
    let mut table: HashMap<(A, B), u64> = HashMap::new();
    let mut rows: HashMap<A, u64> = HashMap::new();
    let mut cols: HashMap<B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x.clone(), y.clone())).or_default() += 1;
        *rows.entry(x.clone()).or_default() += 1;
        *cols.entry(y.clone()).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(n);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDiagnostics {
    pub k: usize,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub ari: f64,
}

/// k-means on the embedding and its ARI against the planted cluster ids.
pub fn cluster_diagnostics(e: &Embedding2D, k: usize, planted: &[u32], seed: u64) -> Result<ClusterDiagnostics> {
    let points: Vec<Vec<f64>> = e.coords.iter().map(|c| c.to_vec()).collect();
    let km = kmeans(&points, k, seed)?;
    let ari = adjusted_rand_index(&km.labels, planted)?;
    Ok(ClusterDiagnostics {
        k,
        labels: km.labels,
        inertia: km.inertia,
        ari,
    })
}

/// k-means with `k` clusters inside each class separately; labels are
/// `class * k + cluster` and the ARI is taken against `(class, planted)`.
pub fn per_class_diagnostics(
    e: &Embedding2D,
    classes: &[usize],
    planted: &[u32],
    k: usize,
    seed: u64,
) -> Result<ClusterDiagnostics> {
    let n = e.coords.len();
    if classes.len() != n || planted.len() != n {
        return Err(Error::shape("cluster diagnostics", format!("{n} points, {} classes, {} clusters", classes.len(), planted.len())));
    }
    let mut distinct: Vec<usize> = classes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut labels = vec![0usize; n];
    let mut inertia = 0.0;
    for &c in &distinct {
        let rows: Vec<usize> = (0..n).filter(|&i| classes[i] == c).collect();
        let points: Vec<Vec<f64>> = rows.iter().map(|&i| e.coords[i].to_vec()).collect();
        let km = kmeans(&points, k, seed ^ c as u64)?;
        inertia += km.inertia;
        for (&i, &l) in rows.iter().zip(&km.labels) {
            labels[i] = c * k + l;
        }
    }
    let truth: Vec<(usize, u32)> = classes.iter().copied().zip(planted.iter().copied()).collect();
    Ok(ClusterDiagnostics {
        k,
        ari: adjusted_rand_index(&labels, &truth)?,
        labels,
        inertia,
    })
}
