use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicConfig {
    pub segments: usize,
    pub compactness: f64,
    pub iterations: usize,
    /// Intensities in `[0, 1]` are multiplied by this before distances.
    pub intensity_scale: f64,
    /// Components smaller than this fraction of `N / segments` are merged
    /// into a neighbour.
    pub min_size_factor: f64,
}

impl Default for SlicConfig {
    fn default() -> Self {
        SlicConfig {
            segments: 100,
            compactness: 10.0,
            iterations: 10,
            intensity_scale: 100.0,
            min_size_factor: 0.25,
        }
    }
}

/// Superpixel labels `0..count`, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMask {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl SegmentMask {
    pub fn areas(&self) -> Vec<usize> {
        let mut a = vec![0; self.count];
        for &l in &self.labels {
            a[l as usize] += 1;
        }
        a
    }
}

#[derive(Clone, Copy)]
struct Centre {
    c: f64,
    y: f64,
    x: f64,
}

pub fn slic_segment(img: &[f32], height: usize, width: usize, cfg: &SlicConfig) -> Result<SegmentMask> {
    let n = height * width;
    if img.len() != n || n == 0 {
        return Err(Error::shape("slic", format!("{} pixels for {height}x{width}", img.len())));
    }
    if cfg.segments == 0 || cfg.segments > n {
        return Err(Error::InvalidArgument(format!(
            "segment count must be in 1..={n}, got {}",
            cfg.segments
        )));
    }
    let step = (n as f64 / cfg.segments as f64).sqrt();
    let rows = ((height as f64 / step).round() as usize).clamp(1, height);
    let cols = ((width as f64 / step).round() as usize).clamp(1, width);
    let mut centres: Vec<Centre> = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let y = (r as f64 + 0.5) * height as f64 / rows as f64;
            let x = (c as f64 + 0.5) * width as f64 / cols as f64;
            let (py, px) = ((y as usize).min(height - 1), (x as usize).min(width - 1));
            centres.push(Centre {
                c: img[py * width + px] as f64 * cfg.intensity_scale,
                y,
                x,
            });
        }
    }

    let spatial = (cfg.compactness / step).powi(2);
    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..cfg.iterations.max(1) {
        dist.fill(f64::INFINITY);
        for (k, ct) in centres.iter().enumerate() {
            let y0 = (ct.y - step).floor().max(0.0) as usize;
            let y1 = ((ct.y + step).ceil() as usize).min(height);
            let x0 = (ct.x - step).floor().max(0.0) as usize;
            let x1 = ((ct.x + step).ceil() as usize).min(width);
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = y * width + x;
                    let dc = img[i] as f64 * cfg.intensity_scale - ct.c;
                    let (dy, dx) = (y as f64 + 0.5 - ct.y, x as f64 + 0.5 - ct.x);
                    let d = dc * dc + spatial * (dy * dy + dx * dx);
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = k as u32;
                    }
                }
            }
        }
        // Pixels outside every window go to the nearest centre.
        for i in 0..n {
            if dist[i].is_infinite() {
                let (y, x) = ((i / width) as f64 + 0.5, (i % width) as f64 + 0.5);
                let best = centres
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (k, (c.y - y).powi(2) + (c.x - x).powi(2)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                labels[i] = best.0 as u32;
            }
        }
        let mut sums = vec![[0.0f64; 4]; centres.len()];
        for (i, &l) in labels.iter().enumerate() {
            let s = &mut sums[l as usize];
            s[0] += img[i] as f64 * cfg.intensity_scale;
            s[1] += (i / width) as f64 + 0.5;
            s[2] += (i % width) as f64 + 0.5;
            s[3] += 1.0;
        }
        for (ct, s) in centres.iter_mut().zip(&sums) {
            if s[3] > 0.0 {
                *ct = Centre {
                    c: s[0] / s[3],
                    y: s[1] / s[3],
                    x: s[2] / s[3],
                };
            }
        }
    }

    let min_size = ((cfg.min_size_factor * n as f64 / cfg.segments as f64) as usize).max(1);
    Ok(enforce_connectivity(&labels, height, width, min_size))
}

/// Split labels into 4-connected components, merge every component that is
/// not the largest piece of its label, or is below `min_size`, into its
/// largest adjacent component, and relabel in scan order.
fn enforce_connectivity(labels: &[u32], height: usize, width: usize, min_size: usize) -> SegmentMask {
    let n = labels.len();
    let neighbours = |i: usize| {
        let (y, x) = (i / width, i % width);
        [
            (y > 0).then(|| i - width),
            (y + 1 < height).then(|| i + width),
            (x > 0).then(|| i - 1),
            (x + 1 < width).then(|| i + 1),
        ]
        .into_iter()
        .flatten()
    };

    let mut comp = vec![usize::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut comp_label: Vec<u32> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for j in neighbours(i) {
                if comp[j] == usize::MAX && labels[j] == labels[start] {
                    comp[j] = id;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
        comp_label.push(labels[start]);
    }

    let mut largest: std::collections::HashMap<u32, usize> = Default::default();
    for (id, (&l, &s)) in comp_label.iter().zip(&sizes).enumerate() {
        let e = largest.entry(l).or_insert(id);
        if s > sizes[*e] {
            *e = id;
        }
    }
    let orphan: Vec<bool> = (0..sizes.len())
        .map(|id| largest[&comp_label[id]] != id || sizes[id] < min_size)
        .collect();

    let mut adjacent: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for i in 0..n {
        for j in neighbours(i) {
            if comp[j] != comp[i] && !adjacent[comp[i]].contains(&comp[j]) {
                adjacent[comp[i]].push(comp[j]);
            }
        }
    }

    let mut parent: Vec<usize> = (0..sizes.len()).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut merged_size = sizes.clone();
    // Smallest orphans first so fragments join settled regions.
    let mut order: Vec<usize> = (0..sizes.len()).filter(|&id| orphan[id]).collect();
    order.sort_by_key(|&id| (sizes[id], id));
    for id in order {
        let root = find(&mut parent, id);
        let mut best: Option<(usize, usize)> = None;
        for &nb in &adjacent[id] {
            let r = find(&mut parent, nb);
            if r == root {
                continue;
            }
            let s = merged_size[r];
            if best.is_none_or(|(bs, br)| s > bs || (s == bs && r < br)) {
                best = Some((s, r));
            }
        }
        if let Some((_, target)) = best {
            parent[root] = target;
            merged_size[target] += merged_size[root];
        }
    }

    let mut relabel = vec![u32::MAX; sizes.len()];
    let mut next = 0u32;
    let mut out = vec![0u32; n];
    for i in 0..n {
        let r = find(&mut parent, comp[i]);
        if relabel[r] == u32::MAX {
            relabel[r] = next;
            next += 1;
        }
        out[i] = relabel[r];
    }
    SegmentMask {
        height,
        width,
        labels: out,
        count: next as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_label_is_separated() {
        // Label 0 appears in two disconnected places; the small piece merges
        // into its neighbour.
        let labels = [0, 0, 1, 1, 0, 0, 1, 0, 0, 1, 1, 1];
        let m = enforce_connectivity(&labels, 3, 4, 1);
        assert_eq!(m.count, 2);
        assert_eq!(m.labels[7], m.labels[6]);
    }

    #[test]
    fn single_segment() {
        let m = slic_segment(&[0.3; 20 * 30], 20, 30, &SlicConfig { segments: 1, ..Default::default() }).unwrap();
        assert_eq!(m.count, 1);
        assert!(m.labels.iter().all(|&l| l == 0));
    }
}
