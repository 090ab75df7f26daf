//! Structural metrics of binarized parenclitic networks.
//!
//! Conventions keep every metric finite: edgeless or regular graphs have zero
//! assortativity, and unreachable node pairs are skipped by the geodesic
//! average and contribute zero to efficiency.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::BinaryNetwork;

pub const NUM_METRICS: usize = 7;

pub const METRIC_NAMES: [&str; NUM_METRICS] = [
    "max_degree",
    "degree_entropy",
    "assortativity",
    "clustering",
    "geodesic",
    "efficiency",
    "information_content",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoFeatures {
    pub max_degree: usize,
    /// nats
    pub degree_entropy: f64,
    pub assortativity: f64,
    pub clustering: f64,
    pub geodesic: f64,
    pub efficiency: f64,
    /// bits
    pub information_content: f64,
}

impl TopoFeatures {
    /// Values in [`METRIC_NAMES`] order.
    pub fn to_array(&self) -> [f64; NUM_METRICS] {
        [
            self.max_degree as f64,
            self.degree_entropy,
            self.assortativity,
            self.clustering,
            self.geodesic,
            self.efficiency,
            self.information_content,
        ]
    }
}

pub fn max_degree(g: &BinaryNetwork) -> usize {
    g.degrees().into_iter().max().unwrap_or(0)
}

/// Shannon entropy (natural log) of the degree histogram.
pub fn degree_entropy(g: &BinaryNetwork) -> f64 {
    let k = g.k();
    if k == 0 {
        return 0.0;
    }
    let mut hist = vec![0usize; k];
    for d in g.degrees() {
        hist[d] += 1;
    }
    let n = k as f64;
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Degree assortativity: Pearson correlation of endpoint degrees over every
/// edge taken in both orientations.
pub fn assortativity(g: &BinaryNetwork) -> f64 {
    let deg = g.degrees();
    let edges = g.edges();
    if edges.is_empty() {
        return 0.0;
    }
    // both orientations make the two marginals identical
    let m = 2.0 * edges.len() as f64;
    let (mut sum, mut sum_sq, mut cross) = (0.0, 0.0, 0.0);
    for &(u, v) in &edges {
        let (du, dv) = (deg[u] as f64, deg[v] as f64);
        sum += du + dv;
        sum_sq += du * du + dv * dv;
        cross += 2.0 * du * dv;
    }
    let mean = sum / m;
    let var = sum_sq / m - mean * mean;
    if var.abs() < 1e-12 {
        return 0.0;
    }
    ((cross / m - mean * mean) / var).clamp(-1.0, 1.0)
}

/// Global transitivity: `3 * triangles / connected triplets`.
pub fn clustering(g: &BinaryNetwork) -> f64 {
    let deg = g.degrees();
    let triplets: usize = deg.iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    if triplets == 0 {
        return 0.0;
    }
    let mut triangles = 0usize;
    for (u, v) in g.edges() {
        triangles += (v + 1..g.k())
            .filter(|&w| g.has_edge(u, w) && g.has_edge(v, w))
            .count();
    }
    3.0 * triangles as f64 / triplets as f64
}

/// Breadth-first hop counts from `src`; `None` marks unreachable nodes.
pub fn bfs_distances(g: &BinaryNetwork, src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.k()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn pair_distances(g: &BinaryNetwork) -> Vec<Option<usize>> {
    let mut out = Vec::new();
    for i in 0..g.k() {
        let d = bfs_distances(g, i);
        out.extend(d[i + 1..].iter().copied());
    }
    out
}

/// Mean shortest-path length over mutually reachable pairs.
pub fn geodesic(g: &BinaryNetwork) -> f64 {
    let (mut total, mut count) = (0usize, 0usize);
    for d in pair_distances(g).into_iter().flatten() {
        total += d;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total as f64 / count as f64
    }
}

/// Global efficiency: mean of inverse distances over all pairs.
pub fn efficiency(g: &BinaryNetwork) -> f64 {
    let k = g.k();
    if k < 2 {
        return 0.0;
    }
    let inv: f64 = pair_distances(g)
        .into_iter()
        .flatten()
        .map(|d| 1.0 / d as f64)
        .sum();
    2.0 * inv / (k * (k - 1)) as f64
}

fn binary_entropy_bits(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Cost of merging two nodes whose rows disagree on `disagree` of `len`
/// comparable positions: `len * H(disagree / len)` in bits.
///
/// Computed from the minority count so that complementary fractions yield
/// bit-identical costs.
pub fn merge_cost(disagree: usize, len: usize) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let q = disagree.min(len - disagree);
    len as f64 * binary_entropy_bits(q as f64 / len as f64)
}

/// Greedy node-merging information content, in bits.
///
/// Repeatedly merges the pair of current nodes whose adjacency rows, compared
/// over every other current node, are cheapest to encode as one
/// ([`merge_cost`]). The merged node is adjacent to everything either node
/// was adjacent to. The step costs are summed until one node remains.
///
/// When several pairs share the cheapest step cost, every such merge is
/// followed and the smallest total is kept, which makes the value independent
/// of node labels. Intermediate graphs are memoized, so the search stays
/// small for the 8-node networks used here.
pub fn information_content(g: &BinaryNetwork) -> Result<f64> {
    let k = g.k();
    if !(2..=64).contains(&k) {
        return Err(Error::Config(format!(
            "information content needs between 2 and 64 nodes, got {k}"
        )));
    }
    let rows: Vec<u64> = (0..k)
        .map(|i| g.neighbors(i).fold(0u64, |acc, j| acc | (1 << j)))
        .collect();
    let mut memo = HashMap::new();
    Ok(greedy_merge_cost(rows, &mut memo))
}

fn greedy_merge_cost(rows: Vec<u64>, memo: &mut HashMap<Vec<u64>, f64>) -> f64 {
    let m = rows.len();
    if m <= 2 {
        return 0.0;
    }
    if let Some(&v) = memo.get(&rows) {
        return v;
    }
    let len = m - 2;
    let mut best_q = usize::MAX;
    let mut candidates = Vec::new();
    for u in 0..m {
        for v in u + 1..m {
            let others = !((1u64 << u) | (1u64 << v));
            let disagree = ((rows[u] ^ rows[v]) & others).count_ones() as usize;
            let q = disagree.min(len - disagree);
            if q < best_q {
                best_q = q;
                candidates.clear();
            }
            if q == best_q {
                candidates.push((u, v));
            }
        }
    }
    let step = merge_cost(best_q, len);
    let total = candidates
        .into_iter()
        .map(|(u, v)| step + greedy_merge_cost(merge_nodes(&rows, u, v), memo))
        .fold(f64::INFINITY, f64::min);
    memo.insert(rows, total);
    total
}

/// Quotient graph after merging `v` into `u` (`u < v`); nodes above `v`
/// shift down by one.
fn merge_nodes(rows: &[u64], u: usize, v: usize) -> Vec<u64> {
    let target = |w: usize| {
        if w == v {
            u
        } else if w > v {
            w - 1
        } else {
            w
        }
    };
    let mut out = vec![0u64; rows.len() - 1];
    for (x, &row) in rows.iter().enumerate() {
        let a = target(x);
        let mut bits = row;
        while bits != 0 {
            let y = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let b = target(y);
            if a != b {
                out[a] |= 1 << b;
            }
        }
    }
    out
}

/// All seven metrics in fixed order.
pub fn extract_all(g: &BinaryNetwork) -> Result<TopoFeatures> {
    Ok(TopoFeatures {
        max_degree: max_degree(g),
        degree_entropy: degree_entropy(g),
        assortativity: assortativity(g),
        clustering: clustering(g),
        geodesic: geodesic(g),
        efficiency: efficiency(g),
        information_content: information_content(g)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(leaves: usize) -> BinaryNetwork {
        let edges: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
        BinaryNetwork::from_edges(leaves + 1, &edges)
    }

    fn path(n: usize) -> BinaryNetwork {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        BinaryNetwork::from_edges(n, &edges)
    }

    fn cycle(n: usize) -> BinaryNetwork {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        BinaryNetwork::from_edges(n, &edges)
    }

    #[test]
    fn max_degree_cases() {
        assert_eq!(max_degree(&BinaryNetwork::empty(8)), 0);
        assert_eq!(max_degree(&star(7)), 7);
        assert_eq!(max_degree(&path(3)), 2);
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(degree_entropy(&cycle(8)), 0.0);
        let p: [f64; 2] = [1.0 / 8.0, 7.0 / 8.0];
        let oracle: f64 = p.iter().map(|p| -p * p.ln()).sum();
        assert!((degree_entropy(&star(7)) - oracle).abs() < 1e-12);
        assert!((oracle - 0.37677).abs() < 1e-5);
        // degrees (1, 1, 2, 2)
        let g = BinaryNetwork::from_edges(4, &[(0, 2), (2, 3), (3, 1)]);
        assert!((degree_entropy(&g) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn assortativity_cases() {
        assert_eq!(assortativity(&cycle(8)), 0.0);
        assert_eq!(assortativity(&BinaryNetwork::empty(8)), 0.0);
        for n in 2..8 {
            assert!((assortativity(&star(n)) + 1.0).abs() < 1e-12);
        }
        assert!((assortativity(&path(4)) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn clustering_cases() {
        assert_eq!(clustering(&BinaryNetwork::complete(3)), 1.0);
        assert_eq!(clustering(&path(3)), 0.0);
        let k4_minus = BinaryNetwork::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]);
        assert!((clustering(&k4_minus) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn distance_cases() {
        assert_eq!(geodesic(&BinaryNetwork::complete(8)), 1.0);
        assert!((geodesic(&path(3)) - 4.0 / 3.0).abs() < 1e-12);
        let two = BinaryNetwork::from_edges(4, &[(0, 1), (2, 3)]);
        assert_eq!(geodesic(&two), 1.0);
        assert_eq!(geodesic(&BinaryNetwork::empty(5)), 0.0);

        for n in 2..9 {
            assert!((efficiency(&BinaryNetwork::complete(n)) - 1.0).abs() < 1e-12);
        }
        assert_eq!(efficiency(&BinaryNetwork::empty(8)), 0.0);
        assert!((efficiency(&path(3)) - 2.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn merge_cost_is_symmetric() {
        for len in 1..8 {
            for d in 0..=len {
                assert_eq!(
                    merge_cost(d, len).to_bits(),
                    merge_cost(len - d, len).to_bits()
                );
            }
        }
        assert_eq!(merge_cost(0, 0), 0.0);
        assert!((merge_cost(1, 2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn information_content_cases() {
        assert_eq!(information_content(&BinaryNetwork::empty(8)).unwrap(), 0.0);
        assert_eq!(
            information_content(&BinaryNetwork::complete(8)).unwrap(),
            0.0
        );
        assert!(information_content(&BinaryNetwork::empty(1)).is_err());
        let v = information_content(&path(5)).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn extract_all_canonical() {
        let e = extract_all(&BinaryNetwork::empty(8)).unwrap();
        assert_eq!(e.to_array(), [0.0; 7]);
        let c = extract_all(&BinaryNetwork::complete(8)).unwrap();
        assert_eq!(c.to_array(), [7.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
    }
}
