//! Per-transaction parenclitic networks.
//!
//! Nodes are features. The weight of edge `(i, j)` is the distance of the
//! transaction's `(x_i, x_j)` point from the licit regression line of that
//! pair. A single global threshold, calibrated to a target link density over
//! licit training networks, turns weights into edges.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    k: usize,
    w: Vec<f64>,
}

impl WeightedNetwork {
    pub fn zeros(k: usize) -> Self {
        WeightedNetwork {
            k,
            w: vec![0.0; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.k + j]
    }

    /// Sets both `(i, j)` and `(j, i)`. Panics on the diagonal or a negative
    /// weight.
    pub fn set(&mut self, i: usize, j: usize, weight: f64) {
        assert!(i != j, "no self loops");
        assert!(weight >= 0.0, "weights are non-negative");
        self.w[i * self.k + j] = weight;
        self.w[j * self.k + i] = weight;
    }

    /// Strict upper triangle, row-major.
    pub fn upper_weights(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.k).flat_map(move |i| (i + 1..self.k).map(move |j| self.weight(i, j)))
    }

    pub fn mean_weight(&self) -> f64 {
        let m = self.k * self.k.saturating_sub(1) / 2;
        if m == 0 {
            return 0.0;
        }
        self.upper_weights().sum::<f64>() / m as f64
    }
}

/// Undirected simple graph on `k` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryNetwork {
    k: usize,
    adj: Vec<bool>,
}

impl BinaryNetwork {
    pub fn empty(k: usize) -> Self {
        BinaryNetwork {
            k,
            adj: vec![false; k * k],
        }
    }

    pub fn complete(k: usize) -> Self {
        let mut g = Self::empty(k);
        for i in 0..k {
            for j in i + 1..k {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(k);
        for &(i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        assert!(i != j, "no self loops");
        self.adj[i * self.k + j] = true;
        self.adj[j * self.k + i] = true;
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.k + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(move |&j| self.has_edge(i, j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.k).map(|i| self.degree(i)).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.k {
            for j in i + 1..self.k {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Graph with node `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> BinaryNetwork {
        let mut g = Self::empty(self.k);
        for (i, j) in self.edges() {
            g.add_edge(perm[i], perm[j]);
        }
        g
    }
}

/// Builds the weighted network of one normalized transaction.
pub fn build_weighted(features: &[f64], model: &BaselineModel) -> Result<WeightedNetwork> {
    let k = model.num_features();
    if features.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: features.len(),
        });
    }
    let mut net = WeightedNetwork::zeros(k);
    for line in &model.lines {
        net.set(
            line.i,
            line.j,
            line.distance(features[line.i], features[line.j]),
        );
    }
    Ok(net)
}

/// Global weight threshold reaching a target link density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityThreshold {
    pub density: f64,
    /// `+inf` (serialized as `null`) when the density is zero.
    #[serde(with = "infinite_as_null")]
    pub alpha: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Picks `alpha` so that the pooled upper-triangle weights of `networks`
/// that are `>= alpha` make up (first reaching) `density` of the pool.
pub fn calibrate_alpha(networks: &[WeightedNetwork], density: f64) -> Result<DensityThreshold> {
    if networks.is_empty() {
        return Err(Error::Empty("no networks to calibrate the threshold on"));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::Config(format!(
            "density must be in [0, 1], got {density}"
        )));
    }
    let mut pool: Vec<f64> = networks.iter().flat_map(|n| n.upper_weights()).collect();
    if pool.is_empty() {
        return Err(Error::Empty("networks have no candidate edges"));
    }
    let p = pool.len();
    // smallest m with m / p >= density
    let mut m = ((density * p as f64).ceil() as usize).min(p);
    while m > 0 && (m - 1) as f64 / p as f64 >= density {
        m -= 1;
    }
    while (m as f64) / (p as f64) < density && m < p {
        m += 1;
    }
    if m == 0 {
        return Ok(DensityThreshold {
            density,
            alpha: f64::INFINITY,
        });
    }
    pool.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(DensityThreshold {
        density,
        alpha: pool[m - 1],
    })
}

/// Keeps edge `(i, j)` iff `w_ij >= alpha`.
pub fn binarize(net: &WeightedNetwork, thr: &DensityThreshold) -> BinaryNetwork {
    let mut g = BinaryNetwork::empty(net.k());
    for i in 0..net.k() {
        for j in i + 1..net.k() {
            if net.weight(i, j) >= thr.alpha {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Edge-list dump: header `k density alpha`, then `i j weight` per kept edge.
pub fn write_edge_list<W: Write>(
    mut out: W,
    net: &WeightedNetwork,
    thr: &DensityThreshold,
) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", net.k(), thr.density, thr.alpha)?;
    for (i, j) in binarize(net, thr).edges() {
        writeln!(out, "{} {} {}", i, j, net.weight(i, j))?;
    }
    Ok(())
}
