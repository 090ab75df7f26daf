//! Brute-force reference implementations shared by the integration tests.
//!
//! These deliberately avoid the library's own helpers: graphs are handled as
//! dense boolean matrices and distances come from Floyd–Warshall.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashMap;

use parenclitic::network::BinaryNetwork;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn matrix(g: &BinaryNetwork) -> Vec<Vec<bool>> {
    let k = g.k();
    (0..k)
        .map(|i| (0..k).map(|j| g.has_edge(i, j)).collect())
        .collect()
}

/// Erdős–Rényi graph with an edge probability drawn uniformly per graph.
pub fn random_graph(rng: &mut ChaCha8Rng, k: usize) -> BinaryNetwork {
    let p: f64 = rng.random();
    let mut g = BinaryNetwork::empty(k);
    for i in 0..k {
        for j in i + 1..k {
            if rng.random::<f64>() < p {
                g.add_edge(i, j);
            }
        }
    }
    g
}

fn degrees(a: &[Vec<bool>]) -> Vec<usize> {
    a.iter()
        .map(|row| row.iter().filter(|&&e| e).count())
        .collect()
}

pub fn max_degree(a: &[Vec<bool>]) -> usize {
    degrees(a).into_iter().max().unwrap_or(0)
}

pub fn degree_entropy(a: &[Vec<bool>]) -> f64 {
    let mut d = degrees(a);
    d.sort_unstable();
    let n = d.len() as f64;
    let mut h = 0.0;
    let mut start = 0;
    while start < d.len() {
        let end = start + d[start..].iter().take_while(|&&x| x == d[start]).count();
        let p = (end - start) as f64 / n;
        h -= p * p.ln();
        start = end;
    }
    h
}

/// Pearson correlation over the ordered endpoint pairs of every edge.
pub fn assortativity(a: &[Vec<bool>]) -> f64 {
    let d = degrees(a);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..a.len() {
        for j in 0..a.len() {
            if a[i][j] {
                xs.push(d[i] as f64);
                ys.push(d[j] as f64);
            }
        }
    }
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx / n < 1e-12 || syy / n < 1e-12 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn transitivity(a: &[Vec<bool>]) -> f64 {
    let k = a.len();
    let mut closed = 0usize;
    let mut triplets = 0usize;
    // ordered (left, centre, right) with left < right
    for c in 0..k {
        for l in 0..k {
            for r in l + 1..k {
                if l != c && r != c && a[c][l] && a[c][r] {
                    triplets += 1;
                    if a[l][r] {
                        closed += 1;
                    }
                }
            }
        }
    }
    if triplets == 0 {
        0.0
    } else {
        closed as f64 / triplets as f64
    }
}

pub fn floyd_warshall(a: &[Vec<bool>]) -> Vec<Vec<Option<usize>>> {
    let k = a.len();
    let mut d = vec![vec![None; k]; k];
    for i in 0..k {
        d[i][i] = Some(0);
        for j in 0..k {
            if a[i][j] {
                d[i][j] = Some(1);
            }
        }
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                if let (Some(x), Some(y)) = (d[i][m], d[m][j]) {
                    if d[i][j].is_none_or(|cur| x + y < cur) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

pub fn geodesic(a: &[Vec<bool>]) -> f64 {
    let d = floyd_warshall(a);
    let mut reachable = Vec::new();
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if let Some(x) = d[i][j] {
                reachable.push(x);
            }
        }
    }
    if reachable.is_empty() {
        0.0
    } else {
        reachable.iter().sum::<usize>() as f64 / reachable.len() as f64
    }
}

pub fn efficiency(a: &[Vec<bool>]) -> f64 {
    let k = a.len();
    let d = floyd_warshall(a);
    let mut sum = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                if let Some(x) = d[i][j] {
                    sum += 1.0 / x as f64;
                }
            }
        }
    }
    sum / (k * (k - 1)) as f64
}

fn h2(p: f64) -> f64 {
    if p == 0.0 || p == 1.0 {
        0.0
    } else {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }
}

/// Greedy merge cost: every cheapest merge is explored and the smallest
/// total kept.
pub fn information_content(a: &[Vec<bool>]) -> f64 {
    let mut memo = HashMap::new();
    ic_rec(a.to_vec(), &mut memo)
}

fn ic_rec(a: Vec<Vec<bool>>, memo: &mut HashMap<Vec<Vec<bool>>, f64>) -> f64 {
    let m = a.len();
    if m <= 2 {
        return 0.0;
    }
    if let Some(&v) = memo.get(&a) {
        return v;
    }
    let len = m - 2;
    let mut costs = Vec::new();
    for u in 0..m {
        for v in u + 1..m {
            let dis = (0..m)
                .filter(|&w| w != u && w != v && a[u][w] != a[v][w])
                .count();
            let q = dis.min(len - dis);
            costs.push((q, u, v));
        }
    }
    let best = costs.iter().map(|c| c.0).min().unwrap();
    let step = len as f64 * h2(best as f64 / len as f64);
    let mut total = f64::INFINITY;
    for &(q, u, v) in &costs {
        if q != best {
            continue;
        }
        // contract v into u
        let keep: Vec<usize> = (0..m).filter(|&x| x != v).collect();
        let mut b = vec![vec![false; m - 1]; m - 1];
        for (ni, &x) in keep.iter().enumerate() {
            for (nj, &y) in keep.iter().enumerate() {
                if ni == nj {
                    continue;
                }
                let mut e = a[x][y];
                if x == u {
                    e |= a[v][y];
                }
                if y == u {
                    e |= a[x][v];
                }
                b[ni][nj] = e;
            }
        }
        total = total.min(step + ic_rec(b, memo));
    }
    memo.insert(a, total);
    total
}

/// All seven metrics in library order.
pub fn all_metrics(g: &BinaryNetwork) -> [f64; 7] {
    let a = matrix(g);
    [
        max_degree(&a) as f64,
        degree_entropy(&a),
        assortativity(&a),
        transitivity(&a),
        geodesic(&a),
        efficiency(&a),
        information_content(&a),
    ]
}

/// Probability that a random positive outscores a random negative, ties ½.
pub fn concordance(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs as f64
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
