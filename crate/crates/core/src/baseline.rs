//! Pairwise linear relations among features of licit transactions.
//!
//! For every feature pair `i < j`, feature `j` is regressed on feature `i` by
//! ordinary least squares. A transaction's deviation from the relation is the
//! euclidean distance from its `(x_i, x_j)` point to the fitted line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, NormStats, EPS_VAR};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Fitted line `x_j = a * x_i + b` for the pair `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLine {
    pub i: usize,
    pub j: usize,
    pub a: f64,
    pub b: f64,
    /// The predictor had (near) zero variance; `a = 0` and `b = mean(x_j)`.
    pub degenerate: bool,
}

impl PairLine {
    /// Ordinary least squares of `ys` on `xs`.
    pub fn fit(i: usize, j: usize, xs: &[f64], ys: &[f64]) -> PairLine {
        debug_assert_eq!(xs.len(), ys.len());
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
        }
        if sxx / n < EPS_VAR {
            return PairLine {
                i,
                j,
                a: 0.0,
                b: my,
                degenerate: true,
            };
        }
        let a = sxy / sxx;
        PairLine {
            i,
            j,
            a,
            b: my - a * mx,
            degenerate: false,
        }
    }

    /// Euclidean distance from `(xi, xj)` to the line. For a degenerate line
    /// this is the vertical offset `|xj - b|`.
    pub fn distance(&self, xi: f64, xj: f64) -> f64 {
        if self.degenerate {
            return (xj - self.b).abs();
        }
        (self.a * xi - xj + self.b).abs() / (self.a * self.a + 1.0).sqrt()
    }
}

pub fn point_line_distance(point: (f64, f64), line: &PairLine) -> f64 {
    line.distance(point.0, point.1)
}

/// Position of pair `(i, j)`, `i < j`, in the row-major upper triangle.
pub fn pair_index(i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * (2 * k - i - 1) / 2 + (j - i - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub norm_stats: NormStats,
    pub lines: Vec<PairLine>,
}

impl BaselineModel {
    /// Fits all `k(k-1)/2` lines on an already normalized matrix.
    ///
    /// `norm_stats` is stored alongside the lines so that new transactions
    /// can be normalized the same way.
    pub fn fit(training: &FeatureMatrix, norm_stats: NormStats, licit_only: bool) -> Result<Self> {
        let k = training.ncols();
        if norm_stats.width() != k {
            return Err(Error::FeatureCount {
                model: norm_stats.width(),
                expected: k,
            });
        }
        let selected: Vec<usize> = (0..training.nrows())
            .filter(|&r| !licit_only || training.labels[r] == 0)
            .collect();
        if selected.len() < 2 {
            return Err(Error::TooFewRecords {
                what: "licit records to fit pairwise lines",
                needed: 2,
                found: selected.len(),
            });
        }
        let columns: Vec<Vec<f64>> = (0..k)
            .map(|c| selected.iter().map(|&r| training.row(r)[c]).collect())
            .collect();
        let mut lines = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
        for i in 0..k {
            for j in i + 1..k {
                lines.push(PairLine::fit(i, j, &columns[i], &columns[j]));
            }
        }
        Ok(BaselineModel {
            schema_version: SCHEMA_VERSION,
            feature_names: training.names.clone(),
            norm_stats,
            lines,
        })
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn line(&self, i: usize, j: usize) -> &PairLine {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        &self.lines[pair_index(i, j, self.num_features())]
    }

    fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let k = self.num_features();
        if self.norm_stats.width() != k {
            return Err(Error::FeatureCount {
                model: self.norm_stats.width(),
                expected: k,
            });
        }
        if self.lines.len() != k * k.saturating_sub(1) / 2 {
            return Err(Error::Config(format!(
                "baseline has {} lines, expected {} for {k} features",
                self.lines.len(),
                k * k.saturating_sub(1) / 2
            )));
        }
        for (n, l) in self.lines.iter().enumerate() {
            if l.i >= l.j || l.j >= k || pair_index(l.i, l.j, k) != n {
                return Err(Error::Config(format!(
                    "baseline line {n} has unexpected pair ({}, {})",
                    l.i, l.j
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        crate::pipeline::write_atomic(path.as_ref(), json.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: BaselineModel = serde_json::from_str(&text)?;
        model.check()?;
        Ok(model)
    }

    /// Loads a model and checks it was fitted on `expected` features.
    pub fn load_expecting(path: impl AsRef<Path>, expected: usize) -> Result<Self> {
        let model = Self::load(path)?;
        if model.num_features() != expected {
            return Err(Error::FeatureCount {
                model: model.num_features(),
                expected,
            });
        }
        Ok(model)
    }
}
