//! Confusion counts, ROC curves, link-density sweeps and transaction-size
//! stratification.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{balance_indices, Dataset};
use crate::error::{Error, Result};
use crate::mlp::TrainConfig;
use crate::pipeline::{self, Classifier, FeatureSet, ScoringPipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn error_rate(&self) -> f64 {
        ratio(self.fp + self.fn_, self.total())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Counts with the inclusive rule: predicted positive iff `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From threshold `+inf` at (0, 0) down to the lowest score at (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC with one point per distinct score; AUC by the trapezoidal rule.
pub fn roc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut idx = 0;
    while idx < order.len() {
        let threshold = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == threshold {
            if labels[order[idx]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        let prev = *points.last().expect("non-empty");
        let p = RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}

/// `threshold,fpr,tpr` rows.
pub fn write_roc_csv<W: Write>(out: W, curve: &RocCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in &curve.points {
        w.write_record([
            p.threshold.to_string(),
            p.fpr.to_string(),
            p.tpr.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<roc csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub train: TrainConfig,
    /// Seed of the balanced subsamples.
    pub seed: u64,
    /// Evaluate on a balanced subsample of the test set (otherwise on all of it).
    pub balanced_eval: bool,
    /// Fit the pairwise lines on the licit half of the balanced training set
    /// instead of on every licit training record.
    pub baseline_on_balanced: bool,
    pub threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            train: TrainConfig::default(),
            seed: 0,
            balanced_eval: true,
            baseline_on_balanced: false,
            threshold: 0.5,
        }
    }
}

/// Default density grid: 0.1 to 0.9 in steps of 0.1.
pub fn default_densities() -> Vec<f64> {
    (1..=9).map(|d| d as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub densities: Vec<f64>,
    pub error_raw: Vec<f64>,
    pub error_parenclitic: Vec<f64>,
    pub error_combined: Vec<f64>,
    pub tpr_raw: Vec<f64>,
    pub tpr_parenclitic: Vec<f64>,
    pub tpr_combined: Vec<f64>,
}

impl SweepResult {
    /// Density with the lowest combined error; the first one on ties.
    pub fn best_density(&self) -> (f64, f64) {
        let mut best = (self.densities[0], self.error_combined[0]);
        for (&d, &e) in self.densities.iter().zip(&self.error_combined) {
            if e < best.1 {
                best = (d, e);
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "density",
            "error_raw",
            "error_parenclitic",
            "error_combined",
            "tpr_raw",
            "tpr_parenclitic",
            "tpr_combined",
        ])?;
        for i in 0..self.densities.len() {
            w.write_record([
                self.densities[i].to_string(),
                self.error_raw[i].to_string(),
                self.error_parenclitic[i].to_string(),
                self.error_combined[i].to_string(),
                self.tpr_raw[i].to_string(),
                self.tpr_parenclitic[i].to_string(),
                self.tpr_combined[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }
}

/// (error, tpr) of one classifier.
type Scored = (f64, f64);

/// Classification error of the three feature sets across link densities.
///
/// The raw-feature classifier does not depend on the density, so it is
/// trained once and its error repeated for every density.
pub fn density_sweep(
    train: &Dataset,
    test: &Dataset,
    densities: &[f64],
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if densities.is_empty() {
        return Err(Error::Empty("density grid"));
    }
    if let Some(d) = densities.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(Error::Config(format!("density must be in [0, 1], got {d}")));
    }
    let train_idx = balance_indices(&train.labels(), cfg.seed)?;
    let test_idx = if cfg.balanced_eval {
        balance_indices(&test.labels(), cfg.seed.wrapping_add(1))?
    } else {
        (0..test.len()).collect()
    };
    let fit_set = if cfg.baseline_on_balanced {
        train.select(&train_idx)
    } else {
        train.clone()
    };
    let baseline = pipeline::fit_baseline(&fit_set)?;
    let train_nets = pipeline::weighted_networks(train, &baseline)?;
    let test_nets = pipeline::weighted_networks(test, &baseline)?;
    let test_labels: Vec<u8> = test_idx.iter().map(|&i| test.records[i].label()).collect();

    let evaluate = |set: FeatureSet,
                    train_topo: Option<&[crate::topo::TopoFeatures]>,
                    test_topo: Option<&[crate::topo::TopoFeatures]>|
     -> Result<(f64, f64)> {
        let x_train = pipeline::feature_matrix(train, train_topo, set)?.select(&train_idx);
        let x_test = pipeline::feature_matrix(test, test_topo, set)?.select(&test_idx);
        let clf = Classifier::train(set, &x_train, &cfg.train)?;
        let scores = clf.scores(&x_test)?;
        let c = confusion(&scores, &test_labels, cfg.threshold)?;
        Ok((c.error_rate(), c.tpr()))
    };

    let (raw_err, raw_tpr) = evaluate(FeatureSet::Raw, None, None)?;
    let per_density: Vec<Result<(Scored, Scored)>> = densities
        .par_iter()
        .map(|&density| {
            let thr = pipeline::calibrate_threshold(train, &train_nets, density)?;
            let train_topo = pipeline::topo_features(&train_nets, &thr)?;
            let test_topo = pipeline::topo_features(&test_nets, &thr)?;
            let par = evaluate(FeatureSet::Parenclitic, Some(&train_topo), Some(&test_topo))?;
            let com = evaluate(FeatureSet::Combined, Some(&train_topo), Some(&test_topo))?;
            Ok((par, com))
        })
        .collect();

    let n = densities.len();
    let mut out = SweepResult {
        densities: densities.to_vec(),
        error_raw: vec![raw_err; n],
        error_parenclitic: Vec::with_capacity(n),
        error_combined: Vec::with_capacity(n),
        tpr_raw: vec![raw_tpr; n],
        tpr_parenclitic: Vec::with_capacity(n),
        tpr_combined: Vec::with_capacity(n),
    };
    for r in per_density {
        let ((pe, pt), (ce, ct)) = r?;
        out.error_parenclitic.push(pe);
        out.tpr_parenclitic.push(pt);
        out.error_combined.push(ce);
        out.tpr_combined.push(ct);
    }
    Ok(out)
}

/// ROC of the records at or above one transaction-size cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumRoc {
    pub cutoff: f64,
    pub count: usize,
    /// `None` when the stratum lacks one of the classes.
    pub roc: Option<RocCurve>,
}

/// One ROC per cutoff, over test records with `transaction_size >= cutoff`.
pub fn stratify_by_size(
    test: &Dataset,
    model: &ScoringPipeline,
    cutoffs: &[f64],
) -> Result<Vec<StratumRoc>> {
    if cutoffs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("size cutoffs must be non-decreasing".into()));
    }
    let scores = model.score_dataset(test)?;
    let labels = test.labels();
    Ok(cutoffs
        .iter()
        .map(|&cutoff| {
            let keep: Vec<usize> = (0..test.len())
                .filter(|&i| test.records[i].transaction_size >= cutoff)
                .collect();
            let s: Vec<f64> = keep.iter().map(|&i| scores[i]).collect();
            let l: Vec<u8> = keep.iter().map(|&i| labels[i]).collect();
            StratumRoc {
                cutoff,
                count: keep.len(),
                roc: roc(&s, &l).ok(),
            }
        })
        .collect())
}
