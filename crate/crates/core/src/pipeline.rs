//! Glue between the stages: normalization, pairwise lines, networks,
//! metrics, feature matrices and the scaled classifier.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::BaselineModel;
use crate::data::{
    fit_norm_stats, normalize, Dataset, FeatureMatrix, NormStats, FEATURE_NAMES, NUM_FEATURES,
};
use crate::error::{Error, Result};
use crate::mlp::{MlpModel, TrainConfig, TrainReport};
use crate::network::{
    binarize, build_weighted, calibrate_alpha, DensityThreshold, WeightedNetwork,
};
use crate::topo::{extract_all, TopoFeatures, METRIC_NAMES, NUM_METRICS};

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Raw,
    Parenclitic,
    Combined,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [
        FeatureSet::Raw,
        FeatureSet::Parenclitic,
        FeatureSet::Combined,
    ];

    pub fn dim(self) -> usize {
        match self {
            FeatureSet::Raw => NUM_FEATURES,
            FeatureSet::Parenclitic => NUM_METRICS,
            FeatureSet::Combined => NUM_FEATURES + NUM_METRICS,
        }
    }

    pub fn names(self) -> Vec<String> {
        let raw = FEATURE_NAMES.iter();
        let topo = METRIC_NAMES.iter();
        match self {
            FeatureSet::Raw => raw.map(|s| s.to_string()).collect(),
            FeatureSet::Parenclitic => topo.map(|s| s.to_string()).collect(),
            FeatureSet::Combined => raw.chain(topo).map(|s| s.to_string()).collect(),
        }
    }

    pub fn needs_networks(self) -> bool {
        self != FeatureSet::Raw
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Raw => "raw",
            FeatureSet::Parenclitic => "parenclitic",
            FeatureSet::Combined => "combined",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(FeatureSet::Raw),
            "parenclitic" => Ok(FeatureSet::Parenclitic),
            "combined" => Ok(FeatureSet::Combined),
            other => Err(Error::Config(format!(
                "unknown feature set `{other}` (expected raw, parenclitic or combined)"
            ))),
        }
    }
}

/// Normalization statistics and pairwise lines, both fitted on the licit
/// records of `train`.
pub fn fit_baseline(train: &Dataset) -> Result<BaselineModel> {
    let stats = fit_norm_stats(train, true)?;
    let normalized = normalize(train, &stats)?;
    BaselineModel::fit(&normalized, stats, true)
}

pub fn weighted_networks(ds: &Dataset, baseline: &BaselineModel) -> Result<Vec<WeightedNetwork>> {
    ds.records
        .par_iter()
        .map(|r| {
            let mut x = r.features();
            baseline.norm_stats.apply(&mut x)?;
            build_weighted(&x, baseline)
        })
        .collect()
}

/// Calibrates the threshold on the networks of the licit records of `train`.
/// `nets` must be aligned with `train.records`.
pub fn calibrate_threshold(
    train: &Dataset,
    nets: &[WeightedNetwork],
    density: f64,
) -> Result<DensityThreshold> {
    if nets.len() != train.len() {
        return Err(Error::LengthMismatch {
            left: nets.len(),
            right: train.len(),
        });
    }
    let licit: Vec<WeightedNetwork> = nets
        .iter()
        .zip(&train.records)
        .filter(|(_, r)| !r.fraud)
        .map(|(n, _)| n.clone())
        .collect();
    calibrate_alpha(&licit, density)
}

pub fn topo_features(
    nets: &[WeightedNetwork],
    thr: &DensityThreshold,
) -> Result<Vec<TopoFeatures>> {
    nets.par_iter()
        .map(|n| extract_all(&binarize(n, thr)))
        .collect()
}

/// Feature matrix of `ds` for one feature set. Raw columns are the record
/// values as stored; metric columns come from `topo`, aligned with records.
pub fn feature_matrix(
    ds: &Dataset,
    topo: Option<&[TopoFeatures]>,
    set: FeatureSet,
) -> Result<FeatureMatrix> {
    let topo = match (set.needs_networks(), topo) {
        (true, Some(t)) => {
            if t.len() != ds.len() {
                return Err(Error::LengthMismatch {
                    left: t.len(),
                    right: ds.len(),
                });
            }
            Some(t)
        }
        (true, None) => {
            return Err(Error::Config(format!(
                "feature set `{set}` needs network metrics"
            )))
        }
        (false, _) => None,
    };
    let mut m = FeatureMatrix::new(set.names());
    m.values.reserve(ds.len() * set.dim());
    let mut row = Vec::with_capacity(set.dim());
    for (i, r) in ds.records.iter().enumerate() {
        row.clear();
        if set != FeatureSet::Parenclitic {
            row.extend_from_slice(&r.features());
        }
        if let Some(t) = topo {
            row.extend_from_slice(&t[i].to_array());
        }
        m.push(&row, r.label())?;
    }
    Ok(m)
}

/// Perceptron with its input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub feature_set: FeatureSet,
    pub scaler: NormStats,
    pub mlp: MlpModel,
    pub train_config: TrainConfig,
    pub final_loss: f64,
}

impl Classifier {
    pub fn train(set: FeatureSet, data: &FeatureMatrix, cfg: &TrainConfig) -> Result<Classifier> {
        Self::train_with_report(set, data, cfg).map(|(c, _)| c)
    }

    pub fn train_with_report(
        set: FeatureSet,
        data: &FeatureMatrix,
        cfg: &TrainConfig,
    ) -> Result<(Classifier, TrainReport)> {
        if data.ncols() != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                got: data.ncols(),
            });
        }
        let scaler = NormStats::from_rows(data.rows(), data.ncols())?;
        let scaled = data.standardized(&scaler)?;
        let mut mlp = MlpModel::init(set.dim(), cfg)?;
        let report = mlp.train(&scaled, cfg)?;
        let clf = Classifier {
            feature_set: set,
            scaler,
            mlp,
            train_config: *cfg,
            final_loss: report.final_loss,
        };
        Ok((clf, report))
    }

    pub fn scores(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        if data.ncols() != self.feature_set.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_set.dim(),
                got: data.ncols(),
            });
        }
        self.mlp.scores(&data.standardized(&self.scaler)?)
    }
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Serialized classifier plus the network threshold it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub threshold: Option<DensityThreshold>,
    pub classifier: Classifier,
}

impl ModelFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        write_atomic(path.as_ref(), json.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: ModelFile = serde_json::from_str(&text)?;
        if m.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: m.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        Ok(m)
    }
}

/// Everything needed to score raw transactions end to end.
#[derive(Debug, Clone)]
pub struct ScoringPipeline {
    pub baseline: Option<BaselineModel>,
    pub threshold: Option<DensityThreshold>,
    pub classifier: Classifier,
}

impl ScoringPipeline {
    pub fn features(&self, ds: &Dataset) -> Result<FeatureMatrix> {
        let set = self.classifier.feature_set;
        if !set.needs_networks() {
            return feature_matrix(ds, None, set);
        }
        let (baseline, thr) = match (&self.baseline, &self.threshold) {
            (Some(b), Some(t)) => (b, t),
            _ => {
                return Err(Error::Config(format!(
                    "feature set `{set}` needs a baseline model and a threshold"
                )))
            }
        };
        let nets = weighted_networks(ds, baseline)?;
        let topo = topo_features(&nets, thr)?;
        feature_matrix(ds, Some(&topo), set)
    }

    pub fn score_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.classifier.scores(&self.features(ds)?)
    }
}

/// Fits every stage on `train` for one feature set and density.
pub fn fit_pipeline(
    train: &Dataset,
    set: FeatureSet,
    density: f64,
    cfg: &TrainConfig,
    balance_seed: u64,
) -> Result<ScoringPipeline> {
    let baseline = fit_baseline(train)?;
    let (threshold, topo) = if set.needs_networks() {
        let nets = weighted_networks(train, &baseline)?;
        let thr = calibrate_threshold(train, &nets, density)?;
        let topo = topo_features(&nets, &thr)?;
        (Some(thr), Some(topo))
    } else {
        (None, None)
    };
    let idx = crate::data::balance_indices(&train.labels(), balance_seed)?;
    let x = feature_matrix(train, topo.as_deref(), set)?.select(&idx);
    let classifier = Classifier::train(set, &x, cfg)?;
    Ok(ScoringPipeline {
        baseline: Some(baseline),
        threshold,
        classifier,
    })
}
