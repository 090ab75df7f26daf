//! Transaction schema, CSV ingestion, normalization statistics and
//! train/test and balanced splits.
//!
//! Every record carries eight model-input features in a fixed order
//! ([`FEATURE_NAMES`]), followed by an optional commercial suspectness score
//! that is never used as a model input, and the fraud label.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;

/// Number of model-input features per transaction.
pub const NUM_FEATURES: usize = 8;

/// Feature columns, in pipeline order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "transaction_size",
    "time_since_last",
    "last_transaction_size",
    "avg_transaction_size",
    "avg_time_between",
    "same_shop",
    "hour_of_day",
    "fraud_rate",
];

pub const SUSPECTNESS_COLUMN: &str = "fraud_suspectness";
pub const LABEL_COLUMN: &str = "fraud";

/// Standard deviations below this are treated as zero.
pub const EPS_VAR: f64 = 1e-9;

/// One card operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub transaction_size: f64,
    pub time_since_last: f64,
    pub last_transaction_size: f64,
    pub avg_transaction_size: f64,
    pub avg_time_between: f64,
    pub same_shop: bool,
    pub hour_of_day: u8,
    pub fraud_rate: f64,
    pub fraud_suspectness: Option<u8>,
    pub fraud: bool,
}

impl TransactionRecord {
    /// The eight model-input features in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        [
            self.transaction_size,
            self.time_since_last,
            self.last_transaction_size,
            self.avg_transaction_size,
            self.avg_time_between,
            if self.same_shop { 1.0 } else { 0.0 },
            f64::from(self.hour_of_day),
            self.fraud_rate,
        ]
    }

    pub fn label(&self) -> u8 {
        u8::from(self.fraud)
    }

    /// Checks the domain constraints of the schema.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let money_and_time = [
            ("transaction_size", self.transaction_size),
            ("time_since_last", self.time_since_last),
            ("last_transaction_size", self.last_transaction_size),
            ("avg_transaction_size", self.avg_transaction_size),
            ("avg_time_between", self.avg_time_between),
        ];
        for (name, v) in money_and_time {
            if !v.is_finite() || v < 0.0 {
                return Err(format!(
                    "{name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        if !(1..=24).contains(&self.hour_of_day) {
            return Err(format!(
                "hour_of_day must be in [1, 24], got {}",
                self.hour_of_day
            ));
        }
        if !(0.0..=1.0).contains(&self.fraud_rate) {
            return Err(format!(
                "fraud_rate must be in [0, 1], got {}",
                self.fraud_rate
            ));
        }
        if let Some(s) = self.fraud_suspectness {
            if s > 100 {
                return Err(format!("fraud_suspectness must be in [0, 100], got {s}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<TransactionRecord>,
}

impl Dataset {
    pub fn new(records: Vec<TransactionRecord>) -> Self {
        Dataset { records }
    }

    pub fn feature_names(&self) -> [&'static str; NUM_FEATURES] {
        FEATURE_NAMES
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(TransactionRecord::label).collect()
    }

    /// (licit, fraud) counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let fraud = self.records.iter().filter(|r| r.fraud).count();
        (self.records.len() - fraud, fraud)
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }
}

fn normalize_header(h: &str) -> String {
    h.trim()
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

/// Reads a dataset from a CSV file.
pub fn parse_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

/// Reads a dataset from any CSV source. Rows are numbered from 1, counting
/// data rows only.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: HashMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (normalize_header(h), i))
        .collect();

    let column = |name: &str| -> Result<usize> {
        headers
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let mut feature_cols = [0usize; NUM_FEATURES];
    for (slot, name) in feature_cols.iter_mut().zip(FEATURE_NAMES) {
        *slot = column(name)?;
    }
    let label_col = column(LABEL_COLUMN)?;
    let suspect_col = headers.get(SUSPECTNESS_COLUMN).copied();

    let mut records = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let row_no = idx + 1;
        let row = row?;
        let cell = |col: usize, name: &str| -> Result<f64> {
            let raw = row.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::InvalidCell {
                row: row_no,
                column: name.to_string(),
                message: format!("cannot parse `{raw}` as a number"),
            })
        };
        let invalid = |name: &str, message: String| Error::InvalidCell {
            row: row_no,
            column: name.to_string(),
            message,
        };
        let flag = |col: usize, name: &str| -> Result<bool> {
            let v = cell(col, name)?;
            if v == 0.0 {
                Ok(false)
            } else if v == 1.0 {
                Ok(true)
            } else {
                Err(invalid(name, format!("expected 0 or 1, got {v}")))
            }
        };

        let mut f = [0.0; NUM_FEATURES];
        for (k, (&col, name)) in feature_cols.iter().zip(FEATURE_NAMES).enumerate() {
            if k == 5 || k == 6 {
                continue;
            }
            f[k] = cell(col, name)?;
        }
        let same_shop = flag(feature_cols[5], FEATURE_NAMES[5])?;
        let hour = cell(feature_cols[6], FEATURE_NAMES[6])?;
        if hour.fract() != 0.0 || !(1.0..=24.0).contains(&hour) {
            return Err(invalid(
                FEATURE_NAMES[6],
                format!("hour must be an integer in [1, 24], got {hour}"),
            ));
        }
        let fraud_suspectness = match suspect_col {
            Some(col) => {
                let raw = row.get(col).unwrap_or("");
                if raw.is_empty() {
                    None
                } else {
                    let v = cell(col, SUSPECTNESS_COLUMN)?;
                    if v.fract() != 0.0 || !(0.0..=100.0).contains(&v) {
                        return Err(invalid(
                            SUSPECTNESS_COLUMN,
                            format!("expected an integer in [0, 100], got {v}"),
                        ));
                    }
                    Some(v as u8)
                }
            }
            None => None,
        };
        let record = TransactionRecord {
            transaction_size: f[0],
            time_since_last: f[1],
            last_transaction_size: f[2],
            avg_transaction_size: f[3],
            avg_time_between: f[4],
            same_shop,
            hour_of_day: hour as u8,
            fraud_rate: f[7],
            fraud_suspectness,
            fraud: flag(label_col, LABEL_COLUMN)?,
        };
        record.validate().map_err(|m| Error::InvalidCell {
            row: row_no,
            column: "record".to_string(),
            message: m,
        })?;
        records.push(record);
    }
    Ok(Dataset::new(records))
}

/// Writes the dataset as CSV. Absent suspectness scores are empty cells.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    write_csv_with_column(ds, None, writer)
}

/// Like [`write_csv`], optionally appending one extra numeric column.
pub fn write_csv_with_column<W: Write>(
    ds: &Dataset,
    extra: Option<(&str, &[f64])>,
    writer: W,
) -> Result<()> {
    if let Some((_, values)) = extra {
        if values.len() != ds.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: ds.len(),
            });
        }
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    header.push(SUSPECTNESS_COLUMN);
    header.push(LABEL_COLUMN);
    if let Some((name, _)) = extra {
        header.push(name);
    }
    wtr.write_record(&header)?;
    for (i, r) in ds.records.iter().enumerate() {
        let mut row = vec![
            r.transaction_size.to_string(),
            r.time_since_last.to_string(),
            r.last_transaction_size.to_string(),
            r.avg_transaction_size.to_string(),
            r.avg_time_between.to_string(),
            u8::from(r.same_shop).to_string(),
            r.hour_of_day.to_string(),
            r.fraud_rate.to_string(),
            r.fraud_suspectness
                .map(|s| s.to_string())
                .unwrap_or_default(),
            r.label().to_string(),
        ];
        if let Some((_, values)) = extra {
            row.push(values[i].to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Writes a feature matrix as CSV: one column per feature, then `fraud`.
pub fn write_feature_csv<W: Write>(m: &FeatureMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = m.names.clone();
    header.push(LABEL_COLUMN.to_string());
    wtr.write_record(&header)?;
    for (row, label) in m.rows().zip(&m.labels) {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.push(label.to_string());
        wtr.write_record(&cells)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Reads a feature matrix written by [`write_feature_csv`].
pub fn read_feature_csv<R: Read>(reader: R) -> Result<FeatureMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut names: Vec<String> = rdr.headers()?.iter().map(normalize_header).collect();
    if names.last().map(String::as_str) != Some(LABEL_COLUMN) {
        return Err(Error::MissingColumn(LABEL_COLUMN.to_string()));
    }
    names.pop();
    let mut m = FeatureMatrix::new(names);
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let mut values = Vec::with_capacity(row.len());
        for (c, raw) in row.iter().enumerate() {
            let v = raw.parse::<f64>().map_err(|_| Error::InvalidCell {
                row: idx + 1,
                column: m
                    .names
                    .get(c)
                    .cloned()
                    .unwrap_or_else(|| LABEL_COLUMN.into()),
                message: format!("cannot parse `{raw}` as a number"),
            })?;
            values.push(v);
        }
        let label = values.pop().unwrap_or(f64::NAN);
        if label != 0.0 && label != 1.0 {
            return Err(Error::InvalidCell {
                row: idx + 1,
                column: LABEL_COLUMN.into(),
                message: format!("expected 0 or 1, got {label}"),
            });
        }
        m.push(&values, label as u8)?;
    }
    Ok(m)
}

/// Per-feature location and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl NormStats {
    /// Population mean and standard deviation of each column over `rows`.
    pub fn from_rows<'a, I>(rows: I, width: usize) -> Result<NormStats>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        if rows.len() < 2 {
            return Err(Error::TooFewRecords {
                what: "records to fit normalization statistics",
                needed: 2,
                found: rows.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for row in &rows {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            for (m, x) in mean.iter_mut().zip(row.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for row in &rows {
            for ((v, x), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let sd: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        let degenerate = sd.iter().map(|&s| s < EPS_VAR).collect();
        Ok(NormStats {
            mean,
            sd,
            degenerate,
        })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// z-scores one row in place; degenerate columns are only centered.
    pub fn apply(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                got: row.len(),
            });
        }
        for (k, x) in row.iter_mut().enumerate() {
            let scale = if self.degenerate[k] { 1.0 } else { self.sd[k] };
            *x = (*x - self.mean[k]) / scale;
        }
        Ok(())
    }
}

/// Fits normalization statistics over the dataset, optionally only over its
/// licit records.
pub fn fit_norm_stats(ds: &Dataset, licit_only: bool) -> Result<NormStats> {
    let rows: Vec<[f64; NUM_FEATURES]> = ds
        .records
        .iter()
        .filter(|r| !licit_only || !r.fraud)
        .map(TransactionRecord::features)
        .collect();
    NormStats::from_rows(rows.iter().map(|r| r.as_slice()), NUM_FEATURES)
}

/// Dense row-major matrix of features plus binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Self {
        FeatureMatrix {
            names,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn nrows(&self) -> usize {
        self.labels.len()
    }

    pub fn push(&mut self, row: &[f64], label: u8) -> Result<()> {
        if row.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.ncols(),
                got: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.ncols();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values
            .chunks_exact(self.ncols().max(1))
            .take(self.nrows())
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(self.names.clone());
        for &i in indices {
            out.values.extend_from_slice(self.row(i));
            out.labels.push(self.labels[i]);
        }
        out
    }

    /// Returns a copy with every row transformed by `stats`.
    pub fn standardized(&self, stats: &NormStats) -> Result<FeatureMatrix> {
        let mut out = self.clone();
        let w = self.ncols();
        for row in out.values.chunks_exact_mut(w.max(1)) {
            stats.apply(row)?;
        }
        Ok(out)
    }
}

/// z-scores every record of `ds` against `stats`.
pub fn normalize(ds: &Dataset, stats: &NormStats) -> Result<FeatureMatrix> {
    if stats.width() != NUM_FEATURES {
        return Err(Error::FeatureCount {
            model: stats.width(),
            expected: NUM_FEATURES,
        });
    }
    let mut out = FeatureMatrix::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect());
    out.values.reserve(ds.len() * NUM_FEATURES);
    for r in &ds.records {
        let mut row = r.features();
        stats.apply(&mut row)?;
        out.push(&row, r.label())?;
    }
    Ok(out)
}

/// Stratified shuffled split of `labels` into (train, test) index lists.
///
/// Each class contributes `round(count * train_fraction)` members to the
/// training part, clamped so that both parts receive at least one member.
pub fn split_indices(
    labels: &[u8],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = seeded_rng(seed, 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::CannotStratify {
                label: class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let take =
            ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((train, test))
}

/// Stratified shuffled split of a dataset; see [`split_indices`].
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(&ds.labels(), train_fraction, seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}

/// Indices of a class-balanced subsample: the majority class is sampled
/// without replacement down to the minority count. Input order is kept.
pub fn balance_indices(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let licit: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let fraud: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    if licit.is_empty() {
        return Err(Error::EmptyClass(0));
    }
    if fraud.is_empty() {
        return Err(Error::EmptyClass(1));
    }
    let (minority, majority) = if licit.len() <= fraud.len() {
        (licit, fraud)
    } else {
        (fraud, licit)
    };
    let mut rng = seeded_rng(seed, 2);
    let mut keep: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|k| majority[k])
        .collect();
    keep.extend_from_slice(&minority);
    keep.sort_unstable();
    Ok(keep)
}

/// Class-balanced subsample of a dataset; see [`balance_indices`].
pub fn balance(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let keep = balance_indices(&ds.labels(), seed)?;
    Ok(ds.select(&keep))
}
