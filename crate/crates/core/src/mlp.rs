//! Three-layer perceptron with sigmoid units, trained by mini-batch
//! back-propagation on squared error.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seeded_rng;

pub const HIDDEN_UNITS: usize = 10;

const INIT_STREAM: u64 = 10;
const SHUFFLE_STREAM: u64 = 11;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Half-width of the uniform initialization interval.
    pub init_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            init_range: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be a non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.init_range >= 0.0 && self.init_range.is_finite()) {
            return Err(Error::Config(format!(
                "init_range must be a non-negative number, got {}",
                self.init_range
            )));
        }
        Ok(())
    }
}

/// Weights are row-major: `hidden_w[h * input_dim + i]` connects input `i`
/// to hidden unit `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub output_w: Vec<f64>,
    pub output_b: f64,
}

/// Same layout as [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub output_w: Vec<f64>,
    pub output_b: f64,
}

impl Gradient {
    fn zeros_like(m: &MlpModel) -> Self {
        Gradient {
            hidden_w: vec![0.0; m.hidden_w.len()],
            hidden_b: vec![0.0; m.hidden_b.len()],
            output_w: vec![0.0; m.output_w.len()],
            output_b: 0.0,
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.hidden_w.clone();
        out.extend_from_slice(&self.hidden_b);
        out.extend_from_slice(&self.output_w);
        out.push(self.output_b);
        out
    }

    fn add_scaled(&mut self, other: &Gradient, s: f64) {
        let pairs = self
            .hidden_w
            .iter_mut()
            .zip(&other.hidden_w)
            .chain(self.hidden_b.iter_mut().zip(&other.hidden_b))
            .chain(self.output_w.iter_mut().zip(&other.output_w));
        for (a, b) in pairs {
            *a += s * b;
        }
        self.output_b += s * other.output_b;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub final_loss: f64,
    /// Mean squared error over the training data after each epoch.
    pub loss_history: Vec<f64>,
}

impl MlpModel {
    /// Ten hidden units, uniform initialization on `[-init_range, init_range]`.
    pub fn init(input_dim: usize, cfg: &TrainConfig) -> Result<Self> {
        Self::with_hidden(input_dim, HIDDEN_UNITS, cfg)
    }

    pub fn with_hidden(input_dim: usize, hidden_dim: usize, cfg: &TrainConfig) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Config(format!(
                "layer sizes must be positive (input {input_dim}, hidden {hidden_dim})"
            )));
        }
        cfg.validate()?;
        let mut rng = seeded_rng(cfg.seed, INIT_STREAM);
        let r = cfg.init_range;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    if r == 0.0 {
                        0.0
                    } else {
                        r * (2.0 * u - 1.0)
                    }
                })
                .collect()
        };
        let hidden_w = draw(input_dim * hidden_dim);
        let hidden_b = draw(hidden_dim);
        let output_w = draw(hidden_dim);
        let output_b = draw(1)[0];
        Ok(MlpModel {
            input_dim,
            hidden_dim,
            hidden_w,
            hidden_b,
            output_w,
            output_b,
        })
    }

    fn apply(&mut self, g: &Gradient, s: f64) {
        let pairs = self
            .hidden_w
            .iter_mut()
            .zip(&g.hidden_w)
            .chain(self.hidden_b.iter_mut().zip(&g.hidden_b))
            .chain(self.output_w.iter_mut().zip(&g.output_w));
        for (p, d) in pairs {
            *p += s * d;
        }
        self.output_b += s * g.output_b;
    }

    pub fn num_params(&self) -> usize {
        self.hidden_w.len() + self.hidden_b.len() + self.output_w.len() + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = self.hidden_w.clone();
        out.extend_from_slice(&self.hidden_b);
        out.extend_from_slice(&self.output_w);
        out.push(self.output_b);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        let (hw, rest) = p.split_at(self.hidden_w.len());
        let (hb, rest) = rest.split_at(self.hidden_b.len());
        let (ow, rest) = rest.split_at(self.output_w.len());
        self.hidden_w.copy_from_slice(hw);
        self.hidden_b.copy_from_slice(hb);
        self.output_w.copy_from_slice(ow);
        self.output_b = rest[0];
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        self.hidden_w
            .chunks_exact(self.input_dim)
            .zip(&self.hidden_b)
            .map(|(w, b)| sigmoid(w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b))
            .collect()
    }

    fn output(&self, hidden: &[f64]) -> f64 {
        sigmoid(
            self.output_w
                .iter()
                .zip(hidden)
                .map(|(w, h)| w * h)
                .sum::<f64>()
                + self.output_b,
        )
    }

    /// Score in (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.output(&self.hidden_activations(x)))
    }

    /// Analytic gradient of `(score - y)^2` with respect to every parameter.
    pub fn gradient(&self, x: &[f64], y: f64) -> Result<Gradient> {
        self.check_dim(x)?;
        let hidden = self.hidden_activations(x);
        let s = self.output(&hidden);
        let delta_out = 2.0 * (s - y) * s * (1.0 - s);
        let mut g = Gradient::zeros_like(self);
        g.output_b = delta_out;
        for (h, &a) in hidden.iter().enumerate() {
            g.output_w[h] = delta_out * a;
            let delta_h = delta_out * self.output_w[h] * a * (1.0 - a);
            g.hidden_b[h] = delta_h;
            for (i, &xi) in x.iter().enumerate() {
                g.hidden_w[h * self.input_dim + i] = delta_h * xi;
            }
        }
        Ok(g)
    }

    /// Mean squared error over a matrix.
    pub fn loss(&self, data: &FeatureMatrix) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in data.rows().zip(&data.labels) {
            let s = self.forward(x)?;
            total += (s - f64::from(y)).powi(2);
        }
        Ok(total / data.nrows().max(1) as f64)
    }

    /// Mini-batch gradient descent; the shuffle order depends only on the seed.
    pub fn train(&mut self, data: &FeatureMatrix, cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.validate()?;
        if data.nrows() == 0 {
            return Err(Error::Empty("training data"));
        }
        if data.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: data.ncols(),
            });
        }
        if let Some(&bad) = data.labels.iter().find(|&&l| l > 1) {
            return Err(Error::Config(format!("labels must be 0 or 1, got {bad}")));
        }
        let mut rng = seeded_rng(cfg.seed, SHUFFLE_STREAM);
        let mut order: Vec<usize> = (0..data.nrows()).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                let mut acc = Gradient::zeros_like(self);
                for &r in batch {
                    let g = self.gradient(data.row(r), f64::from(data.labels[r]))?;
                    acc.add_scaled(&g, 1.0);
                }
                if cfg.learning_rate != 0.0 {
                    self.apply(&acc, -cfg.learning_rate / batch.len() as f64);
                }
            }
            let loss = self.loss(data)?;
            if loss.is_nan() {
                return Err(Error::NanLoss { epoch });
            }
            history.push(loss);
        }
        Ok(TrainReport {
            final_loss: *history.last().unwrap_or(&f64::NAN),
            loss_history: history,
        })
    }

    /// Label is 1 iff `score >= threshold`.
    pub fn predict(&self, x: &[f64], threshold: f64) -> Result<(u8, f64)> {
        let s = self.forward(x)?;
        Ok((u8::from(s >= threshold), s))
    }

    pub fn scores(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        data.rows().map(|x| self.forward(x)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        crate::pipeline::write_atomic(path.as_ref(), json.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: MlpModel = serde_json::from_str(&text)?;
        if m.hidden_w.len() != m.input_dim * m.hidden_dim
            || m.hidden_b.len() != m.hidden_dim
            || m.output_w.len() != m.hidden_dim
        {
            return Err(Error::Config("model layer sizes are inconsistent".into()));
        }
        Ok(m)
    }
}

/// Fraction of rows whose thresholded prediction differs from the label.
pub fn error_rate(model: &MlpModel, data: &FeatureMatrix, threshold: f64) -> Result<f64> {
    let mut wrong = 0usize;
    for (x, &y) in data.rows().zip(&data.labels) {
        let (label, _) = model.predict(x, threshold)?;
        wrong += usize::from(label != y);
    }
    Ok(wrong as f64 / data.nrows().max(1) as f64)
}
