//! Seeded synthetic transactions with planted pairwise structure.
//!
//! Licit records are affine images of two shared latent Gaussians plus
//! independent noise, so every pair of continuous features is linearly
//! related. Fraud records push a random subset of features away from those
//! relations, towards the opposite side of their own mean, which leaves each
//! marginal inside its licit range while breaking the joint structure. Fraud
//! records also sit slightly off-center along the first latent factor, a cue
//! that moves every feature consistently and so only the raw values reveal.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TransactionRecord};
use crate::error::{Error, Result};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub fraud_fraction: f64,
    /// Residual scale around the planted relations, in feature standard
    /// deviations.
    pub noise_sd: f64,
    /// Displacement of perturbed fraud features, in feature standard
    /// deviations.
    pub break_strength: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 4000,
            fraud_fraction: 0.1,
            noise_sd: 0.2,
            break_strength: 2.5,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config(format!(
                "n must be at least 10, got {}",
                self.n
            )));
        }
        if !(self.fraud_fraction > 0.0 && self.fraud_fraction < 1.0) {
            return Err(Error::Config(format!(
                "fraud_fraction must be in (0, 1), got {}",
                self.fraud_fraction
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sd must be >= 0, got {}",
                self.noise_sd
            )));
        }
        if !(self.break_strength >= 0.0 && self.break_strength.is_finite()) {
            return Err(Error::Config(format!(
                "break_strength must be >= 0, got {}",
                self.break_strength
            )));
        }
        Ok(())
    }

    pub fn fraud_count(&self) -> usize {
        (self.n as f64 * self.fraud_fraction).round() as usize
    }
}

/// Location, scale and latent loadings of one continuous feature.
struct Planted {
    mean: f64,
    scale: f64,
    loading: [f64; 2],
    /// rounding granularity of the written value
    unit: f64,
}

// transaction_size, time_since_last, last_transaction_size,
// avg_transaction_size, avg_time_between, fraud_rate
const CONTINUOUS: [Planted; 6] = [
    Planted {
        mean: 150.0,
        scale: 40.0,
        loading: [0.9, 0.3],
        unit: 0.01,
    },
    Planted {
        mean: 30_000.0,
        scale: 6_000.0,
        loading: [-0.4, 0.8],
        unit: 1.0,
    },
    Planted {
        mean: 140.0,
        scale: 35.0,
        loading: [0.8, -0.5],
        unit: 0.01,
    },
    Planted {
        mean: 120.0,
        scale: 25.0,
        loading: [0.95, 0.1],
        unit: 0.01,
    },
    Planted {
        mean: 36_000.0,
        scale: 7_000.0,
        loading: [-0.3, 0.9],
        unit: 1.0,
    },
    Planted {
        mean: 0.03,
        scale: 0.006,
        loading: [0.2, -0.7],
        unit: 1e-6,
    },
];

const HOUR_LOADING: [f64; 2] = [0.5, 0.6];
const HOUR_MEAN: f64 = 14.0;
const HOUR_SCALE: f64 = 3.0;
const SHOP_LOADING: [f64; 2] = [0.7, -0.5];

/// Mean offset of the first latent factor for fraud records at full break
/// strength. Small enough that no single feature separates the classes.
const LATENT_SHIFT: f64 = 0.7;

fn unit_component(loading: [f64; 2], z: [f64; 2]) -> f64 {
    let norm = (loading[0] * loading[0] + loading[1] * loading[1]).sqrt();
    (loading[0] * z[0] + loading[1] * z[1]) / norm
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Moves a standardized component `c` by `strength` towards (and possibly
/// past) zero, so that `|c'| <= max(|c|, strength)`.
fn fold(c: f64, strength: f64) -> f64 {
    if c >= 0.0 {
        c - strength
    } else {
        c + strength
    }
}

fn round_to(v: f64, unit: f64) -> f64 {
    (v / unit).round() * unit
}

fn sample_record(rng: &mut ChaCha8Rng, cfg: &SynthConfig, fraud: bool) -> TransactionRecord {
    let b = cfg.break_strength;
    let mut z = [gauss(rng), gauss(rng)];
    if fraud {
        // a shift along the planted relations: visible in the marginals,
        // invisible to the pairwise lines
        z[0] += LATENT_SHIFT * b.min(1.0);
    }

    // slots 0..6 continuous, 6 hour, 7 shop
    let mut perturbed = [false; 8];
    if fraud && b > 0.0 {
        let count = rng.random_range(2..=3);
        for slot in index::sample(rng, 7, count) {
            perturbed[slot] = true;
        }
    }

    let mut cont = [0.0; 6];
    for (k, p) in CONTINUOUS.iter().enumerate() {
        let mut c = unit_component(p.loading, z);
        if perturbed[k] {
            c = fold(c, b);
        }
        let v = p.mean + p.scale * (c + cfg.noise_sd * gauss(rng));
        cont[k] = round_to(v.max(0.0), p.unit);
    }

    let mut hc = unit_component(HOUR_LOADING, z);
    if perturbed[6] {
        hc = fold(hc, b);
    }
    let hour = HOUR_MEAN + HOUR_SCALE * (hc + cfg.noise_sd * gauss(rng));
    let shop_signal = unit_component(SHOP_LOADING, z) + cfg.noise_sd * gauss(rng);

    let suspect = 15.0 + if fraud { 30.0 } else { 0.0 } + 15.0 * gauss(rng);
    TransactionRecord {
        transaction_size: cont[0],
        time_since_last: cont[1],
        last_transaction_size: cont[2],
        avg_transaction_size: cont[3],
        avg_time_between: cont[4],
        same_shop: shop_signal > 0.0,
        hour_of_day: hour.round().clamp(1.0, 24.0) as u8,
        fraud_rate: cont[5].clamp(0.0, 1.0),
        fraud_suspectness: Some(suspect.round().clamp(0.0, 100.0) as u8),
        fraud,
    }
}

/// Generates `cfg.n` records, `round(n * fraud_fraction)` of them fraud.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed, 20);
    let mut is_fraud = vec![false; cfg.n];
    for i in index::sample(&mut rng, cfg.n, cfg.fraud_count()) {
        is_fraud[i] = true;
    }
    let records = is_fraud
        .into_iter()
        .map(|fraud| sample_record(&mut rng, cfg, fraud))
        .collect();
    Ok(Dataset::new(records))
}
