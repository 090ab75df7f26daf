//! Command-line driver.
//!
//! Commands share a working directory with fixed file names, so they compose
//! without extra flags:
//!
//! ```text
//! dataset.csv                 generate
//! baseline.json               fit
//! threshold.json              features
//! features_<set>.csv          features
//! model_<set>.json            train
//! sweep.csv                   sweep
//! roc_<set>.csv               roc
//! roc_<set>_strata.csv        roc (one row per size cutoff)
//! roc_<set>_size_<cutoff>.csv roc (defined strata only)
//! ```
//!
//! Settings come from an optional JSON config file; command-line flags win.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baseline::BaselineModel;
use crate::data::{
    self, balance_indices, parse_csv, read_feature_csv, split_indices, write_csv,
    write_csv_with_column, write_feature_csv, Dataset, FeatureMatrix, NUM_FEATURES,
};
use crate::eval::{self, confusion, density_sweep, roc, stratify_by_size, SweepConfig};
use crate::mlp::TrainConfig;
use crate::network::DensityThreshold;
use crate::pipeline::{
    calibrate_threshold, feature_matrix, fit_baseline, topo_features, weighted_networks,
    write_atomic, Classifier, FeatureSet, ModelFile, ScoringPipeline,
};
use crate::synth::{generate, SynthConfig};

/// Every setting of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub workdir: PathBuf,
    /// Defaults to `<workdir>/dataset.csv`.
    pub dataset: Option<PathBuf>,
    pub seed: u64,
    pub train_fraction: f64,
    pub density: f64,
    pub densities: Vec<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_range: f64,
    /// `raw`, `parenclitic`, `combined` or `all`.
    pub feature_set: String,
    pub size_cutoffs: Vec<f64>,
    pub balanced_eval: bool,
    pub baseline_on_balanced: bool,
    pub n: usize,
    pub fraud_fraction: f64,
    pub noise_sd: f64,
    pub break_strength: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let synth = SynthConfig::default();
        PipelineConfig {
            workdir: PathBuf::from("work"),
            dataset: None,
            seed: 1,
            train_fraction: 0.7,
            density: 0.6,
            densities: eval::default_densities(),
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            batch_size: train.batch_size,
            init_range: train.init_range,
            feature_set: "combined".into(),
            size_cutoffs: vec![0.0, 100.0, 400.0, 1600.0],
            balanced_eval: true,
            baseline_on_balanced: false,
            n: 2000,
            fraud_fraction: synth.fraud_fraction,
            noise_sd: synth.noise_sd,
            break_strength: synth.break_strength,
        }
    }
}

impl PipelineConfig {
    pub fn dataset_path(&self) -> PathBuf {
        self.dataset
            .clone()
            .unwrap_or_else(|| self.workdir.join("dataset.csv"))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            init_range: self.init_range,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n: self.n,
            fraud_fraction: self.fraud_fraction,
            noise_sd: self.noise_sd,
            break_strength: self.break_strength,
            seed: self.seed,
        }
    }

    pub fn feature_sets(&self) -> Result<Vec<FeatureSet>> {
        if self.feature_set.eq_ignore_ascii_case("all") {
            return Ok(FeatureSet::ALL.to_vec());
        }
        Ok(vec![self.feature_set.parse()?])
    }

    fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!(
                "--train-fraction must be in (0, 1), got {}",
                self.train_fraction
            );
        }
        if !(0.0..=1.0).contains(&self.density) {
            bail!("--density must be in [0, 1], got {}", self.density);
        }
        if let Some(d) = self.densities.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            bail!("--densities entries must be in [0, 1], got {d}");
        }
        if !(self.fraud_fraction > 0.0 && self.fraud_fraction < 1.0) {
            bail!(
                "--fraud-fraction must be in (0, 1), got {}",
                self.fraud_fraction
            );
        }
        if self.n < 10 {
            bail!("--n must be at least 10, got {}", self.n);
        }
        if self.noise_sd.is_nan() || self.noise_sd < 0.0 {
            bail!("--noise-sd must be >= 0, got {}", self.noise_sd);
        }
        if self.break_strength.is_nan() || self.break_strength < 0.0 {
            bail!("--break-strength must be >= 0, got {}", self.break_strength);
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            bail!("--learning-rate must be >= 0, got {}", self.learning_rate);
        }
        if self.epochs == 0 {
            bail!("--epochs must be positive");
        }
        if self.batch_size == 0 {
            bail!("--batch-size must be positive");
        }
        if self.size_cutoffs.windows(2).any(|w| w[1] < w[0]) {
            bail!("--size-cutoffs must be non-decreasing");
        }
        self.feature_sets()?;
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "parenclitic",
    about = "Fraud detection with parenclitic network features"
)]
pub struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset to <workdir>/dataset.csv.
    Generate(GenerateArgs),
    /// Fit normalization and pairwise lines on licit training records.
    Fit(CommonArgs),
    /// Export feature matrices for one or all feature sets.
    Features(CommonArgs),
    /// Train a classifier on the balanced training split.
    Train(CommonArgs),
    /// Classification error across link densities.
    Sweep(CommonArgs),
    /// ROC curves on the test split, overall and per size cutoff.
    Roc(CommonArgs),
    /// Append a score column to a dataset CSV.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub fraud_fraction: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub break_strength: Option<f64>,
    /// Output path (default <workdir>/dataset.csv).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub density: Option<f64>,
    /// Comma-separated densities for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub densities: Option<Vec<f64>>,
    /// raw | parenclitic | combined | all
    #[arg(long)]
    pub feature_set: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub init_range: Option<f64>,
    /// Comma-separated transaction-size cutoffs in euro for `roc`.
    #[arg(long, value_delimiter = ',')]
    pub size_cutoffs: Option<Vec<f64>>,
    /// Evaluate on the whole test split instead of a balanced subsample.
    #[arg(long)]
    pub unbalanced: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Dataset CSV to score.
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV (input columns plus `score`).
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub feature_set: Option<String>,
}

fn override_with<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    override_with(&mut cfg.seed, cli.seed);
    override_with(&mut cfg.workdir, cli.workdir.clone());
    match &cli.command {
        Command::Generate(a) => {
            override_with(&mut cfg.n, a.n);
            override_with(&mut cfg.fraud_fraction, a.fraud_fraction);
            override_with(&mut cfg.noise_sd, a.noise_sd);
            override_with(&mut cfg.break_strength, a.break_strength);
            if a.dataset.is_some() {
                cfg.dataset = a.dataset.clone();
            }
        }
        Command::Fit(a)
        | Command::Features(a)
        | Command::Train(a)
        | Command::Sweep(a)
        | Command::Roc(a) => {
            if a.dataset.is_some() {
                cfg.dataset = a.dataset.clone();
            }
            override_with(&mut cfg.train_fraction, a.train_fraction);
            override_with(&mut cfg.density, a.density);
            override_with(&mut cfg.densities, a.densities.clone());
            override_with(&mut cfg.feature_set, a.feature_set.clone());
            override_with(&mut cfg.learning_rate, a.learning_rate);
            override_with(&mut cfg.epochs, a.epochs);
            override_with(&mut cfg.batch_size, a.batch_size);
            override_with(&mut cfg.init_range, a.init_range);
            override_with(&mut cfg.size_cutoffs, a.size_cutoffs.clone());
            if a.unbalanced {
                cfg.balanced_eval = false;
            }
        }
        Command::Score(a) => {
            override_with(&mut cfg.feature_set, a.feature_set.clone());
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses arguments and runs one command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let cfg = load_config(&cli)?;
    std::fs::create_dir_all(&cfg.workdir)
        .with_context(|| format!("creating workdir {}", cfg.workdir.display()))?;
    match &cli.command {
        Command::Generate(_) => cmd_generate(&cfg),
        Command::Fit(_) => cmd_fit(&cfg),
        Command::Features(_) => cmd_features(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg),
        Command::Roc(_) => cmd_roc(&cfg),
        Command::Score(a) => cmd_score(&cfg, &a.input, &a.output),
    }
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> crate::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)?;
    Ok(())
}

fn load_dataset(cfg: &PipelineConfig) -> Result<Dataset> {
    let path = cfg.dataset_path();
    parse_csv(&path).with_context(|| format!("reading dataset {}", path.display()))
}

fn baseline_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.workdir.join("baseline.json")
}

fn threshold_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.workdir.join("threshold.json")
}

fn features_path(cfg: &PipelineConfig, set: FeatureSet) -> PathBuf {
    cfg.workdir.join(format!("features_{set}.csv"))
}

fn model_path(cfg: &PipelineConfig, set: FeatureSet) -> PathBuf {
    cfg.workdir.join(format!("model_{set}.json"))
}

fn cmd_generate(cfg: &PipelineConfig) -> Result<()> {
    let ds = generate(&cfg.synth_config())?;
    let path = cfg.dataset_path();
    write_with(&path, |buf| write_csv(&ds, buf))?;
    let (licit, fraud) = ds.class_counts();
    println!(
        "wrote {} records ({licit} licit, {fraud} fraud) to {}",
        ds.len(),
        path.display()
    );
    Ok(())
}

fn train_split(cfg: &PipelineConfig, ds: &Dataset) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(&ds.labels(), cfg.train_fraction, cfg.seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}

fn cmd_fit(cfg: &PipelineConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let (train, _) = train_split(cfg, &ds)?;
    let fit_set = if cfg.baseline_on_balanced {
        data::balance(&train, cfg.seed)?
    } else {
        train
    };
    let model = fit_baseline(&fit_set).context("fitting pairwise lines")?;
    let path = baseline_path(cfg);
    model.save(&path)?;
    println!(
        "fitted {} pairwise lines on {} licit records; wrote {}",
        model.lines.len(),
        fit_set.class_counts().0,
        path.display()
    );
    Ok(())
}

fn load_baseline(cfg: &PipelineConfig) -> Result<BaselineModel> {
    let path = baseline_path(cfg);
    BaselineModel::load_expecting(&path, NUM_FEATURES)
        .with_context(|| format!("loading {} (run `fit` first)", path.display()))
}

fn cmd_features(cfg: &PipelineConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let sets = cfg.feature_sets()?;
    let topo = if sets.iter().any(|s| s.needs_networks()) {
        let baseline = load_baseline(cfg)?;
        let (train_idx, _) = split_indices(&ds.labels(), cfg.train_fraction, cfg.seed)?;
        let nets = weighted_networks(&ds, &baseline)?;
        let train_nets: Vec<_> = train_idx.iter().map(|&i| nets[i].clone()).collect();
        let thr = calibrate_threshold(&ds.select(&train_idx), &train_nets, cfg.density)?;
        let json = serde_json::to_string_pretty(&thr)?;
        write_atomic(&threshold_path(cfg), json.as_bytes())?;
        println!("density {} -> alpha {}", thr.density, thr.alpha);
        Some(topo_features(&nets, &thr)?)
    } else {
        None
    };
    for set in sets {
        let m = feature_matrix(&ds, topo.as_deref(), set)?;
        let path = features_path(cfg, set);
        write_with(&path, |buf| write_feature_csv(&m, buf))?;
        println!(
            "wrote {} x {} {set} features to {}",
            m.nrows(),
            m.ncols(),
            path.display()
        );
    }
    Ok(())
}

fn load_features(cfg: &PipelineConfig, set: FeatureSet) -> Result<FeatureMatrix> {
    let path = features_path(cfg, set);
    let file = File::open(&path)
        .with_context(|| format!("opening {} (run `features` first)", path.display()))?;
    let m = read_feature_csv(file).with_context(|| format!("reading {}", path.display()))?;
    if m.ncols() != set.dim() {
        bail!(crate::Error::DimensionMismatch {
            expected: set.dim(),
            got: m.ncols()
        });
    }
    if m.names != set.names() {
        bail!("{} does not hold `{set}` features", path.display());
    }
    Ok(m)
}

fn load_threshold(cfg: &PipelineConfig) -> Result<DensityThreshold> {
    let path = threshold_path(cfg);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading {} (run `features` first)", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// (train rows, evaluation rows) of the feature matrix.
fn eval_rows(cfg: &PipelineConfig, labels: &[u8]) -> Result<(Vec<usize>, Vec<usize>)> {
    let (train, test) = split_indices(labels, cfg.train_fraction, cfg.seed)?;
    let train_labels: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
    let balanced_train: Vec<usize> = balance_indices(&train_labels, cfg.seed)?
        .into_iter()
        .map(|k| train[k])
        .collect();
    let eval = if cfg.balanced_eval {
        let test_labels: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
        balance_indices(&test_labels, cfg.seed.wrapping_add(1))?
            .into_iter()
            .map(|k| test[k])
            .collect()
    } else {
        test
    };
    Ok((balanced_train, eval))
}

fn cmd_train(cfg: &PipelineConfig) -> Result<()> {
    let train_cfg = cfg.train_config();
    for set in cfg.feature_sets()? {
        let m = load_features(cfg, set)?;
        let (train_rows, eval_rows) = eval_rows(cfg, &m.labels)?;
        let clf = Classifier::train(set, &m.select(&train_rows), &train_cfg)
            .with_context(|| format!("training the {set} classifier"))?;
        let test = m.select(&eval_rows);
        let scores = clf.scores(&test)?;
        let c = confusion(&scores, &test.labels, 0.5)?;
        let threshold = if set.needs_networks() {
            Some(load_threshold(cfg)?)
        } else {
            None
        };
        let path = model_path(cfg, set);
        ModelFile {
            schema_version: crate::pipeline::MODEL_SCHEMA_VERSION,
            threshold,
            classifier: clf,
        }
        .save(&path)?;
        println!(
            "{set}: trained on {} rows, test error {:.4} (tpr {:.4}) on {} rows; wrote {}",
            train_rows.len(),
            c.error_rate(),
            c.tpr(),
            test.nrows(),
            path.display()
        );
    }
    Ok(())
}

fn cmd_sweep(cfg: &PipelineConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let (train, test) = train_split(cfg, &ds)?;
    let sweep_cfg = SweepConfig {
        train: cfg.train_config(),
        seed: cfg.seed,
        balanced_eval: cfg.balanced_eval,
        baseline_on_balanced: cfg.baseline_on_balanced,
        threshold: 0.5,
    };
    let result = density_sweep(&train, &test, &cfg.densities, &sweep_cfg)?;
    let path = cfg.workdir.join("sweep.csv");
    write_with(&path, |buf| result.write_csv(buf))?;
    let (d, e) = result.best_density();
    println!(
        "best density {d} combined error {e:.4} (raw {:.4}); wrote {}",
        result.error_raw[0],
        path.display()
    );
    Ok(())
}

fn load_pipeline(cfg: &PipelineConfig, set: FeatureSet) -> Result<ScoringPipeline> {
    let path = model_path(cfg, set);
    let model = ModelFile::load(&path)
        .with_context(|| format!("loading {} (run `train` first)", path.display()))?;
    if model.classifier.feature_set != set {
        bail!(
            "{} holds a `{}` model",
            path.display(),
            model.classifier.feature_set
        );
    }
    let baseline = if set.needs_networks() {
        Some(load_baseline(cfg)?)
    } else {
        None
    };
    Ok(ScoringPipeline {
        baseline,
        threshold: model.threshold,
        classifier: model.classifier,
    })
}

fn cutoff_label(c: f64) -> String {
    c.to_string()
}

fn cmd_roc(cfg: &PipelineConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let (_, rows) = eval_rows(cfg, &ds.labels())?;
    let test = ds.select(&rows);
    for set in cfg.feature_sets()? {
        let pipeline = load_pipeline(cfg, set)?;
        let scores = pipeline.score_dataset(&test)?;
        let curve = roc(&scores, &test.labels())?;
        let path = cfg.workdir.join(format!("roc_{set}.csv"));
        write_with(&path, |buf| eval::write_roc_csv(buf, &curve))?;
        println!("{set}: auc {:.4}; wrote {}", curve.auc, path.display());

        if cfg.size_cutoffs.is_empty() {
            continue;
        }
        let strata = stratify_by_size(&test, &pipeline, &cfg.size_cutoffs)?;
        let mut summary = csv::Writer::from_writer(Vec::new());
        summary.write_record(["cutoff", "count", "auc"])?;
        for s in &strata {
            let auc = match &s.roc {
                Some(r) => {
                    let p = cfg
                        .workdir
                        .join(format!("roc_{set}_size_{}.csv", cutoff_label(s.cutoff)));
                    write_with(&p, |buf| eval::write_roc_csv(buf, r))?;
                    r.auc.to_string()
                }
                None => "undefined".to_string(),
            };
            println!("{set}: size >= {} ({} rows): auc {auc}", s.cutoff, s.count);
            summary.write_record([s.cutoff.to_string(), s.count.to_string(), auc])?;
        }
        let bytes = summary.into_inner().context("flushing strata summary")?;
        write_atomic(&cfg.workdir.join(format!("roc_{set}_strata.csv")), &bytes)?;
    }
    Ok(())
}

fn cmd_score(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<()> {
    let sets = cfg.feature_sets()?;
    let [set] = sets.as_slice() else {
        bail!("--feature-set must name a single feature set for `score`");
    };
    let pipeline = load_pipeline(cfg, *set)?;
    let ds = parse_csv(input).with_context(|| format!("reading {}", input.display()))?;
    let scores = pipeline.score_dataset(&ds)?;
    write_with(output, |buf| {
        write_csv_with_column(&ds, Some(("score", &scores)), buf)
    })?;
    println!("scored {} records; wrote {}", ds.len(), output.display());
    Ok(())
}
