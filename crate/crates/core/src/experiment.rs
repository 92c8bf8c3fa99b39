//! Experiment harness: JSON configs, per-cell seeded runs, long-format
//! result tables, cached ground truth, SVG plots and comparison reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{exact_mc_sample, long_chain, parallel_chains};
use crate::bnn::{bagging_baseline, train_gf_svgd, train_straight_through, BnnTrainConfig, Dataset};
use crate::error::{Error, Result};
use crate::gof::{mmd_hamming, mmd_permutation_test, run_gof_test, GofConfig};
use crate::models::{enumerate_log_mass, BernoulliRbm, CategoricalModel, Model, ModelSpec};
use crate::numkit::{derive_seed, RandomStream};
use crate::sampler::{gf_svgd_step, sample_model, write_trace, ParticleEnsemble, SamplerConfig};
use crate::transform::{BaseComponent, BaseDensity, ContinuousParameterization, SurrogateMode};

/// Where a study's model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ModelSource {
    /// Path to a model JSON file, relative to the config file.
    File {
        file: PathBuf,
    },
    /// Seeded random RBM.
    RandomRbm {
        random_rbm: RandomRbmSpec,
    },
    Inline(ModelSpec),
}

/// RBM with `W ~ N(0, weight_variance)` and biases `~ N(0, bias_std²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRbmSpec {
    pub visible: usize,
    pub hidden: usize,
    #[serde(default = "default_weight_variance")]
    pub weight_variance: f64,
    #[serde(default = "one")]
    pub bias_std: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_weight_variance() -> f64 {
    0.05
}

fn one() -> f64 {
    1.0
}

impl ModelSource {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSource::File { file } => ModelSpec::load(file),
            ModelSource::RandomRbm { random_rbm: r } => {
                if !(r.weight_variance >= 0.0 && r.bias_std >= 0.0) {
                    return Err(Error::Config("random_rbm variances must be non-negative".into()));
                }
                let mut rng = RandomStream::new(r.seed);
                Ok(Model::Rbm(BernoulliRbm::random(
                    r.visible,
                    r.hidden,
                    r.weight_variance.sqrt(),
                    r.bias_std,
                    &mut rng,
                )?))
            }
            ModelSource::Inline(spec) => spec.build(),
        }
    }

    fn resolve(&mut self, base: &Path) -> Result<()> {
        if let ModelSource::File { file } = self {
            if file.is_relative() {
                *file = base.join(&*file);
            }
            if !file.is_file() {
                return Err(Error::Config(format!("model file {} does not exist", file.display())));
            }
        }
        Ok(())
    }
}

/// A named one-dimensional base for the transform study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedBase {
    pub name: String,
    pub component: BaseComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gfsvgd,
    Gibbs,
    ExactMc,
    Gfksd,
    Mmd,
    Single,
    Bagging,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gfsvgd => "gfsvgd",
            Method::Gibbs => "gibbs",
            Method::ExactMc => "exact_mc",
            Method::Gfksd => "gfksd",
            Method::Mmd => "mmd",
            Method::Single => "single",
            Method::Bagging => "bagging",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Mmd,
}

/// Long-Gibbs ground-truth settings, used when enumeration is too large
/// or a reference sample is needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            burn_in: 1000,
            thin: 10,
            seed: 99,
        }
    }
}

/// Mean-estimation / sample-quality study on a binary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingStudy {
    pub model: ModelSource,
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub surrogate: SurrogateMode,
    #[serde(default = "sampling_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub truth: TruthConfig,
}

fn sampling_methods() -> Vec<Method> {
    vec![Method::Gfsvgd, Method::Gibbs, Method::ExactMc]
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Mse]
}

/// Alternative `q` derived from the null model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    /// `q = p`.
    #[default]
    None,
    /// Ising couplings multiplied by `factor` (temperature divided by it).
    CouplingScale { factor: f64 },
    /// RBM weights plus `N(0, variance)` noise.
    WeightNoise {
        variance: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl Perturbation {
    pub fn apply(&self, model: &Model) -> Result<Model> {
        match (self, model) {
            (Perturbation::None, m) => Ok(m.clone()),
            (Perturbation::CouplingScale { factor }, Model::Ising(m)) => Ok(Model::Ising(m.scaled(*factor))),
            (Perturbation::WeightNoise { variance, seed }, Model::Rbm(m)) => {
                if !(*variance >= 0.0) {
                    return Err(Error::Config("weight noise variance must be non-negative".into()));
                }
                let mut rng = RandomStream::new(*seed);
                let std = variance.sqrt();
                let w = m
                    .weight_rows()
                    .into_iter()
                    .map(|row| row.into_iter().map(|v| v + std * rng.normal()).collect())
                    .collect();
                Ok(Model::Rbm(BernoulliRbm::new(
                    w,
                    m.visible_bias().to_vec(),
                    m.hidden_bias().to_vec(),
                )?))
            }
            _ => Err(Error::Config("perturbation does not apply to this model type".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GofStudy {
    pub model: ModelSource,
    #[serde(default)]
    pub alternative: Perturbation,
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub gof: GofConfig,
    #[serde(default = "gof_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_shuffles")]
    pub mmd_shuffles: usize,
    /// Chain settings for drawing data when the model is not enumerable.
    #[serde(default)]
    pub chain: TruthConfig,
}

fn gof_methods() -> Vec<Method> {
    vec![Method::Gfksd, Method::Mmd]
}

fn default_shuffles() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalStudy {
    pub model: ModelSource,
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Iterations at which the particle histogram of trial 0 is recorded.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
}

fn default_checkpoints() -> Vec<usize> {
    vec![0, 50, 100, 250, 500]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformStudy {
    pub model: ModelSource,
    pub bases: Vec<NamedBase>,
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnnStudy {
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_train_size")]
    pub train_size: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_members")]
    pub member_values: Vec<usize>,
    #[serde(default)]
    pub train: BnnTrainConfig,
    #[serde(default = "bnn_methods")]
    pub methods: Vec<Method>,
}

fn default_separation() -> f64 {
    4.0
}

fn default_train_size() -> usize {
    500
}

fn default_test_size() -> usize {
    1000
}

fn default_members() -> Vec<usize> {
    vec![4]
}

fn bnn_methods() -> Vec<Method> {
    vec![Method::Gfsvgd, Method::Single, Method::Bagging]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Study {
    Categorical(CategoricalStudy),
    Transform(TransformStudy),
    IsingMse(SamplingStudy),
    Rbm(SamplingStudy),
    Gof(GofStudy),
    Bnn(BnnStudy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Reduced settings that finish in minutes.
    #[default]
    Desk,
    /// Large settings; slow.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Defaults to `results/<name>`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Root seed; trial `t` uses `derive_seed(seed, t)` unless `seeds` is given.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub scale: Scale,
    pub study: Study,
}

fn default_trials() -> usize {
    20
}

impl ExperimentConfig {
    /// Parses, resolves model paths relative to the file and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) -> Result<()> {
        match &mut self.study {
            Study::Categorical(s) => s.model.resolve(base),
            Study::Transform(s) => s.model.resolve(base),
            Study::IsingMse(s) | Study::Rbm(s) => s.model.resolve(base),
            Study::Gof(s) => s.model.resolve(base),
            Study::Bnn(_) => Ok(()),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| Path::new("results").join(&self.name))
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.trials as u64).map(|t| derive_seed(self.seed, t)).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\', ',']) {
            return bad(format!(
                "experiment name {:?} must be non-empty without '/', '\\' or ','",
                self.name
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !self.seeds.is_empty() {
            if self.seeds.len() != self.trials {
                return bad(format!("{} seeds given for {} trials", self.seeds.len(), self.trials));
            }
            if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
                return bad("trial seeds must be distinct".into());
            }
        }
        let check_params = |v: &[usize], what: &str| -> Result<()> {
            if v.is_empty() || v.contains(&0) {
                return Err(Error::Config(format!("{what} must be a non-empty list of positive values")));
            }
            if v.iter().collect::<BTreeSet<_>>().len() != v.len() {
                return Err(Error::Config(format!("{what} must not repeat values")));
            }
            Ok(())
        };
        let check_methods = |m: &[Method], allowed: &[Method]| -> Result<()> {
            if m.is_empty() {
                return Err(Error::Config("methods must not be empty".into()));
            }
            if m.iter().collect::<BTreeSet<_>>().len() != m.len() {
                return Err(Error::Config("methods must not repeat".into()));
            }
            match m.iter().find(|x| !allowed.contains(x)) {
                Some(x) => Err(Error::Config(format!("method {} is not available in this study", x.name()))),
                None => Ok(()),
            }
        };
        match &self.study {
            Study::Categorical(s) => {
                check_params(&s.n_values, "n_values")?;
                s.sampler.validate()?;
                if !matches!(s.model.build()?, Model::Categorical(_)) {
                    return bad("categorical study needs a categorical model".into());
                }
            }
            Study::Transform(s) => {
                check_params(&s.n_values, "n_values")?;
                s.sampler.validate()?;
                if !matches!(s.model.build()?, Model::Categorical(_)) {
                    return bad("transform study needs a categorical model".into());
                }
                if s.bases.is_empty() {
                    return bad("transform study needs at least one base".into());
                }
                let names: BTreeSet<&str> = s.bases.iter().map(|b| b.name.as_str()).collect();
                if names.len() != s.bases.len() || names.iter().any(|n| n.is_empty() || n.contains(',')) {
                    return bad("base names must be distinct, non-empty and comma-free".into());
                }
            }
            Study::IsingMse(s) | Study::Rbm(s) => {
                check_params(&s.n_values, "n_values")?;
                s.sampler.validate()?;
                check_methods(&s.methods, &[Method::Gfsvgd, Method::Gibbs, Method::ExactMc])?;
                if s.metrics.is_empty() {
                    return bad("metrics must not be empty".into());
                }
                let model = s.model.build()?;
                if !model.is_binary() {
                    return bad("sampling studies need an Ising or RBM model".into());
                }
                if s.methods.contains(&Method::ExactMc) && enumerate_log_mass(&model).is_err() {
                    return bad("exact_mc needs an enumerable model (at most 2^20 states)".into());
                }
                if s.truth.samples < 2 || s.truth.thin == 0 {
                    return bad("truth needs at least 2 samples and thin >= 1".into());
                }
            }
            Study::Gof(s) => {
                check_params(&s.n_values, "n_values")?;
                s.gof.validate()?;
                check_methods(&s.methods, &[Method::Gfksd, Method::Mmd])?;
                if s.n_values.contains(&1) {
                    return bad("goodness-of-fit tests need n >= 2".into());
                }
                let model = s.model.build()?;
                s.alternative.apply(&model)?;
                if s.methods.contains(&Method::Mmd) && s.mmd_shuffles == 0 {
                    return bad("mmd_shuffles must be positive".into());
                }
                if s.chain.thin == 0 {
                    return bad("chain thin must be at least 1".into());
                }
            }
            Study::Bnn(s) => {
                check_params(&s.member_values, "member_values")?;
                check_methods(&s.methods, &[Method::Gfsvgd, Method::Single, Method::Bagging])?;
                s.train.validate()?;
                if s.train_size < 2 || s.test_size < 2 || !s.separation.is_finite() {
                    return bad("bnn needs train_size, test_size >= 2 and a finite separation".into());
                }
            }
        }
        Ok(())
    }
}

/// One long-format result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub parameter: String,
    pub param_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub status: String,
}

pub const RESULT_HEADER: [&str; 9] = [
    "experiment",
    "method",
    "parameter",
    "param_value",
    "trial",
    "seed",
    "metric",
    "value",
    "status",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

type RowKey = (String, String, String, u64, usize, String);

impl ResultTable {
    fn key(r: &ResultRow) -> RowKey {
        (
            r.experiment.clone(),
            r.method.clone(),
            r.parameter.clone(),
            r.param_value.to_bits(),
            r.trial,
            r.metric.clone(),
        )
    }

    /// Rejects duplicate `(experiment, method, parameter, trial, metric)` keys.
    pub fn new(rows: Vec<ResultRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert(Self::key(r)) {
                return Err(Error::Argument(format!(
                    "duplicate result key ({}, {}, {}={}, trial {}, {})",
                    r.experiment, r.method, r.parameter, r.param_value, r.trial, r.metric
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn failed_cells(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.status != "ok")
            .map(|r| (&r.method, r.param_value.to_bits(), r.trial))
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(RESULT_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.method.clone(),
                r.parameter.clone(),
                fmt_num(r.param_value),
                r.trial.to_string(),
                r.seed.to_string(),
                r.metric.clone(),
                fmt_num(r.value),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a results CSV; a different header is a schema mismatch.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != RESULT_HEADER {
            return Err(Error::Argument(format!(
                "{}: schema mismatch, expected columns {}",
                path.display(),
                RESULT_HEADER.join(",")
            )));
        }
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()
            .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?;
        Self::new(rows)
    }

    /// Mean of the `ok` values per `(experiment, method, parameter, param_value, metric)`.
    pub fn means(&self) -> BTreeMap<(String, String, String, u64, String), (f64, usize)> {
        let mut acc: BTreeMap<_, (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.status == "ok" && r.value.is_finite()) {
            let e = acc
                .entry((
                    r.experiment.clone(),
                    r.method.clone(),
                    r.parameter.clone(),
                    r.param_value.to_bits(),
                    r.metric.clone(),
                ))
                .or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, c))| (k, (s / c as f64, c))).collect()
    }

    /// `ok` values of one series, grouped by parameter value in ascending order.
    pub fn series(&self, method: &str, metric: &str) -> Vec<(f64, Vec<f64>)> {
        let mut m: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        for r in self
            .rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric && r.status == "ok")
        {
            m.entry(order_key(r.param_value))
                .or_insert((r.param_value, vec![]))
                .1
                .push(r.value);
        }
        m.into_values().collect()
    }
}

/// Monotone map from finite floats to `u64` for ordered keys.
fn order_key(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Shortest round-trip decimal, `NaN` for missing values.
fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

/// FNV-1a, used for cache keys and checksums.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Ground truth for a binary model: per-site mean and optionally a reference sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub source: String,
    pub mean: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CachedTruth {
    key: String,
    checksum: String,
    truth: GroundTruth,
}

fn truth_checksum(t: &GroundTruth) -> String {
    let mut bytes = t.source.as_bytes().to_vec();
    for v in t.mean.iter().chain(t.samples.iter().flatten()) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    format!("{:016x}", fnv1a(&bytes))
}

/// Enumerated mean when the model is enumerable, else the long-chain mean.
/// A reference sample of `truth.samples` states is attached when
/// `with_samples` is set (exact draws or the long chain itself).
pub fn ground_truth(model: &Model, truth: &TruthConfig, with_samples: bool) -> Result<GroundTruth> {
    match enumerate_log_mass(model) {
        Ok(table) => {
            let samples = if with_samples {
                let mut rng = RandomStream::new(truth.seed);
                (0..truth.samples)
                    .map(|_| table.labels_of(table.sample_index(&mut rng)))
                    .collect()
            } else {
                Vec::new()
            };
            Ok(GroundTruth {
                source: "enumeration".into(),
                mean: table.mean(),
                samples,
            })
        }
        Err(Error::Capacity { .. }) => {
            let samples = long_chain(model, truth.samples, truth.burn_in, truth.thin, truth.seed)?;
            let mean = column_mean(&samples);
            Ok(GroundTruth {
                source: "long_gibbs".into(),
                mean,
                samples: if with_samples { samples } else { Vec::new() },
            })
        }
        Err(e) => Err(e),
    }
}

/// [`ground_truth`] cached under `dir/truth.json`, keyed by model and
/// settings and verified by checksum; a stale or corrupt cache is rebuilt.
pub fn cached_ground_truth(model: &Model, truth: &TruthConfig, with_samples: bool, dir: &Path) -> Result<GroundTruth> {
    let key_src = serde_json::to_string(&(model.to_spec(), truth, with_samples))?;
    let key = format!("{:016x}", fnv1a(key_src.as_bytes()));
    let path = dir.join("truth.json");
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<CachedTruth>(&text) {
            if c.key == key && c.checksum == truth_checksum(&c.truth) {
                return Ok(c.truth);
            }
        }
    }
    let t = ground_truth(model, truth, with_samples)?;
    std::fs::create_dir_all(dir)?;
    let c = CachedTruth {
        key,
        checksum: truth_checksum(&t),
        truth: t,
    };
    std::fs::write(&path, serde_json::to_string(&c)?)?;
    Ok(c.truth)
}

pub fn column_mean(samples: &[Vec<f64>]) -> Vec<f64> {
    let d = samples.first().map_or(0, Vec::len);
    let n = samples.len() as f64;
    (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect()
}

/// Mean over sites of the squared error of the sample mean.
pub fn mean_mse(samples: &[Vec<f64>], truth: &[f64]) -> f64 {
    let m = column_mean(samples);
    m.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64
}

/// Total variation between the empirical state frequencies and `p`.
pub fn categorical_tv(samples: &[Vec<f64>], model: &CategoricalModel) -> f64 {
    let p = model.probabilities();
    let mut counts = vec![0usize; p.len()];
    for s in samples {
        if let Some(k) = model.states().iter().position(|&a| a == s[0]) {
            counts[k] += 1;
        }
    }
    let n = samples.len() as f64;
    0.5 * counts.iter().zip(&p).map(|(&c, q)| (c as f64 / n - q).abs()).sum::<f64>()
}

struct Cell {
    method: String,
    param_index: usize,
    param: f64,
    trial: usize,
    seed: u64,
}

type CellOutput = Result<Vec<(&'static str, f64)>>;

/// Everything a study needs, built once before the cells run.
enum Context {
    Categorical {
        study: CategoricalStudy,
        model: CategoricalModel,
        cp: ContinuousParameterization<Model>,
    },
    Transform {
        study: TransformStudy,
        model: CategoricalModel,
        cps: Vec<ContinuousParameterization<Model>>,
    },
    Sampling {
        study: SamplingStudy,
        model: Model,
        cp: ContinuousParameterization<Model>,
        truth: GroundTruth,
    },
    Gof {
        study: GofStudy,
        p: Model,
        q: Model,
        cp: ContinuousParameterization<Model>,
        p_exact: bool,
        q_exact: bool,
    },
    Bnn(BnnStudy),
}

impl Context {
    fn build(cfg: &ExperimentConfig, out: &Path) -> Result<Self> {
        Ok(match &cfg.study {
            Study::Categorical(s) => {
                let model = s.model.build()?;
                let Model::Categorical(cat) = model.clone() else {
                    unreachable!("validated")
                };
                Context::Categorical {
                    study: s.clone(),
                    model: cat,
                    cp: ContinuousParameterization::gaussian(model)?,
                }
            }
            Study::Transform(s) => {
                let model = s.model.build()?;
                let Model::Categorical(cat) = model.clone() else {
                    unreachable!("validated")
                };
                let cps = s
                    .bases
                    .iter()
                    .map(|b| ContinuousParameterization::new(model.clone(), BaseDensity::iid(1, b.component.clone())))
                    .collect::<Result<_>>()?;
                Context::Transform {
                    study: s.clone(),
                    model: cat,
                    cps,
                }
            }
            Study::IsingMse(s) | Study::Rbm(s) => {
                let model = s.model.build()?;
                let truth = cached_ground_truth(&model, &s.truth, s.metrics.contains(&Metric::Mmd), &out.join("cache"))?;
                Context::Sampling {
                    study: s.clone(),
                    cp: ContinuousParameterization::gaussian(model.clone())?,
                    model,
                    truth,
                }
            }
            Study::Gof(s) => {
                let p = s.model.build()?;
                let q = s.alternative.apply(&p)?;
                let p_exact = enumerate_log_mass(&p).is_ok();
                let q_exact = enumerate_log_mass(&q).is_ok();
                Context::Gof {
                    study: s.clone(),
                    cp: ContinuousParameterization::gaussian(p.clone())?,
                    p,
                    q,
                    p_exact,
                    q_exact,
                }
            }
            Study::Bnn(s) => Context::Bnn(s.clone()),
        })
    }

    /// `(parameter name, values, methods)` of the study.
    fn layout(&self) -> (&'static str, Vec<f64>, Vec<String>) {
        let f = |v: &[usize]| v.iter().map(|&x| x as f64).collect();
        let names = |m: &[Method]| m.iter().map(|x| x.name().to_owned()).collect();
        match self {
            Context::Categorical { study, .. } => ("n", f(&study.n_values), names(&[Method::Gfsvgd, Method::ExactMc])),
            Context::Transform { study, .. } => ("n", f(&study.n_values), study.bases.iter().map(|b| b.name.clone()).collect()),
            Context::Sampling { study, .. } => ("n", f(&study.n_values), names(&study.methods)),
            Context::Gof { study, .. } => ("n", f(&study.n_values), names(&study.methods)),
            Context::Bnn(study) => ("members", f(&study.member_values), names(&study.methods)),
        }
    }

    fn metric_names(&self, method: &str) -> Vec<&'static str> {
        match self {
            Context::Categorical { .. } | Context::Transform { .. } => vec!["tv"],
            Context::Sampling { study, .. } => study
                .metrics
                .iter()
                .map(|m| match m {
                    Metric::Mse => "mse",
                    Metric::Mmd => "mmd",
                })
                .collect(),
            Context::Gof { .. } => vec!["reject", "p_value", "statistic"],
            Context::Bnn(_) if method == "gfsvgd" || method == "bagging" => vec!["accuracy", "best_member_accuracy"],
            Context::Bnn(_) => vec!["accuracy"],
        }
    }

    fn run_cell(&self, cell: &Cell, trial_seed: u64, traces: &Path) -> CellOutput {
        let n = cell.param as usize;
        let write_trace_here = cell.trial == 0;
        match self {
            Context::Categorical { study, model, cp } => {
                let samples = match cell.method.as_str() {
                    "gfsvgd" => {
                        let cfg = SamplerConfig {
                            seed: cell.seed,
                            ..study.sampler.clone()
                        };
                        let out = sample_model(cp, SurrogateMode::BaseOnly, n, &cfg)?;
                        if write_trace_here {
                            write_trace(traces.join(format!("gfsvgd_n{n}.csv")), &out.trace)?;
                        }
                        out.samples
                    }
                    _ => exact_mc_sample(model, n, &mut RandomStream::new(cell.seed))?,
                };
                Ok(vec![("tv", categorical_tv(&samples, model))])
            }
            Context::Transform { study, model, cps } => {
                let idx = study
                    .bases
                    .iter()
                    .position(|b| b.name == cell.method)
                    .expect("method is a base name");
                let cfg = SamplerConfig {
                    seed: cell.seed,
                    ..study.sampler.clone()
                };
                let out = sample_model(&cps[idx], SurrogateMode::BaseOnly, n, &cfg)?;
                if write_trace_here {
                    write_trace(traces.join(format!("{}_n{n}.csv", cell.method)), &out.trace)?;
                }
                Ok(vec![("tv", categorical_tv(&out.samples, model))])
            }
            Context::Sampling { study, model, cp, truth } => {
                let samples = match cell.method.as_str() {
                    "gfsvgd" => {
                        let cfg = SamplerConfig {
                            seed: cell.seed,
                            ..study.sampler.clone()
                        };
                        let out = sample_model(cp, study.surrogate, n, &cfg)?;
                        if write_trace_here {
                            write_trace(traces.join(format!("gfsvgd_n{n}.csv")), &out.trace)?;
                        }
                        out.samples
                    }
                    "gibbs" => parallel_chains(model, n, study.sampler.iterations, study.sampler.init_mean, cell.seed)?,
                    _ => exact_mc_sample(model, n, &mut RandomStream::new(cell.seed))?,
                };
                let mut m = Vec::new();
                for metric in &study.metrics {
                    match metric {
                        Metric::Mse => m.push(("mse", mean_mse(&samples, &truth.mean))),
                        Metric::Mmd => m.push(("mmd", mmd_hamming(&samples, &truth.samples)?)),
                    }
                }
                Ok(m)
            }
            Context::Gof {
                study,
                p,
                q,
                cp,
                p_exact,
                q_exact,
            } => {
                let draw = |model: &Model, exact: bool, seed: u64| -> Result<Vec<Vec<f64>>> {
                    if exact {
                        exact_mc_sample(model, n, &mut RandomStream::new(seed))
                    } else {
                        long_chain(model, n, study.chain.burn_in, study.chain.thin, seed)
                    }
                };
                // Data depend only on the trial and n, so methods see the same data.
                let data = draw(q, *q_exact, derive_seed(trial_seed, 1_000_000 + cell.param_index as u64))?;
                if cell.method == "gfksd" {
                    let r = run_gof_test(&data, cp, &study.gof, cell.seed)?;
                    Ok(vec![
                        ("reject", f64::from(u8::from(r.reject))),
                        ("p_value", r.p_value),
                        ("statistic", r.statistic),
                    ])
                } else {
                    let reference = draw(p, *p_exact, derive_seed(cell.seed, 1))?;
                    let r = mmd_permutation_test(&data, &reference, study.mmd_shuffles, study.gof.alpha, cell.seed)?;
                    Ok(vec![
                        ("reject", f64::from(u8::from(r.reject))),
                        ("p_value", r.p_value),
                        ("statistic", r.statistic),
                    ])
                }
            }
            Context::Bnn(study) => {
                let root = RandomStream::new(trial_seed);
                let train = Dataset::two_blobs(study.train_size, study.separation, &mut root.child(0))?;
                let test = Dataset::two_blobs(study.test_size, study.separation, &mut root.child(1))?;
                let cfg = BnnTrainConfig {
                    members: n,
                    ..study.train
                };
                match cell.method.as_str() {
                    "gfsvgd" => {
                        let state = train_gf_svgd(&train, &cfg, cell.seed)?;
                        let e = state.ensemble();
                        if write_trace_here {
                            e.save_json(traces.join(format!("gfsvgd_members{n}.json")))?;
                        }
                        let best = e.member_accuracies(&test)?.into_iter().fold(0.0, f64::max);
                        Ok(vec![("accuracy", e.accuracy(&test)?), ("best_member_accuracy", best)])
                    }
                    "bagging" => {
                        let e = bagging_baseline(&train, &cfg, cell.seed)?;
                        let best = e.member_accuracies(&test)?.into_iter().fold(0.0, f64::max);
                        Ok(vec![("accuracy", e.accuracy(&test)?), ("best_member_accuracy", best)])
                    }
                    _ => {
                        let net = train_straight_through(&train, &cfg, &mut RandomStream::new(cell.seed))?;
                        Ok(vec![("accuracy", net.accuracy(&test)?)])
                    }
                }
            }
        }
    }

    /// Particle histograms of trial 0 at the checkpoints (categorical only).
    fn write_evolution(&self, trial_seed: u64, traces: &Path) -> Result<()> {
        let Context::Categorical { study, model, cp } = self else {
            return Ok(());
        };
        let n = *study.n_values.iter().max().expect("validated non-empty");
        let cfg = &study.sampler;
        let mut rng = RandomStream::new(derive_seed(trial_seed, 0));
        let mut ens = ParticleEnsemble::gaussian(n, 1, cfg.init_mean, cfg.init_std, cfg.step_size, &mut rng)?;
        let surrogate = cp.surrogate(SurrogateMode::BaseOnly)?;
        let mut w = csv::Writer::from_path(traces.join("evolution.csv"))?;
        w.write_record(["iteration", "state", "frequency", "target"])?;
        let last = study.checkpoints.iter().copied().max().unwrap_or(0);
        let p = model.probabilities();
        for it in 0..=last {
            if study.checkpoints.contains(&it) {
                let samples = ens.discretize(cp.partition())?;
                for (&a, q) in model.states().iter().zip(&p) {
                    let f = samples.iter().filter(|s| s[0] == a).count() as f64 / n as f64;
                    w.write_record([it.to_string(), fmt_num(a), fmt_num(f), fmt_num(*q)])?;
                }
            }
            if it < last {
                gf_svgd_step(
                    &mut ens,
                    cp,
                    &surrogate,
                    cfg.weights,
                    cfg.bandwidth,
                    cfg.step_size,
                    cfg.update,
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub table: ResultTable,
    /// Failed cells plus a failed evolution trace, if any.
    pub failed_cells: usize,
    pub output_dir: PathBuf,
}

/// Runs every `(method, parameter, trial)` cell and writes `results.csv`,
/// `timings.csv`, traces of trial 0, SVG plots and, when cells fail,
/// `failures.log`. A failing cell is recorded with status `failed` and the
/// run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let out = cfg.output_dir();
    let traces = out.join("traces");
    let plots = out.join("plots");
    std::fs::create_dir_all(&traces)?;
    std::fs::create_dir_all(&plots)?;
    let ctx = Context::build(cfg, &out)?;
    let (parameter, params, methods) = ctx.layout();
    let trial_seeds = cfg.trial_seeds();
    let mut cells = Vec::new();
    for (trial, &ts) in trial_seeds.iter().enumerate() {
        for (pi, &param) in params.iter().enumerate() {
            for (mi, method) in methods.iter().enumerate() {
                cells.push(Cell {
                    method: method.clone(),
                    param_index: pi,
                    param,
                    trial,
                    seed: derive_seed(ts, (pi * 64 + mi) as u64),
                });
            }
        }
    }
    let mut failures = String::new();
    let mut other_failures = 0;
    if let Err(e) = ctx.write_evolution(trial_seeds[0], &traces) {
        let _ = writeln!(failures, "evolution trace: {e}");
        other_failures += 1;
    }
    let results: Vec<(CellOutput, f64)> = cells
        .par_iter()
        .map(|c| {
            let t0 = Instant::now();
            let r = ctx.run_cell(c, trial_seeds[c.trial], &traces);
            (r, t0.elapsed().as_secs_f64())
        })
        .collect();

    let mut rows = Vec::new();
    let mut timings = csv::Writer::from_path(out.join("timings.csv"))?;
    timings.write_record(["experiment", "method", "parameter", "param_value", "trial", "seconds"])?;
    for (cell, (res, secs)) in cells.iter().zip(results) {
        let row = |metric: &str, value: f64, status: &str| ResultRow {
            experiment: cfg.name.clone(),
            method: cell.method.clone(),
            parameter: parameter.to_owned(),
            param_value: cell.param,
            trial: cell.trial,
            seed: cell.seed,
            metric: metric.to_owned(),
            value,
            status: status.to_owned(),
        };
        match res {
            Ok(metrics) => rows.extend(metrics.into_iter().map(|(m, v)| row(m, v, "ok"))),
            Err(e) => {
                let _ = writeln!(
                    failures,
                    "{} {}={} trial {}: {e}",
                    cell.method, parameter, cell.param, cell.trial
                );
                rows.extend(ctx.metric_names(&cell.method).into_iter().map(|m| row(m, f64::NAN, "failed")));
            }
        }
        timings.write_record([
            cfg.name.clone(),
            cell.method.clone(),
            parameter.to_owned(),
            fmt_num(cell.param),
            cell.trial.to_string(),
            format!("{secs:.6}"),
        ])?;
    }
    timings.flush()?;
    let table = ResultTable::new(rows)?;
    table.write_csv(out.join("results.csv"))?;
    let log = out.join("failures.log");
    if failures.is_empty() {
        if log.exists() {
            std::fs::remove_file(&log)?;
        }
    } else {
        std::fs::write(&log, failures)?;
    }
    let metrics: BTreeSet<String> = table.rows.iter().map(|r| r.metric.clone()).collect();
    for metric in metrics {
        let series: Vec<(String, Vec<(f64, f64)>)> = methods
            .iter()
            .map(|m| {
                let pts = table
                    .series(m, &metric)
                    .into_iter()
                    .map(|(x, v)| (x, v.iter().sum::<f64>() / v.len() as f64))
                    .collect();
                (m.clone(), pts)
            })
            .collect();
        let svg = line_plot(&format!("{} {metric}", cfg.name), parameter, &metric, &series);
        std::fs::write(plots.join(format!("{metric}.svg")), svg)?;
    }
    let failed_cells = table.failed_cells() + other_failures;
    Ok(ExperimentOutcome {
        table,
        failed_cells,
        output_dir: out,
    })
}

const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];

/// Static SVG line chart, one polyline per series. Axes switch to log10
/// when every value is positive and the range spans a factor of 4.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 150.0, 40.0, 50.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, p)| p.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let use_log = |v: &mut dyn Iterator<Item = f64>| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in v {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        lo > 0.0 && hi / lo >= 4.0
    };
    let logx = use_log(&mut pts.iter().map(|p| p.0));
    let logy = use_log(&mut pts.iter().map(|p| p.1));
    let tx = |x: f64| if logx { x.log10() } else { x };
    let ty = |y: f64| if logy { y.log10() } else { y };
    let range = |v: Vec<f64>| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(pts.iter().map(|p| tx(p.0)).collect());
    let (y0, y1) = range(pts.iter().map(|p| ty(p.1)).collect());
    let px = |x: f64| left + (tx(x) - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (ty(y) - y0) / (y1 - y0) * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (w - right + left) / 2.0,
        escape(title)
    );
    let (ax0, ax1, ay0, ay1) = (left, w - right, h - bottom, top);
    let _ = writeln!(
        s,
        r#"<path d="M{ax0} {ay1} L{ax0} {ay0} L{ax1} {ay0}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let f = f64::from(k) / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (xl, yl) = (if logx { 10f64.powf(xv) } else { xv }, if logy { 10f64.powf(yv) } else { yv });
        let gx = ax0 + f * (ax1 - ax0);
        let gy = ay0 - f * (ay0 - ay1);
        let _ = writeln!(
            s,
            r#"<text x="{gx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            ay0 + 16.0,
            tick(xl)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            ax0 - 6.0,
            gy + 4.0,
            tick(yl)
        );
    }
    let scale = |log: bool| if log { " (log)" } else { "" };
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}{}</text>"#,
        (ax0 + ax1) / 2.0,
        h - 12.0,
        escape(xlabel),
        scale(logx)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}{}</text>"#,
        (ay0 + ay1) / 2.0,
        escape(ylabel),
        scale(logy)
    );
    for (i, (name, p)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = p
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!logx || *x > 0.0) && (!logy || *y > 0.0))
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        if !coords.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (cx, cy) = c.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            ax1 + 12.0,
            ax1 + 32.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}">{}</text>"#, ax1 + 38.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Metrics where larger values rank first.
fn higher_is_better(metric: &str) -> bool {
    matches!(metric, "accuracy" | "best_member_accuracy" | "reject")
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let p: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if p.len() < 2 {
        return None;
    }
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum::<f64>() / sxx)
}

/// Mean wall-clock seconds per `(experiment, method)`.
pub type Timings = BTreeMap<(String, String), f64>;

/// Reads a `timings.csv` written by [`run_experiment`].
pub fn read_timings(path: impl AsRef<Path>) -> Result<Timings> {
    #[derive(Deserialize)]
    struct Row {
        experiment: String,
        method: String,
        seconds: f64,
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Argument(format!("timings: {e}")))?;
        let e = acc.entry((row.experiment, row.method)).or_insert((0.0, 0));
        e.0 += row.seconds;
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect())
}

/// Method ranking per parameter and log-log slopes, rendered as Markdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// `(experiment, metric, parameter, value) -> [(method, mean)]`, best first.
    pub rankings: BTreeMap<(String, String, String, u64), Vec<(String, f64)>>,
    /// `(experiment, method, metric) -> slope` for series over `n`.
    pub slopes: BTreeMap<(String, String, String), f64>,
    pub timings: Timings,
}

/// Builds a [`Report`]. For each experiment, only parameter values present
/// in every table containing that experiment are compared; an experiment
/// whose tables share no parameter value is an error.
pub fn compare_report(tables: &[ResultTable], timings: &Timings) -> Result<Report> {
    if tables.is_empty() || tables.iter().all(|t| t.rows.is_empty()) {
        return Err(Error::Argument("report needs at least one non-empty results table".into()));
    }
    let mut common: BTreeMap<String, BTreeSet<(String, u64)>> = BTreeMap::new();
    for t in tables {
        let mut keys: BTreeMap<String, BTreeSet<(String, u64)>> = BTreeMap::new();
        for r in &t.rows {
            keys.entry(r.experiment.clone())
                .or_default()
                .insert((r.parameter.clone(), r.param_value.to_bits()));
        }
        for (exp, k) in keys {
            match common.get_mut(&exp) {
                Some(c) => c.retain(|x| k.contains(x)),
                None => {
                    common.insert(exp, k);
                }
            }
        }
    }
    if let Some((exp, _)) = common.iter().find(|(_, k)| k.is_empty()) {
        return Err(Error::Argument(format!(
            "the tables for experiment {exp} share no parameter values; nothing to compare"
        )));
    }
    let merged = ResultTable {
        rows: tables
            .iter()
            .flat_map(|t| t.rows.iter())
            .filter(|r| common[&r.experiment].contains(&(r.parameter.clone(), r.param_value.to_bits())))
            .cloned()
            .collect(),
    };
    let means = merged.means();
    let mut rankings: BTreeMap<(String, String, String, u64), Vec<(String, f64)>> = BTreeMap::new();
    // Raw test statistics are on different scales per method.
    for ((exp, method, parameter, pv, metric), (mean, _)) in means.iter().filter(|(k, _)| k.4 != "statistic") {
        rankings
            .entry((exp.clone(), metric.clone(), parameter.clone(), *pv))
            .or_default()
            .push((method.clone(), *mean));
    }
    for ((_, metric, _, _), list) in rankings.iter_mut() {
        let desc = higher_is_better(metric);
        list.sort_by(|a, b| {
            let o = a.1.total_cmp(&b.1);
            (if desc { o.reverse() } else { o }).then_with(|| a.0.cmp(&b.0))
        });
    }
    let mut series: BTreeMap<(String, String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for ((exp, method, parameter, pv, metric), (mean, _)) in &means {
        if parameter == "n" && matches!(metric.as_str(), "mse" | "mmd" | "tv") {
            series
                .entry((exp.clone(), method.clone(), metric.clone()))
                .or_default()
                .push((f64::from_bits(*pv), *mean));
        }
    }
    let slopes = series
        .into_iter()
        .filter_map(|(k, p)| log_log_slope(&p).map(|s| (k, s)))
        .collect();
    Ok(Report {
        rankings,
        slopes,
        timings: timings.clone(),
    })
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Comparison report\n\n## Rankings (best first)\n\n");
        s.push_str("| experiment | metric | parameter | ranking |\n|---|---|---|---|\n");
        for ((exp, metric, parameter, pv), list) in &self.rankings {
            let r: Vec<String> = list.iter().map(|(m, v)| format!("{m} ({})", fmt_sig(*v))).collect();
            let _ = writeln!(
                s,
                "| {exp} | {metric} | {parameter}={} | {} |",
                f64::from_bits(*pv),
                r.join(" > ")
            );
        }
        if !self.slopes.is_empty() {
            s.push_str("\n## Log-log slopes against n\n\n| experiment | method | metric | slope |\n|---|---|---|---|\n");
            for ((exp, method, metric), v) in &self.slopes {
                let _ = writeln!(s, "| {exp} | {method} | {metric} | {v:.3} |");
            }
        }
        if !self.timings.is_empty() {
            s.push_str("\n## Wall clock (mean seconds per cell)\n\n| experiment | method | seconds |\n|---|---|---|\n");
            for ((exp, method), v) in &self.timings {
                let _ = writeln!(s, "| {exp} | {method} | {v:.4} |");
            }
        }
        s
    }
}

fn fmt_sig(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}
