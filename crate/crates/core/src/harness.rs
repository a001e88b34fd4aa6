//! Experiment configuration and batch runners behind the command-line tool.
//!
//! A config is a flat `key=value` file; every key can also be overridden from
//! the command line. Each seed of a run partitions the data, runs one method,
//! and yields one [`EvalReport`] row. Seeds run in parallel but rows are
//! always emitted sorted by seed (then by sweep value).

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use crate::baselines::{ffcm, k_fed, m_avg, FfcmVariant};
use crate::dataset::{
    generate_gmm, generate_sbm, load_centroids_csv, load_csv, partition_dirichlet_nonempty,
    partition_fraction, partition_iid, save_centroids_csv, Dataset, GmmSpec, PartitionPlan, SbmSpec,
    SsetPreset,
};
use crate::error::{Error, Result};
use crate::kmeans::{lloyd, ClusterSolution, Init, LloydConfig};
use crate::metrics::{evaluate, write_reports, EvalReport};
use crate::pipeline::{run_feca, FecaConfig};
use crate::radius::{save_payload_csv, CentroidRadius, RadiusVariant};
use crate::rng::derive_seed;
use crate::server::GroupMean;

/// Stream id separating partition draws from method draws of the same seed.
pub const PARTITION_STREAM: u64 = 1;
/// k-FED local `k` when none is configured.
pub const DEFAULT_K_PRIME: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Sset(SsetPreset),
    /// Three unit balls far apart, satisfying the recovery-guarantee separation.
    SbmThm,
    /// Nine points in three tight blobs, small enough for exhaustive k-means.
    TinyOracle,
}

impl Preset {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "sbm-thm" => Some(Preset::SbmThm),
            "tiny-oracle" => Some(Preset::TinyOracle),
            other => SsetPreset::from_name(other).map(Preset::Sset),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sset(p) => p.name(),
            Preset::SbmThm => "sbm-thm",
            Preset::TinyOracle => "tiny-oracle",
        }
    }

    pub fn generate(self, seed: u64) -> Result<Dataset> {
        match self {
            Preset::Sset(p) => p.generate(seed),
            Preset::SbmThm => generate_sbm(&SbmSpec::theorem_preset(), seed),
            Preset::TinyOracle => generate_gmm(&tiny_oracle_spec(), seed),
        }
    }
}

pub fn tiny_oracle_spec() -> GmmSpec {
    GmmSpec::isotropic(ndarray::array![[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]], 0.5, 3)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Preset(Preset),
    Csv(PathBuf),
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Preset(p) => f.write_str(p.name()),
            DataSource::Csv(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionScheme {
    Iid,
    Dirichlet(f64),
    /// Every client gets a disjoint sample holding this fraction of the data.
    Fraction(f64),
}

impl PartitionScheme {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("partition must be iid, dirichlet:<alpha> or fraction:<f>, got {s:?}"));
        let number = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        match s.trim().split_once(':') {
            None if s.trim().eq_ignore_ascii_case("iid") => Ok(PartitionScheme::Iid),
            Some((kind, v)) if kind.eq_ignore_ascii_case("dirichlet") => {
                let alpha = number(v)?;
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Config(format!("Dirichlet alpha must be positive, got {alpha}")));
                }
                Ok(PartitionScheme::Dirichlet(alpha))
            }
            Some((kind, v)) if kind.eq_ignore_ascii_case("fraction") => {
                let f = number(v)?;
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Config(format!("fraction must be in (0, 1], got {f}")));
                }
                Ok(PartitionScheme::Fraction(f))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionScheme::Iid => f.write_str("iid"),
            PartitionScheme::Dirichlet(a) => write!(f, "dirichlet:{a}"),
            PartitionScheme::Fraction(x) => write!(f, "fraction:{x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Centralized,
    Feca,
    MAvg,
    KFed,
    Ffcm(FfcmVariant),
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Centralized,
        Method::Feca,
        Method::MAvg,
        Method::KFed,
        Method::Ffcm(FfcmVariant::V1),
        Method::Ffcm(FfcmVariant::V2),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Centralized => "centralized",
            Method::Feca => "feca",
            Method::MAvg => "mavg",
            Method::KFed => "kfed",
            Method::Ffcm(v) => v.name(),
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s.trim()))
    }
}

fn init_name(init: &Init) -> &'static str {
    match init {
        Init::KMeansPlusPlus => "kmeans++",
        Init::Uniform => "uniform",
        Init::Given(_) => "given",
    }
}

fn group_mean_name(mean: GroupMean) -> &'static str {
    match mean {
        GroupMean::Unweighted => "unweighted",
        GroupMean::ClusterSize => "cluster-size",
    }
}

/// Parses `a..b` (half-open), a comma list, or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("seeds must be a list like 0,1,2 or a range like 0..10, got {s:?}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(seeds)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "on" | "yes" => Ok(true),
        "0" | "false" | "off" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DataSource,
    /// Seed for generating preset datasets; fixed across run seeds.
    pub data_seed: u64,
    /// Optional true-center file attached to a CSV dataset.
    pub centers: Option<PathBuf>,
    pub partition: PartitionScheme,
    pub clients: usize,
    pub method: Method,
    pub k: usize,
    pub client_k: Option<usize>,
    pub k_prime: Option<usize>,
    pub radius: RadiusVariant,
    pub remove_one_fit_many: bool,
    pub rounds: usize,
    pub fuzzifier: f64,
    pub restarts: usize,
    pub init: Init,
    pub group_mean: GroupMean,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DataSource::Preset(Preset::Sset(SsetPreset::S1)),
            data_seed: 0,
            centers: None,
            partition: PartitionScheme::Iid,
            clients: 10,
            method: Method::Feca,
            k: 15,
            client_k: None,
            k_prime: None,
            radius: RadiusVariant::Empirical,
            remove_one_fit_many: true,
            rounds: 10,
            fuzzifier: 2.0,
            restarts: 1,
            init: Init::KMeansPlusPlus,
            group_mean: GroupMean::Unweighted,
            seeds: vec![0],
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 18] = [
        "dataset",
        "data_seed",
        "centers",
        "partition",
        "clients",
        "method",
        "k",
        "client_k",
        "k_prime",
        "radius",
        "remove_one_fit_many",
        "rounds",
        "fuzzifier",
        "restarts",
        "init",
        "group_mean",
        "seeds",
        "output",
    ];

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let optional = |v: &str| -> Result<Option<usize>> {
            if v.is_empty() || v.eq_ignore_ascii_case("none") {
                Ok(None)
            } else {
                parse_value(key, v).map(Some)
            }
        };
        match key.trim() {
            "dataset" => {
                self.dataset = match Preset::from_name(value) {
                    Some(p) => DataSource::Preset(p),
                    None => DataSource::Csv(PathBuf::from(value)),
                }
            }
            "data_seed" => self.data_seed = parse_value(key, value)?,
            "centers" => self.centers = (!value.is_empty()).then(|| PathBuf::from(value)),
            "partition" => self.partition = PartitionScheme::parse(value)?,
            "clients" => self.clients = parse_value(key, value)?,
            "method" => {
                self.method = Method::from_name(value)
                    .ok_or_else(|| Error::Config(format!("unknown method {value:?}")))?
            }
            "k" => self.k = parse_value(key, value)?,
            "client_k" => self.client_k = optional(value)?,
            "k_prime" => self.k_prime = optional(value)?,
            "radius" => {
                self.radius = RadiusVariant::from_name(value)
                    .ok_or_else(|| Error::Config(format!("unknown radius variant {value:?}")))?
            }
            "remove_one_fit_many" => self.remove_one_fit_many = parse_bool(key, value)?,
            "rounds" => self.rounds = parse_value(key, value)?,
            "fuzzifier" => self.fuzzifier = parse_value(key, value)?,
            "restarts" => self.restarts = parse_value(key, value)?,
            "init" => {
                self.init = match value.to_ascii_lowercase().as_str() {
                    "kmeans++" | "k-means++" => Init::KMeansPlusPlus,
                    "uniform" => Init::Uniform,
                    _ => return Err(Error::Config(format!("unknown init {value:?}"))),
                }
            }
            "group_mean" => {
                self.group_mean = match value.to_ascii_lowercase().as_str() {
                    "unweighted" => GroupMean::Unweighted,
                    "cluster-size" => GroupMean::ClusterSize,
                    _ => return Err(Error::Config(format!("unknown group mean {value:?}"))),
                }
            }
            "seeds" => self.seeds = parse_seeds(value)?,
            "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines on top of the defaults. Blank lines and
    /// `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(key, value).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.clients == 0 {
            return Err(Error::Config("clients must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.client_k == Some(0) || self.k_prime == Some(0) {
            return Err(Error::Config("client_k and k_prime must be at least 1".into()));
        }
        if self.rounds == 0 || self.restarts == 0 {
            return Err(Error::Config("rounds and restarts must be at least 1".into()));
        }
        if !(self.fuzzifier > 1.0 && self.fuzzifier.is_finite()) {
            return Err(Error::Config(format!("fuzzifier must exceed 1, got {}", self.fuzzifier)));
        }
        if let DataSource::Csv(p) = &self.dataset {
            if !p.is_file() {
                return Err(Error::Config(format!("dataset file {} does not exist", p.display())));
            }
        }
        if let Some(p) = &self.centers {
            if !p.is_file() {
                return Err(Error::Config(format!("centers file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Canonical settings echoed into every result row, enough to re-run it.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let opt = |v: Option<usize>| v.map_or("none".to_string(), |x| x.to_string());
        let mut out = vec![
            ("dataset".to_string(), self.dataset.to_string()),
            ("data_seed".into(), self.data_seed.to_string()),
        ];
        if let Some(c) = &self.centers {
            out.push(("centers".into(), c.display().to_string()));
        }
        out.extend([
            ("partition".into(), self.partition.to_string()),
            ("clients".into(), self.clients.to_string()),
            ("k".into(), self.k.to_string()),
        ]);
        let lloyd = LloydConfig::default();
        let lloyd_caps = [
            ("lloyd_max_iters".to_string(), lloyd.max_iters.to_string()),
            ("lloyd_tol".into(), lloyd.tol.to_string()),
        ];
        match self.method {
            Method::Centralized => {
                out.push(("init".into(), init_name(&self.init).into()));
                out.push(("restarts".into(), self.restarts.to_string()));
                out.extend(lloyd_caps);
            }
            Method::Feca => {
                out.extend([
                    ("client_k".into(), opt(self.client_k)),
                    ("radius".into(), self.radius.name().into()),
                    ("remove_one_fit_many".into(), self.remove_one_fit_many.to_string()),
                    ("restarts".into(), self.restarts.to_string()),
                    ("init".into(), init_name(&self.init).into()),
                    ("group_mean".into(), group_mean_name(self.group_mean).into()),
                    ("client_seeds".into(), "derive(seed,client)".into()),
                    ("topk_ties".into(), "size>cluster_size>formation".into()),
                ]);
                out.extend(lloyd_caps);
            }
            Method::MAvg => {}
            Method::KFed => out.push(("k_prime".into(), self.k_prime().to_string())),
            Method::Ffcm(_) => {
                out.push(("rounds".into(), self.rounds.to_string()));
                out.push(("fuzzifier".into(), self.fuzzifier.to_string()));
            }
        }
        out
    }

    pub fn k_prime(&self) -> usize {
        self.k_prime.unwrap_or(DEFAULT_K_PRIME.min(self.k))
    }

    pub fn feca_config(&self, seed: u64) -> FecaConfig {
        FecaConfig {
            client_k: self.client_k,
            radius_variant: self.radius,
            remove_one_fit_many: self.remove_one_fit_many,
            restarts: self.restarts,
            init: self.init.clone(),
            group_mean: self.group_mean,
            ..FecaConfig::new(self.k, seed)
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let ds = match &self.dataset {
            DataSource::Preset(p) => p.generate(self.data_seed)?,
            DataSource::Csv(path) => load_csv(path)?,
        };
        match &self.centers {
            Some(path) => ds.with_true_centers(load_centroids_csv(path)?),
            None => Ok(ds),
        }
    }

    /// Client assignment for one seed.
    pub fn split(&self, dataset: &Dataset, seed: u64) -> Result<Split> {
        let s = derive_seed(seed, PARTITION_STREAM);
        Ok(match self.partition {
            PartitionScheme::Iid => Split { selection: None, plan: partition_iid(dataset, self.clients, s)? },
            PartitionScheme::Dirichlet(alpha) => Split {
                selection: None,
                plan: partition_dirichlet_nonempty(dataset, self.clients, alpha, s, 1)?,
            },
            PartitionScheme::Fraction(f) => {
                let (selection, plan) = partition_fraction(dataset, self.clients, f, s)?;
                Split { selection: Some(selection), plan }
            }
        })
    }
}

/// A partition, possibly over a subsample of the dataset.
#[derive(Debug, Clone)]
pub struct Split {
    /// Dataset rows taking part, in plan order; `None` means all rows.
    pub selection: Option<Vec<usize>>,
    pub plan: PartitionPlan,
}

impl Split {
    /// Writes `point_index,client` rows using original dataset indices.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["point_index", "client"])?;
        for (i, c) in self.plan.client_of().iter().enumerate() {
            let idx = self.selection.as_ref().map_or(i, |s| s[i]);
            w.write_record([idx.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lloyd on the whole point set; `restarts` draws, lowest objective wins.
pub fn centralized(points: &Array2<f64>, k: usize, init: &Init, restarts: usize, seed: u64) -> Result<ClusterSolution> {
    let cfg = LloydConfig::with_init(init.clone());
    let mut best = lloyd(points, k, &cfg, seed)?;
    for r in 1..restarts {
        let sol = lloyd(points, k, &cfg, derive_seed(seed, r as u64))?;
        if sol.objective < best.objective {
            best = sol;
        }
    }
    Ok(best)
}

/// Everything one seed of a run produces.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub report: EvalReport,
    pub centroids: Array2<f64>,
    pub split: Option<Split>,
    pub payloads: Option<Vec<CentroidRadius>>,
    pub messages: Option<String>,
}

/// Partitions, runs the configured method and scores it against the full dataset.
pub fn run_seed(config: &ExperimentConfig, dataset: &Dataset, seed: u64) -> Result<SeedOutcome> {
    let mut metadata = config.metadata();
    let k = config.k;
    if config.method == Method::Centralized {
        let train = match config.partition {
            PartitionScheme::Fraction(_) => config.split(dataset, seed)?.selection.map(|s| dataset.subset(&s)),
            _ => None,
        }
        .transpose()?;
        let sol = centralized(train.as_ref().unwrap_or(dataset).points(), k, &config.init, config.restarts, seed)?;
        let report = evaluate(config.method.name(), seed, dataset, &sol.centroids, None, metadata)?;
        return Ok(SeedOutcome { report, centroids: sol.centroids, split: None, payloads: None, messages: None });
    }

    let split = config.split(dataset, seed)?;
    let owned;
    let train = match &split.selection {
        Some(sel) => {
            owned = dataset.subset(sel)?;
            &owned
        }
        None => dataset,
    };
    let plan = &split.plan;
    let (centroids, payloads, messages) = match config.method {
        Method::Feca => {
            let run = run_feca(train, plan, &config.feca_config(seed))?;
            let r = &run.result;
            metadata.extend([
                ("groups_formed".to_string(), r.groups_formed.to_string()),
                ("discarded".into(), r.discarded.len().to_string()),
                ("under_supplied".into(), r.under_supplied.to_string()),
                ("pairs_sent".into(), run.pooled_pairs().len().to_string()),
            ]);
            let pairs = run.pooled_pairs();
            (run.result.final_centroids.clone(), Some(pairs), Some(run.messages.to_csv_string()))
        }
        Method::MAvg => {
            let run = m_avg(train, plan, k, seed)?;
            metadata.push(("skipped_clients".into(), run.skipped.len().to_string()));
            metadata.push(("reference_client".into(), run.plan.reference.to_string()));
            (run.centroids, None, None)
        }
        Method::KFed => (k_fed(train, plan, k, config.k_prime(), seed)?, None, None),
        Method::Ffcm(variant) => {
            let run = ffcm(train, plan, k, config.rounds, variant, config.fuzzifier, seed)?;
            metadata.push(("skipped_clients".into(), run.skipped.len().to_string()));
            (run.centroids, None, None)
        }
        Method::Centralized => unreachable!("handled above"),
    };
    let report = evaluate(config.method.name(), seed, dataset, &centroids, payloads.as_deref(), metadata)?;
    Ok(SeedOutcome { report, centroids, split: Some(split), payloads, messages })
}

/// One row of a batch: a seed, optionally tagged with a sweep value.
#[derive(Debug, Clone)]
pub struct BatchRow {
    pub seed: u64,
    pub axis_value: Option<String>,
    pub outcome: SeedOutcome,
}

/// Runs every seed of `config` in parallel; rows come back in seed order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<BatchRow>> {
    config.validate()?;
    let dataset = config.load_dataset()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            run_seed(config, &dataset, seed).map(|outcome| BatchRow { seed, axis_value: None, outcome })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Clients,
    Alpha,
    /// Local `k`: client Lloyd `k` for FeCA, `k'` for k-FED.
    KPrime,
    K,
}

impl SweepAxis {
    pub fn from_name(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clients" => Some(SweepAxis::Clients),
            "alpha" => Some(SweepAxis::Alpha),
            "k_prime" | "k-prime" => Some(SweepAxis::KPrime),
            "k" => Some(SweepAxis::K),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Clients => "clients",
            SweepAxis::Alpha => "alpha",
            SweepAxis::KPrime => "k_prime",
            SweepAxis::K => "k",
        }
    }

    /// `config` with this axis set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut c = config.clone();
        match self {
            SweepAxis::Clients => c.set("clients", value)?,
            SweepAxis::Alpha => c.set("partition", &format!("dirichlet:{value}"))?,
            SweepAxis::KPrime => match c.method {
                Method::KFed => c.set("k_prime", value)?,
                _ => c.set("client_k", value)?,
            },
            SweepAxis::K => c.set("k", value)?,
        }
        Ok(c)
    }
}

/// Cross product of `values` with the seeds; rows sorted by seed, then by
/// the position of the value in `values`.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<Vec<BatchRow>> {
    if values.is_empty() {
        return Err(Error::Config(format!("sweep over {} needs at least one value", axis.name())));
    }
    config.validate()?;
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|v| {
            let c = axis.apply(config, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let dataset = config.load_dataset()?;
    let jobs: Vec<(u64, usize)> =
        config.seeds.iter().flat_map(|&s| (0..values.len()).map(move |v| (s, v))).collect();
    jobs.par_iter()
        .map(|&(seed, v)| {
            let mut outcome = run_seed(&configs[v], &dataset, seed)?;
            outcome.report.metadata.push(("sweep_axis".into(), axis.name().into()));
            outcome.report.metadata.push(("sweep_value".into(), values[v].clone()));
            Ok(BatchRow { seed, axis_value: Some(values[v].clone()), outcome })
        })
        .collect()
}

/// Writes `results.csv` plus per-seed artifacts under `dir`:
/// centroids, partition and, for FeCA, payloads and the message log.
pub fn write_artifacts(dir: &Path, rows: &[BatchRow], dataset: Option<&Dataset>, plot_data: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let reports: Vec<EvalReport> = rows.iter().map(|r| r.outcome.report.clone()).collect();
    write_reports(fs::File::create(dir.join("results.csv"))?, &reports)?;
    for row in rows {
        let mut sub = dir.join(format!("seed-{}", row.seed));
        if let Some(v) = &row.axis_value {
            sub = sub.join(format!("value-{v}"));
        }
        fs::create_dir_all(&sub)?;
        let o = &row.outcome;
        save_centroids_csv(&o.centroids, sub.join("centroids.csv"))?;
        if let Some(split) = &o.split {
            split.save_csv(sub.join("partition.csv"))?;
        }
        if let Some(p) = &o.payloads {
            save_payload_csv(p, sub.join("payloads.csv"))?;
        }
        if let Some(m) = &o.messages {
            fs::write(sub.join("messages.csv"), m)?;
        }
    }
    if plot_data {
        write_plot_data(dir, rows, dataset.and_then(Dataset::true_centers))?;
    }
    Ok(())
}

/// Long-format tables for external plotting: `plot_metrics.csv` holds one
/// metric value per row (per-seed bars and sweep curves), `plot_centroids.csv`
/// one coordinate per row for recovered and true centers.
pub fn write_plot_data(dir: &Path, rows: &[BatchRow], true_centers: Option<&Array2<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("plot_metrics.csv"))?;
    w.write_record(["method", "seed", "axis_value", "metric", "value"])?;
    for row in rows {
        let r = &row.outcome.report;
        let axis = row.axis_value.clone().unwrap_or_default();
        let metrics = [
            ("matched_l2", r.matched_l2),
            ("matched_mse", r.matched_mse),
            ("purity", r.purity),
            ("nmi", r.nmi),
            ("objective", Some(r.objective)),
            ("sigma_max", r.sigma_max),
        ];
        for (name, value) in metrics {
            if let Some(v) = value {
                w.write_record([r.method.clone(), row.seed.to_string(), axis.clone(), name.into(), v.to_string()])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("plot_centroids.csv"))?;
    w.write_record(["method", "seed", "axis_value", "kind", "index", "coord", "value"])?;
    let emit = |w: &mut csv::Writer<fs::File>, m: &str, seed: &str, axis: &str, kind: &str, c: &Array2<f64>| {
        for (i, row) in c.rows().into_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([m, seed, axis, kind, &i.to_string(), &j.to_string(), &v.to_string()])?;
            }
        }
        Ok::<_, Error>(())
    };
    if let Some(t) = true_centers {
        emit(&mut w, "", "", "", "true", t)?;
    }
    for row in rows {
        let axis = row.axis_value.clone().unwrap_or_default();
        emit(&mut w, &row.outcome.report.method, &row.seed.to_string(), &axis, "recovered", &row.outcome.centroids)?;
    }
    w.flush()?;
    Ok(())
}

/// Renders reports as CSV text.
pub fn results_csv(rows: &[BatchRow]) -> Result<String> {
    let reports: Vec<EvalReport> = rows.iter().map(|r| r.outcome.report.clone()).collect();
    let mut buf = Vec::new();
    write_reports(&mut buf, &reports)?;
    String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
}

/// Recovery-guarantee bound `(4 / (5 eta)) * delta_min`.
pub fn theorem_bound(delta_min: f64, eta: f64) -> f64 {
    4.0 / (5.0 * eta) * delta_min
}

/// Checks `delta_max >= 4 lambda^2 k^4 r` and
/// `delta_min >= 10 eta lambda k^2 sqrt(r delta_max)`, naming the one that fails.
pub fn check_separation(spec: &SbmSpec, lambda: f64, eta: f64) -> Result<()> {
    spec.validate()?;
    if !(lambda > 0.0 && eta > 0.0) {
        return Err(Error::InvalidParameter("lambda and eta must be positive".into()));
    }
    let k = spec.centers.nrows() as f64;
    let r = spec.radius;
    let (lo, hi) = match (spec.delta_min(), spec.delta_max()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(Error::InvalidSpec("separation needs at least two centers".into())),
    };
    let need_hi = 4.0 * lambda * lambda * k.powi(4) * r;
    if hi < need_hi {
        return Err(Error::SeparationViolated(format!(
            "delta_max >= 4 lambda^2 k^4 r fails: {hi} < {need_hi}"
        )));
    }
    let need_lo = 10.0 * eta * lambda * k * k * (r * hi).sqrt();
    if lo < need_lo {
        return Err(Error::SeparationViolated(format!(
            "delta_min >= 10 eta lambda k^2 sqrt(r delta_max) fails: {lo} < {need_lo}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremSeed {
    pub seed: u64,
    /// Largest distance from an output centroid to its nearest true center.
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub delta_min: f64,
    pub delta_max: f64,
    pub bound: f64,
    /// Tight regression guard, `10 r`.
    pub guard: f64,
    pub seeds: Vec<TheoremSeed>,
}

impl TheoremReport {
    pub fn within_bound(&self) -> bool {
        self.seeds.iter().all(|s| s.max_error <= self.bound)
    }

    pub fn within_guard(&self) -> bool {
        self.seeds.iter().all(|s| s.max_error <= self.guard)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "seed,max_error,bound,guard,within_bound,within_guard")?;
        for s in &self.seeds {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.seed,
                s.max_error,
                self.bound,
                self.guard,
                s.max_error <= self.bound,
                s.max_error <= self.guard
            )?;
        }
        Ok(())
    }
}

/// Runs FeCA with the theoretical radius on ball-model data (IID split over
/// `clients`) and measures how far output centroids land from true centers.
/// The separation preconditions are checked before anything runs.
pub fn theorem_check(spec: &SbmSpec, lambda: f64, eta: f64, clients: usize, seeds: &[u64]) -> Result<TheoremReport> {
    check_separation(spec, lambda, eta)?;
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    let (delta_min, delta_max) = (spec.delta_min().unwrap_or(0.0), spec.delta_max().unwrap_or(0.0));
    let k = spec.centers.nrows();
    let seeds = seeds
        .par_iter()
        .map(|&seed| {
            let ds = generate_sbm(spec, seed)?;
            let plan = partition_iid(&ds, clients, derive_seed(seed, PARTITION_STREAM))?;
            let cfg = FecaConfig { radius_variant: RadiusVariant::Theoretical, ..FecaConfig::new(k, seed) };
            let run = run_feca(&ds, &plan, &cfg)?;
            let max_error = run
                .centroids()
                .rows()
                .into_iter()
                .map(|c| crate::kmeans::nearest(c, &spec.centers).1.sqrt())
                .fold(0.0, f64::max);
            Ok(TheoremSeed { seed, max_error })
        })
        .collect::<Result<_>>()?;
    Ok(TheoremReport { delta_min, delta_max, bound: theorem_bound(delta_min, eta), guard: 10.0 * spec.radius, seeds })
}
