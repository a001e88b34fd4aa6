use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use fedkmeans::dataset::{generate_sbm, load_centroids_csv, save_centroids_csv, save_csv, SbmSpec};
use fedkmeans::harness::{
    parse_seeds, run, sweep, theorem_check, write_artifacts, BatchRow, ExperimentConfig, Preset, SweepAxis,
};
use fedkmeans::metrics::{evaluate, write_reports};
use fedkmeans::{Error, Result};

#[derive(Parser)]
#[command(name = "fedkmeans", version, about = "One-shot federated k-means experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset to CSV.
    Generate(GenerateArgs),
    /// Write the client assignment of one seed.
    Partition {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one method over every configured seed.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write long-format tables for plotting.
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Run one method over every seed and every value of an axis.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// clients, alpha, k_prime or k.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Check the recovery guarantee on ball-model data.
    TheoremCheck(TheoremArgs),
    /// Score a centroid file against a dataset.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        centroids: PathBuf,
        #[arg(long, default_value = "eval")]
        label: String,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// s1..s4, sbm-thm or tiny-oracle.
    #[arg(long, conflicts_with = "sbm_centers")]
    preset: Option<String>,
    /// Ball-model centers, e.g. "0,0;10,0".
    #[arg(long, requires = "sbm_radius")]
    sbm_centers: Option<String>,
    #[arg(long)]
    sbm_radius: Option<f64>,
    #[arg(long, default_value_t = 100)]
    points_per_component: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the true centers here.
    #[arg(long)]
    centers_out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoremArgs {
    #[arg(long, default_value_t = 3.0)]
    lambda: f64,
    #[arg(long, default_value_t = 5.0)]
    eta: f64,
    #[arg(long, default_value_t = 10)]
    clients: usize,
    #[arg(long, default_value = "0..10")]
    seeds: String,
    /// Custom ball-model centers instead of the sbm-thm preset.
    #[arg(long, requires = "sbm_radius")]
    sbm_centers: Option<String>,
    #[arg(long)]
    sbm_radius: Option<f64>,
    #[arg(long, default_value_t = 200)]
    points_per_component: usize,
    /// Fail unless errors also stay within 10 r.
    #[arg(long)]
    strict: bool,
}

/// Config file plus per-key overrides; flags win over the file.
#[derive(Args)]
struct ConfigArgs {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_seed: Option<String>,
    #[arg(long)]
    centers: Option<String>,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    clients: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    client_k: Option<String>,
    #[arg(long)]
    k_prime: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    remove_one_fit_many: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    fuzzifier: Option<String>,
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    group_mean: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    output: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("dataset", &self.dataset),
            ("data_seed", &self.data_seed),
            ("centers", &self.centers),
            ("partition", &self.partition),
            ("clients", &self.clients),
            ("method", &self.method),
            ("k", &self.k),
            ("client_k", &self.client_k),
            ("k_prime", &self.k_prime),
            ("radius", &self.radius),
            ("remove_one_fit_many", &self.remove_one_fit_many),
            ("rounds", &self.rounds),
            ("fuzzifier", &self.fuzzifier),
            ("restarts", &self.restarts),
            ("init", &self.init),
            ("group_mean", &self.group_mean),
            ("seeds", &self.seeds),
            ("output", &self.output),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_centers(s: &str) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad coordinate {v:?}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("centers {s:?} must have equal, non-zero dimension")));
    }
    Array2::from_shape_vec((rows.len(), d), rows.concat()).map_err(|e| Error::Config(e.to_string()))
}

fn sbm_spec(centers: &Option<String>, radius: Option<f64>, points: usize) -> Result<SbmSpec> {
    match centers {
        Some(c) => Ok(SbmSpec {
            centers: parse_centers(c)?,
            radius: radius.ok_or_else(|| Error::Config("--sbm-radius is required".into()))?,
            points_per_component: points,
        }),
        None => Ok(SbmSpec::theorem_preset()),
    }
}

fn emit(rows: &[BatchRow], cfg: &ExperimentConfig, plot_data: bool) -> Result<()> {
    match &cfg.output {
        Some(dir) => {
            let dataset = plot_data.then(|| cfg.load_dataset()).transpose()?;
            write_artifacts(dir, rows, dataset.as_ref(), plot_data)?;
            eprintln!("wrote {} rows to {}", rows.len(), dir.join("results.csv").display());
            Ok(())
        }
        None => {
            if plot_data {
                return Err(Error::Config("--emit-plot-data needs an output directory".into()));
            }
            let reports: Vec<_> = rows.iter().map(|r| r.outcome.report.clone()).collect();
            write_reports(io::stdout().lock(), &reports)
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate(a) => {
            let ds = match (&a.preset, &a.sbm_centers) {
                (Some(name), _) => Preset::from_name(name)
                    .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?
                    .generate(a.seed)?,
                (None, Some(_)) => generate_sbm(&sbm_spec(&a.sbm_centers, a.sbm_radius, a.points_per_component)?, a.seed)?,
                (None, None) => return Err(Error::Config("give --preset or --sbm-centers".into())),
            };
            save_csv(&ds, &a.out)?;
            if let (Some(path), Some(t)) = (&a.centers_out, ds.true_centers()) {
                save_centroids_csv(t, path)?;
            }
            eprintln!("wrote {} points to {}", ds.len(), a.out.display());
        }
        Command::Partition { config, seed, out } => {
            let cfg = config.resolve()?;
            let ds = cfg.load_dataset()?;
            cfg.split(&ds, seed)?.save_csv(&out)?;
        }
        Command::Run { config, emit_plot_data } => {
            let cfg = config.resolve()?;
            emit(&run(&cfg)?, &cfg, emit_plot_data)?;
        }
        Command::Sweep { config, axis, values, emit_plot_data } => {
            let cfg = config.resolve()?;
            let axis = SweepAxis::from_name(&axis)
                .ok_or_else(|| Error::Config(format!("unknown sweep axis {axis:?}")))?;
            emit(&sweep(&cfg, axis, &values)?, &cfg, emit_plot_data)?;
        }
        Command::TheoremCheck(a) => {
            let spec = sbm_spec(&a.sbm_centers, a.sbm_radius, a.points_per_component)?;
            let report = theorem_check(&spec, a.lambda, a.eta, a.clients, &parse_seeds(&a.seeds)?)?;
            report.write(io::stdout().lock())?;
            let ok = report.within_bound() && (!a.strict || report.within_guard());
            eprintln!(
                "bound {} guard {}: {}",
                report.bound,
                report.guard,
                if ok { "pass" } else { "fail" }
            );
            return Ok(ok);
        }
        Command::Eval { config, centroids, label } => {
            let cfg = config.resolve()?;
            let ds = cfg.load_dataset()?;
            let c = load_centroids_csv(&centroids)?;
            let seed = cfg.seeds[0];
            let report = evaluate(&label, seed, &ds, &c, None, cfg.metadata())?;
            write_reports(io::stdout().lock(), &[report])?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("FEDKMEANS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
