//! Command-line interface over the library: synthetic data generation,
//! spectral initialization, fitting, prediction, evaluation, kernel-family
//! comparison, and cross-covariance curve export.
//!
//! Exit codes: 0 on success, 2 for input errors (files, formats, parameter
//! validation), 3 for numerical failures (non-PSD matrices, diverged or
//! non-finite optimization).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mocsm::data::{self, MultiChannelDataset, SplitScheme};
use mocsm::gp::{self, FitReport, MogpModel, OptimizerConfig};
use mocsm::harness::{self, mae};
use mocsm::init;
use mocsm::kernels::{KernelDocument, KernelFamily, MogpKernelParams};
use mocsm::{Error, Result};

#[derive(Parser)]
#[command(name = "mocsm", about = "Multi-output GP benchmarks with convolution spectral mixture kernels", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the 3-channel synthetic dataset (signal, integral, derivative)
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Spectral components of the generating SM kernel
        #[arg(long, default_value_t = 2)]
        q: usize,
        /// Points per channel
        #[arg(long, default_value_t = 300)]
        n: usize,
        /// Input interval as LO:HI
        #[arg(long, default_value = "-20:20", value_parser = parse_interval, allow_hyphen_values = true)]
        interval: (f64, f64),
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Initialize kernel parameters from the empirical spectral density
    Init {
        /// Training CSV (channel,x1,y)
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        q: usize,
        /// Kernel family (SM, MOCSM, MOSM, CSM, SM_LMC, SE_LMC, MATERN_LMC)
        #[arg(long)]
        family: KernelFamily,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output parameter JSON path
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize hyperparameters by maximum marginal likelihood
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Initial parameter JSON (from `init` or handwritten)
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Output fit-report JSON path
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior predictions at query points
    Predict {
        /// Parameter JSON: a fit report or a plain parameter document
        #[arg(long)]
        model: PathBuf,
        /// Training CSV the posterior conditions on
        #[arg(long)]
        data: PathBuf,
        /// Query CSV (channel,x1,...)
        #[arg(long)]
        points: PathBuf,
        /// Output CSV (channel,x1,...,mean,variance)
        #[arg(long)]
        out: PathBuf,
        /// Add the channel noise variance to predictive variances
        #[arg(long)]
        include_noise: bool,
    },
    /// Split a dataset, condition on the train half, report test MAE
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Split applied to every channel: first, last, all, random[:seed]
        #[arg(long, default_value = "random")]
        scheme: String,
    },
    /// Fit several kernel families on one dataset and tabulate test MAE
    Compare {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated families
        #[arg(long, value_delimiter = ',')]
        families: Vec<KernelFamily>,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        config: ConfigArg,
        /// Output report JSON path; a .csv twin is written alongside
        #[arg(long)]
        out: PathBuf,
    },
    /// Export cross-covariance curves over a τ grid
    Crosscov {
        #[arg(long)]
        params: PathBuf,
        /// Comma-separated channel pairs, e.g. 1-2,3-4
        #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
        pairs: Vec<(usize, usize)>,
        /// τ grid as LO:HI:COUNT
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        grid: (f64, f64, usize),
        /// Also export MOSM curves with the same components
        #[arg(long)]
        with_mosm: bool,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// JSON config with optimizer and split settings
    #[arg(long)]
    config: Option<PathBuf>,
}

/// On-disk run configuration.
#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default)]
    optimizer: Option<OptimizerConfig>,
    /// Split scheme applied to every channel (compare/evaluate)
    #[serde(default)]
    split: Option<String>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            None => Ok(RunConfig::default()),
            Some(path) => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
        }
    }
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.parse().map_err(|_| "bad interval start")?;
    let hi: f64 = hi.parse().map_err(|_| "bad interval end")?;
    Ok((lo, hi))
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (i, j) = s.split_once('-').ok_or("expected I-J")?;
    Ok((
        i.parse().map_err(|_| "bad channel index")?,
        j.parse().map_err(|_| "bad channel index")?,
    ))
}

fn parse_grid(s: &str) -> std::result::Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected LO:HI:COUNT".into());
    }
    let lo: f64 = parts[0].parse().map_err(|_| "bad grid start")?;
    let hi: f64 = parts[1].parse().map_err(|_| "bad grid end")?;
    let n: usize = parts[2].parse().map_err(|_| "bad grid count")?;
    if n == 0 {
        return Err("grid count must be positive".into());
    }
    Ok((lo, hi, n))
}

/// Accept either a fit report (uses its final parameters) or a plain
/// parameter document.
fn load_params(path: &PathBuf) -> Result<(MogpKernelParams<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let doc = match FitReport::from_json(&text) {
        Ok(report) => report.final_params,
        Err(_) => KernelDocument::from_json(&text)?,
    };
    doc.into_params()
}

fn load_points(path: &PathBuf, p: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut points = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != p + 1 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, got {}", p + 1, record.len()),
            });
        }
        let ch: usize = record[0].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("bad channel '{}'", &record[0]),
        })?;
        let x: Vec<f64> = (0..p)
            .map(|k| {
                record[k + 1].parse::<f64>().map_err(|_| Error::MalformedRow {
                    line,
                    reason: format!("non-numeric x{} '{}'", k + 1, &record[k + 1]),
                })
            })
            .collect::<Result<_>>()?;
        points.push((ch, x));
    }
    if points.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(points)
}

fn schemes_for(dataset: &MultiChannelDataset, scheme: &str) -> Result<Vec<SplitScheme>> {
    let parsed: SplitScheme = scheme.parse()?;
    Ok(vec![parsed; dataset.m()])
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            seed,
            q,
            n,
            interval,
            out,
        } => {
            let ds = data::generate_synthetic(seed, q, n, interval)?;
            data::save_csv(&ds, &out)?;
            println!(
                "wrote {} points across {} channels to {}",
                ds.n_total(),
                ds.m(),
                out.display()
            );
        }
        Command::Init {
            data,
            q,
            family,
            seed,
            out,
        } => {
            let ds = data::load_csv(&data, 1)?;
            let params = init::init_params(&ds, q, family, seed)?;
            let noise = init::init_noise(&ds);
            fs::write(&out, KernelDocument::new(&params, &noise).to_json()?)?;
            println!("wrote {family} initialization to {}", out.display());
        }
        Command::Fit {
            data,
            params,
            config,
            out,
        } => {
            let ds = data::load_csv(&data, 1)?;
            let (kernel, noise) = load_params(&params)?;
            let cfg = config.load()?.optimizer.unwrap_or_default();
            let model = MogpModel::new(kernel, noise, ds)?;
            let report = gp::fit(&model, &cfg)?;
            let final_nlml = report.nlml_trace.last().copied().unwrap_or(f64::NAN);
            fs::write(&out, report.to_json()?)?;
            println!(
                "fit {} in {} iterations (converged: {}), final NLML {final_nlml:.6}; report at {}",
                model.kernel.family,
                report.iterations,
                report.converged,
                out.display()
            );
        }
        Command::Predict {
            model,
            data,
            points,
            out,
            include_noise,
        } => {
            let ds = data::load_csv(&data, 1)?;
            let (kernel, noise) = load_params(&model)?;
            let p = kernel.p;
            let query = load_points(&points, p)?;
            let model = MogpModel::new(kernel, noise, ds)?;
            let post = gp::predict(&model, &query, include_noise)?;
            data::save_predictions(&query, &post.mean, &post.variance, p, &out)?;
            println!("wrote {} predictions to {}", query.len(), out.display());
        }
        Command::Evaluate {
            model,
            data,
            scheme,
        } => {
            let ds = data::load_csv(&data, 1)?;
            let (kernel, noise) = load_params(&model)?;
            let schemes = schemes_for(&ds, &scheme)?;
            let (train, test) = data::split(&ds, &schemes)?;
            let model = MogpModel::new(kernel, noise, train)?;
            let mut per_channel = serde_json::Map::new();
            let mut all_true = Vec::new();
            let mut all_pred = Vec::new();
            for ch in &test.channels {
                if ch.y.is_empty() {
                    continue;
                }
                let points: Vec<(usize, Vec<f64>)> =
                    ch.x.iter().map(|x| (ch.channel_id, x.clone())).collect();
                let post = gp::predict(&model, &points, false)?;
                per_channel.insert(
                    ch.channel_id.to_string(),
                    serde_json::json!(mae(&ch.y, &post.mean)?),
                );
                all_true.extend_from_slice(&ch.y);
                all_pred.extend(post.mean);
            }
            if all_true.is_empty() {
                return Err(Error::InvalidParams(
                    "split left no test points to evaluate".into(),
                ));
            }
            let summary = serde_json::json!({
                "scheme": scheme,
                "mae_per_channel": per_channel,
                "mae_overall": mae(&all_true, &all_pred)?,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Compare {
            data,
            families,
            q,
            seed,
            config,
            out,
        } => {
            let ds = data::load_csv(&data, 1)?;
            let cfg = config.load()?;
            let optimizer = cfg.optimizer.unwrap_or_default();
            let scheme = cfg.split.as_deref().unwrap_or("random");
            let schemes = schemes_for(&ds, scheme)?;
            let report = harness::compare(&ds, &schemes, &families, q, &optimizer, seed)?;
            fs::write(&out, report.to_json()?)?;
            let csv_out = out.with_extension("csv");
            fs::write(&csv_out, report.to_csv())?;
            println!(
                "wrote comparison of {} families to {} and {}",
                report.rows.len(),
                out.display(),
                csv_out.display()
            );
        }
        Command::Crosscov {
            params,
            pairs,
            grid,
            with_mosm,
            out,
        } => {
            let (kernel, _) = load_params(&params)?;
            let (lo, hi, n) = grid;
            let taus: Vec<f64> = if n == 1 {
                vec![lo]
            } else {
                (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect()
            };
            let csv = harness::export_cross_covariance(&kernel, &pairs, &taus, with_mosm)?;
            fs::write(&out, csv)?;
            println!(
                "wrote {} curves over {} grid points to {}",
                pairs.len() * if with_mosm { 2 } else { 1 },
                n,
                out.display()
            );
        }
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NotPositiveDefinite { .. }
        | Error::NonFiniteEvaluation { .. }
        | Error::AllRestartsFailed
        | Error::DegenerateInput(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
