//! Experiment harness: configuration, subcommands, model files and reports.

mod config;
mod model_file;
mod suite;

pub use config::{
    parse_config, parse_config_str, EnsembleBlock, ExperimentConfig, SimulationBlock, Study,
};
pub use model_file::{
    load_model, model_from_str, model_to_string, save_model, ModelFile, MODEL_FORMAT_VERSION,
};
pub use suite::{
    config_hash, read_raw_reports, run_suite, write_raw_reports, write_summary, SuiteOutcome,
    RAW_HEADER, TABLE_HEADER,
};

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::Method;
use crate::datagen::{
    format_float, gen_multivariate_dataset, gen_scalar_to_matrix_dataset, read_dataset,
    write_dataset, GpSimConfig, PairedDataset, SimConfig,
};
use crate::error::{input, Result};
use crate::eval::{
    aggregate_trials, fit_method, identify_group_experiment, EvalSettings, MethodRunner,
};
use crate::rng;

#[derive(Debug, Parser)]
#[command(
    name = "ctes",
    version,
    about = "Characteristic-to-expression synthesis experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimStudy {
    Multivariate,
    ScalarToMatrix,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated dataset as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "multivariate")]
        study: SimStudy,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one method on a CSV dataset and save the model.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Method,
        /// Leave this group out of training.
        #[arg(long)]
        exclude_group: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate expressions from a saved model.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// CSV whose characteristics condition the synthesis, one row each.
        #[arg(long, conflicts_with = "x")]
        data: Option<PathBuf>,
        /// Comma-separated characteristic vector.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        /// Rows to generate for `--x`.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one group-identification experiment and print its report.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; simulated from the configuration when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        group: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full benchmark grid and write report CSVs and a manifest.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a raw report CSV into mean and standard deviation rows.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn read_csv(path: &Path) -> Result<PairedDataset> {
    read_dataset(File::open(path)?)
}

fn write_synthesized(path: &Path, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let m = xs.first().map(Vec::len).unwrap_or(0);
    let n = ys.first().map(Vec::len).unwrap_or(0);
    let header: Vec<String> = (1..=m)
        .map(|j| format!("x{j}"))
        .chain((1..=n).map(|j| format!("y{j}")))
        .collect();
    w.write_record(&header)?;
    for (x, y) in xs.iter().zip(ys) {
        w.write_record(x.iter().chain(y).map(|&v| format_float(v)))?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, study: SimStudy, sigma: f64) -> Result<PairedDataset> {
    match study {
        SimStudy::Multivariate => gen_multivariate_dataset(&SimConfig {
            sigma,
            samples_per_group: cfg.simulation.samples_per_group,
            groups: cfg.simulation.group_count,
            noise_std: cfg.simulation.noise_std,
            noise_mode: cfg.simulation.noise_mode,
            seed: cfg.seed,
        }),
        SimStudy::ScalarToMatrix => gen_scalar_to_matrix_dataset(&GpSimConfig {
            seed: cfg.seed,
            ..cfg.gp.clone()
        }),
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    execute(cli.command)
}

pub fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Simulate {
            common,
            study,
            sigma,
            out,
        } => {
            let cfg = load_config(&common)?;
            let ds = simulate(&cfg, study, sigma)?;
            write_dataset(&ds, File::create(&out)?)?;
            println!("wrote {} rows to {}", ds.len(), out.display());
        }
        Command::Train {
            common,
            data,
            method,
            exclude_group,
            out,
        } => {
            let cfg = load_config(&common)?;
            let mut ds = read_csv(&data)?;
            if let Some(g) = exclude_group {
                ds = ds.without_group(g);
            }
            let settings = cfg.method_settings();
            let model = fit_method(method, &settings, &ds, cfg.seed)?;
            save_model(
                &ModelFile::new(method.name(), cfg.seed, settings, model),
                &out,
            )?;
            println!("saved {method} model to {}", out.display());
        }
        Command::Synth {
            common,
            model,
            data,
            x,
            count,
            out,
        } => {
            let seed = common.seed.unwrap_or(0);
            let file = load_model(&model)?;
            let xs: Vec<Vec<f64>> = match (data, x) {
                (Some(p), _) => read_csv(&p)?.characteristics,
                (None, Some(text)) => {
                    let x = text
                        .split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|_| input(format!("`{v}` is not a number")))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    vec![x; count]
                }
                (None, None) => return Err(input("synth needs --data or --x")),
            };
            let mut r = rng::seeded(seed);
            let ys = file.model.synthesize_for(&xs, &mut r)?;
            write_synthesized(&out, &xs, &ys)?;
            println!("wrote {} expressions to {}", ys.len(), out.display());
        }
        Command::Validate {
            common,
            data,
            sigma,
            method,
            group,
            out,
        } => {
            let cfg = load_config(&common)?;
            let ds = match data {
                Some(p) => read_csv(&p)?,
                None => simulate(
                    &cfg,
                    match cfg.study {
                        Study::ScalarToMatrix => SimStudy::ScalarToMatrix,
                        _ => SimStudy::Multivariate,
                    },
                    sigma,
                )?,
            };
            let runner = MethodRunner {
                method,
                settings: cfg.method_settings(),
            };
            let eval = EvalSettings {
                classifier: cfg.validation_classifier(),
                replicates: cfg.replicates,
                subsample_replicates: cfg.subsample_replicates,
                risk_forest: cfg.forest.clone(),
            };
            let mut report = identify_group_experiment(&ds, group, &runner, &eval, cfg.seed)?;
            if data_is_simulated(&ds, &cfg) {
                report.sigma = Some(sigma);
            }
            let text = serde_json::to_string_pretty(&report).map_err(|e| input(e.to_string()))?;
            println!("{text}");
            if let Some(path) = out {
                std::fs::write(path, text)?;
            }
        }
        Command::Bench {
            common,
            workers,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(o) = out {
                cfg.out = o;
            }
            let workers = workers.unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(usize::from)
                    .unwrap_or(1)
            });
            let outcome = run_suite(&cfg, workers)?;
            for p in &outcome.outputs {
                println!("wrote {}", p.display());
            }
            if outcome.failed_jobs > 0 {
                eprintln!("{} job(s) failed; see manifest.json", outcome.failed_jobs);
                return Ok(1);
            }
        }
        Command::Report { input: path, out } => {
            let reports = read_raw_reports(&path)?;
            let rows = aggregate_trials(&reports)?;
            std::fs::create_dir_all(&out)?;
            let target = out.join("table.csv");
            write_summary(&target, "method", &rows)?;
            println!("wrote {}", target.display());
        }
    }
    Ok(0)
}

fn data_is_simulated(ds: &PairedDataset, cfg: &ExperimentConfig) -> bool {
    cfg.study == Study::Multivariate && ds.image_shape.is_none()
}
