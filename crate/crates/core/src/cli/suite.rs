use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Study};
use crate::baselines::Method;
use crate::ctes::{synthesize_for, train_ctes, TrainConfig};
use crate::datagen::{
    gen_multivariate_dataset, gen_scalar_to_matrix_dataset, read_dataset, GpSimConfig,
    PairedDataset, SimConfig,
};
use crate::error::{config, input, Error, Result};
use crate::eval::{
    aggregate_trials, identify_group_experiment, mean_and_sample_std, risk_difference_eval,
    EvalSettings, MethodRunner, RiskEvalReport, SummaryRow, Synthesizer, ValidationReport,
};
use crate::rng::{self, derive_seed};

/// Single-model trainer with an explicit weight, used by the sweep.
struct WeightSweepRunner {
    beta: f64,
    train: TrainConfig,
}

impl Synthesizer for WeightSweepRunner {
    fn name(&self) -> String {
        format!("{}", self.beta)
    }

    fn fit_synthesize(
        &self,
        train: &PairedDataset,
        xs: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        let cfg = TrainConfig {
            beta: self.beta,
            seed: derive_seed(seed, &["fit"]),
            ..self.train.clone()
        };
        let model = train_ctes(train, &cfg)?;
        let mut r = rng::seeded(derive_seed(seed, &["synthesize"]));
        synthesize_for(&model, xs, &mut r, cfg.jitter)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum JobKind {
    Identify(Method),
    WeightSweep(f64),
    Risk(Method),
}

#[derive(Debug, Clone)]
struct Job {
    kind: JobKind,
    sigma: Option<f64>,
    dataset: usize,
    group: usize,
    trial: usize,
    seed: u64,
}

enum JobResult {
    Validation(ValidationReport),
    Risk(RiskEvalReport),
}

#[derive(Debug, Serialize)]
struct JobRecord {
    kind: &'static str,
    method: String,
    sigma: Option<f64>,
    group: usize,
    trial: usize,
    seed: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    wall_seconds: f64,
}

#[derive(Debug, Serialize)]
struct DatasetRecord {
    sigma: Option<f64>,
    trial: Option<usize>,
    seed: Option<u64>,
    rows: usize,
}

#[derive(Debug, Serialize)]
struct Manifest {
    config_hash: String,
    master_seed: u64,
    study: &'static str,
    workers: usize,
    datasets: Vec<DatasetRecord>,
    jobs: Vec<JobRecord>,
    failed_jobs: usize,
    outputs: Vec<String>,
    total_wall_seconds: f64,
}

/// What a suite run produced.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub validation: Vec<ValidationReport>,
    pub summary: Vec<SummaryRow>,
    pub weight_sweep: Vec<SummaryRow>,
    pub risk: Vec<RiskEvalReport>,
    pub failed_jobs: usize,
    pub outputs: Vec<PathBuf>,
}

/// Hex SHA-256 of the configuration with the output directory cleared.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.out = PathBuf::new();
    let text = serde_json::to_string(&canonical).expect("config serializes");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn sigma_tag(sigma: Option<f64>) -> String {
    sigma.map(|s| s.to_string()).unwrap_or_else(|| "-".into())
}

struct DatasetPlan {
    sigma: Option<f64>,
    trial: Option<usize>,
    seed: Option<u64>,
}

fn dataset_plans(cfg: &ExperimentConfig) -> Vec<DatasetPlan> {
    let trials: Vec<Option<usize>> = if cfg.redraw_per_trial && cfg.study != Study::TabularRisk {
        (0..cfg.trials).map(Some).collect()
    } else {
        vec![None]
    };
    let sigmas: Vec<Option<f64>> = match cfg.study {
        Study::Multivariate => cfg.sigmas.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let mut plans = Vec::new();
    for &sigma in &sigmas {
        for &trial in &trials {
            let trial_tag = trial
                .map(|t| t.to_string())
                .unwrap_or_else(|| "shared".into());
            let seed = (cfg.study != Study::TabularRisk)
                .then(|| derive_seed(cfg.seed, &["dataset", &sigma_tag(sigma), &trial_tag]));
            plans.push(DatasetPlan { sigma, trial, seed });
        }
    }
    plans
}

fn build_dataset(cfg: &ExperimentConfig, plan: &DatasetPlan) -> Result<PairedDataset> {
    match cfg.study {
        Study::Multivariate => gen_multivariate_dataset(&SimConfig {
            sigma: plan.sigma.expect("multivariate plans carry sigma"),
            samples_per_group: cfg.simulation.samples_per_group,
            groups: cfg.simulation.group_count,
            noise_std: cfg.simulation.noise_std,
            noise_mode: cfg.simulation.noise_mode,
            seed: plan.seed.expect("simulated"),
        }),
        Study::ScalarToMatrix => gen_scalar_to_matrix_dataset(&GpSimConfig {
            seed: plan.seed.expect("simulated"),
            ..cfg.gp.clone()
        }),
        Study::TabularRisk => {
            let path = cfg
                .dataset
                .as_ref()
                .ok_or_else(|| config("dataset: missing CSV path"))?;
            let ds = read_dataset(File::open(path)?)?;
            if ds.outcomes.is_none() {
                return Err(input(format!("{} has no outcome column", path.display())));
            }
            Ok(ds)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|s| s.to_string()).unwrap_or_default()
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub const RAW_HEADER: [&str; 10] = [
    "method", "sigma", "group", "trial", "tp", "fp", "fn", "tn", "A1", "A2",
];
pub const TABLE_HEADER: [&str; 9] = [
    "method",
    "sigma",
    "group",
    "trials",
    "A1",
    "A1_std",
    "A2",
    "A2_std",
    "single_report",
];

pub fn write_raw_reports(path: &Path, reports: &[ValidationReport]) -> Result<()> {
    write_csv(
        path,
        &RAW_HEADER,
        reports.iter().map(|r| {
            vec![
                r.method.clone(),
                fmt_opt(r.sigma),
                r.group.to_string(),
                r.trial.to_string(),
                r.confusion.tp.to_string(),
                r.confusion.fp.to_string(),
                r.confusion.fn_.to_string(),
                r.confusion.tn.to_string(),
                r.a1.to_string(),
                r.a2.to_string(),
            ]
        }),
    )
}

/// Writes aggregated rows; `first_column` names the key column.
pub fn write_summary(path: &Path, first_column: &str, rows: &[SummaryRow]) -> Result<()> {
    let mut header = TABLE_HEADER;
    header[0] = first_column;
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            vec![
                r.method.clone(),
                fmt_opt(r.sigma),
                r.group.to_string(),
                r.trials.to_string(),
                r.a1.to_string(),
                r.a1_std.to_string(),
                r.a2.to_string(),
                r.a2_std.to_string(),
                r.single_report.to_string(),
            ]
        }),
    )
}

/// Reads a file written by [`write_raw_reports`].
pub fn read_raw_reports(path: &Path) -> Result<Vec<ValidationReport>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RAW_HEADER {
        return Err(input(format!(
            "{} is not a raw report file",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| Error::Parse {
            line: line + 2,
            column: 0,
            message: format!("bad `{col}` value"),
        };
        let num = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(RAW_HEADER[i]));
        let real = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(RAW_HEADER[i]));
        out.push(ValidationReport {
            method: rec[0].to_string(),
            sigma: if rec[1].is_empty() {
                None
            } else {
                Some(real(1)?)
            },
            group: num(2)?,
            trial: num(3)?,
            confusion: crate::eval::ConfusionCounts {
                tp: num(4)?,
                fp: num(5)?,
                fn_: num(6)?,
                tn: num(7)?,
            },
            a1: real(8)?,
            a2: real(9)?,
        });
    }
    Ok(out)
}

fn plan_jobs(cfg: &ExperimentConfig, plans: &[DatasetPlan]) -> Vec<Job> {
    let dataset_for = |sigma: Option<f64>, trial: usize| {
        plans
            .iter()
            .position(|p| p.sigma == sigma && (p.trial.is_none() || p.trial == Some(trial)))
            .expect("every (sigma, trial) has a dataset")
    };
    let sigmas: Vec<Option<f64>> = match cfg.study {
        Study::Multivariate => cfg.sigmas.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let mut jobs = Vec::new();
    let mut push = |kind: JobKind, tag: String, sigma: Option<f64>, group: usize, trial: usize| {
        let seed = derive_seed(
            cfg.seed,
            &[
                "job",
                &tag,
                &sigma_tag(sigma),
                &group.to_string(),
                &trial.to_string(),
            ],
        );
        jobs.push(Job {
            kind,
            sigma,
            dataset: dataset_for(sigma, trial),
            group,
            trial,
            seed,
        });
    };
    for &method in &cfg.methods {
        for &sigma in &sigmas {
            for &group in &cfg.groups {
                for trial in 0..cfg.trials {
                    let kind = if cfg.study == Study::TabularRisk {
                        JobKind::Risk(method)
                    } else {
                        JobKind::Identify(method)
                    };
                    push(kind, method.name().into(), sigma, group, trial);
                }
            }
        }
    }
    if cfg.study == Study::Multivariate {
        for &beta in &cfg.beta_grid {
            for &sigma in &sigmas {
                for &group in &cfg.groups {
                    for trial in 0..cfg.trials {
                        push(
                            JobKind::WeightSweep(beta),
                            format!("beta={beta}"),
                            sigma,
                            group,
                            trial,
                        );
                    }
                }
            }
        }
    }
    jobs
}

fn run_job(
    job: &Job,
    cfg: &ExperimentConfig,
    datasets: &[PairedDataset],
    eval: &EvalSettings,
) -> Result<JobResult> {
    let ds = &datasets[job.dataset];
    let settings = cfg.method_settings();
    let tag = |mut r: ValidationReport| {
        r.sigma = job.sigma;
        r.trial = job.trial;
        JobResult::Validation(r)
    };
    match job.kind {
        JobKind::Identify(method) => {
            let runner = MethodRunner { method, settings };
            Ok(tag(identify_group_experiment(
                ds, job.group, &runner, eval, job.seed,
            )?))
        }
        JobKind::WeightSweep(beta) => {
            let runner = WeightSweepRunner {
                beta,
                train: cfg.train.clone(),
            };
            Ok(tag(identify_group_experiment(
                ds, job.group, &runner, eval, job.seed,
            )?))
        }
        JobKind::Risk(method) => {
            let runner = MethodRunner { method, settings };
            Ok(JobResult::Risk(risk_difference_eval(
                ds, job.group, &runner, eval, job.seed,
            )?))
        }
    }
}

fn job_label(kind: &JobKind) -> (&'static str, String) {
    match kind {
        JobKind::Identify(m) => ("identify", m.name().into()),
        JobKind::WeightSweep(b) => ("beta-sweep", format!("ctes(beta={b})")),
        JobKind::Risk(m) => ("risk", m.name().into()),
    }
}

/// Runs the whole (method x sigma x group x trial) grid on `workers`
/// threads and writes the report CSVs plus `manifest.json` into `cfg.out`.
/// Every CSV byte is fixed by the configuration and master seed.
pub fn run_suite(cfg: &ExperimentConfig, workers: usize) -> Result<SuiteOutcome> {
    cfg.validate()?;
    if workers == 0 {
        return Err(config("workers must be at least 1"));
    }
    let started = Instant::now();
    fs::create_dir_all(&cfg.out)?;
    let plans = dataset_plans(cfg);
    let datasets = plans
        .iter()
        .map(|p| build_dataset(cfg, p))
        .collect::<Result<Vec<_>>>()?;
    let eval = EvalSettings {
        classifier: cfg.validation_classifier(),
        replicates: cfg.replicates,
        subsample_replicates: cfg.subsample_replicates,
        risk_forest: cfg.forest.clone(),
    };
    let jobs = plan_jobs(cfg, &plans);
    log::info!("running {} jobs on {workers} workers", jobs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(Result<JobResult>, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let t0 = Instant::now();
                let r = run_job(job, cfg, &datasets, &eval);
                (r, t0.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut validation = Vec::new();
    let mut sweep = Vec::new();
    let mut risk = Vec::new();
    let mut records = Vec::with_capacity(jobs.len());
    let mut failed = 0;
    for (job, (result, wall)) in jobs.iter().zip(results) {
        let (kind, method) = job_label(&job.kind);
        let mut record = JobRecord {
            kind,
            method,
            sigma: job.sigma,
            group: job.group,
            trial: job.trial,
            seed: job.seed,
            status: "ok",
            error: None,
            wall_seconds: wall,
        };
        match result {
            Ok(JobResult::Validation(r)) => match job.kind {
                JobKind::WeightSweep(_) => sweep.push(r),
                _ => validation.push(r),
            },
            Ok(JobResult::Risk(r)) => risk.push((job.trial, r)),
            Err(e) => {
                log::error!(
                    "job {kind} {} group {} trial {} failed: {e}",
                    record.method,
                    job.group,
                    job.trial
                );
                record.status = "failed";
                record.error = Some(e.to_string());
                failed += 1;
            }
        }
        records.push(record);
    }

    let study = cfg.study.name();
    let mut outputs = Vec::new();
    let summary = if validation.is_empty() {
        Vec::new()
    } else {
        aggregate_trials(&validation)?
    };
    let weight_sweep = if sweep.is_empty() {
        Vec::new()
    } else {
        aggregate_trials(&sweep)?
    };
    if cfg.study != Study::TabularRisk {
        let raw = cfg.out.join(format!("raw_{}.csv", study.replace('-', "_")));
        write_raw_reports(&raw, &validation)?;
        let table = cfg
            .out
            .join(format!("table_{}.csv", study.replace('-', "_")));
        write_summary(&table, "method", &summary)?;
        outputs.extend([raw, table]);
    }
    if !cfg.beta_grid.is_empty() && cfg.study == Study::Multivariate {
        let raw = cfg.out.join("raw_beta_sweep.csv");
        write_raw_reports(&raw, &sweep)?;
        let table = cfg.out.join("beta_sweep.csv");
        write_summary(&table, "beta", &weight_sweep)?;
        outputs.extend([raw, table]);
    }
    if cfg.study == Study::TabularRisk {
        let raw = cfg.out.join("raw_risk.csv");
        write_csv(
            &raw,
            &[
                "method",
                "group",
                "trial",
                "participants",
                "mean_abs_diff",
                "std_abs_diff",
            ],
            risk.iter().map(|(t, r)| {
                vec![
                    r.method.clone(),
                    r.group.to_string(),
                    t.to_string(),
                    r.participants.to_string(),
                    r.mean_abs_diff.to_string(),
                    r.std_abs_diff.to_string(),
                ]
            }),
        )?;
        let mut keys: Vec<(String, usize)> = Vec::new();
        for (_, r) in &risk {
            if !keys.contains(&(r.method.clone(), r.group)) {
                keys.push((r.method.clone(), r.group));
            }
        }
        let table = cfg.out.join("table_risk.csv");
        write_csv(
            &table,
            &[
                "method",
                "group",
                "trials",
                "mean_abs_diff",
                "std",
                "single_report",
            ],
            keys.iter().map(|(m, g)| {
                let means: Vec<f64> = risk
                    .iter()
                    .filter(|(_, r)| &r.method == m && r.group == *g)
                    .map(|(_, r)| r.mean_abs_diff)
                    .collect();
                let (mean, std) = mean_and_sample_std(&means);
                vec![
                    m.clone(),
                    g.to_string(),
                    means.len().to_string(),
                    mean.to_string(),
                    std.to_string(),
                    (means.len() == 1).to_string(),
                ]
            }),
        )?;
        outputs.extend([raw, table]);
    }

    let manifest = Manifest {
        config_hash: config_hash(cfg),
        master_seed: cfg.seed,
        study,
        workers,
        datasets: plans
            .iter()
            .zip(&datasets)
            .map(|(p, d)| DatasetRecord {
                sigma: p.sigma,
                trial: p.trial,
                seed: p.seed,
                rows: d.len(),
            })
            .collect(),
        jobs: records,
        failed_jobs: failed,
        outputs: outputs
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        total_wall_seconds: started.elapsed().as_secs_f64(),
    };
    let manifest_path = cfg.out.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).map_err(|e| input(e.to_string()))?,
    )?;
    outputs.push(manifest_path);
    Ok(SuiteOutcome {
        validation,
        summary,
        weight_sweep,
        risk: risk.into_iter().map(|(_, r)| r).collect(),
        failed_jobs: failed,
        outputs,
    })
}
