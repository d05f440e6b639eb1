use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use cat_core::growth::{growth, slopes};
use cat_core::perturb::{
    read_manifest, read_questions, read_responses, responses_to_records, write_perturbation,
};
use cat_core::plot::{car_chart, growth_chart};
use cat_core::record::write_records;
use cat_core::report::{write_curves_csv, write_metrics_csv};
use cat_core::synthetic::CHANCE_NAME;
use cat_core::{
    chance_baseline, ingest_run, metric_report_with, simulate_run, validate_run, BiasedModelSpec,
    ChanceBaselineSpec, EvaluationRun, MetricKind, MetricReport, ReportBundle, ThresholdGrid,
    TieRule,
};

/// Input problems detected by the CLI itself (exit code 1).
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser, Debug)]
#[command(
    name = "cat",
    version,
    about = "Consistency-accuracy metrics for multiple-choice evaluation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Lowest consistency threshold.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub grid_min: f64,
    /// Highest consistency threshold.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub grid_max: f64,
    /// Threshold spacing; must divide the grid span.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub grid_step: f64,
    /// Master seed for anything random.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

impl CommonArgs {
    fn grid(&self) -> Result<ThresholdGrid> {
        Ok(ThresholdGrid::uniform(
            self.grid_min,
            self.grid_max,
            self.grid_step,
        )?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Record files (JSON Lines); the model name is the file stem.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Abort on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Benchmark name attached to every run.
    #[arg(long, default_value = "unknown")]
    pub benchmark: String,
    /// Majority-vote tie handling: split or strict.
    #[arg(long, default_value = "split")]
    pub mv_ties: TieRule,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate record files and print counts.
    IngestCheck {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Metric table (one row per run) as CSV.
    Metrics {
        #[command(flatten)]
        input: InputArgs,
        /// Append an MCA column for every grid threshold.
        #[arg(long)]
        full: bool,
        /// CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// CAR curve plot (SVG) plus the plotted points as CSV.
    Car {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out_svg: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        /// Draw an averaged chance baseline for this many options.
        #[arg(long)]
        chance_k: Option<usize>,
        #[arg(long, default_value_t = 100)]
        chance_reps: usize,
        #[arg(long, default_value = "CAR curves")]
        title: String,
    },
    /// Metric growth across runs sorted by mean score, with chance-to-best slopes.
    Growth {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated metrics: mcqa, mcqa+, mv, mca@<c>, aucar, norm-dtw, core.
        #[arg(long, default_value = "mcqa+,mv,mca@1.0,core")]
        metrics: String,
        /// Model name of the chance run used for slopes.
        #[arg(long, default_value = CHANCE_NAME)]
        chance_name: String,
        /// Skip slope computation.
        #[arg(long)]
        no_slopes: bool,
        #[arg(long)]
        out_svg: PathBuf,
        /// Write the report bundle as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value = "Metric growth")]
        title: String,
    },
    /// Simulate a biased responder and write a record file.
    Simulate {
        #[arg(long)]
        k: usize,
        /// Probability of answering correctly (at least 1/k).
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Averaged chance-model metrics over repeated simulations.
    ChanceBaseline {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write reordered prompts and a manifest for a question file.
    Perturb {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Parse collected responses against a manifest into a record file.
    ParseResponses {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let common = cli.common;
    match cli.command {
        Command::IngestCheck { input } => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for path in &input.inputs {
                let ingested = ingest_run(path, input.strict)
                    .with_context(|| format!("reading {}", path.display()))?;
                #[derive(Serialize)]
                struct Check {
                    file: String,
                    #[serde(flatten)]
                    summary: cat_core::ValidationSummary,
                    skipped_lines: Vec<usize>,
                    prediction_warnings: Vec<usize>,
                    uniform_m: bool,
                }
                let check = Check {
                    file: path.display().to_string(),
                    summary: validate_run(&ingested.run),
                    skipped_lines: ingested.report.skipped.iter().map(|s| s.line).collect(),
                    prediction_warnings: ingested
                        .report
                        .prediction_warnings
                        .iter()
                        .map(|s| s.line)
                        .collect(),
                    uniform_m: ingested.run.uniform_m(),
                };
                for issue in &ingested.report.skipped {
                    eprintln!(
                        "{}:{}: skipped: {}",
                        path.display(),
                        issue.line,
                        issue.message
                    );
                }
                for issue in &ingested.report.prediction_warnings {
                    eprintln!(
                        "{}:{}: warning: {}",
                        path.display(),
                        issue.line,
                        issue.message
                    );
                }
                writeln!(out, "{}", serde_json::to_string(&check)?)?;
            }
            Ok(())
        }
        Command::Metrics {
            input,
            full,
            out,
            json,
        } => {
            let grid = common.grid()?;
            let reports = load_reports(&input, &grid)?;
            match out {
                Some(path) => {
                    let file = create(&path)?;
                    write_metrics_csv(&reports, full, file)?;
                }
                None => write_metrics_csv(&reports, full, io::stdout().lock())?,
            }
            if let Some(path) = json {
                write_json(&path, &ReportBundle::new(reports))?;
            }
            Ok(())
        }
        Command::Car {
            input,
            out_svg,
            out_csv,
            chance_k,
            chance_reps,
            title,
        } => {
            let grid = common.grid()?;
            let bundle = ReportBundle::new(load_reports(&input, &grid)?);
            let chance = match chance_k {
                Some(k) => {
                    let spec = ChanceBaselineSpec {
                        repetitions: chance_reps,
                        ..ChanceBaselineSpec::standard(k, common.seed)
                    };
                    Some(chance_baseline(&spec, &grid)?.curve)
                }
                None => None,
            };
            let mut curves = bundle.curves.clone();
            write_file(
                &out_svg,
                car_chart(&title, &curves, chance.as_ref())
                    .to_svg()
                    .as_bytes(),
            )?;
            if let Some(c) = chance {
                curves.push(cat_core::NamedCurve {
                    name: CHANCE_NAME.into(),
                    benchmark: format!("synthetic-k{}", chance_k.unwrap_or_default()),
                    curve: c,
                });
            }
            write_curves_csv(&curves, create(&out_csv)?)?;
            Ok(())
        }
        Command::Growth {
            input,
            metrics,
            chance_name,
            no_slopes,
            out_svg,
            json,
            title,
        } => {
            let grid = common.grid()?;
            let kinds = metrics
                .split(',')
                .map(str::parse::<MetricKind>)
                .collect::<Result<Vec<_>, _>>()?;
            let reports = load_reports(&input, &grid)?;
            if reports.len() < 2 {
                let msg = format!("growth needs at least 2 runs, got {}", reports.len());
                return Err(InputError(msg).into());
            }
            let g = growth(&reports, &kinds)?;
            let s = if no_slopes {
                Vec::new()
            } else {
                slopes(&g, &chance_name)?
            };
            write_file(&out_svg, growth_chart(&title, &g, &s).to_svg().as_bytes())?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            writeln!(out, "order: {}", g.models.join(", "))?;
            for (metric, slope) in &s {
                writeln!(out, "slope {metric}: {slope:.4}")?;
            }
            if let Some(path) = json {
                let bundle = ReportBundle::new(reports)
                    .with_growth(&kinds, (!no_slopes).then_some(chance_name.as_str()))?;
                write_json(&path, &bundle)?;
            }
            Ok(())
        }
        Command::Simulate { k, p, n, m, out } => {
            let spec = BiasedModelSpec {
                option_count: k,
                p_correct: p,
                questions: n,
                variants: m,
                seed: common.seed,
            };
            let run = simulate_run(&spec)?;
            let mut buf = Vec::new();
            write_records(run.records(), &mut buf)?;
            write_file(&out, &buf)?;
            Ok(())
        }
        Command::ChanceBaseline {
            k,
            n,
            m,
            reps,
            json,
        } => {
            let grid = common.grid()?;
            let spec = ChanceBaselineSpec {
                option_count: k,
                questions: n,
                variants: m,
                repetitions: reps,
                seed: common.seed,
            };
            let report = chance_baseline(&spec, &grid)?;
            write_metrics_csv(std::slice::from_ref(&report), true, io::stdout().lock())?;
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
            Ok(())
        }
        Command::Perturb {
            questions,
            m,
            out_dir,
        } => {
            let file = open(&questions)?;
            let qs = read_questions(BufReader::new(file))
                .with_context(|| format!("reading {}", questions.display()))?;
            let entries = write_perturbation(&qs, m, common.seed, &out_dir)?;
            eprintln!(
                "wrote {} prompts for {} questions to {}",
                entries.len(),
                qs.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::ParseResponses {
            manifest,
            responses,
            out,
        } => {
            let entries = read_manifest(BufReader::new(open(&manifest)?))
                .with_context(|| format!("reading {}", manifest.display()))?;
            let replies = read_responses(BufReader::new(open(&responses)?))
                .with_context(|| format!("reading {}", responses.display()))?;
            let (records, stats) = responses_to_records(&entries, &replies)?;
            let mut buf = Vec::new();
            write_records(&records, &mut buf)?;
            write_file(&out, &buf)?;
            eprintln!("{}", serde_json::to_string(&stats)?);
            Ok(())
        }
    }
}

fn load_reports(input: &InputArgs, grid: &ThresholdGrid) -> Result<Vec<MetricReport>> {
    input
        .inputs
        .par_iter()
        .map(|path| {
            let mut run: EvaluationRun = ingest_run(path, input.strict)
                .with_context(|| format!("reading {}", path.display()))?
                .run;
            run.benchmark_name = input.benchmark.clone();
            Ok(metric_report_with(&run, grid, input.mv_ties)?)
        })
        .collect()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        let err = cat_core::CatError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        anyhow::Error::new(err)
    })
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create(path)?
        .write_all(bytes)
        .with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_file(path, text.as_bytes())
}
