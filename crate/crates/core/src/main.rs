use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use acsa::llm::ResponseCache;
use acsa::metrics::{self, ScoreCell};
use acsa::runner::{self, Experiment, RunConfig, RunError, ScoredRun};
use acsa::stats::{self, AnovaError};
use acsa::umr::{has_sentence_markers, parse_document, parse_graph, serialize_graph};

#[derive(Parser)]
#[command(name = "acsa", version, about = "Zero-shot ACSA experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Command-line overrides for values in a run config.
#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    replay_dir: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one (dataset, method, model) configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score a results file against gold labels.
    Score {
        #[arg(long)]
        config: PathBuf,
        /// Results file; defaults to the config's output.
        #[arg(long)]
        results: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Write the scored run as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Include per-sample counts in the printed report.
        #[arg(long)]
        per_sample: bool,
    },
    /// Aggregate scores into method-by-model tables.
    Report {
        /// `method,model,dataset,score` CSV with percent scores.
        #[arg(long, conflicts_with = "scores")]
        csv: Option<PathBuf>,
        /// Scored-run JSON files written by `score --json`.
        #[arg(long, num_args = 1..)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also run the three-way ANOVA over the cells.
        #[arg(long)]
        anova: bool,
    },
    /// Three-way ANOVA over a `method,model,dataset,score` CSV.
    Anova {
        csv: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Parse a UMR graph or document and print it canonically.
    ParseUmr {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Fill the response cache for a run without scoring anything.
    WarmCache {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn data_error(path: &Path, message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {message}", path.display()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| data_error(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| data_error(path, e))
}

fn load_config(path: &Path, o: Overrides) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(path)?;
    let cwd = Path::new(".");
    let abs = |p: PathBuf| if p.is_relative() { cwd.join(p) } else { p };
    if let Some(v) = o.model {
        cfg.model = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if o.limit.is_some() {
        cfg.limit = o.limit;
    }
    if let Some(v) = o.concurrency {
        cfg.concurrency = v;
    }
    if let Some(v) = o.output {
        cfg.output = abs(v);
    }
    if let Some(v) = o.cache_dir {
        cfg.cache_dir = abs(v);
    }
    if let Some(v) = o.replay_dir {
        cfg.replay_dir = Some(abs(v));
    }
    if o.base_url.is_some() {
        cfg.base_url = o.base_url;
    }
    Ok(cfg)
}

fn anova_failure(e: AnovaError) -> Failure {
    match e {
        AnovaError::ZeroResidual(table) => Failure {
            code: 2,
            message: format!("{}\n{table}", AnovaError::ZeroResidual(table.clone())),
        },
        e => Failure {
            code: 2,
            message: e.to_string(),
        },
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, overrides } => {
            let cfg = load_config(&config, overrides)?;
            let output = cfg.output.clone();
            let manifest = runner::run(cfg)?;
            let c = &manifest.counts;
            println!(
                "{} samples -> {} ({} cache hits, {} format failures, {} transport errors)",
                c.samples,
                output.display(),
                c.cache_hits,
                c.format_failures,
                c.transport_errors
            );
        }
        Command::Score {
            config,
            results,
            overrides,
            json,
            per_sample,
        } => {
            let cfg = load_config(&config, overrides)?;
            let split = runner::load_split(&cfg)?;
            let path = results.unwrap_or_else(|| cfg.output.clone());
            let report = runner::score_run(&path, &split)?;
            println!(
                "{} {} {}: P {:.4} R {:.4} micro-F1 {:.4} (tp {} fp {} fn {}; {} format failures, {} missing)",
                cfg.dataset.as_str(),
                cfg.method.as_str(),
                cfg.model,
                report.precision,
                report.recall,
                report.micro_f1,
                report.tp,
                report.fp,
                report.fn_,
                report.n_format_failures,
                report.n_missing
            );
            if per_sample {
                for s in &report.per_sample {
                    println!("{}\t{}\t{}\t{}", s.id, s.tp, s.fp, s.fn_);
                }
            }
            if let Some(out) = json {
                let scored = ScoredRun {
                    dataset: cfg.dataset,
                    method: cfg.method,
                    model: cfg.model,
                    report,
                };
                write_json(&out, &scored)?;
            }
        }
        Command::Report {
            csv,
            scores,
            json,
            anova,
        } => {
            let cells: Vec<ScoreCell> = match csv {
                Some(path) => {
                    runner::cells_from_csv(&read(&path)?).map_err(|m| data_error(&path, m))?
                }
                None if scores.is_empty() => {
                    return Err(Failure {
                        code: 1,
                        message: "report needs --csv or --scores".into(),
                    })
                }
                None => {
                    let mut runs = Vec::new();
                    for path in &scores {
                        let run: ScoredRun =
                            serde_json::from_str(&read(path)?).map_err(|e| data_error(path, e))?;
                        runs.push(run);
                    }
                    runner::score_cells(&runs)
                }
            };
            let table = metrics::aggregate(&cells);
            println!("{}", table.render_cells());
            println!("{}", table.render_means());
            let anova_table = if anova {
                let t = runner::design_from_cells(&cells)
                    .and_then(|d| stats::anova(&d))
                    .map_err(anova_failure)?;
                println!("{t}");
                Some(t)
            } else {
                None
            };
            if let Some(out) = json {
                let value = serde_json::json!({ "table": table, "anova": anova_table });
                write_json(&out, &value)?;
            }
        }
        Command::Anova { csv, json } => {
            let design = stats::design_from_csv(&read(&csv)?).map_err(|e| data_error(&csv, e))?;
            let table = stats::anova(&design).map_err(anova_failure)?;
            println!("{table}");
            if let Some(out) = json {
                write_json(&out, &table)?;
            }
        }
        Command::ParseUmr { file, json } => {
            let text = read(&file)?;
            let id = file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            if has_sentence_markers(&text) {
                let doc = parse_document(&id, &text).map_err(|e| data_error(&file, e))?;
                if json {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&doc).expect("serializable")
                    );
                } else {
                    println!("{}", acsa::umr::format_exemplars(&doc));
                }
            } else {
                let graph = parse_graph(&text).map_err(|e| data_error(&file, e))?;
                if json {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&graph).expect("serializable")
                    );
                } else {
                    println!("{}", serialize_graph(&graph));
                }
            }
        }
        Command::WarmCache { config, overrides } => {
            let cfg = load_config(&config, overrides)?;
            let experiment = Experiment::prepare(cfg)?;
            let requests = experiment.requests()?;
            let client = experiment.client()?;
            let summary = client.warm_cache(&requests);
            println!(
                "{} requests: {} cached, {} fetched, {} failed ({})",
                requests.len(),
                summary.hits,
                summary.fetched,
                summary.failed,
                ResponseCache::new(&experiment.config.cache_dir)
                    .dir()
                    .display()
            );
            let total = requests.len();
            if total > 0
                && summary.failed as f64 / total as f64 > runner::MAX_TRANSPORT_FAILURE_RATE
            {
                return Err(RunError::ExcessiveTransportFailures {
                    failed: summary.failed,
                    total,
                }
                .into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
