use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use speceval::corpus::{
    build_manifest, read_manifest, scan_corpus, verify_manifest, write_manifest, CorpusError,
};
use speceval::modelio::ModelEndpoint;
use speceval::pipeline::{self, PipelineError, RunConfig};
use speceval::taskgen::{Category, TaskType};

const EXIT_VALIDATION: u8 = 2;
const EXIT_PRESERVATION: u8 = 3;
const EXIT_MISSING_CELLS: u8 = 4;

#[derive(Parser)]
#[command(
    name = "speceval",
    version,
    about = "Specification-based code comprehension benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Run configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Master seed for every corpus-side random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of worked examples per prompt.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(0..=2))]
    shots: Option<u8>,
    /// Comma-separated category slugs.
    #[arg(long, global = true, value_delimiter = ',')]
    categories: Option<Vec<Category>>,
    /// Comma-separated task types.
    #[arg(long = "types", global = true, value_delimiter = ',')]
    task_types: Option<Vec<TaskType>>,
    /// `oracle`, `fixed:<answer>`, `random:<seed>` or `<base-url>#<model>`.
    #[arg(long, global = true)]
    endpoint: Option<ModelEndpoint>,
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    #[arg(long, global = true)]
    run_id: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check every program against its tests and print corpus statistics.
    Validate {
        #[command(flatten)]
        o: Overrides,
        /// Record the validated corpus in its manifest.
        #[arg(long)]
        write_manifest: bool,
    },
    /// Write all perturbed variants and check they preserve behavior.
    Perturb {
        #[command(flatten)]
        o: Overrides,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Build tasks and answer keys.
    GenTasks {
        #[command(flatten)]
        o: Overrides,
    },
    /// Query the endpoint for every pending task and grade the answers.
    Run {
        #[command(flatten)]
        o: Overrides,
    },
    /// Aggregate a run into report.json and report.md.
    Score {
        #[command(flatten)]
        o: Overrides,
        /// Run directory; defaults to the one the configuration names.
        run_dir: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: serde_json::Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        let t: toml::Value =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        serde_json::to_value(t)?
    };
    // Allow the short endpoint syntax in configuration files too.
    if let Some(short) = value.get("endpoint").and_then(|e| e.as_str()) {
        let ep: ModelEndpoint = short.parse().map_err(anyhow::Error::msg)?;
        value["endpoint"] = serde_json::to_value(ep)?;
    }
    let mut config: RunConfig = serde_json::from_value(value)
        .with_context(|| format!("invalid configuration {}", path.display()))?;
    // Relative paths are relative to the configuration file.
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut config.corpus, &mut config.output] {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(config)
}

fn resolve(o: &Overrides) -> Result<RunConfig> {
    let mut c = match &o.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &o.corpus {
        c.corpus = v.clone();
    }
    if let Some(v) = &o.output {
        c.output = v.clone();
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.shots {
        c.shots = usize::from(v);
    }
    if let Some(v) = &o.categories {
        c.categories = v.clone();
    }
    if let Some(v) = &o.task_types {
        c.task_types = v.clone();
    }
    if let Some(v) = &o.endpoint {
        c.endpoint = v.clone();
    }
    if let Some(v) = o.concurrency {
        c.concurrency = v;
    }
    if let Some(v) = &o.run_id {
        c.run_id = Some(v.clone());
    }
    if c.shots > 2 {
        bail!("shots must be 0, 1 or 2");
    }
    Ok(c)
}

fn validate(config: &RunConfig, write: bool) -> Result<ExitCode> {
    let entries = match scan_corpus(&config.corpus) {
        Ok(e) => e,
        Err(CorpusError::Validation(failures)) => {
            for f in &failures {
                eprintln!("invalid: {f}");
            }
            eprintln!("{} of the corpus entries failed validation", failures.len());
            return Ok(ExitCode::from(EXIT_VALIDATION));
        }
        Err(e) => return Err(e.into()),
    };
    let manifest = build_manifest(&entries);
    println!(
        "{:<24} {:>4} {:>3} {:>7} {:>5} {:>6} {:>6}  structure",
        "program", "loc", "cc", "clauses", "tests", "line%", "branch%"
    );
    for e in &manifest.entries {
        let s = &e.stats;
        println!(
            "{:<24} {:>4} {:>3} {:>7} {:>5} {:>6.1} {:>6.1}  {}",
            e.id,
            s.loc,
            s.cyclomatic,
            s.clauses,
            s.tests,
            s.line_coverage * 100.0,
            s.branch_coverage * 100.0,
            s.structure
        );
    }
    let a = &manifest.aggregate;
    println!(
        "{} programs, avg loc {:.1}, avg cc {:.2}, avg tests {:.1}, avg branch coverage {:.2}%",
        a.programs,
        a.avg_loc,
        a.avg_cyclomatic,
        a.avg_tests,
        a.avg_branch_coverage * 100.0
    );
    if write {
        write_manifest(&config.corpus, &manifest)?;
        println!("manifest written");
        return Ok(ExitCode::SUCCESS);
    }
    match read_manifest(&config.corpus) {
        Ok(stored) => {
            if let Err(e) = verify_manifest(&stored, &entries) {
                eprintln!("{e}");
                eprintln!("rerun with --write-manifest to accept the current files");
                return Ok(ExitCode::from(EXIT_VALIDATION));
            }
        }
        Err(CorpusError::Missing(p)) => {
            log::warn!(
                "{} not found; rerun with --write-manifest to create it",
                p.display()
            )
        }
        Err(e) => return Err(e.into()),
    }
    Ok(ExitCode::SUCCESS)
}

fn exec(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Validate { o, write_manifest } => validate(&resolve(&o)?, write_manifest),
        Command::Perturb { o, inject_fault } => {
            match pipeline::perturb_corpus(&resolve(&o)?, inject_fault) {
                Ok(s) => {
                    for skip in &s.skipped {
                        log::info!("skipped {skip}");
                    }
                    println!(
                        "{} variants written, {} skipped",
                        s.written,
                        s.skipped.len()
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e @ PipelineError::Preservation(_)) => {
                    eprintln!("{e}");
                    Ok(ExitCode::from(EXIT_PRESERVATION))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::GenTasks { o } => {
            let c = resolve(&o)?;
            let (tasks, stats) = pipeline::gen_tasks(&c)?;
            println!(
                "{} tasks written to {}, {} skipped, unrefutable mutant rate {:.2}%",
                tasks.len(),
                c.output.join(pipeline::TASKS_FILE).display(),
                stats.skipped.len(),
                stats.unrefutable_rate() * 100.0
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { o } => {
            let s = pipeline::run(&resolve(&o)?)?;
            println!(
                "{} tasks dispatched ({} already graded, {} endpoint errors); results in {}",
                s.dispatched,
                s.resumed,
                s.errors,
                s.run_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Score { o, run_dir } => {
            let dir = match run_dir {
                Some(d) => d,
                None => resolve(&o)?.run_dir(),
            };
            match pipeline::score(&dir) {
                Ok(_) => {
                    println!(
                        "{}",
                        std::fs::read_to_string(dir.join(pipeline::REPORT_MD))?
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e @ PipelineError::MissingCells(_)) => {
                    eprintln!("{e}");
                    Ok(ExitCode::from(EXIT_MISSING_CELLS))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match exec(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
