//! End-to-end stages: perturbing the corpus, building tasks, querying a
//! model and scoring. Every stage writes its outputs atomically.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_corpus, Corpus, CorpusError};
use crate::grade::grade;
use crate::lang::{print_unit, Expr, SourceUnit, StmtKind, UnaryOp};
use crate::metrics::{aggregate_report, render_markdown, EvalReport, GradedResult};
use crate::modelio::{build_prompt, parse_answer, query, ModelEndpoint, ParsedAnswer, RateLimiter};
use crate::perturb::{perturb, PerturbKind};
use crate::runtime::{check_specs, execute, TestCase, DEFAULT_STEP_LIMIT};
use crate::taskgen::{
    build_all_tasks, perturbation_seed, AnswerKey, Category, GenStats, ProgramInput, TaskGenConfig,
    TaskInstance, TaskType, MAX_RETRIES,
};
use crate::write_atomic;

pub const TASKS_FILE: &str = "tasks.jsonl";
/// Answer keys live apart from the tasks; nothing on the prompt path reads
/// this directory.
pub const KEYS_DIR: &str = "keys";
pub const KEYS_FILE: &str = "answer_keys.jsonl";
pub const GEN_STATS_FILE: &str = "gen_stats.json";
pub const GRADED_FILE: &str = "graded.jsonl";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const RUN_CONFIG_FILE: &str = "run.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

fn default_corpus() -> PathBuf {
    PathBuf::from("corpus")
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_shots() -> usize {
    2
}
fn default_categories() -> Vec<Category> {
    Category::ALL.to_vec()
}
fn default_types() -> Vec<TaskType> {
    TaskType::ALL.to_vec()
}
fn default_endpoint() -> ModelEndpoint {
    ModelEndpoint::Oracle
}
fn default_concurrency() -> usize {
    4
}
fn default_retries() -> u32 {
    MAX_RETRIES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_corpus")]
    pub corpus: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_categories")]
    pub categories: Vec<Category>,
    #[serde(default = "default_types")]
    pub task_types: Vec<TaskType>,
    #[serde(default = "default_endpoint")]
    pub endpoint: ModelEndpoint,
    /// Queries in flight at once.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Requests per second; 0 disables rate limiting.
    #[serde(default)]
    pub rate_per_sec: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Directory name under `runs/`; derived from the endpoint when absent.
    #[serde(default)]
    pub run_id: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: default_corpus(),
            output: default_output(),
            seed: 0,
            shots: default_shots(),
            categories: default_categories(),
            task_types: default_types(),
            endpoint: default_endpoint(),
            concurrency: default_concurrency(),
            rate_per_sec: 0.0,
            max_retries: default_retries(),
            run_id: None,
        }
    }
}

impl RunConfig {
    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| {
            let name: String = self
                .endpoint
                .name()
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
            format!("{name}-k{}", self.shots)
        })
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.join("runs").join(self.run_id())
    }

    fn taskgen(&self) -> TaskGenConfig {
        TaskGenConfig {
            master_seed: self.seed,
            max_retries: self.max_retries,
            categories: self.categories.clone(),
            task_types: self.task_types.clone(),
            ..TaskGenConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("perturbation changed behavior:\n{}", .0.join("\n"))]
    Preservation(Vec<String>),
    #[error("no graded results for: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("answer key missing for task {0}")]
    MissingKey(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    write_atomic(path, bytes).map_err(io_err(path))
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|t| serde_json::to_string(t).expect("serializable") + "\n")
        .collect()
}

/// Read a JSON-lines file. A torn final line, left by an interrupted
/// append, is skipped with a warning.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(l) {
            Ok(v) => out.push(v),
            Err(e) if i + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("{}: ignoring torn last line: {e}", path.display());
            }
            Err(source) => {
                return Err(PipelineError::Json {
                    path: path.to_path_buf(),
                    line: i + 1,
                    source,
                })
            }
        }
    }
    Ok(out)
}

fn tests_for(pu_method: impl Fn(&str) -> String, tests: &[TestCase]) -> Vec<TestCase> {
    tests
        .iter()
        .map(|t| TestCase {
            method: pu_method(&t.method),
            ..t.clone()
        })
        .collect()
}

/// Deliberately break a unit: negate the first `if` condition without
/// swapping its branches. Exercises the preservation check.
pub fn inject_fault(unit: &mut SourceUnit) -> bool {
    fn go(stmts: &mut [crate::lang::Stmt]) -> bool {
        for s in stmts {
            if let StmtKind::If { cond, .. } = &mut s.kind {
                let c = std::mem::replace(cond, Expr::BoolLit(true));
                *cond = Expr::Unary(UnaryOp::Not, Box::new(c));
                return true;
            }
            for b in s.blocks_mut() {
                if go(b) {
                    return true;
                }
            }
        }
        false
    }
    unit.methods.iter_mut().any(|m| go(&mut m.body))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbSummary {
    pub written: usize,
    /// `kind/program` pairs the perturbation does not apply to, with reasons.
    pub skipped: Vec<String>,
}

/// Write every perturbation of every corpus program under
/// `output/variants/<kind>/`, with one rename map per kind. Each variant is
/// checked by differential execution against the original and by runtime
/// checking of its migrated specifications.
pub fn perturb_corpus(config: &RunConfig, fault: bool) -> Result<PerturbSummary, PipelineError> {
    let corpus = load_corpus(&config.corpus)?;
    perturb_entries(&corpus, config, fault)
}

fn perturb_entries(
    corpus: &Corpus,
    config: &RunConfig,
    fault: bool,
) -> Result<PerturbSummary, PipelineError> {
    let mut summary = PerturbSummary::default();
    let mut failures = Vec::new();
    for kind in PerturbKind::ALL {
        let dir = config.output.join("variants").join(kind.slug());
        let mut maps: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for e in &corpus.entries {
            let mut pu = match perturb(&e.unit, kind, perturbation_seed(config.seed, &e.id, kind)) {
                Ok(pu) => pu,
                Err(err) => {
                    summary.skipped.push(format!("{kind}/{}: {err}", e.id));
                    continue;
                }
            };
            if fault {
                inject_fault(&mut pu.unit);
            }
            let tests = tests_for(|m| pu.method_name(m), &e.tests);
            for (a, b) in e.tests.iter().zip(&tests) {
                let before = execute(&e.unit, a, DEFAULT_STEP_LIMIT).outcome();
                let after = execute(&pu.unit, b, DEFAULT_STEP_LIMIT).outcome();
                if before != after {
                    failures.push(format!(
                        "{kind}/{}: {a} gives {before:?} before and {after:?} after",
                        e.id
                    ));
                }
            }
            for v in check_specs(&pu.unit, &tests) {
                if !v.correct {
                    failures.push(format!(
                        "{kind}/{}: migrated `{}` is refuted",
                        e.id,
                        crate::lang::print_clause(&v.clause)
                    ));
                }
            }
            write_file(
                &dir.join(format!("{}.sj", e.id)),
                print_unit(&pu.unit).as_bytes(),
            )?;
            maps.insert(e.id.clone(), pu.rename_map.clone());
            summary.written += 1;
        }
        let text = serde_json::to_string_pretty(&maps).expect("maps serialize") + "\n";
        write_file(&dir.join("rename_map.json"), text.as_bytes())?;
    }
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(PipelineError::Preservation(failures))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRecord {
    pub task_id: String,
    pub key: AnswerKey,
}

/// Build all tasks and write `tasks.jsonl` (no keys), the keys file and
/// generation statistics.
pub fn gen_tasks(config: &RunConfig) -> Result<(Vec<TaskInstance>, GenStats), PipelineError> {
    let corpus = load_corpus(&config.corpus)?;
    let inputs: Vec<ProgramInput> = corpus
        .entries
        .iter()
        .map(|e| ProgramInput {
            id: &e.id,
            unit: &e.unit,
            tests: &e.tests,
        })
        .collect();
    let (tasks, stats) = build_all_tasks(&inputs, &config.taskgen());
    for s in &stats.skipped {
        log::info!("skipped: {s}");
    }
    let public: Vec<TaskInstance> = tasks.iter().map(TaskInstance::public).collect();
    let keys: Vec<KeyRecord> = tasks
        .iter()
        .filter_map(|t| {
            Some(KeyRecord {
                task_id: t.task_id.clone(),
                key: t.answer_key.clone()?,
            })
        })
        .collect();
    write_file(
        &config.output.join(TASKS_FILE),
        to_jsonl(&public).as_bytes(),
    )?;
    write_file(
        &config.output.join(KEYS_DIR).join(KEYS_FILE),
        to_jsonl(&keys).as_bytes(),
    )?;
    let stats_text = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    write_file(&config.output.join(GEN_STATS_FILE), stats_text.as_bytes())?;
    Ok((tasks, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub task_id: String,
    pub endpoint: String,
    pub started_ms: u128,
    pub finished_ms: u128,
    pub messages: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub parsed: ParsedAnswer,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub dispatched: usize,
    pub resumed: usize,
    pub errors: usize,
}

/// Cut a torn final line left by an interrupted append.
fn trim_torn_tail(path: &Path) -> Result<(), PipelineError> {
    let Ok(bytes) = fs::read(path) else {
        return Ok(());
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    log::warn!("{}: dropping a torn last line", path.display());
    let f = OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(io_err(path))?;
    f.set_len(keep as u64).map_err(io_err(path))
}

struct Appender {
    file: Mutex<fs::File>,
    path: PathBuf,
}

impl Appender {
    fn open(path: PathBuf) -> Result<Self, PipelineError> {
        trim_torn_tail(&path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(Appender {
            file: Mutex::new(file),
            path,
        })
    }

    fn append<T: Serialize>(&self, item: &T) -> Result<(), PipelineError> {
        let line = serde_json::to_string(item).expect("serializable") + "\n";
        let mut f = self.file.lock().expect("appender lock");
        f.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        f.flush().map_err(io_err(&self.path))
    }
}

/// Query the endpoint for every task without a graded result yet, grading
/// as answers arrive. Endpoint failures grade the task as a failure; they
/// never abort the run.
pub fn run(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    let tasks: Vec<TaskInstance> = read_jsonl(&config.output.join(TASKS_FILE))?;
    let keys: BTreeMap<String, AnswerKey> =
        read_jsonl::<KeyRecord>(&config.output.join(KEYS_DIR).join(KEYS_FILE))?
            .into_iter()
            .map(|k| (k.task_id, k.key))
            .collect();
    let dir = config.run_dir();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let cfg_text = serde_json::to_string_pretty(config).expect("config serializes") + "\n";
    write_file(&dir.join(RUN_CONFIG_FILE), cfg_text.as_bytes())?;

    let graded_path = dir.join(GRADED_FILE);
    let done: BTreeSet<String> = if graded_path.exists() {
        read_jsonl::<GradedResult>(&graded_path)?
            .into_iter()
            .map(|g| g.task_id)
            .collect()
    } else {
        BTreeSet::new()
    };
    let todo: Vec<&TaskInstance> = tasks
        .iter()
        .filter(|t| {
            config.categories.contains(&t.category) && config.task_types.contains(&t.task_type)
        })
        .filter(|t| !done.contains(&t.task_id))
        .collect();
    for t in &todo {
        if !keys.contains_key(&t.task_id) {
            return Err(PipelineError::MissingKey(t.task_id.clone()));
        }
    }
    let graded = Appender::open(graded_path)?;
    let transcript = Appender::open(dir.join(TRANSCRIPT_FILE))?;
    let limiter = RateLimiter::new(config.rate_per_sec, config.concurrency.max(1) as u32);
    let model = config.endpoint.name();
    let next = AtomicUsize::new(0);
    let errors = AtomicUsize::new(0);
    let failure: Mutex<Option<PipelineError>> = Mutex::new(None);

    std::thread::scope(|s| {
        for _ in 0..config.concurrency.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = todo.get(i) else { break };
                let key = &keys[&task.task_id];
                // Prompts are built from the public task only.
                let prompt = build_prompt(&task.public(), config.shots);
                limiter.acquire();
                let started_ms = now_ms();
                let oracle_key = config.endpoint.needs_key().then_some(key);
                let reply = query(&config.endpoint, &prompt, oracle_key);
                let finished_ms = now_ms();
                let parsed = match &reply {
                    Ok(text) => parse_answer(task.task_type, text),
                    Err(e) => {
                        errors.fetch_add(1, Ordering::SeqCst);
                        log::warn!("{}: {e}", task.task_id);
                        ParsedAnswer::Unparseable(String::new())
                    }
                };
                let mut result = grade(task, key, &model, &parsed);
                if let Err(e) = &reply {
                    result.note = Some(format!("endpoint error: {e}"));
                }
                let entry = TranscriptEntry {
                    task_id: task.task_id.clone(),
                    endpoint: config.endpoint.to_string(),
                    started_ms,
                    finished_ms,
                    messages: prompt
                        .messages()
                        .into_iter()
                        .map(|(r, c)| (r.to_string(), c.to_string()))
                        .collect(),
                    response: reply.as_ref().ok().cloned(),
                    error: reply.as_ref().err().map(|e| e.to_string()),
                    parsed,
                };
                let written = transcript
                    .append(&entry)
                    .and_then(|_| graded.append(&result));
                if let Err(e) = written {
                    failure.lock().expect("failure lock").get_or_insert(e);
                    break;
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }
    Ok(RunSummary {
        run_dir: dir,
        dispatched: todo.len(),
        resumed: done.len(),
        errors: errors.into_inner(),
    })
}

/// Aggregate a run directory into `report.json` and `report.md`. Cells the
/// run was configured for but has no results for make this fail after the
/// report is written.
pub fn score(run_dir: &Path) -> Result<EvalReport, PipelineError> {
    let mut graded: Vec<GradedResult> = read_jsonl(&run_dir.join(GRADED_FILE))?;
    graded.sort_by(|a, b| (&a.model, &a.task_id).cmp(&(&b.model, &b.task_id)));
    graded.dedup_by(|a, b| a.model == b.model && a.task_id == b.task_id);
    let cfg_path = run_dir.join(RUN_CONFIG_FILE);
    let expected: Vec<(Category, TaskType)> = match fs::read_to_string(&cfg_path) {
        Ok(text) => {
            let cfg: RunConfig =
                serde_json::from_str(&text).map_err(|source| PipelineError::Json {
                    path: cfg_path.clone(),
                    line: 1,
                    source,
                })?;
            cfg.categories
                .iter()
                .flat_map(|c| cfg.task_types.iter().map(move |t| (*c, *t)))
                .collect()
        }
        Err(_) => Vec::new(),
    };
    let report = aggregate_report(&graded, &expected);
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(&run_dir.join(REPORT_JSON), json.as_bytes())?;
    write_file(
        &run_dir.join(REPORT_MD),
        render_markdown(&report).as_bytes(),
    )?;
    if report.missing.is_empty() {
        Ok(report)
    } else {
        Err(PipelineError::MissingCells(report.missing.clone()))
    }
}
