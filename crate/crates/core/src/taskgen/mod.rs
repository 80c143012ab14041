//! Construction of judgement, selection, infilling and generation tasks,
//! on original programs and on their perturbed twins.

pub mod mask;
pub mod mutate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use mask::{apply_mask, fill_mask, mask_sites, mask_spec, MaskClass, MaskSite, NoMaskableNode};
pub use mutate::{components, mutate_spec, raw_mutant, Component, MutationContext, MutationError};

use crate::lang::*;
use crate::perturb::{perturb, PerturbKind, PerturbedUnit};
use crate::runtime::{TestCase, Trace, DEFAULT_STEP_LIMIT};
use crate::seed::derive_seed;

pub const MAX_RETRIES: u32 = 8;
pub const LABELS: [&str; 4] = ["A", "B", "C", "D"];
/// Marker line placed where the specification of a selection task goes.
pub const SPEC_MARKER: &str = "//@ <SPEC>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Judgement,
    Selection,
    Infilling,
    Generation,
}

impl TaskType {
    pub const ALL: [TaskType; 4] = [
        TaskType::Judgement,
        TaskType::Selection,
        TaskType::Infilling,
        TaskType::Generation,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            TaskType::Judgement => "judgement",
            TaskType::Selection => "selection",
            TaskType::Infilling => "infilling",
            TaskType::Generation => "generation",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for TaskType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskType::ALL
            .into_iter()
            .find(|t| t.slug() == s)
            .ok_or_else(|| format!("unknown task type `{s}`"))
    }
}

/// The program version a task is posed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "original")]
    Original,
    #[serde(rename = "defuse_break")]
    DefUseBreak,
    #[serde(rename = "ifelse_flip")]
    IfElseFlip,
    #[serde(rename = "independent_swap")]
    IndependentSwap,
    #[serde(rename = "name_random")]
    NameRandom,
    #[serde(rename = "name_shuffle")]
    NameShuffle,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Original,
        Category::DefUseBreak,
        Category::IfElseFlip,
        Category::IndependentSwap,
        Category::NameRandom,
        Category::NameShuffle,
    ];

    pub fn perturbation(self) -> Option<PerturbKind> {
        match self {
            Category::Original => None,
            Category::DefUseBreak => Some(PerturbKind::DefUseBreak),
            Category::IfElseFlip => Some(PerturbKind::IfElseFlip),
            Category::IndependentSwap => Some(PerturbKind::IndependentSwap),
            Category::NameRandom => Some(PerturbKind::NameRandom),
            Category::NameShuffle => Some(PerturbKind::NameShuffle),
        }
    }

    pub fn of(kind: PerturbKind) -> Category {
        match kind {
            PerturbKind::DefUseBreak => Category::DefUseBreak,
            PerturbKind::IfElseFlip => Category::IfElseFlip,
            PerturbKind::IndependentSwap => Category::IndependentSwap,
            PerturbKind::NameRandom => Category::NameRandom,
            PerturbKind::NameShuffle => Category::NameShuffle,
        }
    }

    pub fn slug(self) -> &'static str {
        self.perturbation().map_or("original", PerturbKind::slug)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.slug() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledOption {
    pub label: String,
    pub clause: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiredAnchor {
    pub anchor: Anchor,
    pub kind: SpecKind,
}

/// What the model is shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Payload {
    Judgement {
        /// The program with the candidate attached at its anchor.
        program: String,
        anchor: Anchor,
        candidate: String,
    },
    Selection {
        /// The program with a marker line where the answer belongs.
        program: String,
        anchor: Anchor,
        kind: SpecKind,
        options: Vec<LabeledOption>,
    },
    Infilling {
        /// The program with its specifications, one of them masked.
        program: String,
        masked_clause: String,
        line: u32,
    },
    Generation {
        program: String,
        required: Vec<RequiredAnchor>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    GroundTruth,
    Mutant,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Answer {
    Judgement {
        truth: bool,
        candidate: SpecClause,
    },
    Selection {
        label: String,
        kinds: Vec<OptionKind>,
    },
    Infilling {
        hidden: String,
        source: SpecClause,
        masked: SpecClause,
        site: MaskSite,
    },
    Generation {
        ground_truth: Vec<SpecClause>,
        /// The program annotated with its ground truth.
        annotated_program: String,
    },
}

/// Withheld from prompts; used by grading and by the oracle model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub answer: Answer,
    /// The program version of the task annotated with its ground truth.
    pub unit: String,
    /// The suite, with method names as in this program version.
    pub tests: Vec<TestCase>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task_id: String,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub category: Category,
    pub program: String,
    pub seed: u64,
    pub payload: Payload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_key: Option<AnswerKey>,
}

impl TaskInstance {
    pub fn make_id(program: &str, category: Category, task_type: TaskType) -> String {
        format!("{program}/{category}/{task_type}")
    }

    /// A copy without the answer key, as shown to models.
    pub fn public(&self) -> TaskInstance {
        TaskInstance {
            answer_key: None,
            ..self.clone()
        }
    }
}

/// Clauses too weak to be refuted, instantiated for an anchor.
pub fn trivial_pool(kind: SpecKind, anchor: &Anchor, result: Option<TypeTag>) -> Vec<SpecClause> {
    let mk = |e: Expr| SpecClause::new(kind, anchor.clone(), e);
    match kind {
        SpecKind::Requires | SpecKind::LoopInvariant => vec![mk(Expr::BoolLit(true))],
        SpecKind::Ensures => {
            let mut v = vec![mk(Expr::BoolLit(true))];
            if result == Some(TypeTag::Int) {
                v.push(mk(Expr::binary(
                    BinOp::Le,
                    Expr::Result,
                    Expr::IntLit(i32::MAX),
                )));
                v.push(mk(Expr::binary(
                    BinOp::Ge,
                    Expr::Result,
                    Expr::IntLit(i32::MIN),
                )));
            }
            v
        }
    }
}

/// Every (anchor, kind) a generation answer must cover: requires and
/// ensures for each method, an invariant for each loop.
pub fn required_anchors(unit: &SourceUnit) -> Vec<RequiredAnchor> {
    let mut out = Vec::new();
    for m in &unit.methods {
        for kind in [SpecKind::Requires, SpecKind::Ensures] {
            out.push(RequiredAnchor {
                anchor: Anchor::Method(m.name.clone()),
                kind,
            });
        }
        for l in m.loops() {
            out.push(RequiredAnchor {
                anchor: Anchor::Loop(l),
                kind: SpecKind::LoopInvariant,
            });
        }
    }
    out
}

/// Counters reported by task generation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStats {
    pub mutation_attempts: u64,
    pub unrefutable: u64,
    pub tasks: u64,
    /// Tasks or categories that could not be built, with the reason.
    pub skipped: Vec<String>,
}

impl GenStats {
    pub fn merge(&mut self, other: GenStats) {
        self.mutation_attempts += other.mutation_attempts;
        self.unrefutable += other.unrefutable;
        self.tasks += other.tasks;
        self.skipped.extend(other.skipped);
    }

    pub fn unrefutable_rate(&self) -> f64 {
        if self.mutation_attempts == 0 {
            0.0
        } else {
            self.unrefutable as f64 / self.mutation_attempts as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGenConfig {
    pub master_seed: u64,
    pub max_retries: u32,
    pub categories: Vec<Category>,
    pub task_types: Vec<TaskType>,
    /// Chance that a selection task includes a trivial option.
    pub trivial_probability: f64,
}

impl Default for TaskGenConfig {
    fn default() -> Self {
        TaskGenConfig {
            master_seed: 0,
            max_retries: MAX_RETRIES,
            categories: Category::ALL.to_vec(),
            task_types: TaskType::ALL.to_vec(),
            trivial_probability: 0.5,
        }
    }
}

/// A program with its ground truth attached, as the builders consume it.
pub struct ProgramInput<'a> {
    pub id: &'a str,
    pub unit: &'a SourceUnit,
    pub tests: &'a [TestCase],
}

/// A judgement candidate chosen on the original program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgementBase {
    pub candidate: SpecClause,
    pub truth: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionBase {
    pub options: Vec<(SpecClause, OptionKind)>,
    pub answer: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfillingBase {
    pub source: SpecClause,
    pub site: MaskSite,
}

/// Pick a ground-truth clause and keep it with probability 1/2; otherwise
/// replace it by a refuted mutant. Falls back to the correct clause when
/// no mutant can be refuted.
pub fn build_judgement(
    ctx: &MutationContext,
    seed: u64,
    max_retries: u32,
    stats: &mut GenStats,
) -> Option<JudgementBase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt = ctx.ground_truth.choose(&mut rng)?.clone();
    if rng.gen_bool(0.5) {
        return Some(JudgementBase {
            candidate: gt,
            truth: true,
        });
    }
    stats.mutation_attempts += 1;
    match mutate_spec(&gt, ctx, rng.gen(), max_retries, &[]) {
        Ok(m) => Some(JudgementBase {
            candidate: m,
            truth: false,
        }),
        Err(e) => {
            stats.unrefutable += 1;
            warn!("judgement falls back to a correct candidate: {e}");
            Some(JudgementBase {
                candidate: gt,
                truth: true,
            })
        }
    }
}

/// One ground-truth clause, at most one trivial clause, refuted mutants
/// for the rest; shuffled.
pub fn build_selection(
    ctx: &MutationContext,
    seed: u64,
    max_retries: u32,
    trivial_probability: f64,
    stats: &mut GenStats,
) -> Option<SelectionBase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt = ctx.ground_truth.choose(&mut rng)?.clone();
    let result = ctx.table.result_type(&gt.anchor);
    let gt_text = print_clause(&gt);
    let pool: Vec<SpecClause> = trivial_pool(gt.kind, &gt.anchor, result)
        .into_iter()
        .filter(|t| print_clause(t) != gt_text)
        .collect();
    let mut options = vec![(gt.clone(), OptionKind::GroundTruth)];
    if rng.gen_bool(trivial_probability) {
        if let Some(t) = pool.choose(&mut rng) {
            options.push((t.clone(), OptionKind::Trivial));
        }
    }
    let mut tries = 0;
    while options.len() < LABELS.len() {
        if tries >= 3 * LABELS.len() {
            stats.skipped.push(format!(
                "selection for `{gt_text}`: too few refuted mutants"
            ));
            return None;
        }
        tries += 1;
        stats.mutation_attempts += 1;
        let avoid: Vec<SpecClause> = options.iter().map(|(c, _)| c.clone()).collect();
        match mutate_spec(&gt, ctx, rng.gen(), max_retries, &avoid) {
            Ok(m) => options.push((m, OptionKind::Mutant)),
            Err(e) => {
                stats.unrefutable += 1;
                debug!("selection mutant failed: {e}");
                let has_trivial = options.iter().any(|(_, k)| *k == OptionKind::Trivial);
                if !has_trivial {
                    if let Some(t) = pool.choose(&mut rng) {
                        options.push((t.clone(), OptionKind::Trivial));
                    }
                }
            }
        }
    }
    options.shuffle(&mut rng);
    let answer = options
        .iter()
        .position(|(_, k)| *k == OptionKind::GroundTruth)
        .expect("ground truth present");
    Some(SelectionBase { options, answer })
}

/// Mask one node of a seed-chosen maskable ground-truth clause.
pub fn build_infilling(ground_truth: &[SpecClause], seed: u64) -> Option<InfillingBase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let maskable: Vec<&SpecClause> = ground_truth
        .iter()
        .filter(|c| !mask_sites(&c.expr).is_empty())
        .collect();
    let source = (*maskable.choose(&mut rng)?).clone();
    let (_, _, site) = mask_spec(&source, rng.gen()).ok()?;
    Some(InfillingBase { source, site })
}

/// A program version: the original or a perturbed twin, with a way to
/// carry clauses of the original over.
struct Version<'a> {
    category: Category,
    unit: SourceUnit,
    tests: Vec<TestCase>,
    twin: Option<&'a PerturbedUnit>,
    trace: Trace,
}

impl Version<'_> {
    fn migrate(&self, c: &SpecClause) -> SpecClause {
        self.twin.map_or_else(|| c.clone(), |p| p.migrate_clause(c))
    }

    fn key(&self, answer: Answer) -> AnswerKey {
        AnswerKey {
            answer,
            unit: print_unit(&self.unit),
            tests: self.tests.clone(),
        }
    }
}

fn task_seed(config: &TaskGenConfig, program: &str, t: TaskType) -> u64 {
    derive_seed(config.master_seed, &[program, t.slug()])
}

pub fn perturbation_seed(master: u64, program: &str, kind: PerturbKind) -> u64 {
    derive_seed(master, &[program, "perturb", kind.slug()])
}

/// Build every configured task for one program. Tasks are chosen once on
/// the original program and carried over to each perturbed twin, so twins
/// pose the same question.
pub fn build_program_tasks(
    input: &ProgramInput,
    config: &TaskGenConfig,
) -> (Vec<TaskInstance>, GenStats) {
    let mut stats = GenStats::default();
    let table = match check_unit(input.unit) {
        Ok(t) => t,
        Err(e) => {
            stats.skipped.push(format!("{}: {e}", input.id));
            return (Vec::new(), stats);
        }
    };
    let gt = input.unit.specs.clone();
    if gt.is_empty() {
        stats.skipped.push(format!("{}: no ground truth", input.id));
        return (Vec::new(), stats);
    }
    let trace = Trace::record(input.unit, input.tests, DEFAULT_STEP_LIMIT);
    let ctx = MutationContext {
        table: &table,
        trace: &trace,
        ground_truth: &gt,
    };
    let wants = |t: TaskType| config.task_types.contains(&t);
    let judgement = if wants(TaskType::Judgement) {
        build_judgement(
            &ctx,
            task_seed(config, input.id, TaskType::Judgement),
            config.max_retries,
            &mut stats,
        )
    } else {
        None
    };
    let selection = if wants(TaskType::Selection) {
        build_selection(
            &ctx,
            task_seed(config, input.id, TaskType::Selection),
            config.max_retries,
            config.trivial_probability,
            &mut stats,
        )
    } else {
        None
    };
    let infilling = if wants(TaskType::Infilling) {
        build_infilling(&gt, task_seed(config, input.id, TaskType::Infilling))
    } else {
        None
    };
    if wants(TaskType::Infilling) && infilling.is_none() {
        stats
            .skipped
            .push(format!("{}/infilling: no maskable clause", input.id));
    }

    let mut twins: Vec<(Category, PerturbedUnit)> = Vec::new();
    for &cat in &config.categories {
        if let Some(kind) = cat.perturbation() {
            match perturb(
                input.unit,
                kind,
                perturbation_seed(config.master_seed, input.id, kind),
            ) {
                Ok(p) => twins.push((cat, p)),
                Err(e) => stats.skipped.push(format!("{}/{cat}: {e}", input.id)),
            }
        }
    }
    let mut versions: Vec<Version> = Vec::new();
    if config.categories.contains(&Category::Original) {
        versions.push(Version {
            category: Category::Original,
            unit: input.unit.clone(),
            tests: input.tests.to_vec(),
            twin: None,
            trace: Trace::record(input.unit, input.tests, DEFAULT_STEP_LIMIT),
        });
    }
    for (cat, p) in &twins {
        let tests: Vec<TestCase> = input
            .tests
            .iter()
            .map(|t| TestCase {
                method: p.method_name(&t.method),
                ..t.clone()
            })
            .collect();
        if let Err(e) = check_unit(&p.unit) {
            stats.skipped.push(format!("{}/{cat}: {e}", input.id));
            continue;
        }
        versions.push(Version {
            category: *cat,
            trace: Trace::record(&p.unit, &tests, DEFAULT_STEP_LIMIT),
            unit: p.unit.clone(),
            tests,
            twin: Some(p),
        });
    }

    let mut tasks = Vec::new();
    for v in &versions {
        let mut push = |t: TaskType, payload: Payload, answer: Answer| {
            tasks.push(TaskInstance {
                task_id: TaskInstance::make_id(input.id, v.category, t),
                task_type: t,
                category: v.category,
                program: input.id.to_string(),
                seed: task_seed(config, input.id, t),
                payload,
                answer_key: Some(v.key(answer)),
            });
        };
        let id = format!("{}/{}", input.id, v.category);
        if let Some(j) = &judgement {
            let cand = v.migrate(&j.candidate);
            if !j.truth && v.trace.holds(&cand, &v.unit.specs) {
                stats
                    .skipped
                    .push(format!("{id}/judgement: carried-over mutant not refuted"));
            } else {
                let program = print_unit(&strip_specs(&v.unit).with_specs(vec![cand.clone()]));
                push(
                    TaskType::Judgement,
                    Payload::Judgement {
                        program,
                        anchor: cand.anchor.clone(),
                        candidate: print_clause(&cand),
                    },
                    Answer::Judgement {
                        truth: j.truth,
                        candidate: cand,
                    },
                );
            }
        }
        if let Some(s) = &selection {
            let opts: Vec<(SpecClause, OptionKind)> =
                s.options.iter().map(|(c, k)| (v.migrate(c), *k)).collect();
            let broken = opts
                .iter()
                .any(|(c, k)| *k == OptionKind::Mutant && v.trace.holds(c, &v.unit.specs));
            if broken {
                stats
                    .skipped
                    .push(format!("{id}/selection: carried-over mutant not refuted"));
            } else {
                let gt = &opts[s.answer].0;
                let program =
                    print_unit_with_marker(&strip_specs(&v.unit), &gt.anchor, SPEC_MARKER);
                push(
                    TaskType::Selection,
                    Payload::Selection {
                        program,
                        anchor: gt.anchor.clone(),
                        kind: gt.kind,
                        options: opts
                            .iter()
                            .zip(LABELS)
                            .map(|((c, _), l)| LabeledOption {
                                label: l.to_string(),
                                clause: print_clause(c),
                            })
                            .collect(),
                    },
                    Answer::Selection {
                        label: LABELS[s.answer].to_string(),
                        kinds: opts.iter().map(|(_, k)| *k).collect(),
                    },
                );
            }
        }
        if let Some(inf) = &infilling {
            let source = v.migrate(&inf.source);
            match apply_mask(&source, &inf.site) {
                Some((masked, hidden)) => {
                    let specs: Vec<SpecClause> = v
                        .unit
                        .specs
                        .iter()
                        .map(|c| {
                            if *c == source {
                                masked.clone()
                            } else {
                                c.clone()
                            }
                        })
                        .collect();
                    let program = print_unit(&v.unit.with_specs(specs));
                    let line = program
                        .lines()
                        .position(|l| l.contains(MASK))
                        .map_or(0, |i| i as u32 + 1);
                    push(
                        TaskType::Infilling,
                        Payload::Infilling {
                            program,
                            masked_clause: print_clause(&masked),
                            line,
                        },
                        Answer::Infilling {
                            hidden,
                            source,
                            masked,
                            site: inf.site.clone(),
                        },
                    );
                }
                None => stats
                    .skipped
                    .push(format!("{id}/infilling: mask does not carry over")),
            }
        }
        if wants(TaskType::Generation) {
            push(
                TaskType::Generation,
                Payload::Generation {
                    program: print_unit(&strip_specs(&v.unit)),
                    required: required_anchors(&v.unit),
                },
                Answer::Generation {
                    ground_truth: v.unit.specs.clone(),
                    annotated_program: print_unit(&v.unit),
                },
            );
        }
    }
    stats.tasks = tasks.len() as u64;
    (tasks, stats)
}

/// Per-program inputs for a whole corpus, in a fixed order.
pub fn build_all_tasks(
    programs: &[ProgramInput],
    config: &TaskGenConfig,
) -> (Vec<TaskInstance>, GenStats) {
    use rayon::prelude::*;
    let parts: Vec<(Vec<TaskInstance>, GenStats)> = programs
        .par_iter()
        .map(|p| build_program_tasks(p, config))
        .collect();
    let mut all = Vec::new();
    let mut stats = GenStats::default();
    for (t, s) in parts {
        all.extend(t);
        stats.merge(s);
    }
    all.sort_by(|a, b| {
        (&a.program, a.category, a.task_type).cmp(&(&b.program, b.category, b.task_type))
    });
    (all, stats)
}

/// Re-key tasks by id for lookups.
pub fn index_tasks(tasks: &[TaskInstance]) -> BTreeMap<String, &TaskInstance> {
    tasks.iter().map(|t| (t.task_id.clone(), t)).collect()
}
