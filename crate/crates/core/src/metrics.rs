//! Task metrics, counterfactual consistency metrics and report aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::SpecClause;
use crate::runtime::Trace;
use crate::taskgen::{Category, TaskType};

pub const REPORT_SCHEMA: u32 = 1;

/// Reports carry 12 decimal places, enough to absorb binary rounding
/// noise in differences such as 0.7 - 0.5.
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no graded results match the filter")]
    EmptySlice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationScore {
    pub precision: f64,
    pub recall: f64,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedResult {
    pub task_id: String,
    pub model: String,
    pub program: String,
    pub category: Category,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationScore>,
    /// Why the answer failed, when it did for a reason other than being wrong.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Share of results passing `filter` that succeeded.
pub fn accuracy(
    results: &[GradedResult],
    filter: impl Fn(&GradedResult) -> bool,
) -> Result<f64, MetricsError> {
    let (hits, n) = results
        .iter()
        .filter(|r| filter(r))
        .fold((0u64, 0u64), |(h, n), r| (h + u64::from(r.success), n + 1));
    if n == 0 {
        return Err(MetricsError::EmptySlice);
    }
    Ok(hits as f64 / n as f64)
}

/// Precision, recall and all-pass of a generated specification set.
/// `unparsed` counts clauses the model wrote that did not parse; they
/// count as generated clauses that fail.
pub fn generation_scores(
    ground_truth: &[SpecClause],
    generated: &[SpecClause],
    unparsed: usize,
    trace: &Trace,
) -> GenerationScore {
    let total = generated.len() + unparsed;
    if total == 0 {
        log::info!("empty generation scored as precision 0");
        return GenerationScore {
            precision: 0.0,
            recall: 0.0,
            all_pass: false,
        };
    }
    let verdicts = trace.check(generated);
    let passing = verdicts.iter().filter(|v| v.correct).count();
    let recalled = ground_truth
        .iter()
        .filter(|g| {
            generated
                .iter()
                .filter(|s| s.kind == g.kind && s.anchor == g.anchor)
                .any(|s| trace.equivalent(g, s).unwrap_or(false))
        })
        .count();
    GenerationScore {
        precision: passing as f64 / total as f64,
        recall: if ground_truth.is_empty() {
            0.0
        } else {
            recalled as f64 / ground_truth.len() as f64
        },
        all_pass: unparsed == 0 && passing == generated.len(),
    }
}

/// `1 - |P ∩ P'| / |P ∪ P'|`, or 0 when both sets are empty.
pub fn jaccard<T: Ord>(original: &BTreeSet<T>, perturbed: &BTreeSet<T>) -> f64 {
    let union = original.union(perturbed).count();
    if union == 0 {
        return 0.0;
    }
    let inter = original.intersection(perturbed).count();
    (union - inter) as f64 / union as f64
}

/// Mean absolute change over pairs where at least one side is nonzero.
pub fn avg_variance(pairs: &[(f64, f64)]) -> f64 {
    let eligible: Vec<f64> = pairs
        .iter()
        .filter(|(a, b)| *a > 0.0 || *b > 0.0)
        .map(|(a, b)| (b - a).abs())
        .collect();
    if eligible.is_empty() {
        return 0.0;
    }
    tidy(eligible.iter().sum::<f64>() / eligible.len() as f64)
}

/// A ratio with the denominator it was computed over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub value: f64,
    pub n: u64,
}

impl Stat {
    fn mean(xs: &[f64]) -> Option<Stat> {
        (!xs.is_empty()).then(|| Stat {
            value: tidy(xs.iter().sum::<f64>() / xs.len() as f64),
            n: xs.len() as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub category: Category,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    /// Absent cells had no graded results; they are not zero.
    pub absent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_count: Option<u64>,
}

/// Consistency of one model under one perturbation kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindRow {
    pub kind: Category,
    pub j_jud: Option<Stat>,
    pub j_sel: Option<Stat>,
    pub j_inf: Option<Stat>,
    pub v_prec: Option<Stat>,
    pub v_rec: Option<Stat>,
    /// Plain mean of the available columns.
    pub avg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub cells: Vec<Cell>,
    pub perturbations: Vec<KindRow>,
    /// Per-column means over the perturbation kinds.
    pub perturbation_avg: KindAverages,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindAverages {
    pub j_jud: Option<f64>,
    pub j_sel: Option<f64>,
    pub j_inf: Option<f64>,
    pub v_prec: Option<f64>,
    pub v_rec: Option<f64>,
    pub avg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub models: Vec<ModelReport>,
    /// Configured cells with no graded results, as `model/category/type`.
    pub missing: Vec<String>,
}

fn mean_opt(xs: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.into_iter().flatten().collect();
    (!v.is_empty()).then(|| tidy(v.iter().sum::<f64>() / v.len() as f64))
}

type ByProgram<'a> = BTreeMap<&'a str, &'a GradedResult>;

fn consistency(
    orig: Option<&ByProgram>,
    pert: Option<&ByProgram>,
) -> (Option<Stat>, Option<(Stat, Stat)>) {
    let (Some(o), Some(p)) = (orig, pert) else {
        return (None, None);
    };
    let shared: Vec<&str> = o.keys().filter(|k| p.contains_key(*k)).copied().collect();
    if shared.is_empty() {
        return (None, None);
    }
    let handled = |m: &ByProgram| -> BTreeSet<&str> {
        shared.iter().copied().filter(|k| m[k].success).collect()
    };
    let (ho, hp) = (handled(o), handled(p));
    let union = ho.union(&hp).count() as u64;
    let j = Stat {
        value: jaccard(&ho, &hp),
        n: union,
    };
    let gen_pairs = |f: fn(&GenerationScore) -> f64| -> Vec<(f64, f64)> {
        shared
            .iter()
            .filter_map(|k| Some((f(o[k].generation.as_ref()?), f(p[k].generation.as_ref()?))))
            .collect()
    };
    let v = |pairs: Vec<(f64, f64)>| Stat {
        n: pairs.iter().filter(|(a, b)| *a > 0.0 || *b > 0.0).count() as u64,
        value: avg_variance(&pairs),
    };
    let has_gen = shared.iter().any(|k| o[k].generation.is_some());
    let vs = has_gen.then(|| (v(gen_pairs(|g| g.precision)), v(gen_pairs(|g| g.recall))));
    (Some(j), vs)
}

/// Aggregate graded results into per-model tables. `expected` lists the
/// (category, type) cells the run was configured for; cells with no
/// results are reported absent and listed in `missing`.
pub fn aggregate_report(graded: &[GradedResult], expected: &[(Category, TaskType)]) -> EvalReport {
    let mut by_model: BTreeMap<&str, Vec<&GradedResult>> = BTreeMap::new();
    for g in graded {
        by_model.entry(g.model.as_str()).or_default().push(g);
    }
    let mut missing = Vec::new();
    let mut models = Vec::new();
    for (model, results) in by_model {
        let mut groups: BTreeMap<(Category, TaskType), ByProgram> = BTreeMap::new();
        for r in &results {
            groups
                .entry((r.category, r.task_type))
                .or_default()
                .insert(r.program.as_str(), r);
        }
        let mut keys: BTreeSet<(Category, TaskType)> = groups.keys().copied().collect();
        keys.extend(expected.iter().copied());
        let cells = keys
            .iter()
            .map(|&(category, task_type)| {
                let Some(g) = groups.get(&(category, task_type)) else {
                    log::warn!("no results for {model}/{category}/{task_type}");
                    missing.push(format!("{model}/{category}/{task_type}"));
                    return Cell {
                        category,
                        task_type,
                        absent: true,
                        accuracy: None,
                        precision: None,
                        recall: None,
                        pass_count: None,
                    };
                };
                let succ: Vec<f64> = g.values().map(|r| f64::from(u8::from(r.success))).collect();
                let gens: Vec<&GenerationScore> =
                    g.values().filter_map(|r| r.generation.as_ref()).collect();
                let is_gen = task_type == TaskType::Generation;
                Cell {
                    category,
                    task_type,
                    absent: false,
                    accuracy: (!is_gen).then(|| Stat::mean(&succ)).flatten(),
                    precision: is_gen
                        .then(|| Stat::mean(&gens.iter().map(|s| s.precision).collect::<Vec<_>>()))
                        .flatten(),
                    recall: is_gen
                        .then(|| Stat::mean(&gens.iter().map(|s| s.recall).collect::<Vec<_>>()))
                        .flatten(),
                    pass_count: is_gen.then(|| gens.iter().filter(|s| s.all_pass).count() as u64),
                }
            })
            .collect();
        let mut rows = Vec::new();
        for kind in Category::ALL
            .into_iter()
            .filter(|c| *c != Category::Original)
        {
            if !groups.keys().any(|(c, _)| *c == kind) {
                continue;
            }
            let pair = |t: TaskType| {
                consistency(groups.get(&(Category::Original, t)), groups.get(&(kind, t)))
            };
            let j_jud = pair(TaskType::Judgement).0;
            let j_sel = pair(TaskType::Selection).0;
            let j_inf = pair(TaskType::Infilling).0;
            let v = pair(TaskType::Generation).1;
            let (v_prec, v_rec) = (v.map(|x| x.0), v.map(|x| x.1));
            let avg = mean_opt([j_jud, j_sel, j_inf, v_prec, v_rec].map(|s| s.map(|s| s.value)));
            rows.push(KindRow {
                kind,
                j_jud,
                j_sel,
                j_inf,
                v_prec,
                v_rec,
                avg,
            });
        }
        let col =
            |f: fn(&KindRow) -> Option<Stat>| mean_opt(rows.iter().map(|r| f(r).map(|s| s.value)));
        let perturbation_avg = KindAverages {
            j_jud: col(|r| r.j_jud),
            j_sel: col(|r| r.j_sel),
            j_inf: col(|r| r.j_inf),
            v_prec: col(|r| r.v_prec),
            v_rec: col(|r| r.v_rec),
            avg: mean_opt(rows.iter().map(|r| r.avg)),
        };
        models.push(ModelReport {
            model: model.to_string(),
            cells,
            perturbations: rows,
            perturbation_avg,
        });
    }
    EvalReport {
        schema: REPORT_SCHEMA,
        models,
        missing,
    }
}

fn pct(s: Option<Stat>) -> String {
    s.map_or("-".into(), |s| {
        format!("{:.2} (n={})", 100.0 * s.value, s.n)
    })
}

fn num(x: Option<f64>) -> String {
    x.map_or("-".into(), |x| format!("{x:.4}"))
}

fn stat_num(s: Option<Stat>) -> String {
    s.map_or("-".into(), |s| format!("{:.4} (n={})", s.value, s.n))
}

/// Markdown tables: one block per category with a row per model, then the
/// consistency table with a row per model and kind.
pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::from("# Evaluation report\n");
    let categories: BTreeSet<Category> = report
        .models
        .iter()
        .flat_map(|m| m.cells.iter().map(|c| c.category))
        .collect();
    for cat in categories {
        let _ = write!(
            out,
            "\n## {cat}\n\n| Model | Judgement Acc. | Selection Acc. | Infilling Acc. | Generation Prec. | Generation Rec. | #Pass |\n|---|---|---|---|---|---|---|\n"
        );
        for m in &report.models {
            let cell = |t: TaskType| {
                m.cells
                    .iter()
                    .find(|c| c.category == cat && c.task_type == t)
            };
            let acc = |t: TaskType| {
                cell(t).map_or("-".into(), |c| {
                    if c.absent {
                        "absent".into()
                    } else {
                        pct(c.accuracy)
                    }
                })
            };
            let gen = cell(TaskType::Generation);
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} |",
                m.model,
                acc(TaskType::Judgement),
                acc(TaskType::Selection),
                acc(TaskType::Infilling),
                gen.map_or("-".into(), |c| pct(c.precision)),
                gen.map_or("-".into(), |c| pct(c.recall)),
                gen.and_then(|c| c.pass_count)
                    .map_or("-".into(), |n| n.to_string()),
            );
        }
    }
    out.push_str("\n## Perturbation consistency\n\n| Model | Kind | J_jud | J_sel | J_inf | v_prec | v_rec | Avg. |\n|---|---|---|---|---|---|---|---|\n");
    for m in &report.models {
        for r in &m.perturbations {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                m.model,
                r.kind,
                stat_num(r.j_jud),
                stat_num(r.j_sel),
                stat_num(r.j_inf),
                stat_num(r.v_prec),
                stat_num(r.v_rec),
                num(r.avg)
            );
        }
        let a = &m.perturbation_avg;
        let _ = writeln!(
            out,
            "| {} | Avg. | {} | {} | {} | {} | {} | {} |",
            m.model,
            num(a.j_jud),
            num(a.j_sel),
            num(a.j_inf),
            num(a.v_prec),
            num(a.v_rec),
            num(a.avg)
        );
    }
    if !report.missing.is_empty() {
        out.push_str("\n## Missing cells\n\n");
        for m in &report.missing {
            let _ = writeln!(out, "- {m}");
        }
    }
    out
}
