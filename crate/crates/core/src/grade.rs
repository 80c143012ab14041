//! Grading parsed answers against answer keys.

use crate::lang::{
    check_unit, parse_clause, parse_unit, Anchor, LoopId, SourceUnit, SpecClause, SymbolTable,
};
use crate::metrics::{generation_scores, GenerationScore, GradedResult};
use crate::modelio::{AnchorRef, GeneratedClause, ParsedAnswer};
use crate::runtime::{Trace, DEFAULT_STEP_LIMIT};
use crate::taskgen::{fill_mask, Answer, AnswerKey, TaskInstance};

/// Resolve generated clauses against the program they annotate. Returns
/// the clauses that parse at their anchor and the number that do not.
pub fn resolve_generated(
    unit: &SourceUnit,
    table: &SymbolTable,
    clauses: &[GeneratedClause],
) -> (Vec<SpecClause>, usize) {
    let loops = unit.loops().len() as u32;
    let mut ok = Vec::new();
    let mut bad = 0;
    for c in clauses {
        let anchor = match &c.anchor {
            Some(AnchorRef::Method(m)) if unit.method(m).is_some() => Anchor::Method(m.clone()),
            Some(AnchorRef::Loop(n)) if (1..=loops).contains(n) => Anchor::Loop(LoopId(*n)),
            _ => {
                bad += 1;
                continue;
            }
        };
        match parse_clause(&c.text, table, &anchor) {
            Ok(clause) => ok.push(clause),
            Err(e) => {
                log::debug!("generated clause `{}` rejected: {e}", c.text);
                bad += 1;
            }
        }
    }
    (ok, bad)
}

struct Graded {
    success: bool,
    generation: Option<GenerationScore>,
    note: Option<String>,
}

fn judge(key: &AnswerKey, parsed: &ParsedAnswer) -> Result<Graded, String> {
    let plain = |success: bool| Graded {
        success,
        generation: None,
        note: None,
    };
    if let ParsedAnswer::Unparseable(_) = parsed {
        let generation =
            matches!(key.answer, Answer::Generation { .. }).then_some(GenerationScore {
                precision: 0.0,
                recall: 0.0,
                all_pass: false,
            });
        return Ok(Graded {
            success: false,
            generation,
            note: Some("unparseable answer".into()),
        });
    }
    match (&key.answer, parsed) {
        (Answer::Judgement { truth, .. }, ParsedAnswer::Judgement(b)) => Ok(plain(truth == b)),
        (Answer::Selection { label, .. }, ParsedAnswer::Selection(l)) => Ok(plain(label == l)),
        (Answer::Infilling { masked, site, .. }, ParsedAnswer::Infilling(text)) => {
            let unit = parse_unit(&key.unit).map_err(|e| e.to_string())?;
            let Some(filled) = fill_mask(masked, site, text) else {
                return Ok(Graded {
                    success: false,
                    generation: None,
                    note: Some("filling does not parse".into()),
                });
            };
            let table = check_unit(&unit).map_err(|e| e.to_string())?;
            if crate::lang::scope::check_spec_expr(
                &table,
                &filled.anchor,
                filled.kind,
                &filled.expr,
            )
            .is_err()
            {
                return Ok(Graded {
                    success: false,
                    generation: None,
                    note: Some("filling is ill-typed".into()),
                });
            }
            let trace = Trace::record(&unit, &key.tests, DEFAULT_STEP_LIMIT);
            let context: Vec<SpecClause> = unit
                .specs
                .iter()
                .filter(|c| **c != filled)
                .cloned()
                .collect();
            Ok(plain(trace.holds(&filled, &context)))
        }
        (Answer::Generation { ground_truth, .. }, ParsedAnswer::Generation(clauses)) => {
            let unit = parse_unit(&key.unit).map_err(|e| e.to_string())?;
            let table = check_unit(&unit).map_err(|e| e.to_string())?;
            let (generated, unparsed) = resolve_generated(&unit, &table, clauses);
            let bare = crate::lang::strip_specs(&unit);
            let trace = Trace::record(&bare, &key.tests, DEFAULT_STEP_LIMIT);
            let score = generation_scores(ground_truth, &generated, unparsed, &trace);
            Ok(Graded {
                success: score.all_pass,
                generation: Some(score),
                note: (unparsed > 0).then(|| format!("{unparsed} clauses did not parse")),
            })
        }
        _ => Ok(Graded {
            success: false,
            generation: None,
            note: Some("answer of the wrong kind".into()),
        }),
    }
}

/// Grade a parsed answer. Only the answer key decides; grading problems
/// surface as failures with a note rather than errors.
pub fn grade(
    task: &TaskInstance,
    key: &AnswerKey,
    model: &str,
    parsed: &ParsedAnswer,
) -> GradedResult {
    let g = judge(key, parsed).unwrap_or_else(|e| Graded {
        success: false,
        generation: None,
        note: Some(format!("grading failed: {e}")),
    });
    GradedResult {
        task_id: task.task_id.clone(),
        model: model.to_string(),
        program: task.program.clone(),
        category: task.category,
        task_type: task.task_type,
        success: g.success,
        generation: g.generation,
        note: g.note,
    }
}
