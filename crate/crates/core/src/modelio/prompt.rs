//! Prompt assembly: a system message, up to two worked examples and the task.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::lang::SpecKind;
use crate::taskgen::{Payload, TaskInstance, TaskType, SPEC_MARKER};

pub const MAX_SHOTS: usize = 2;

pub const SYSTEM: &str = "You are an expert in Java and the Java Modeling Language (JML). \
Read each program carefully and reason about every execution it can have. \
Answer in exactly the format the request asks for.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub request: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task_id: String,
    pub task_type: TaskType,
    pub system: String,
    pub shots: Vec<Shot>,
    pub task_text: String,
    pub k: usize,
}

impl PromptBundle {
    /// Chat messages as `(role, content)` pairs.
    pub fn messages(&self) -> Vec<(&'static str, &str)> {
        let mut m = vec![("system", self.system.as_str())];
        for s in &self.shots {
            m.push(("user", s.request.as_str()));
            m.push(("assistant", s.reply.as_str()));
        }
        m.push(("user", self.task_text.as_str()));
        m
    }
}

#[derive(Debug, Deserialize)]
struct RawShot {
    payload: Payload,
    reply: String,
}

#[derive(Debug, Deserialize)]
struct ShotFile {
    judgement: Vec<RawShot>,
    selection: Vec<RawShot>,
    infilling: Vec<RawShot>,
    generation: Vec<RawShot>,
}

fn shot_file() -> &'static ShotFile {
    static SHOTS: OnceLock<ShotFile> = OnceLock::new();
    SHOTS.get_or_init(|| {
        serde_json::from_str(include_str!("../../assets/shots.json"))
            .expect("bundled shots are valid")
    })
}

/// The bundled worked examples for a task type.
pub fn shots_for(t: TaskType) -> Vec<Shot> {
    let f = shot_file();
    let raw = match t {
        TaskType::Judgement => &f.judgement,
        TaskType::Selection => &f.selection,
        TaskType::Infilling => &f.infilling,
        TaskType::Generation => &f.generation,
    };
    raw.iter()
        .map(|s| Shot {
            request: render_task(&s.payload),
            reply: s.reply.clone(),
        })
        .collect()
}

fn kind_word(k: SpecKind) -> &'static str {
    match k {
        SpecKind::Requires => "precondition (requires)",
        SpecKind::Ensures => "postcondition (ensures)",
        SpecKind::LoopInvariant => "loop invariant (loop_invariant)",
    }
}

/// The request text for a task payload.
pub fn render_task(payload: &Payload) -> String {
    match payload {
        Payload::Judgement {
            program, candidate, ..
        } => format!(
            "Below is a Java program annotated with one JML specification clause.\n\n\
             ```java\n{program}```\n\n\
             Is the specification `{candidate}` correct for this program, that is, does it hold on \
             every execution? Reply with `true` or `false`."
        ),
        Payload::Selection {
            program,
            kind,
            options,
            ..
        } => {
            let opts: String = options
                .iter()
                .map(|o| format!("{}. {}\n", o.label, o.clause))
                .collect();
            format!(
                "Below is a Java program. The line `{SPEC_MARKER}` marks where a specification clause belongs.\n\n\
                 ```java\n{program}```\n\n\
                 Which {} is the most appropriate at the marked line? The most appropriate clause is \
                 correct and, among the correct ones, the strongest.\n\n{opts}\n\
                 Reply with the letter of one option.",
                kind_word(*kind)
            )
        }
        Payload::Infilling {
            program,
            masked_clause,
            line,
        } => format!(
            "Below is a Java program annotated with JML specifications. One clause contains the \
             placeholder `<MASK>`.\n\n```java\n{program}```\n\n\
             Line {line}: `{masked_clause}`\n\n\
             Replace `<MASK>` so that the clause is a correct specification of the program. \
             Reply with the replacement expression only, inside a code block."
        ),
        Payload::Generation { program, .. } => format!(
            "Below is a Java program without specifications.\n\n```java\n{program}```\n\n\
             Write JML specifications for it: `//@ requires` and `//@ ensures` clauses for every \
             method and `//@ loop_invariant` clauses for every loop, each placed on the lines just \
             before the method or loop it belongs to. Reply with the complete annotated program \
             inside a code block."
        ),
    }
}

/// The prompt for a task with `k` worked examples, `k` clamped to the
/// number of bundled examples.
pub fn build_prompt(task: &TaskInstance, k: usize) -> PromptBundle {
    let shots: Vec<Shot> = shots_for(task.task_type)
        .into_iter()
        .take(k.min(MAX_SHOTS))
        .collect();
    PromptBundle {
        task_id: task.task_id.clone(),
        task_type: task.task_type,
        system: SYSTEM.to_string(),
        k: shots.len(),
        shots,
        task_text: render_task(&task.payload),
    }
}
