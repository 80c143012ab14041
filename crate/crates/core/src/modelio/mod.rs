//! Prompting, model endpoints and answer extraction.

mod endpoint;
mod parse;
mod prompt;

pub use endpoint::{
    oracle_reply, query, HttpChat, ModelEndpoint, QueryError, RateLimiter, API_KEY_ENV,
};
pub use parse::{
    fenced_blocks, parse_generation, parse_infilling, parse_judgement, parse_selection, AnchorRef,
    GeneratedClause, ParsedAnswer,
};
pub use prompt::{build_prompt, render_task, shots_for, PromptBundle, Shot, MAX_SHOTS, SYSTEM};

use crate::taskgen::TaskType;

/// Parse a raw reply with the parser for its task type.
pub fn parse_answer(task_type: TaskType, raw: &str) -> ParsedAnswer {
    match task_type {
        TaskType::Judgement => parse_judgement(raw),
        TaskType::Selection => parse_selection(raw),
        TaskType::Infilling => parse_infilling(raw),
        TaskType::Generation => parse_generation(raw),
    }
}
