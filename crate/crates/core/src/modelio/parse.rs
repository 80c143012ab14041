//! Extraction of answers from raw model text. Every parser is total.

use serde::{Deserialize, Serialize};

/// Where a generated clause was placed in the answer program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorRef {
    /// Before the header of the named method.
    Method(String),
    /// Before the n-th loop of the answer, counting from 1 in text order.
    Loop(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedClause {
    /// `None` when nothing follows the clause to attach it to.
    pub anchor: Option<AnchorRef>,
    /// The clause text after `//@`, e.g. `ensures \result >= 0;`.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParsedAnswer {
    Judgement(bool),
    Selection(String),
    Infilling(String),
    Generation(Vec<GeneratedClause>),
    Unparseable(String),
}

fn words(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
}

/// First standalone verdict word, case-insensitive.
pub fn parse_judgement(raw: &str) -> ParsedAnswer {
    for w in words(raw) {
        match w.to_ascii_lowercase().as_str() {
            "true" | "correct" | "yes" => return ParsedAnswer::Judgement(true),
            "false" | "incorrect" | "no" => return ParsedAnswer::Judgement(false),
            _ => {}
        }
    }
    ParsedAnswer::Unparseable(raw.to_string())
}

/// First standalone option label.
pub fn parse_selection(raw: &str) -> ParsedAnswer {
    words(raw)
        .find(|w| matches!(*w, "A" | "B" | "C" | "D"))
        .map_or_else(
            || ParsedAnswer::Unparseable(raw.to_string()),
            |w| ParsedAnswer::Selection(w.to_string()),
        )
}

/// Contents of the fenced blocks of `raw`, info strings removed.
pub fn fenced_blocks(raw: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(b) => blocks.push(b.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(b) = current.as_mut() {
            b.push(line);
        }
    }
    blocks
}

const SPEC_OPERATORS: [&str; 16] = [
    "==", "!=", "<", ">", "&&", "||", "!", "+", "-", "*", "/", "%", "\\", "[", ".", "(",
];

/// The filled-in text: the first fenced block, else the first line with an
/// operator, else a lone line.
pub fn parse_infilling(raw: &str) -> ParsedAnswer {
    let clean = |s: &str| {
        let s = s.trim();
        let s = s.strip_prefix("//@").unwrap_or(s).trim();
        s.trim_matches('`').trim().to_string()
    };
    if let Some(b) = fenced_blocks(raw)
        .into_iter()
        .find(|b| !b.trim().is_empty())
    {
        return ParsedAnswer::Infilling(clean(&b));
    }
    if let Some(l) = raw
        .lines()
        .find(|l| SPEC_OPERATORS.iter().any(|op| l.contains(op)))
    {
        return ParsedAnswer::Infilling(clean(l));
    }
    let lines: Vec<&str> = raw.lines().filter(|l| !l.trim().is_empty()).collect();
    match lines.as_slice() {
        [only] => ParsedAnswer::Infilling(clean(only)),
        _ => ParsedAnswer::Unparseable(raw.to_string()),
    }
}

fn method_header(line: &str) -> Option<String> {
    let t = line.trim();
    if !t.contains('(') || t.starts_with("//") {
        return None;
    }
    let head = &t[..t.find('(')?];
    let toks: Vec<&str> = head.split_whitespace().collect();
    let name = *toks.last()?;
    let is_ident = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    let keyword = matches!(name, "if" | "while" | "for" | "return" | "switch");
    (toks.len() >= 2
        && is_ident
        && !keyword
        && toks.iter().any(|t| *t == "static" || *t == "public"))
    .then(|| name.to_string())
}

fn is_loop_header(line: &str) -> bool {
    let t = line.trim_start().trim_start_matches('}').trim_start();
    ["while", "for"].iter().any(|k| {
        t.strip_prefix(k)
            .is_some_and(|r| r.trim_start().starts_with('('))
    })
}

/// Specification lines of an annotated program, each attached to the method
/// header or loop that follows it.
pub fn parse_generation(raw: &str) -> ParsedAnswer {
    let blocks = fenced_blocks(raw);
    let text = if blocks.is_empty() {
        raw.to_string()
    } else {
        blocks.join("\n")
    };
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut loops = 0;
    for line in text.lines() {
        let t = line.trim();
        if let Some(spec) = t.strip_prefix("//@") {
            let spec = spec.trim();
            if !spec.is_empty() {
                pending.push(spec.to_string());
            }
            continue;
        }
        let anchor = if is_loop_header(t) {
            loops += 1;
            Some(AnchorRef::Loop(loops))
        } else {
            method_header(t).map(AnchorRef::Method)
        };
        if let Some(a) = anchor {
            out.extend(pending.drain(..).map(|text| GeneratedClause {
                anchor: Some(a.clone()),
                text,
            }));
        }
    }
    out.extend(
        pending
            .into_iter()
            .map(|text| GeneratedClause { anchor: None, text }),
    );
    if out.is_empty() {
        ParsedAnswer::Unparseable(raw.to_string())
    } else {
        ParsedAnswer::Generation(out)
    }
}
