//! The subject language: a single-class, static-method subset of Java with
//! JML-style `//@` specification comments.

pub mod ast;
pub mod interval;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod scope;

use thiserror::Error;

pub use ast::*;
pub use printer::{print_clause, print_expr, print_unit, print_unit_with_marker};
pub use scope::{resolve_scopes, Site, SymbolTable, VarInfo};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: u32,
        col: u32,
        message: String,
    },
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("scope error: `{name}`: {context}")]
    Scope { name: String, context: String },
    #[error("type error: {0}")]
    Type(String),
    #[error("quantifier range is not a finite integer interval: {0}")]
    UnboundedQuantifier(String),
}

/// Parse, scope-resolve and type-check a unit, including its attached
/// specifications.
pub fn parse_unit(text: &str) -> Result<SourceUnit, LangError> {
    let unit = parser::parse_unit_syntax(text)?;
    check_unit(&unit)?;
    Ok(unit)
}

/// Validate an already-built unit: bodies and every attached clause.
pub fn check_unit(unit: &SourceUnit) -> Result<SymbolTable, LangError> {
    let table = resolve_scopes(unit)?;
    for clause in &unit.specs {
        scope::check_spec_expr(&table, &clause.anchor, clause.kind, &clause.expr)?;
    }
    Ok(table)
}

/// Parse a specification expression in the scope of `anchor`.
pub fn parse_spec_expr(
    text: &str,
    table: &SymbolTable,
    anchor: &Anchor,
    kind: SpecKind,
) -> Result<SpecExpr, LangError> {
    let e = parser::parse_spec_syntax(text)?;
    scope::check_spec_expr(table, anchor, kind, &e)?;
    Ok(e)
}

/// Parse a full clause such as `ensures \result >= 0;` at `anchor`.
pub fn parse_clause(
    text: &str,
    table: &SymbolTable,
    anchor: &Anchor,
) -> Result<SpecClause, LangError> {
    let (kind, e) = parser::parse_clause_syntax(text)?;
    scope::check_spec_expr(table, anchor, kind, &e)?;
    Ok(SpecClause::new(kind, anchor.clone(), e))
}

/// The same program with no specifications attached.
pub fn strip_specs(unit: &SourceUnit) -> SourceUnit {
    unit.with_specs(Vec::new())
}

/// Renumber loops in source order and return the old-to-new id mapping.
/// Spec anchors are remapped accordingly.
pub fn renumber_loops(unit: &mut SourceUnit) -> std::collections::BTreeMap<LoopId, LoopId> {
    fn go(
        stmts: &mut [Stmt],
        next: &mut u32,
        map: &mut std::collections::BTreeMap<LoopId, LoopId>,
    ) {
        for s in stmts {
            if let StmtKind::While { id, .. } | StmtKind::For { id, .. } = &mut s.kind {
                let new = LoopId(*next);
                *next += 1;
                map.insert(*id, new);
                *id = new;
            }
            for b in s.blocks_mut() {
                go(b, next, map);
            }
        }
    }
    let mut map = std::collections::BTreeMap::new();
    let mut next = 1;
    for m in &mut unit.methods {
        go(&mut m.body, &mut next, &mut map);
    }
    for c in &mut unit.specs {
        if let Anchor::Loop(id) = &mut c.anchor {
            if let Some(n) = map.get(id) {
                *id = *n;
            }
        }
    }
    map
}
