//! Identifier renaming and fresh-name generation.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::lang::*;

const KEYWORDS: &[&str] = &[
    "break", "catch", "class", "const", "false", "final", "float", "short", "super", "throw",
    "while", "yield",
];

/// Every identifier spelled anywhere in the unit: class, methods,
/// variables and quantifier binders.
pub fn identifiers(unit: &SourceUnit) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    out.insert(unit.name.clone());
    let add_expr = |e: &Expr, out: &mut BTreeSet<String>| {
        e.walk(&mut |x| match x {
            Expr::Var(n) | Expr::Call(n, _) => {
                out.insert(n.clone());
            }
            Expr::Quant { binder, .. } => {
                out.insert(binder.clone());
            }
            _ => {}
        })
    };
    for m in &unit.methods {
        out.insert(m.name.clone());
        for p in &m.params {
            out.insert(p.name.clone());
        }
        m.walk(&mut |s| {
            match &s.kind {
                StmtKind::VarDecl { name, .. } => {
                    out.insert(name.clone());
                }
                StmtKind::Assign { target, .. } => {
                    out.insert(target.name().to_string());
                }
                StmtKind::Call(n, _) => {
                    out.insert(n.clone());
                }
                _ => {}
            }
            for e in s.own_exprs() {
                add_expr(e, &mut out);
            }
        });
    }
    for c in &unit.specs {
        add_expr(&c.expr, &mut out);
    }
    out
}

/// Five letters or digits, the first a letter, not in `taken`. The new
/// name is added to `taken`.
pub fn fresh_name(rng: &mut impl Rng, taken: &mut BTreeSet<String>) -> String {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    loop {
        let mut s = String::with_capacity(5);
        s.push(LETTERS[rng.gen_range(0..LETTERS.len())] as char);
        for _ in 0..4 {
            s.push(ALNUM[rng.gen_range(0..ALNUM.len())] as char);
        }
        if !taken.contains(&s) && !KEYWORDS.contains(&s.as_str()) {
            taken.insert(s.clone());
            return s;
        }
    }
}

pub fn is_fresh_shape(s: &str) -> bool {
    s.len() == 5
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && s.chars().all(|c| c.is_ascii_alphanumeric())
}

/// Separate maps for variable names (binders included) and method names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Renaming {
    pub vars: BTreeMap<String, String>,
    pub methods: BTreeMap<String, String>,
}

impl Renaming {
    pub fn vars(vars: BTreeMap<String, String>) -> Self {
        Renaming {
            vars,
            methods: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.methods.is_empty()
    }

    fn var(&self, n: &mut String) {
        if let Some(new) = self.vars.get(n) {
            *n = new.clone();
        }
    }

    fn method(&self, n: &mut String) {
        if let Some(new) = self.methods.get(n) {
            *n = new.clone();
        }
    }
}

/// Rename variables, binders and called methods in `e`.
pub fn rename_expr(e: &mut Expr, map: &Renaming) {
    match e {
        Expr::Var(n) => map.var(n),
        Expr::Call(n, _) => map.method(n),
        Expr::Quant { binder, .. } => map.var(binder),
        _ => {}
    }
    for c in e.children_mut() {
        rename_expr(c, map);
    }
}

pub fn rename_stmt(s: &mut Stmt, map: &Renaming) {
    match &mut s.kind {
        StmtKind::VarDecl { name, init, .. } => {
            map.var(name);
            rename_expr(init, map);
        }
        StmtKind::Assign { target, value, .. } => {
            match target {
                LValue::Var(n) => map.var(n),
                LValue::Index(n, i) => {
                    map.var(n);
                    rename_expr(i, map);
                }
            }
            rename_expr(value, map);
        }
        StmtKind::Call(n, args) => {
            map.method(n);
            for a in args {
                rename_expr(a, map);
            }
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => rename_expr(cond, map),
        StmtKind::For {
            init, cond, update, ..
        } => {
            rename_expr(cond, map);
            if let Some(i) = init {
                rename_stmt(i, map);
            }
            if let Some(u) = update {
                rename_stmt(u, map);
            }
        }
        StmtKind::Return(e) => {
            if let Some(e) = e {
                rename_expr(e, map);
            }
        }
        StmtKind::Block(_) => {}
    }
    for b in s.blocks_mut() {
        for st in b {
            rename_stmt(st, map);
        }
    }
}

/// Apply `map` to every method, parameter, variable and clause.
pub fn rename_unit(unit: &mut SourceUnit, map: &Renaming) {
    for m in &mut unit.methods {
        map.method(&mut m.name);
        for p in &mut m.params {
            map.var(&mut p.name);
        }
        for s in &mut m.body {
            rename_stmt(s, map);
        }
    }
    for c in &mut unit.specs {
        rename_clause(c, map);
    }
}

pub fn rename_clause(c: &mut SpecClause, map: &Renaming) {
    if let Anchor::Method(m) = &mut c.anchor {
        map.method(m);
    }
    rename_expr(&mut c.expr, map);
}
