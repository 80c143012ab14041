//! Def/use analysis, independent statement pairs and def-use breaking.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rename::{fresh_name, rename_stmt, Renaming};
use crate::lang::*;

/// Variables defined and used by a statement, including everything nested
/// inside it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefUseSets {
    pub def_set: BTreeSet<String>,
    pub use_set: BTreeSet<String>,
}

/// Def/use sets of `s`. An element store into an array defines every
/// array variable in `arrays`, since any of them may alias the target.
pub fn def_use(s: &Stmt, arrays: &BTreeSet<String>) -> DefUseSets {
    let mut du = DefUseSets::default();
    s.walk(&mut |st| {
        for e in st.own_exprs() {
            du.use_set.extend(e.free_vars());
        }
        match &st.kind {
            StmtKind::VarDecl { name, .. } => {
                du.def_set.insert(name.clone());
            }
            StmtKind::Assign { target, op, .. } => match target {
                LValue::Var(x) => {
                    du.def_set.insert(x.clone());
                    if *op != AssignOp::Set {
                        du.use_set.insert(x.clone());
                    }
                }
                LValue::Index(a, _) => {
                    du.def_set.insert(a.clone());
                    du.def_set.extend(arrays.iter().cloned());
                    du.use_set.insert(a.clone());
                }
            },
            _ => {}
        }
    });
    du
}

/// Position of a statement list inside a method body: a sequence of
/// (statement index, nested block index) steps from the top level.
pub type BlockPath = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependentPair {
    pub method: String,
    pub block: BlockPath,
    /// Index of the first statement; the second follows it.
    pub index: usize,
    pub lines: (u32, u32),
}

pub(crate) fn block_at<'a>(body: &'a [Stmt], path: &[(usize, usize)]) -> &'a [Stmt] {
    match path.split_first() {
        None => body,
        Some(((i, b), rest)) => block_at(body[*i].blocks()[*b], rest),
    }
}

pub(crate) fn block_at_mut<'a>(
    body: &'a mut Vec<Stmt>,
    path: &[(usize, usize)],
) -> &'a mut Vec<Stmt> {
    match path.split_first() {
        None => body,
        Some(((i, b), rest)) => {
            let mut blocks = body[*i].blocks_mut();
            let inner = blocks.swap_remove(*b);
            block_at_mut(inner, rest)
        }
    }
}

/// Every statement list of a method with its path and whether it sits
/// inside a loop body.
fn blocks_of(body: &[Stmt]) -> Vec<(BlockPath, bool)> {
    fn go(stmts: &[Stmt], path: &mut BlockPath, in_loop: bool, out: &mut Vec<(BlockPath, bool)>) {
        out.push((path.clone(), in_loop));
        for (i, s) in stmts.iter().enumerate() {
            for (b, blk) in s.blocks().into_iter().enumerate() {
                path.push((i, b));
                go(blk, path, in_loop || s.is_loop(), out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(body, &mut Vec::new(), false, &mut out);
    out
}

fn array_vars(m: &Method) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = m
        .params
        .iter()
        .filter(|p| p.ty == TypeTag::IntArray)
        .map(|p| p.name.clone())
        .collect();
    m.walk(&mut |s| {
        if let StmtKind::VarDecl {
            name,
            ty: TypeTag::IntArray,
            ..
        } = &s.kind
        {
            out.insert(name.clone());
        }
    });
    out
}

/// Adjacent statements of one block satisfying the three independence
/// conditions. Statements containing calls or returns are never paired.
pub fn find_independent_pairs(unit: &SourceUnit) -> Vec<IndependentPair> {
    let mut out = Vec::new();
    for m in &unit.methods {
        let arrays = array_vars(m);
        for (path, _) in blocks_of(&m.body) {
            let block = block_at(&m.body, &path);
            for k in 0..block.len().saturating_sub(1) {
                let (s1, s2) = (&block[k], &block[k + 1]);
                if [s1, s2]
                    .iter()
                    .any(|s| s.contains_call() || s.contains_return())
                {
                    continue;
                }
                let d1 = def_use(s1, &arrays);
                let d2 = def_use(s2, &arrays);
                if d1.def_set.is_disjoint(&d2.def_set)
                    && d1.use_set.is_disjoint(&d2.def_set)
                    && d1.def_set.is_disjoint(&d2.use_set)
                {
                    out.push(IndependentPair {
                        method: m.name.clone(),
                        block: path.clone(),
                        index: k,
                        lines: (s1.line.0, s2.line.0),
                    });
                }
            }
        }
    }
    out
}

fn stmt_may_fault(s: &Stmt) -> bool {
    s.own_exprs().iter().any(|e| e.may_fault())
        || matches!(
            &s.kind,
            StmtKind::Assign {
                target: LValue::Index(..),
                ..
            } | StmtKind::Assign {
                op: AssignOp::Div | AssignOp::Rem,
                ..
            }
        )
}

/// Pairs eligible for swapping: both statements simple, and not both able
/// to fault (which would change the reported error).
pub(crate) fn swappable_pairs(unit: &SourceUnit) -> Vec<IndependentPair> {
    find_independent_pairs(unit)
        .into_iter()
        .filter(|p| {
            let m = unit.method(&p.method).expect("pair method exists");
            let b = block_at(&m.body, &p.block);
            let (s1, s2) = (&b[p.index], &b[p.index + 1]);
            !s1.is_compound() && !s2.is_compound() && !(stmt_may_fault(s1) && stmt_may_fault(s2))
        })
        .collect()
}

/// Pick non-overlapping pairs with probability 1/2 each, at least one.
pub(crate) fn choose_pairs(pairs: &[IndependentPair], rng: &mut impl Rng) -> Vec<IndependentPair> {
    let overlaps = |a: &IndependentPair, b: &IndependentPair| {
        a.method == b.method && a.block == b.block && a.index.abs_diff(b.index) < 2
    };
    let mut chosen: Vec<IndependentPair> = Vec::new();
    for p in pairs {
        if rng.gen_bool(0.5) && !chosen.iter().any(|c| overlaps(c, p)) {
            chosen.push(p.clone());
        }
    }
    if chosen.is_empty() {
        if let Some(p) = pairs.choose(rng) {
            chosen.push(p.clone());
        }
    }
    chosen
}

pub(crate) fn swap_pairs(unit: &mut SourceUnit, pairs: &[IndependentPair]) {
    for p in pairs {
        let m = unit
            .methods
            .iter_mut()
            .find(|m| m.name == p.method)
            .expect("pair method exists");
        block_at_mut(&mut m.body, &p.block).swap(p.index, p.index + 1);
    }
}

/// A place where a variable's value can be handed to a fresh copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct BreakSite {
    pub method: String,
    pub block: BlockPath,
    /// Insertion index in the block.
    pub at: usize,
    pub var: String,
    pub ty: TypeTag,
}

fn writes_whole(s: &Stmt, v: &str) -> bool {
    let mut found = false;
    s.walk(&mut |st| {
        found |= matches!(&st.kind, StmtKind::Assign { target: LValue::Var(x), .. } if x == v)
            || matches!(&st.kind, StmtKind::VarDecl { name, .. } if name == v)
    });
    found
}

fn mentions(s: &Stmt, v: &str) -> bool {
    let mut found = false;
    s.walk(&mut |st| {
        found |= st
            .own_exprs()
            .iter()
            .any(|e| e.free_vars().iter().any(|n| n == v))
            || matches!(&st.kind, StmtKind::Assign { target: LValue::Index(x, _), .. } if x == v)
    });
    found
}

fn written_in_loop(m: &Method, v: &str) -> bool {
    let mut found = false;
    m.walk(&mut |s| {
        if s.is_loop() && writes_whole(s, v) {
            found = true;
        }
    });
    found
}

/// Candidate break sites: variables declared in a block outside every
/// loop (or parameters, at the top level), never written inside a loop,
/// and used after their last write in that block.
pub(crate) fn break_sites(unit: &SourceUnit) -> Vec<BreakSite> {
    let mut out = Vec::new();
    for m in &unit.methods {
        for (path, in_loop) in blocks_of(&m.body) {
            if in_loop {
                continue;
            }
            let block = block_at(&m.body, &path);
            let mut cands: Vec<(String, TypeTag, usize)> = Vec::new();
            if path.is_empty() {
                cands.extend(m.params.iter().map(|p| (p.name.clone(), p.ty, 0)));
            }
            for (i, s) in block.iter().enumerate() {
                if let StmtKind::VarDecl { name, ty, .. } = &s.kind {
                    cands.push((name.clone(), *ty, i + 1));
                }
            }
            for (v, ty, start) in cands {
                if written_in_loop(m, &v) {
                    continue;
                }
                let last_write = (start..block.len())
                    .filter(|&j| writes_whole(&block[j], &v))
                    .max();
                let at = last_write.map_or(start, |j| j + 1);
                if (at..block.len()).any(|j| mentions(&block[j], &v)) {
                    out.push(BreakSite {
                        method: m.name.clone(),
                        block: path.clone(),
                        at,
                        var: v,
                        ty,
                    });
                }
            }
        }
    }
    out
}

/// Insert `T fresh = v;` at each site and redirect every later use in the
/// block. Returns, per site, the fresh name and the loops whose clauses
/// must follow the rename.
pub(crate) fn apply_breaks(
    unit: &mut SourceUnit,
    sites: &[BreakSite],
    rng: &mut impl Rng,
    taken: &mut BTreeSet<String>,
) -> Vec<(BreakSite, String, Vec<LoopId>)> {
    let named: Vec<(BreakSite, String)> = sites
        .iter()
        .map(|s| (s.clone(), fresh_name(rng, taken)))
        .collect();
    let mut order: Vec<usize> = (0..named.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&named[a].0, &named[b].0);
        (&sb.method, &sb.block, sb.at).cmp(&(&sa.method, &sa.block, sa.at))
    });
    let mut loops_of: BTreeMap<usize, Vec<LoopId>> = BTreeMap::new();
    for idx in order {
        let (site, fresh) = &named[idx];
        let m = unit
            .methods
            .iter_mut()
            .find(|m| m.name == site.method)
            .expect("site method exists");
        let block = block_at_mut(&mut m.body, &site.block);
        block.insert(
            site.at,
            Stmt::new(StmtKind::VarDecl {
                name: fresh.clone(),
                ty: site.ty,
                init: Expr::var(&site.var),
            }),
        );
        let map = Renaming::vars(BTreeMap::from([(site.var.clone(), fresh.clone())]));
        let mut loops = Vec::new();
        for s in block.iter_mut().skip(site.at + 1) {
            s.walk(&mut |st| loops.extend(st.loop_id()));
            rename_stmt(s, &map);
        }
        loops_of.insert(idx, loops);
    }
    named
        .into_iter()
        .enumerate()
        .map(|(i, (s, f))| (s, f, loops_of.remove(&i).unwrap_or_default()))
        .collect()
}
