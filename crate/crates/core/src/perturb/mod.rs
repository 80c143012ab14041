//! Semantics-preserving program perturbations with specification
//! migration.

mod dataflow;
mod rename;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataflow::{def_use, find_independent_pairs, BlockPath, DefUseSets, IndependentPair};
use rename::fresh_name;
pub use rename::{identifiers, is_fresh_shape, rename_clause, rename_expr, rename_unit, Renaming};

use crate::lang::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PerturbKind {
    DefUseBreak,
    IfElseFlip,
    IndependentSwap,
    NameRandom,
    NameShuffle,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 5] = [
        PerturbKind::DefUseBreak,
        PerturbKind::IfElseFlip,
        PerturbKind::IndependentSwap,
        PerturbKind::NameRandom,
        PerturbKind::NameShuffle,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            PerturbKind::DefUseBreak => "defuse_break",
            PerturbKind::IfElseFlip => "ifelse_flip",
            PerturbKind::IndependentSwap => "independent_swap",
            PerturbKind::NameRandom => "name_random",
            PerturbKind::NameShuffle => "name_shuffle",
        }
    }
}

impl fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PerturbKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PerturbKind::ALL
            .into_iter()
            .find(|k| k.slug() == s)
            .ok_or_else(|| format!("unknown perturbation `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerturbError {
    #[error("no variable is used after its last write")]
    NoEligibleVariable,
    #[error("no if statement has an else branch")]
    NoEligibleBranch,
    #[error("no pair of adjacent independent statements")]
    NoEligiblePair,
    #[error("fewer than two type-compatible variable names")]
    NoShufflePossible,
    #[error("perturbed program failed validation: {0}")]
    Invalid(#[from] LangError),
}

/// A perturbed program together with what is needed to carry clauses of
/// the original over to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedUnit {
    pub kind: PerturbKind,
    pub unit: SourceUnit,
    /// Whole-unit renames. Def-use breaks record `method.var` keys.
    pub rename_map: BTreeMap<String, String>,
    /// Original clause index to migrated clause.
    pub spec_migration: BTreeMap<usize, SpecClause>,
    pub seed: u64,
    /// Human-readable record of each applied change.
    pub sites: Vec<String>,
    renaming: RenamingDto,
    anchor_map: BTreeMap<Anchor, Anchor>,
    /// Renames that apply only to clauses at particular original anchors.
    scoped: BTreeMap<Anchor, BTreeMap<String, String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct RenamingDto {
    vars: BTreeMap<String, String>,
    methods: BTreeMap<String, String>,
}

impl PerturbedUnit {
    /// Carry a clause written against the original program over to the
    /// perturbed one.
    pub fn migrate_clause(&self, clause: &SpecClause) -> SpecClause {
        let mut c = clause.clone();
        if let Some(map) = self.scoped.get(&clause.anchor) {
            rename_expr(&mut c.expr, &Renaming::vars(map.clone()));
        }
        if let Some(a) = self.anchor_map.get(&clause.anchor) {
            c.anchor = a.clone();
        }
        let r = Renaming {
            vars: self.renaming.vars.clone(),
            methods: self.renaming.methods.clone(),
        };
        rename_expr(&mut c.expr, &r);
        if let Anchor::Method(m) = &mut c.anchor {
            if let Some(n) = r.methods.get(m) {
                *m = n.clone();
            }
        }
        c
    }

    pub fn migrate_anchor(&self, anchor: &Anchor) -> Anchor {
        let a = self.anchor_map.get(anchor).unwrap_or(anchor).clone();
        match a {
            Anchor::Method(m) => {
                Anchor::Method(self.renaming.methods.get(&m).cloned().unwrap_or(m))
            }
            other => other,
        }
    }

    pub fn method_name(&self, original: &str) -> String {
        self.renaming
            .methods
            .get(original)
            .cloned()
            .unwrap_or_else(|| original.to_string())
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Keep each item with probability 1/2, but never return an empty
/// selection from a non-empty input.
fn select_half<T: Clone>(items: &[T], rng: &mut impl Rng) -> Vec<T> {
    let mut picked: Vec<T> = items
        .iter()
        .filter(|_| rng.gen_bool(0.5))
        .cloned()
        .collect();
    if picked.is_empty() {
        if let Some(x) = items.choose(rng) {
            picked.push(x.clone());
        }
    }
    picked
}

struct Draft {
    unit: SourceUnit,
    renaming: Renaming,
    scoped: BTreeMap<Anchor, BTreeMap<String, String>>,
    rename_map: BTreeMap<String, String>,
    sites: Vec<String>,
}

impl Draft {
    fn plain(unit: SourceUnit, sites: Vec<String>) -> Self {
        Draft {
            unit,
            renaming: Renaming::default(),
            scoped: BTreeMap::new(),
            rename_map: BTreeMap::new(),
            sites,
        }
    }
}

/// Finish a perturbation: renumber loops, re-read the printed program so
/// line numbers match its text, and validate it with its migrated
/// clauses.
fn finish(
    original: &SourceUnit,
    kind: PerturbKind,
    seed: u64,
    draft: Draft,
) -> Result<PerturbedUnit, PerturbError> {
    let Draft {
        mut unit,
        renaming,
        scoped,
        rename_map,
        sites,
    } = draft;
    // Clauses still carry original anchors; renumbering maps them.
    let loop_map = renumber_loops(&mut unit);
    let mut anchor_map = BTreeMap::new();
    for (old, new) in &loop_map {
        anchor_map.insert(Anchor::Loop(*old), Anchor::Loop(*new));
    }
    let mut pu = PerturbedUnit {
        kind,
        unit: SourceUnit {
            name: unit.name.clone(),
            methods: unit.methods,
            specs: Vec::new(),
        },
        rename_map,
        spec_migration: BTreeMap::new(),
        seed,
        sites,
        renaming: RenamingDto {
            vars: renaming.vars,
            methods: renaming.methods,
        },
        anchor_map,
        scoped,
    };
    let specs: Vec<SpecClause> = original
        .specs
        .iter()
        .map(|c| pu.migrate_clause(c))
        .collect();
    pu.spec_migration = specs.iter().cloned().enumerate().collect();
    let built = pu.unit.with_specs(specs);
    let reparsed = parse_unit(&print_unit(&built))?;
    pu.unit = reparsed;
    Ok(pu)
}

/// Hand the value of selected variables to fresh copies and redirect
/// their later uses.
pub fn defuse_break(unit: &SourceUnit, seed: u64) -> Result<PerturbedUnit, PerturbError> {
    let mut rng = rng_for(seed);
    let sites = dataflow::break_sites(unit);
    if sites.is_empty() {
        return Err(PerturbError::NoEligibleVariable);
    }
    let chosen = select_half(&sites, &mut rng);
    let mut taken = identifiers(unit);
    let mut work = unit.clone();
    let applied = dataflow::apply_breaks(&mut work, &chosen, &mut rng, &mut taken);
    let mut scoped: BTreeMap<Anchor, BTreeMap<String, String>> = BTreeMap::new();
    let mut rename_map = BTreeMap::new();
    let mut notes = Vec::new();
    for (site, fresh, loops) in &applied {
        for l in loops {
            scoped
                .entry(Anchor::Loop(*l))
                .or_default()
                .insert(site.var.clone(), fresh.clone());
        }
        rename_map.insert(format!("{}.{}", site.method, site.var), fresh.clone());
        notes.push(format!("{}: {} -> {}", site.method, site.var, fresh));
    }
    let draft = Draft {
        unit: work,
        renaming: Renaming::default(),
        scoped,
        rename_map,
        sites: notes,
    };
    finish(unit, PerturbKind::DefUseBreak, seed, draft)
}

/// Swap the branches of selected if-else statements and negate their
/// conditions.
pub fn ifelse_flip(unit: &SourceUnit, seed: u64) -> Result<PerturbedUnit, PerturbError> {
    let mut rng = rng_for(seed);
    let mut count = 0usize;
    for m in &unit.methods {
        m.walk(&mut |s| {
            if matches!(
                s.kind,
                StmtKind::If {
                    else_branch: Some(_),
                    ..
                }
            ) {
                count += 1;
            }
        });
    }
    if count == 0 {
        return Err(PerturbError::NoEligibleBranch);
    }
    let chosen: BTreeSet<usize> = select_half(&(0..count).collect::<Vec<_>>(), &mut rng)
        .into_iter()
        .collect();
    fn go(stmts: &mut [Stmt], next: &mut usize, chosen: &BTreeSet<usize>, notes: &mut Vec<String>) {
        for s in stmts {
            let line = s.line.0;
            if let StmtKind::If {
                cond,
                then_branch,
                else_branch: Some(else_branch),
            } = &mut s.kind
            {
                let me = *next;
                *next += 1;
                if chosen.contains(&me) {
                    let c = std::mem::replace(cond, Expr::BoolLit(true));
                    *cond = Expr::negate(c);
                    std::mem::swap(then_branch, else_branch);
                    notes.push(format!("line {line}"));
                }
            }
            for b in s.blocks_mut() {
                go(b, next, chosen, notes);
            }
        }
    }
    let mut work = unit.clone();
    let mut next = 0;
    let mut notes = Vec::new();
    for m in &mut work.methods {
        go(&mut m.body, &mut next, &chosen, &mut notes);
    }
    finish(
        unit,
        PerturbKind::IfElseFlip,
        seed,
        Draft::plain(work, notes),
    )
}

/// Swap a selection of non-overlapping independent statement pairs.
pub fn independent_swap(unit: &SourceUnit, seed: u64) -> Result<PerturbedUnit, PerturbError> {
    let mut rng = rng_for(seed);
    let pairs = dataflow::swappable_pairs(unit);
    if pairs.is_empty() {
        return Err(PerturbError::NoEligiblePair);
    }
    let chosen = dataflow::choose_pairs(&pairs, &mut rng);
    let mut work = unit.clone();
    dataflow::swap_pairs(&mut work, &chosen);
    let notes = chosen
        .iter()
        .map(|p| format!("{}: lines {} and {}", p.method, p.lines.0, p.lines.1))
        .collect();
    finish(
        unit,
        PerturbKind::IndependentSwap,
        seed,
        Draft::plain(work, notes),
    )
}

fn variable_names(unit: &SourceUnit) -> BTreeMap<String, BTreeSet<TypeTag>> {
    let mut out: BTreeMap<String, BTreeSet<TypeTag>> = BTreeMap::new();
    for m in &unit.methods {
        for p in &m.params {
            out.entry(p.name.clone()).or_default().insert(p.ty);
        }
        m.walk(&mut |s| {
            if let StmtKind::VarDecl { name, ty, .. } = &s.kind {
                out.entry(name.clone()).or_default().insert(*ty);
            }
        });
    }
    out
}

/// Give every variable and method a fresh random name.
pub fn name_random(unit: &SourceUnit, seed: u64) -> Result<PerturbedUnit, PerturbError> {
    let mut rng = rng_for(seed);
    let mut taken = identifiers(unit);
    let mut renaming = Renaming::default();
    for v in variable_names(unit).keys() {
        renaming
            .vars
            .insert(v.clone(), fresh_name(&mut rng, &mut taken));
    }
    for m in &unit.methods {
        renaming
            .methods
            .insert(m.name.clone(), fresh_name(&mut rng, &mut taken));
    }
    let mut work = strip_specs(unit);
    rename_unit(&mut work, &renaming);
    let mut rename_map = renaming.vars.clone();
    rename_map.extend(renaming.methods.clone());
    let notes = vec![format!("{} names replaced", rename_map.len())];
    let draft = Draft {
        unit: work,
        renaming,
        scoped: BTreeMap::new(),
        rename_map,
        sites: notes,
    };
    finish(unit, PerturbKind::NameRandom, seed, draft)
}

/// Permute variable names among variables of the same type.
pub fn name_shuffle(unit: &SourceUnit, seed: u64) -> Result<PerturbedUnit, PerturbError> {
    let mut rng = rng_for(seed);
    let mut groups: BTreeMap<TypeTag, Vec<String>> = BTreeMap::new();
    for (name, types) in variable_names(unit) {
        if types.len() == 1 {
            groups
                .entry(*types.iter().next().expect("one type"))
                .or_default()
                .push(name);
        }
    }
    let mut vars = BTreeMap::new();
    for names in groups.values() {
        if names.len() < 2 {
            continue;
        }
        // Sattolo's algorithm: a uniformly random single cycle, so no name
        // stays in place.
        let mut perm = names.clone();
        for i in (1..perm.len()).rev() {
            let j = rng.gen_range(0..i);
            perm.swap(i, j);
        }
        for (from, to) in names.iter().zip(perm) {
            vars.insert(from.clone(), to);
        }
    }
    if vars.is_empty() {
        return Err(PerturbError::NoShufflePossible);
    }
    let renaming = Renaming::vars(vars.clone());
    let mut work = strip_specs(unit);
    rename_unit(&mut work, &renaming);
    let notes = vars.iter().map(|(a, b)| format!("{a} -> {b}")).collect();
    let draft = Draft {
        unit: work,
        renaming,
        scoped: BTreeMap::new(),
        rename_map: vars,
        sites: notes,
    };
    finish(unit, PerturbKind::NameShuffle, seed, draft)
}

pub fn perturb(
    unit: &SourceUnit,
    kind: PerturbKind,
    seed: u64,
) -> Result<PerturbedUnit, PerturbError> {
    match kind {
        PerturbKind::DefUseBreak => defuse_break(unit, seed),
        PerturbKind::IfElseFlip => ifelse_flip(unit, seed),
        PerturbKind::IndependentSwap => independent_swap(unit, seed),
        PerturbKind::NameRandom => name_random(unit, seed),
        PerturbKind::NameShuffle => name_shuffle(unit, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "class A {
        //@ ensures \\result >= a && \\result >= b;
        public static int max(int a, int b) {
            int r = 0;
            int unused = 1;
            if (a > b) {
                r = a;
            } else {
                r = b;
            }
            return r;
        }
    }";

    fn unit() -> SourceUnit {
        parse_unit(SRC).unwrap()
    }

    #[test]
    fn flip_negates_and_swaps() {
        let pu = ifelse_flip(&unit(), 0).unwrap();
        let text = print_unit(&pu.unit);
        assert!(
            text.contains(
                "if (!(a > b)) {\n            r = b;\n        } else {\n            r = a;"
            ),
            "{text}"
        );
        assert_eq!(pu.unit.specs, unit().specs);
    }

    #[test]
    fn shuffle_is_a_derangement_within_types() {
        for seed in 0..20 {
            let pu = name_shuffle(&unit(), seed).unwrap();
            let keys: BTreeSet<&String> = pu.rename_map.keys().collect();
            let values: BTreeSet<&String> = pu.rename_map.values().collect();
            assert_eq!(keys, values);
            assert!(pu.rename_map.iter().all(|(k, v)| k != v));
            assert_eq!(keys.len(), 4);
        }
    }

    #[test]
    fn random_names_are_fresh_and_cover_methods() {
        let pu = name_random(&unit(), 7).unwrap();
        let old = identifiers(&unit());
        assert_eq!(pu.rename_map.len(), 5);
        for new in pu.rename_map.values() {
            assert!(is_fresh_shape(new) && !old.contains(new), "{new}");
        }
        let m = pu.method_name("max");
        assert_ne!(m, "max");
        assert_eq!(pu.unit.methods[0].name, m);
        assert_eq!(pu.unit.specs[0].anchor, Anchor::Method(m));
    }

    #[test]
    fn same_seed_same_variant() {
        for kind in PerturbKind::ALL {
            let a = perturb(&unit(), kind, 11);
            let b = perturb(&unit(), kind, 11);
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn inapplicable_kinds_say_why() {
        let u = parse_unit("class A { public static int f() { return 1; } }").unwrap();
        assert_eq!(
            ifelse_flip(&u, 0).unwrap_err(),
            PerturbError::NoEligibleBranch
        );
        assert_eq!(
            name_shuffle(&u, 0).unwrap_err(),
            PerturbError::NoShufflePossible
        );
        assert_eq!(
            independent_swap(&u, 0).unwrap_err(),
            PerturbError::NoEligiblePair
        );
        assert_eq!(
            defuse_break(&u, 0).unwrap_err(),
            PerturbError::NoEligibleVariable
        );
    }

    #[test]
    fn kinds_round_trip_through_slugs() {
        for k in PerturbKind::ALL {
            assert_eq!(k.slug().parse::<PerturbKind>(), Ok(k));
        }
        assert!("rename".parse::<PerturbKind>().is_err());
    }
}
