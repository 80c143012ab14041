//! Specification mutation: variable replacement, operator replacement and
//! quantifier flips, kept only when the suite refutes the result.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lang::scope::{check_spec_expr, spec_subexpr_type};
use crate::lang::*;
use crate::runtime::Trace;

const RELATIONAL: [BinOp; 6] = [
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::Eq,
    BinOp::Ne,
];
const EQUALITY: [BinOp; 2] = [BinOp::Eq, BinOp::Ne];
const ARITHMETIC: [BinOp; 3] = [BinOp::Add, BinOp::Sub, BinOp::Mul];
/// Bound on draws per counted retry.
const DRAWS_PER_RETRY: u32 = 16;
const LOGICAL: [BinOp; 2] = [BinOp::And, BinOp::Or];
const CONNECTIVE: [BinOp; 2] = [BinOp::Implies, BinOp::Iff];

/// One place a mutation can be applied, with its alternatives.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Var {
        path: Vec<usize>,
        choices: Vec<String>,
    },
    Op {
        path: Vec<usize>,
        choices: Vec<BinOp>,
    },
    Quant {
        path: Vec<usize>,
    },
}

impl Component {
    fn apply(&self, e: &mut Expr, rng: &mut impl Rng) {
        match self {
            Component::Var { path, choices } => {
                if let Some(Expr::Var(n)) = e.at_path_mut(path) {
                    *n = choices.choose(rng).expect("non-empty choices").clone();
                }
            }
            Component::Op { path, choices } => {
                if let Some(Expr::Binary(op, ..)) = e.at_path_mut(path) {
                    *op = *choices.choose(rng).expect("non-empty choices");
                }
            }
            Component::Quant { path } => {
                if let Some(Expr::Quant { kind, .. }) = e.at_path_mut(path) {
                    *kind = match kind {
                        QuantKind::Forall => QuantKind::Exists,
                        QuantKind::Exists => QuantKind::Forall,
                    };
                }
            }
        }
    }
}

/// Mutable components of `clause` in pre-order.
pub fn components(clause: &SpecClause, table: &SymbolTable) -> Vec<Component> {
    fn go(
        e: &Expr,
        path: &mut Vec<usize>,
        binders: &mut Vec<String>,
        clause: &SpecClause,
        table: &SymbolTable,
        out: &mut Vec<Component>,
    ) {
        let type_of = |x: &Expr, binders: &[String]| {
            spec_subexpr_type(table, &clause.anchor, clause.kind, x, binders)
        };
        match e {
            Expr::Var(n) => {
                let ty = if binders.contains(n) {
                    Some(TypeTag::Int)
                } else {
                    table.lookup(&clause.anchor, n)
                };
                if let Some(ty) = ty {
                    let mut choices: Vec<String> = table
                        .visible_at(&clause.anchor)
                        .iter()
                        .filter(|(v, t)| *t == ty && v != n && !binders.contains(v))
                        .map(|(v, _)| v.clone())
                        .collect();
                    if ty == TypeTag::Int {
                        choices.extend(binders.iter().filter(|b| *b != n).cloned());
                    }
                    choices.sort();
                    choices.dedup();
                    if !choices.is_empty() {
                        out.push(Component::Var {
                            path: path.clone(),
                            choices,
                        });
                    }
                }
            }
            Expr::Binary(op, l, _) => {
                let group: &[BinOp] = if EQUALITY.contains(op) {
                    if type_of(l, binders) == Some(TypeTag::Boolean) {
                        &EQUALITY
                    } else {
                        &RELATIONAL
                    }
                } else if RELATIONAL.contains(op) {
                    &RELATIONAL
                } else if ARITHMETIC.contains(op) {
                    &ARITHMETIC
                } else if LOGICAL.contains(op) {
                    &LOGICAL
                } else if CONNECTIVE.contains(op) {
                    &CONNECTIVE
                } else {
                    &[]
                };
                let choices: Vec<BinOp> = group.iter().copied().filter(|o| o != op).collect();
                if !choices.is_empty() {
                    out.push(Component::Op {
                        path: path.clone(),
                        choices,
                    });
                }
            }
            Expr::Quant { .. } => out.push(Component::Quant { path: path.clone() }),
            _ => {}
        }
        let bound = if let Expr::Quant { binder, .. } = e {
            binders.push(binder.clone());
            true
        } else {
            false
        };
        for (i, c) in e.children().into_iter().enumerate() {
            path.push(i);
            go(c, path, binders, clause, table, out);
            path.pop();
        }
        if bound {
            binders.pop();
        }
    }
    let mut out = Vec::new();
    go(
        &clause.expr,
        &mut Vec::new(),
        &mut Vec::new(),
        clause,
        table,
        &mut out,
    );
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("`{0}` has no mutable component")]
    NothingToMutate(String),
    #[error("no refuted mutant of `{clause}` after {attempts} attempts")]
    UnrefutableMutant { clause: String, attempts: u32 },
}

/// Everything a mutant is checked against.
pub struct MutationContext<'a> {
    pub table: &'a SymbolTable,
    pub trace: &'a Trace,
    /// Ground truth of the program: supplies the requires clauses that
    /// guard obligations and the texts mutants must differ from.
    pub ground_truth: &'a [SpecClause],
}

/// Mutate each component with probability 1/2 (at least one), retrying
/// with fresh choices until the suite refutes the mutant. Mutants equal to
/// a ground-truth clause at the same anchor or to an entry of `avoid` are
/// rejected.
pub fn mutate_spec(
    spec: &SpecClause,
    ctx: &MutationContext,
    seed: u64,
    max_retries: u32,
    avoid: &[SpecClause],
) -> Result<SpecClause, MutationError> {
    let comps = components(spec, ctx.table);
    if comps.is_empty() {
        return Err(MutationError::NothingToMutate(print_clause(spec)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forbidden: Vec<String> = ctx
        .ground_truth
        .iter()
        .filter(|g| g.anchor == spec.anchor && g.kind == spec.kind)
        .chain(avoid.iter())
        .map(print_clause)
        .collect();
    // Only candidates that reach runtime checking use up a retry; draws
    // that repeat a known clause or fail the checker are redrawn, up to a
    // fixed cap.
    let retries = max_retries.max(1);
    let mut checked = 0;
    for _ in 0..retries * DRAWS_PER_RETRY {
        if checked == retries {
            break;
        }
        let mut picked: Vec<&Component> = comps.iter().filter(|_| rng.gen_bool(0.5)).collect();
        if picked.is_empty() {
            picked.push(comps.choose(&mut rng).expect("non-empty"));
        }
        let mut m = spec.clone();
        for c in picked {
            c.apply(&mut m.expr, &mut rng);
        }
        if forbidden.contains(&print_clause(&m)) {
            continue;
        }
        if check_spec_expr(ctx.table, &m.anchor, m.kind, &m.expr).is_err() {
            continue;
        }
        checked += 1;
        if !ctx.trace.holds(&m, ctx.ground_truth) {
            return Ok(m);
        }
        log::debug!("mutant `{}` survives the suite", print_clause(&m));
    }
    Err(MutationError::UnrefutableMutant {
        clause: print_clause(spec),
        attempts: max_retries.max(1),
    })
}

/// One well-typed mutant of `spec` that differs from it textually, without
/// any refutation check. Used to probe the strength of a test suite.
pub fn raw_mutant(
    spec: &SpecClause,
    table: &SymbolTable,
    rng: &mut ChaCha8Rng,
) -> Option<SpecClause> {
    let comps = components(spec, table);
    let original = print_clause(spec);
    for _ in 0..8 {
        let mut picked: Vec<&Component> = comps.iter().filter(|_| rng.gen_bool(0.5)).collect();
        if picked.is_empty() {
            picked.push(comps.choose(rng)?);
        }
        let mut m = spec.clone();
        for c in picked {
            c.apply(&mut m.expr, rng);
        }
        if print_clause(&m) != original
            && check_spec_expr(table, &m.anchor, m.kind, &m.expr).is_ok()
        {
            return Some(m);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{TestCase, Value, DEFAULT_STEP_LIMIT};
    use proptest::prelude::*;

    const SRC: &str = "class A {
        //@ requires lo <= hi;
        //@ ensures lo <= \\result && \\result <= hi;
        public static int clamp(int x, int lo, int hi) {
            int r = x;
            if (x < lo) { r = lo; } else { if (x > hi) { r = hi; } }
            return r;
        }
    }";

    fn fixture() -> (SourceUnit, SymbolTable, Trace) {
        let u = parse_unit(SRC).unwrap();
        let t = check_unit(&u).unwrap();
        let tests: Vec<TestCase> = [(-5, 0, 10), (5, 0, 10), (15, 0, 10), (0, 0, 0), (3, -2, 7)]
            .iter()
            .map(|(x, l, h)| {
                TestCase::new(
                    "clamp",
                    vec![Value::Int(*x), Value::Int(*l), Value::Int(*h)],
                )
            })
            .collect();
        let trace = Trace::record(&u, &tests, DEFAULT_STEP_LIMIT);
        (u, t, trace)
    }

    #[test]
    fn components_follow_the_tables() {
        let (u, t, _) = fixture();
        let comps = components(&u.specs[1], &t);
        let ops: Vec<&Vec<BinOp>> = comps
            .iter()
            .filter_map(|c| match c {
                Component::Op { choices, .. } => Some(choices),
                _ => None,
            })
            .collect();
        assert_eq!(ops.len(), 3);
        assert_eq!(ops[0], &vec![BinOp::Or]);
        assert_eq!(ops[1].len(), 5);
        let vars = comps
            .iter()
            .filter(|c| matches!(c, Component::Var { .. }))
            .count();
        assert_eq!(vars, 2);
    }

    #[test]
    fn single_component_is_always_mutated() {
        let u = parse_unit(
            "class A {
                //@ ensures \\result == 1;
                public static int one() { return 1; }
            }",
        )
        .unwrap();
        let t = check_unit(&u).unwrap();
        let trace = Trace::record(&u, &[TestCase::new("one", vec![])], DEFAULT_STEP_LIMIT);
        let ctx = MutationContext {
            table: &t,
            trace: &trace,
            ground_truth: &u.specs,
        };
        for seed in 0..10 {
            let m = mutate_spec(&u.specs[0], &ctx, seed, 8, &[]).unwrap();
            assert_ne!(print_clause(&m), "ensures \\result == 1;");
        }
    }

    #[test]
    fn nothing_to_mutate() {
        let (u, t, trace) = fixture();
        let ctx = MutationContext {
            table: &t,
            trace: &trace,
            ground_truth: &u.specs,
        };
        let c = SpecClause::new(
            SpecKind::Ensures,
            Anchor::Method("clamp".into()),
            Expr::BoolLit(true),
        );
        assert!(matches!(
            mutate_spec(&c, &ctx, 0, 8, &[]),
            Err(MutationError::NothingToMutate(_))
        ));
    }

    proptest! {
        #[test]
        fn emitted_mutants_are_refuted_and_new(seed in any::<u64>(), which in 0usize..2) {
            let (u, t, trace) = fixture();
            let ctx = MutationContext { table: &t, trace: &trace, ground_truth: &u.specs };
            let gt = &u.specs[which];
            if let Ok(m) = mutate_spec(gt, &ctx, seed, 8, &[]) {
                prop_assert!(!trace.holds(&m, &u.specs));
                prop_assert!(u.specs.iter().all(|g| print_clause(g) != print_clause(&m)));
                prop_assert_eq!(&m.anchor, &gt.anchor);
                prop_assert!(check_spec_expr(&t, &m.anchor, m.kind, &m.expr).is_ok());
            }
        }
    }
}
