//! Extraction of the finite integer interval a quantifier ranges over.

use super::ast::{BinOp, Expr};

/// Bounds on a quantifier binder. The binder ranges over
/// `[max(lower), min(upper))`, where each bound expression is adjusted by
/// its offset (`lo < i` contributes `lo + 1`, `i <= hi` contributes
/// `hi + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Interval<'a> {
    pub lower: Vec<(&'a Expr, i64)>,
    pub upper: Vec<(&'a Expr, i64)>,
}

/// Split a left-nested `&&` chain into its conjuncts.
pub fn conjuncts(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Binary(BinOp::And, l, r) => {
            let mut v = conjuncts(l);
            v.extend(conjuncts(r));
            v
        }
        other => vec![other],
    }
}

fn mentions(e: &Expr, name: &str) -> bool {
    e.free_vars().iter().any(|v| v == name)
}

fn is_binder(e: &Expr, name: &str) -> bool {
    matches!(e, Expr::Var(n) if n == name)
}

/// Returns `None` unless the range has at least one lower and one upper
/// bound on `binder` that do not themselves mention the binder.
pub fn extract<'a>(range: &'a Expr, binder: &str) -> Option<Interval<'a>> {
    let mut iv = Interval {
        lower: Vec::new(),
        upper: Vec::new(),
    };
    for c in conjuncts(range) {
        let Expr::Binary(op, l, r) = c else { continue };
        if is_binder(l, binder) && !mentions(r, binder) {
            match op {
                BinOp::Ge => iv.lower.push((&**r, 0)),
                BinOp::Gt => iv.lower.push((&**r, 1)),
                BinOp::Lt => iv.upper.push((&**r, 0)),
                BinOp::Le => iv.upper.push((&**r, 1)),
                _ => {}
            }
        } else if is_binder(r, binder) && !mentions(l, binder) {
            match op {
                BinOp::Le => iv.lower.push((&**l, 0)),
                BinOp::Lt => iv.lower.push((&**l, 1)),
                BinOp::Gt => iv.upper.push((&**l, 0)),
                BinOp::Ge => iv.upper.push((&**l, 1)),
                _ => {}
            }
        }
    }
    (!iv.lower.is_empty() && !iv.upper.is_empty()).then_some(iv)
}
