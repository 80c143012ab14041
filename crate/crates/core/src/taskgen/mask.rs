//! Placeholder insertion for infilling tasks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lang::interval::conjuncts;
use crate::lang::parser::{parse_clause_syntax, parse_spec_syntax};
use crate::lang::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskClass {
    ArrayIndex,
    Variable,
    MethodName,
    QuantifierBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskSite {
    pub path: Vec<usize>,
    pub class: MaskClass,
}

/// Maskable nodes of `e` in pre-order.
pub fn mask_sites(e: &Expr) -> Vec<MaskSite> {
    fn go(e: &Expr, path: &mut Vec<usize>, out: &mut Vec<MaskSite>) {
        match e {
            Expr::Var(_) => out.push(MaskSite {
                path: path.clone(),
                class: MaskClass::Variable,
            }),
            Expr::Call(name, _) if name != MASK => out.push(MaskSite {
                path: path.clone(),
                class: MaskClass::MethodName,
            }),
            Expr::Index(..) | Expr::CharAt(..) => {
                let mut p = path.clone();
                p.push(1);
                out.push(MaskSite {
                    path: p,
                    class: MaskClass::ArrayIndex,
                });
            }
            Expr::Quant { binder, range, .. } => {
                // Conjuncts of the range that constrain the binder.
                fn bounds(e: &Expr, binder: &str, path: &mut Vec<usize>, out: &mut Vec<MaskSite>) {
                    if let Expr::Binary(BinOp::And, ..) = e {
                        for (i, c) in e.children().into_iter().enumerate() {
                            path.push(i);
                            bounds(c, binder, path, out);
                            path.pop();
                        }
                    } else if conjuncts(e).len() == 1
                        && matches!(e, Expr::Binary(op, ..) if op.is_relational())
                        && e.free_vars().iter().any(|v| v == binder)
                    {
                        out.push(MaskSite {
                            path: path.clone(),
                            class: MaskClass::QuantifierBound,
                        });
                    }
                }
                path.push(0);
                bounds(range, binder, path, out);
                path.pop();
            }
            _ => {}
        }
        for (i, c) in e.children().into_iter().enumerate() {
            path.push(i);
            go(c, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(e, &mut Vec::new(), &mut out);
    // An index that is itself a variable is offered once, as an index.
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|s| seen.insert(s.path.clone()));
    out
}

/// Replace the node at `site` by the placeholder. Returns the masked
/// clause and the exact text removed.
pub fn apply_mask(clause: &SpecClause, site: &MaskSite) -> Option<(SpecClause, String)> {
    let mut masked = clause.clone();
    let node = masked.expr.at_path_mut(&site.path)?;
    let hidden = match (site.class, &mut *node) {
        (MaskClass::MethodName, Expr::Call(name, _)) => std::mem::replace(name, MASK.to_string()),
        (MaskClass::MethodName, _) => return None,
        (_, n) => {
            let text = print_expr(n);
            *n = Expr::Mask;
            text
        }
    };
    Some((masked, hidden))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` has no maskable node")]
pub struct NoMaskableNode(pub String);

/// Mask one seed-chosen node of `spec`.
pub fn mask_spec(
    spec: &SpecClause,
    seed: u64,
) -> Result<(SpecClause, String, MaskSite), NoMaskableNode> {
    let sites = mask_sites(&spec.expr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let site = sites
        .choose(&mut rng)
        .ok_or_else(|| NoMaskableNode(print_clause(spec)))?
        .clone();
    let (masked, hidden) = apply_mask(spec, &site).expect("site comes from this clause");
    Ok((masked, hidden, site))
}

/// Put an answer into the placeholder at `site`. The answer may be the
/// missing fragment or the whole completed clause; a whole clause is
/// accepted only if it agrees with the template everywhere else.
pub fn fill_mask(masked: &SpecClause, site: &MaskSite, answer: &str) -> Option<SpecClause> {
    let answer = answer.trim().trim_end_matches(';').trim();
    let mut filled = masked.clone();
    // `ensures (...)` would otherwise read as a call to `ensures`.
    let first_word: String = answer
        .trim_start_matches("//@")
        .trim_start()
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect();
    if SpecKind::from_keyword(&first_word).is_some() {
        return fill_whole(masked, site, answer);
    }
    if site.class == MaskClass::MethodName {
        let name: String = answer
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
            .collect();
        if let Some(Expr::Call(n, _)) = filled.expr.at_path_mut(&site.path) {
            if !name.is_empty() && name.len() == answer.len() {
                *n = name;
                return Some(filled);
            }
        }
    } else if let Ok(e) = parse_spec_syntax(answer) {
        if !contains_mask(&e) {
            *filled.expr.at_path_mut(&site.path)? = e;
            return Some(filled);
        }
    }
    fill_whole(masked, site, answer)
}

/// Accept a completed clause that agrees with the template everywhere but
/// at `site`.
fn fill_whole(masked: &SpecClause, site: &MaskSite, answer: &str) -> Option<SpecClause> {
    let full = parse_clause_syntax(answer)
        .ok()
        .filter(|(k, _)| *k == masked.kind)
        .map(|(_, e)| e)?;
    let mut candidate = masked.clone();
    match (site.class, full.at_path(&site.path)?) {
        (MaskClass::MethodName, Expr::Call(name, _)) => {
            if let Some(Expr::Call(n, _)) = candidate.expr.at_path_mut(&site.path) {
                *n = name.clone();
            }
        }
        (MaskClass::MethodName, _) => return None,
        (_, node) => *candidate.expr.at_path_mut(&site.path)? = node.clone(),
    }
    (candidate.expr == full).then_some(candidate)
}

fn contains_mask(e: &Expr) -> bool {
    let mut found = false;
    e.walk(&mut |x| found |= matches!(x, Expr::Mask) || matches!(x, Expr::Call(n, _) if n == MASK));
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SRC: &str = "class A {
        //@ ensures (\\forall int k; 0 <= k && k < a.length; a[k] <= \\result);
        //@ ensures \\result == m;
        public static int f(int[] a, int m) { return m; }
    }";

    fn specs() -> Vec<SpecClause> {
        parse_unit(SRC).unwrap().specs
    }

    #[test]
    fn classes_found() {
        let sites = mask_sites(&specs()[0].expr);
        let classes: Vec<MaskClass> = sites.iter().map(|s| s.class).collect();
        assert_eq!(
            classes
                .iter()
                .filter(|c| **c == MaskClass::QuantifierBound)
                .count(),
            2
        );
        assert!(classes.contains(&MaskClass::ArrayIndex));
        assert!(classes.contains(&MaskClass::Variable));
    }

    #[test]
    fn single_variable_masks_deterministically() {
        for seed in 0..5 {
            let (masked, hidden, _) = mask_spec(&specs()[1], seed).unwrap();
            assert_eq!(print_clause(&masked), "ensures \\result == <MASK>;");
            assert_eq!(hidden, "m");
        }
        let bare = SpecClause::new(
            SpecKind::Ensures,
            Anchor::Method("f".into()),
            Expr::BoolLit(true),
        );
        assert!(mask_spec(&bare, 0).is_err());
    }

    #[test]
    fn fill_accepts_fragment_or_whole_clause() {
        let gt = &specs()[0];
        let sites = mask_sites(&gt.expr);
        let bound = sites
            .iter()
            .find(|s| s.class == MaskClass::QuantifierBound)
            .unwrap();
        let (masked, hidden) = apply_mask(gt, bound).unwrap();
        assert_eq!(hidden, "0 <= k");
        assert_eq!(fill_mask(&masked, bound, "0 <= k").as_ref(), Some(gt));
        assert_eq!(
            fill_mask(&masked, bound, &print_clause(gt)).as_ref(),
            Some(gt)
        );
        // A whole clause that changes something else is rejected.
        let other = print_clause(gt).replace("a[k] <=", "a[k] <");
        assert_eq!(fill_mask(&masked, bound, &other), None);
        assert_eq!(fill_mask(&masked, bound, "0 <= <MASK>"), None);
        assert_ne!(fill_mask(&masked, bound, "1 <= k").as_ref(), Some(gt));
    }

    #[test]
    fn method_names_mask_the_callee_only() {
        let u = parse_unit(
            "class A {
                //@ ensures \\result == g(x);
                public static int f(int x) { return g(x); }
                public static int g(int x) { return x; }
            }",
        )
        .unwrap();
        let c = &u.specs[0];
        let site = mask_sites(&c.expr)
            .into_iter()
            .find(|s| s.class == MaskClass::MethodName)
            .unwrap();
        let (masked, hidden) = apply_mask(c, &site).unwrap();
        assert_eq!(hidden, "g");
        assert_eq!(print_clause(&masked), "ensures \\result == <MASK>(x);");
        assert_eq!(fill_mask(&masked, &site, "g").as_ref(), Some(c));
        assert_eq!(fill_mask(&masked, &site, "g(x)"), None);
    }

    proptest! {
        #[test]
        fn masking_round_trips(seed in any::<u64>(), which in 0usize..2) {
            let gt = &specs()[which];
            let (masked, hidden, site) = mask_spec(gt, seed).unwrap();
            let mut holes = 0;
            masked.expr.walk(&mut |x| holes += usize::from(matches!(x, Expr::Mask) || matches!(x, Expr::Call(n, _) if n == MASK)));
            prop_assert_eq!(holes, 1);
            let filled = fill_mask(&masked, &site, &hidden);
            prop_assert_eq!(filled.as_ref(), Some(gt));
        }
    }
}
