//! Runtime checking of specification clauses against recorded executions.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::coverage::CoverageReport;
use super::interp::{
    eval_on_snapshot, execute, execute_traced, Event, RuntimeError, SiteKind, StateSnapshot,
    TestCase,
};
use super::value::Value;
use crate::lang::*;

/// A concrete state on which a clause evaluated to false or faulted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub test: TestCase,
    pub test_index: usize,
    pub site: SiteKind,
    pub snapshot: StateSnapshot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<RuntimeError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecVerdict {
    /// Position of the clause in the checked list.
    pub spec: usize,
    pub clause: SpecClause,
    /// Runtime-checked correctness: never falsified by the suite.
    pub correct: bool,
    pub counterexample: Option<Counterexample>,
    pub evaluations: u64,
    /// Encounters skipped because the invocation violated a precondition.
    pub skips: u64,
}

impl SpecVerdict {
    pub fn encounters(&self) -> u64 {
        self.evaluations + self.skips
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivalenceError {
    #[error("cannot compare `{a}` with `{b}`: different kind or anchor")]
    AnchorMismatch { a: String, b: String },
}

#[derive(Debug, Clone)]
struct Run {
    events: Vec<Event>,
}

/// Outcome of evaluating a clause on one state; faults compare equal to
/// each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Eval {
    True,
    False,
    Fault,
}

/// Recorded executions of a test suite. Executes each test once so that
/// many clauses can be checked against the same states.
#[derive(Debug)]
pub struct Trace {
    unit: SourceUnit,
    tests: Vec<TestCase>,
    runs: Vec<Run>,
    step_limit: u64,
    probes: RefCell<BTreeMap<(SpecKind, Anchor), Vec<StateSnapshot>>>,
}

const MAX_BASE_STATES: usize = 40;
const MAX_POOL: usize = 10;

impl Trace {
    pub fn record(unit: &SourceUnit, tests: &[TestCase], step_limit: u64) -> Trace {
        let plain = strip_specs(unit);
        let runs = tests
            .iter()
            .map(|t| {
                let (result, events) = execute_traced(&plain, t, step_limit);
                if let Err(e) = result {
                    debug!("test {t} ended with {e}; checking the states reached before it");
                }
                Run { events }
            })
            .collect();
        Trace {
            unit: plain,
            tests: tests.to_vec(),
            runs,
            step_limit,
            probes: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn unit(&self) -> &SourceUnit {
        &self.unit
    }

    pub fn tests(&self) -> &[TestCase] {
        &self.tests
    }

    fn site_of(&self, clause: &SpecClause) -> Option<SiteKind> {
        match (&clause.anchor, clause.kind) {
            (Anchor::Method(m), SpecKind::Requires) => Some(SiteKind::Entry(m.clone())),
            (Anchor::Method(m), SpecKind::Ensures) => Some(SiteKind::Exit(m.clone())),
            (Anchor::Loop(l), SpecKind::LoopInvariant) => Some(SiteKind::LoopHead(*l)),
            _ => None,
        }
    }

    fn eval(&self, expr: &SpecExpr, snap: &StateSnapshot) -> (Eval, Option<RuntimeError>) {
        match eval_on_snapshot(&self.unit, expr, snap, self.step_limit) {
            Ok(true) => (Eval::True, None),
            Ok(false) => (Eval::False, None),
            Err(e) => (Eval::Fault, Some(e)),
        }
    }

    /// Invocations whose entry state violates one of `requires`.
    fn violated(&self, run: &Run, requires: &[&SpecClause]) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        for ev in &run.events {
            if let SiteKind::Entry(m) = &ev.site {
                let broken = requires.iter().any(|c| {
                    matches!(&c.anchor, Anchor::Method(a) if a == m)
                        && self.eval(&c.expr, &ev.snapshot).0 != Eval::True
                });
                if broken {
                    out.insert(ev.invocation);
                }
            }
        }
        out
    }

    /// Check every clause. Requires clauses are checked at entry; an
    /// invocation whose entry state violates a requires clause carries no
    /// obligation for the ensures and loop invariants of that invocation,
    /// and those encounters are counted as skips.
    pub fn check(&self, clauses: &[SpecClause]) -> Vec<SpecVerdict> {
        let requires: Vec<&SpecClause> = clauses
            .iter()
            .filter(|c| c.kind == SpecKind::Requires)
            .collect();
        let mut verdicts: Vec<SpecVerdict> = clauses
            .iter()
            .enumerate()
            .map(|(i, c)| SpecVerdict {
                spec: i,
                clause: c.clone(),
                correct: true,
                counterexample: None,
                evaluations: 0,
                skips: 0,
            })
            .collect();
        let sites: Vec<Option<SiteKind>> = clauses.iter().map(|c| self.site_of(c)).collect();
        for (ti, run) in self.runs.iter().enumerate() {
            let violated = self.violated(run, &requires);
            for ev in &run.events {
                for (v, site) in verdicts.iter_mut().zip(&sites) {
                    if site.as_ref() != Some(&ev.site) {
                        continue;
                    }
                    if v.clause.kind != SpecKind::Requires && violated.contains(&ev.invocation) {
                        debug!(
                            "skipping `{}` at {} of test {}: precondition violated",
                            print_clause(&v.clause),
                            ev.site,
                            self.tests[ti]
                        );
                        v.skips += 1;
                        continue;
                    }
                    v.evaluations += 1;
                    let (r, fault) = self.eval(&v.clause.expr, &ev.snapshot);
                    if r != Eval::True && v.correct {
                        v.correct = false;
                        v.counterexample = Some(Counterexample {
                            test: self.tests[ti].clone(),
                            test_index: ti,
                            site: ev.site.clone(),
                            snapshot: ev.snapshot.clone(),
                            fault,
                        });
                    }
                }
            }
        }
        verdicts
    }

    /// Fast form of `check` for one clause: true iff it is never falsified.
    /// `context` supplies the requires clauses that guard obligations.
    pub fn holds(&self, clause: &SpecClause, context: &[SpecClause]) -> bool {
        let Some(site) = self.site_of(clause) else {
            return false;
        };
        let requires: Vec<&SpecClause> = context
            .iter()
            .filter(|c| c.kind == SpecKind::Requires && clause.kind != SpecKind::Requires)
            .collect();
        for run in &self.runs {
            let violated = if requires.is_empty() {
                BTreeSet::new()
            } else {
                self.violated(run, &requires)
            };
            for ev in &run.events {
                if ev.site == site
                    && !violated.contains(&ev.invocation)
                    && self.eval(&clause.expr, &ev.snapshot).0 != Eval::True
                {
                    return false;
                }
            }
        }
        true
    }

    /// Distinct states recorded at the check site of `kind`/`anchor`.
    pub fn states_at(&self, kind: SpecKind, anchor: &Anchor) -> Vec<StateSnapshot> {
        let probe = SpecClause::new(kind, anchor.clone(), Expr::BoolLit(true));
        let Some(site) = self.site_of(&probe) else {
            return Vec::new();
        };
        let set: BTreeSet<&StateSnapshot> = self
            .runs
            .iter()
            .flat_map(|r| r.events.iter())
            .filter(|e| e.site == site)
            .map(|e| &e.snapshot)
            .collect();
        set.into_iter().cloned().collect()
    }

    /// Whether `a` and `b` agree on every recorded state at their shared
    /// anchor and on counterfactual states derived from those. Derived
    /// states substitute one variable (or `\result`) with another value of
    /// the same type seen at the anchor or a small neighbour of its own
    /// value. A derived state on which either clause faults is ignored.
    pub fn equivalent(&self, a: &SpecClause, b: &SpecClause) -> Result<bool, EquivalenceError> {
        if a.kind != b.kind || a.anchor != b.anchor {
            return Err(EquivalenceError::AnchorMismatch {
                a: print_clause(a),
                b: print_clause(b),
            });
        }
        if a.expr == b.expr {
            return Ok(true);
        }
        let base = self.base_states(a.kind, &a.anchor);
        for s in &base {
            if self.eval(&a.expr, s).0 != self.eval(&b.expr, s).0 {
                return Ok(false);
            }
        }
        let mut relevant: BTreeSet<String> = a.expr.free_vars().into_iter().collect();
        relevant.extend(b.expr.free_vars());
        let mut uses_result = false;
        for e in [&a.expr, &b.expr] {
            e.walk(&mut |x| uses_result |= matches!(x, Expr::Result));
        }
        let pools = value_pools(&base);
        for s in &base {
            for probe in probes_of(s, &relevant, uses_result, &pools) {
                let ra = self.eval(&a.expr, &probe).0;
                if ra == Eval::Fault {
                    continue;
                }
                let rb = self.eval(&b.expr, &probe).0;
                if rb != Eval::Fault && ra != rb {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn base_states(&self, kind: SpecKind, anchor: &Anchor) -> Vec<StateSnapshot> {
        let key = (kind, anchor.clone());
        if let Some(s) = self.probes.borrow().get(&key) {
            return s.clone();
        }
        let all = self.states_at(kind, anchor);
        let picked = if all.len() <= MAX_BASE_STATES {
            all
        } else {
            (0..MAX_BASE_STATES)
                .map(|i| all[i * all.len() / MAX_BASE_STATES].clone())
                .collect()
        };
        self.probes.borrow_mut().insert(key, picked.clone());
        picked
    }
}

/// Same-type values seen across `states`, thinned to a bounded sample.
fn value_pools(states: &[StateSnapshot]) -> BTreeMap<TypeTag, Vec<Value>> {
    let mut pools: BTreeMap<TypeTag, BTreeSet<Value>> = BTreeMap::new();
    for s in states {
        for v in s.vars.values().chain(s.result.iter()) {
            pools.entry(v.type_tag()).or_default().insert(v.clone());
        }
    }
    let extras = [
        Value::Int(-1),
        Value::Int(0),
        Value::Int(1),
        Value::Bool(false),
        Value::Bool(true),
        Value::IntArray(vec![]),
        Value::Str(String::new()),
    ];
    pools
        .into_iter()
        .map(|(t, set)| {
            let all: Vec<Value> = set.into_iter().collect();
            let mut picked: Vec<Value> = if all.len() <= MAX_POOL {
                all
            } else {
                (0..MAX_POOL)
                    .map(|i| all[i * all.len() / MAX_POOL].clone())
                    .collect()
            };
            for e in &extras {
                if e.type_tag() == t && !picked.contains(e) {
                    picked.push(e.clone());
                }
            }
            (t, picked)
        })
        .collect()
}

/// Small edits of a value: integer neighbours, one changed element or
/// character, reversal.
fn neighbours(v: &Value) -> Vec<Value> {
    match v {
        Value::Int(i) => vec![Value::Int(i.wrapping_add(1)), Value::Int(i.wrapping_sub(1))],
        Value::Bool(b) => vec![Value::Bool(!b)],
        Value::IntArray(a) => {
            let mut out = Vec::new();
            for k in [0, a.len() / 2, a.len().saturating_sub(1)] {
                if k < a.len() {
                    let mut up = a.clone();
                    up[k] = up[k].wrapping_add(1);
                    out.push(Value::IntArray(up));
                    let mut down = a.clone();
                    down[k] = down[k].wrapping_sub(1);
                    out.push(Value::IntArray(down));
                }
            }
            let mut rev = a.clone();
            rev.reverse();
            out.push(Value::IntArray(rev));
            out
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let mut out = Vec::new();
            for k in [0, chars.len() / 2, chars.len().saturating_sub(1)] {
                if k < chars.len() {
                    let mut c = chars.clone();
                    c[k] = if c[k] == 'a' { 'b' } else { 'a' };
                    out.push(Value::Str(c.into_iter().collect()));
                }
            }
            out.push(Value::Str(chars.iter().rev().collect()));
            out
        }
    }
}

fn probes_of(
    s: &StateSnapshot,
    relevant: &BTreeSet<String>,
    uses_result: bool,
    pools: &BTreeMap<TypeTag, Vec<Value>>,
) -> Vec<StateSnapshot> {
    let mut out = Vec::new();
    let candidates = |cur: &Value| -> Vec<Value> {
        let mut vals: Vec<Value> = pools.get(&cur.type_tag()).cloned().unwrap_or_default();
        for n in neighbours(cur) {
            if !vals.contains(&n) {
                vals.push(n);
            }
        }
        vals.retain(|v| v != cur);
        vals
    };
    for name in relevant {
        let Some(cur) = s.vars.get(name) else {
            continue;
        };
        // A parameter still holding its entry value moves together with
        // its `\old` image.
        let coupled = s.old.as_ref().and_then(|o| o.get(name)) == Some(cur);
        for v in candidates(cur) {
            let mut p = s.clone();
            p.vars.insert(name.clone(), v.clone());
            if coupled {
                if let Some(o) = p.old.as_mut() {
                    o.insert(name.clone(), v);
                }
            }
            out.push(p);
        }
    }
    if uses_result {
        if let Some(cur) = &s.result {
            for v in candidates(cur) {
                let mut p = s.clone();
                p.result = Some(v);
                out.push(p);
            }
        }
    }
    out
}

/// Check the clauses attached to `unit` against `tests`.
pub fn check_specs(unit: &SourceUnit, tests: &[TestCase]) -> Vec<SpecVerdict> {
    check_specs_with_limit(unit, tests, super::DEFAULT_STEP_LIMIT)
}

pub fn check_specs_with_limit(
    unit: &SourceUnit,
    tests: &[TestCase],
    step_limit: u64,
) -> Vec<SpecVerdict> {
    Trace::record(unit, tests, step_limit).check(&unit.specs)
}

/// Decide whether two clauses at the same anchor are equivalent on the
/// suite.
pub fn check_equivalence(
    a: &SpecClause,
    b: &SpecClause,
    unit: &SourceUnit,
    tests: &[TestCase],
) -> Result<bool, EquivalenceError> {
    if a.kind != b.kind || a.anchor != b.anchor {
        return Err(EquivalenceError::AnchorMismatch {
            a: print_clause(a),
            b: print_clause(b),
        });
    }
    Trace::record(unit, tests, super::DEFAULT_STEP_LIMIT).equivalent(a, b)
}

/// Re-evaluate a clause on the state recorded in a counterexample.
pub fn replay(
    unit: &SourceUnit,
    clause: &SpecClause,
    cx: &Counterexample,
) -> Result<bool, RuntimeError> {
    eval_on_snapshot(unit, &clause.expr, &cx.snapshot, super::DEFAULT_STEP_LIMIT)
}

/// Union of the coverage of every test. Failing tests still contribute the
/// lines they reached.
pub fn measure_coverage(unit: &SourceUnit, tests: &[TestCase]) -> CoverageReport {
    let mut report = CoverageReport::default();
    for t in tests {
        let r = execute(unit, t, super::DEFAULT_STEP_LIMIT);
        if let Err(e) = &r.result {
            debug!("coverage run {t} failed: {e}");
        }
        report.merge(&r.coverage);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::DEFAULT_STEP_LIMIT;

    const SRC: &str = "class A {
        //@ requires n >= 0;
        //@ ensures \\result == n * (n + 1) / 2;
        public static int sum(int n) {
            int s = 0;
            //@ loop_invariant 1 <= i && i <= n + 1;
            //@ loop_invariant s == (i - 1) * i / 2;
            for (int i = 1; i <= n; i++) {
                s += i;
            }
            return s;
        }
    }";

    fn setup() -> (SourceUnit, SymbolTable, Vec<TestCase>) {
        let u = parse_unit(SRC).unwrap();
        let t = check_unit(&u).unwrap();
        let tests = (0..6)
            .map(|n| TestCase::new("sum", vec![Value::Int(n)]))
            .collect();
        (u, t, tests)
    }

    fn clause(t: &SymbolTable, anchor: Anchor, text: &str) -> SpecClause {
        parse_clause(text, t, &anchor).unwrap()
    }

    #[test]
    fn ground_truth_holds_and_wrong_clauses_have_replayable_counterexamples() {
        let (u, t, tests) = setup();
        assert!(check_specs(&u, &tests).iter().all(|v| v.correct));
        let m = Anchor::Method("sum".into());
        let wrong = clause(&t, m.clone(), "ensures \\result == n * n;");
        let trace = Trace::record(&u, &tests, DEFAULT_STEP_LIMIT);
        let v = &trace.check(std::slice::from_ref(&wrong))[0];
        assert!(!v.correct);
        let cx = v.counterexample.as_ref().unwrap();
        assert_eq!(replay(&u, &wrong, cx), Ok(false));
        assert!(!trace.holds(&wrong, &u.specs));
    }

    #[test]
    fn loop_invariants_are_checked_at_every_head() {
        let (u, t, tests) = setup();
        let l = Anchor::Loop(LoopId(1));
        let trace = Trace::record(&u, &tests, DEFAULT_STEP_LIMIT);
        // True on entry and on all but the final head.
        assert!(!trace.holds(&clause(&t, l.clone(), "loop_invariant i <= n;"), &u.specs));
        assert!(trace.holds(&clause(&t, l, "loop_invariant s >= 0;"), &u.specs));
    }

    #[test]
    fn violated_preconditions_skip_obligations() {
        let (u, t, mut tests) = setup();
        tests.push(TestCase::new("sum", vec![Value::Int(-3)]));
        let verdicts = check_specs(&u, &tests);
        let requires = &verdicts[0];
        assert!(!requires.correct);
        assert!(verdicts[1..].iter().all(|v| v.correct && v.skips > 0));
        let _ = t;
    }

    #[test]
    fn faulting_clauses_are_refuted() {
        let u =
            parse_unit("class A { public static int f(int[] a) { return a.length; } }").unwrap();
        let t = check_unit(&u).unwrap();
        let c = clause(&t, Anchor::Method("f".into()), "ensures a[0] >= 0 || true;");
        let tests = vec![TestCase::new("f", vec![Value::IntArray(vec![])])];
        assert!(!Trace::record(&u, &tests, DEFAULT_STEP_LIMIT).holds(&c, &[]));
    }

    #[test]
    fn equivalence_is_reflexive_and_separates_trivial_clauses() {
        let (u, t, tests) = setup();
        let trace = Trace::record(&u, &tests, DEFAULT_STEP_LIMIT);
        for c in &u.specs {
            assert_eq!(trace.equivalent(c, c), Ok(true));
        }
        let m = Anchor::Method("sum".into());
        let gt = clause(&t, m.clone(), "ensures \\result == n * (n + 1) / 2;");
        let commuted = clause(&t, m.clone(), "ensures \\result == (1 + n) * n / 2;");
        assert_eq!(trace.equivalent(&gt, &commuted), Ok(true));
        assert_eq!(
            trace.equivalent(&gt, &clause(&t, m.clone(), "ensures true;")),
            Ok(false)
        );
        let req = clause(&t, m, "requires true;");
        assert!(trace.equivalent(&gt, &req).is_err());
    }

    #[test]
    fn coverage_counts_both_branch_outcomes() {
        let u = parse_unit(
            "class A { public static int f(int x) { if (x > 0) { return 1; } return 0; } }",
        )
        .unwrap();
        let one = measure_coverage(&u, &[TestCase::new("f", vec![Value::Int(1)])]);
        assert!((one.branch_coverage() - 0.5).abs() < 1e-12);
        let both = measure_coverage(
            &u,
            &[
                TestCase::new("f", vec![Value::Int(1)]),
                TestCase::new("f", vec![Value::Int(0)]),
            ],
        );
        assert_eq!(both.branch_coverage(), 1.0);
        assert_eq!(both.line_coverage(), 1.0);
    }
}
