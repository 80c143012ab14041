//! Tree-walking interpreter with optional state recording at
//! specification check sites.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::coverage::CoverageReport;
use super::value::{RtValue, Value};
use crate::lang::*;

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;
const MAX_CALL_DEPTH: usize = 200;

/// One invocation used to drive execution and runtime checking.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub method: String,
    pub args: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Value>,
}

impl TestCase {
    pub fn new(method: impl Into<String>, args: Vec<Value>) -> Self {
        TestCase {
            method: method.into(),
            args,
            expected: None,
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(Value::to_string).collect();
        write!(f, "{}({})", self.method, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuntimeErrorKind {
    StepLimitExceeded,
    DivisionByZero,
    IndexOutOfBounds {
        index: i32,
        len: usize,
    },
    NegativeArraySize(i32),
    MissingReturn,
    StackOverflow,
    /// The test does not fit the method it targets.
    BadTest(String),
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeErrorKind::StepLimitExceeded => f.write_str("step limit exceeded"),
            RuntimeErrorKind::DivisionByZero => f.write_str("division by zero"),
            RuntimeErrorKind::IndexOutOfBounds { index, len } => {
                write!(f, "index {index} out of bounds for length {len}")
            }
            RuntimeErrorKind::NegativeArraySize(n) => write!(f, "negative array size {n}"),
            RuntimeErrorKind::MissingReturn => f.write_str("method ended without returning"),
            RuntimeErrorKind::StackOverflow => f.write_str("call depth exceeded"),
            RuntimeErrorKind::BadTest(m) => write!(f, "invalid test: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
#[error("{kind} (in `{method}`, line {line})")]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub method: String,
    pub line: u32,
}

/// Program state observed at a check site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub vars: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    /// Parameter values deep-copied at method entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old: Option<BTreeMap<String, Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiteKind {
    Entry(String),
    Exit(String),
    LoopHead(LoopId),
}

impl fmt::Display for SiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteKind::Entry(m) => write!(f, "entry of `{m}`"),
            SiteKind::Exit(m) => write!(f, "exit of `{m}`"),
            SiteKind::LoopHead(l) => write!(f, "head of {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub site: SiteKind,
    /// Invocation the event belongs to; entry, exit and loop-head events
    /// of one call share it.
    pub invocation: u64,
    pub snapshot: StateSnapshot,
}

/// Everything observable from running one test.
#[derive(Debug, Clone)]
pub struct ExecResult {
    pub result: Result<Option<Value>, RuntimeError>,
    /// Arguments after the call; differs from the inputs only for arrays
    /// mutated in place.
    pub args_after: Vec<Value>,
    pub coverage: CoverageReport,
    pub steps: u64,
}

/// Observable behaviour with error locations erased, for differential
/// comparison between program variants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub ret: Result<Option<Value>, RuntimeErrorKind>,
    pub args_after: Vec<Value>,
}

impl ExecResult {
    pub fn outcome(&self) -> Outcome {
        Outcome {
            ret: self.result.clone().map_err(|e| e.kind),
            args_after: self.args_after.clone(),
        }
    }
}

/// Run `test` against `unit`. Pure: identical inputs give identical
/// results and coverage.
pub fn execute(unit: &SourceUnit, test: &TestCase, step_limit: u64) -> ExecResult {
    let mut it = Interp::new(unit, step_limit);
    it.coverage = Some(CoverageReport::for_entry(unit, &test.method));
    let (result, args_after) = it.run_test(test);
    ExecResult {
        result,
        args_after,
        coverage: it.coverage.take().unwrap_or_default(),
        steps: it.steps,
    }
}

/// Run `test` recording a snapshot at every entry, exit and loop head.
pub(crate) fn execute_traced(
    unit: &SourceUnit,
    test: &TestCase,
    step_limit: u64,
) -> (Result<Option<Value>, RuntimeError>, Vec<Event>) {
    let mut it = Interp::new(unit, step_limit);
    it.record = true;
    let (result, _) = it.run_test(test);
    (result, it.events)
}

/// Evaluate a specification expression against a recorded state.
pub fn eval_on_snapshot(
    unit: &SourceUnit,
    expr: &SpecExpr,
    snapshot: &StateSnapshot,
    step_limit: u64,
) -> Result<bool, RuntimeError> {
    let mut it = Interp::new(unit, step_limit);
    let frame = Frame::from_map(&snapshot.vars);
    let old = snapshot.old.as_ref().map(Frame::from_map);
    let result = snapshot.result.as_ref().map(RtValue::from_value);
    let env = Env {
        frame: &frame,
        old: old.as_ref(),
        result: result.as_ref(),
    };
    it.eval(expr, &env, &mut Vec::new())
        .map(|v| v.as_bool())
        .map_err(|e| e.located("<specification>", 0))
}

/// Error raised while evaluating, before a location is attached.
#[derive(Debug)]
struct Fault {
    kind: RuntimeErrorKind,
    located: Option<(String, u32)>,
}

impl Fault {
    fn new(kind: RuntimeErrorKind) -> Self {
        Fault {
            kind,
            located: None,
        }
    }

    fn located(self, method: &str, line: u32) -> RuntimeError {
        let (method, line) = self.located.unwrap_or_else(|| (method.to_string(), line));
        RuntimeError {
            kind: self.kind,
            method,
            line,
        }
    }

    fn locate(mut self, method: &str, line: u32) -> Self {
        if self.located.is_none() {
            self.located = Some((method.to_string(), line));
        }
        self
    }
}

type EResult<T> = Result<T, Fault>;

#[derive(Debug, Default)]
struct Frame {
    scopes: Vec<Vec<(String, RtValue)>>,
}

impl Frame {
    fn from_map(map: &BTreeMap<String, Value>) -> Self {
        Frame {
            scopes: vec![map
                .iter()
                .map(|(k, v)| (k.clone(), RtValue::from_value(v)))
                .collect()],
        }
    }

    fn get(&self, name: &str) -> Option<&RtValue> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    fn get_mut(&mut self, name: &str) -> Option<&mut RtValue> {
        self.scopes
            .iter_mut()
            .rev()
            .flat_map(|s| s.iter_mut().rev())
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    fn declare(&mut self, name: &str, v: RtValue) {
        self.scopes
            .last_mut()
            .expect("frame has a scope")
            .push((name.to_string(), v));
    }

    fn snapshot(&self) -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        for (n, v) in self.scopes.iter().flatten() {
            out.insert(n.clone(), v.to_value());
        }
        out
    }
}

struct Env<'a> {
    frame: &'a Frame,
    old: Option<&'a Frame>,
    result: Option<&'a RtValue>,
}

enum Flow {
    Normal,
    Return(Option<RtValue>),
}

struct Interp<'u> {
    unit: &'u SourceUnit,
    steps: u64,
    limit: u64,
    depth: usize,
    coverage: Option<CoverageReport>,
    record: bool,
    next_invocation: u64,
    events: Vec<Event>,
    method_stack: Vec<(String, u64)>,
}

impl<'u> Interp<'u> {
    fn new(unit: &'u SourceUnit, limit: u64) -> Self {
        Interp {
            unit,
            steps: 0,
            limit,
            depth: 0,
            coverage: None,
            record: false,
            next_invocation: 0,
            events: Vec::new(),
            method_stack: Vec::new(),
        }
    }

    fn tick(&mut self) -> EResult<()> {
        self.steps += 1;
        if self.steps > self.limit {
            Err(Fault::new(RuntimeErrorKind::StepLimitExceeded))
        } else {
            Ok(())
        }
    }

    fn run_test(&mut self, test: &TestCase) -> (Result<Option<Value>, RuntimeError>, Vec<Value>) {
        let bad = |m: String| {
            (
                Err(RuntimeError {
                    kind: RuntimeErrorKind::BadTest(m),
                    method: test.method.clone(),
                    line: 0,
                }),
                test.args.clone(),
            )
        };
        let Some(method) = self.unit.method(&test.method) else {
            return bad(format!("no method `{}`", test.method));
        };
        if method.params.len() != test.args.len() {
            return bad(format!(
                "`{}` takes {} arguments, test has {}",
                method.name,
                method.params.len(),
                test.args.len()
            ));
        }
        for (p, a) in method.params.iter().zip(&test.args) {
            if p.ty != a.type_tag() {
                return bad(format!("argument `{}` must be `{}`, got {a}", p.name, p.ty));
            }
        }
        let args: Vec<RtValue> = test.args.iter().map(RtValue::from_value).collect();
        let result = self
            .call(&test.method, args.clone())
            .map(|v| v.map(|v| v.to_value()))
            .map_err(|f| f.located(&test.method, 0));
        let after = args.iter().map(RtValue::to_value).collect();
        (result, after)
    }

    fn call(&mut self, name: &str, args: Vec<RtValue>) -> EResult<Option<RtValue>> {
        let unit = self.unit;
        let method = unit
            .method(name)
            .ok_or_else(|| Fault::new(RuntimeErrorKind::BadTest(format!("no method `{name}`"))))?;
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Fault::new(RuntimeErrorKind::StackOverflow).locate(name, method.line.0));
        }
        self.tick().map_err(|f| f.locate(name, method.line.0))?;
        let invocation = self.next_invocation;
        self.next_invocation += 1;
        let mut frame = Frame {
            scopes: vec![Vec::new()],
        };
        for (p, a) in method.params.iter().zip(args) {
            frame.declare(&p.name, a);
        }
        // Parameters keep denoting their entry values in postconditions.
        let entry_bindings: Vec<(String, RtValue)> = frame.scopes[0].clone();
        let old = if self.record {
            let old = frame.snapshot();
            self.events.push(Event {
                site: SiteKind::Entry(name.to_string()),
                invocation,
                snapshot: StateSnapshot {
                    vars: old.clone(),
                    result: None,
                    old: None,
                },
            });
            Some(old)
        } else {
            None
        };
        self.depth += 1;
        self.method_stack.push((name.to_string(), invocation));
        let flow = self.block(&method.body, &mut frame);
        self.method_stack.pop();
        self.depth -= 1;
        let ret = match flow? {
            Flow::Return(v) => v,
            Flow::Normal => {
                if method.return_type.is_some() {
                    return Err(
                        Fault::new(RuntimeErrorKind::MissingReturn).locate(name, method.line.0)
                    );
                }
                None
            }
        };
        if let Some(old) = old {
            let vars = entry_bindings
                .iter()
                .map(|(n, v)| (n.clone(), v.to_value()))
                .collect();
            self.events.push(Event {
                site: SiteKind::Exit(name.to_string()),
                invocation,
                snapshot: StateSnapshot {
                    vars,
                    result: ret.as_ref().map(RtValue::to_value),
                    old: Some(old),
                },
            });
        }
        Ok(ret)
    }

    fn current_method(&self) -> &str {
        self.method_stack
            .last()
            .map(|(m, _)| m.as_str())
            .unwrap_or("")
    }

    fn block(&mut self, body: &[Stmt], frame: &mut Frame) -> EResult<Flow> {
        frame.scopes.push(Vec::new());
        let mut flow = Ok(Flow::Normal);
        for s in body {
            match self.stmt(s, frame) {
                Ok(Flow::Normal) => continue,
                other => {
                    flow = other;
                    break;
                }
            }
        }
        frame.scopes.pop();
        flow
    }

    fn code_eval(&mut self, e: &Expr, frame: &Frame) -> EResult<RtValue> {
        let env = Env {
            frame,
            old: None,
            result: None,
        };
        self.eval(e, &env, &mut Vec::new())
    }

    fn stmt(&mut self, s: &Stmt, frame: &mut Frame) -> EResult<Flow> {
        let line = s.line.0;
        let method = self.current_method().to_string();
        self.stmt_inner(s, frame)
            .map_err(|f| f.locate(&method, line))
    }

    fn stmt_inner(&mut self, s: &Stmt, frame: &mut Frame) -> EResult<Flow> {
        self.tick()?;
        let line = s.line.0;
        if let Some(c) = &mut self.coverage {
            if !matches!(s.kind, StmtKind::Block(_)) {
                c.hit_line(line);
            }
        }
        match &s.kind {
            StmtKind::VarDecl { name, init, .. } => {
                let v = self.code_eval(init, frame)?;
                frame.declare(name, v);
            }
            StmtKind::Assign { target, op, value } => match target {
                LValue::Var(name) => {
                    let rhs = self.code_eval(value, frame)?;
                    let new = match op.binop() {
                        None => rhs,
                        Some(b) => {
                            let cur = frame.get(name).expect("resolved").as_int();
                            RtValue::Int(arith(b, cur, rhs.as_int())?)
                        }
                    };
                    *frame.get_mut(name).expect("resolved") = new;
                }
                LValue::Index(name, idx) => {
                    let arr = match frame.get(name).expect("resolved") {
                        RtValue::Arr(a) => Rc::clone(a),
                        _ => unreachable!("type checker admitted non-array store"),
                    };
                    let i = self.code_eval(idx, frame)?.as_int();
                    let store = |arr: &Rc<RefCell<Vec<i32>>>, v: i32| -> EResult<()> {
                        let mut a = arr.borrow_mut();
                        let len = a.len();
                        let slot =
                            usize::try_from(i)
                                .ok()
                                .filter(|&u| u < len)
                                .ok_or(Fault::new(RuntimeErrorKind::IndexOutOfBounds {
                                    index: i,
                                    len,
                                }))?;
                        a[slot] = v;
                        Ok(())
                    };
                    match op.binop() {
                        None => {
                            let v = self.code_eval(value, frame)?.as_int();
                            store(&arr, v)?;
                        }
                        Some(b) => {
                            let cur = index(&arr.borrow(), i)?;
                            let v = self.code_eval(value, frame)?.as_int();
                            store(&arr, arith(b, cur, v)?)?;
                        }
                    }
                }
            },
            StmtKind::Call(name, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.code_eval(a, frame))
                    .collect::<EResult<Vec<_>>>()?;
                self.call(name, vals)?;
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = self.code_eval(cond, frame)?.as_bool();
                if let Some(cov) = &mut self.coverage {
                    cov.hit_branch(line, c);
                }
                if c {
                    return self.block(then_branch, frame);
                } else if let Some(e) = else_branch {
                    return self.block(e, frame);
                }
            }
            StmtKind::While { id, cond, body } => loop {
                self.loop_head(*id, frame);
                self.tick()?;
                let c = self.code_eval(cond, frame)?.as_bool();
                if let Some(cov) = &mut self.coverage {
                    cov.hit_branch(line, c);
                }
                if !c {
                    break;
                }
                if let Flow::Return(v) = self.block(body, frame)? {
                    return Ok(Flow::Return(v));
                }
            },
            StmtKind::For {
                id,
                init,
                cond,
                update,
                body,
            } => {
                frame.scopes.push(Vec::new());
                let r = (|| -> EResult<Flow> {
                    if let Some(i) = init {
                        self.stmt_inner(i, frame)?;
                    }
                    loop {
                        self.loop_head(*id, frame);
                        self.tick()?;
                        let c = self.code_eval(cond, frame)?.as_bool();
                        if let Some(cov) = &mut self.coverage {
                            cov.hit_branch(line, c);
                        }
                        if !c {
                            return Ok(Flow::Normal);
                        }
                        if let Flow::Return(v) = self.block(body, frame)? {
                            return Ok(Flow::Return(v));
                        }
                        if let Some(u) = update {
                            self.stmt_inner(u, frame)?;
                        }
                    }
                })();
                frame.scopes.pop();
                return r;
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.code_eval(e, frame)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Block(b) => return self.block(b, frame),
        }
        Ok(Flow::Normal)
    }

    fn loop_head(&mut self, id: LoopId, frame: &Frame) {
        if self.record {
            let invocation = self.method_stack.last().map(|(_, i)| *i).unwrap_or(0);
            self.events.push(Event {
                site: SiteKind::LoopHead(id),
                invocation,
                snapshot: StateSnapshot {
                    vars: frame.snapshot(),
                    result: None,
                    old: None,
                },
            });
        }
    }

    fn eval(&mut self, e: &Expr, env: &Env, binders: &mut Vec<(String, i32)>) -> EResult<RtValue> {
        Ok(match e {
            Expr::IntLit(v) => RtValue::Int(*v),
            Expr::CharLit(c) => RtValue::Int(*c as i32),
            Expr::BoolLit(b) => RtValue::Bool(*b),
            Expr::StringLit(s) => RtValue::Str(Rc::from(s.as_str())),
            Expr::Var(n) => {
                if let Some((_, v)) = binders.iter().rev().find(|(b, _)| b == n) {
                    RtValue::Int(*v)
                } else {
                    env.frame
                        .get(n)
                        .cloned()
                        .unwrap_or_else(|| panic!("unbound variable `{n}` after scope check"))
                }
            }
            Expr::Index(a, i) => {
                let arr = self.eval(a, env, binders)?;
                let i = self.eval(i, env, binders)?.as_int();
                match arr {
                    RtValue::Arr(a) => RtValue::Int(index(&a.borrow(), i)?),
                    _ => unreachable!(),
                }
            }
            Expr::Length(a) => match self.eval(a, env, binders)? {
                RtValue::Arr(a) => RtValue::Int(a.borrow().len() as i32),
                _ => unreachable!(),
            },
            Expr::StrLength(s) => match self.eval(s, env, binders)? {
                RtValue::Str(s) => RtValue::Int(s.chars().count() as i32),
                _ => unreachable!(),
            },
            Expr::CharAt(s, i) => {
                let s = self.eval(s, env, binders)?;
                let i = self.eval(i, env, binders)?.as_int();
                match s {
                    RtValue::Str(s) => {
                        let len = s.chars().count();
                        let c = usize::try_from(i)
                            .ok()
                            .and_then(|u| s.chars().nth(u))
                            .ok_or(Fault::new(RuntimeErrorKind::IndexOutOfBounds {
                                index: i,
                                len,
                            }))?;
                        RtValue::Int(c as i32)
                    }
                    _ => unreachable!(),
                }
            }
            Expr::NewArray(n) => {
                let n = self.eval(n, env, binders)?.as_int();
                if n < 0 {
                    return Err(Fault::new(RuntimeErrorKind::NegativeArraySize(n)));
                }
                self.steps += n as u64 / 64;
                RtValue::Arr(Rc::new(RefCell::new(vec![0; n as usize])))
            }
            Expr::Unary(UnaryOp::Neg, x) => {
                RtValue::Int(self.eval(x, env, binders)?.as_int().wrapping_neg())
            }
            Expr::Unary(UnaryOp::Not, x) => RtValue::Bool(!self.eval(x, env, binders)?.as_bool()),
            Expr::Binary(op, l, r) => {
                match op {
                    BinOp::And => {
                        return Ok(RtValue::Bool(
                            self.eval(l, env, binders)?.as_bool()
                                && self.eval(r, env, binders)?.as_bool(),
                        ))
                    }
                    BinOp::Or => {
                        return Ok(RtValue::Bool(
                            self.eval(l, env, binders)?.as_bool()
                                || self.eval(r, env, binders)?.as_bool(),
                        ))
                    }
                    BinOp::Implies => {
                        return Ok(RtValue::Bool(
                            !self.eval(l, env, binders)?.as_bool()
                                || self.eval(r, env, binders)?.as_bool(),
                        ))
                    }
                    _ => {}
                }
                let lv = self.eval(l, env, binders)?;
                let rv = self.eval(r, env, binders)?;
                match op {
                    BinOp::Iff | BinOp::Eq | BinOp::Ne => {
                        let eq = match (&lv, &rv) {
                            (RtValue::Int(a), RtValue::Int(b)) => a == b,
                            (RtValue::Bool(a), RtValue::Bool(b)) => a == b,
                            _ => unreachable!("type checker admitted reference comparison"),
                        };
                        RtValue::Bool(if *op == BinOp::Ne { !eq } else { eq })
                    }
                    BinOp::Lt => RtValue::Bool(lv.as_int() < rv.as_int()),
                    BinOp::Le => RtValue::Bool(lv.as_int() <= rv.as_int()),
                    BinOp::Gt => RtValue::Bool(lv.as_int() > rv.as_int()),
                    BinOp::Ge => RtValue::Bool(lv.as_int() >= rv.as_int()),
                    _ => RtValue::Int(arith(*op, lv.as_int(), rv.as_int())?),
                }
            }
            Expr::Call(name, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.eval(a, env, binders))
                    .collect::<EResult<Vec<_>>>()?;
                self.call(name, vals)?
                    .expect("type checker rejects void calls in expressions")
            }
            Expr::Result => env
                .result
                .cloned()
                .expect("\\result evaluated outside a postcondition"),
            Expr::Old(inner) => {
                let old = env.old.expect("\\old evaluated outside a postcondition");
                let old_env = Env {
                    frame: old,
                    old: None,
                    result: env.result,
                };
                self.eval(inner, &old_env, binders)?
            }
            Expr::Quant {
                kind,
                binder,
                range,
                body,
            } => {
                let iv = interval::extract(range, binder)
                    .expect("scope check rejects unbounded quantifiers");
                let mut lo = i64::MIN;
                for (b, off) in &iv.lower {
                    lo = lo.max(i64::from(self.eval(b, env, binders)?.as_int()) + off);
                }
                let mut hi = i64::MAX;
                for (b, off) in &iv.upper {
                    hi = hi.min(i64::from(self.eval(b, env, binders)?.as_int()) + off);
                }
                let lo = lo.max(i64::from(i32::MIN));
                let hi = hi.min(i64::from(i32::MAX) + 1);
                let want_all = *kind == QuantKind::Forall;
                let mut i = lo;
                while i < hi {
                    self.tick()?;
                    binders.push((binder.clone(), i as i32));
                    let r = (|| -> EResult<Option<bool>> {
                        if !self.eval(range, env, binders)?.as_bool() {
                            return Ok(None);
                        }
                        Ok(Some(self.eval(body, env, binders)?.as_bool()))
                    })();
                    binders.pop();
                    match r? {
                        Some(b) if b != want_all => return Ok(RtValue::Bool(!want_all)),
                        _ => {}
                    }
                    i += 1;
                }
                RtValue::Bool(want_all)
            }
            Expr::Mask => panic!("evaluating an unfilled placeholder"),
        })
    }
}

fn index(a: &[i32], i: i32) -> EResult<i32> {
    usize::try_from(i)
        .ok()
        .and_then(|u| a.get(u).copied())
        .ok_or(Fault::new(RuntimeErrorKind::IndexOutOfBounds {
            index: i,
            len: a.len(),
        }))
}

/// 32-bit two's-complement arithmetic with Java semantics.
fn arith(op: BinOp, a: i32, b: i32) -> EResult<i32> {
    Ok(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div | BinOp::Rem if b == 0 => {
            return Err(Fault::new(RuntimeErrorKind::DivisionByZero))
        }
        BinOp::Div => a.wrapping_div(b),
        BinOp::Rem => a.wrapping_rem(b),
        _ => unreachable!("not an arithmetic operator"),
    })
}
