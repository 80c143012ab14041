//! Syntax tree for subject programs and their embedded specifications.
//!
//! Program expressions and specification expressions share one [`Expr`]
//! type. The specification-only variants (`\result`, `\old`, quantifiers,
//! `==>`, `<==>`) are rejected by the type checker outside of a spec
//! context.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Source line of a statement.
///
/// Lines are carried for diagnostics and coverage only. Two lines always
/// compare equal so that structural equality of trees ignores layout.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Line(pub u32);

impl PartialEq for Line {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Line {}

impl std::hash::Hash for Line {
    fn hash<H: std::hash::Hasher>(&self, _state: &mut H) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeTag {
    Int,
    Boolean,
    IntArray,
    Str,
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeTag::Int => "int",
            TypeTag::Boolean => "boolean",
            TypeTag::IntArray => "int[]",
            TypeTag::Str => "String",
        })
    }
}

/// Identifier of a loop, unique within a unit and numbered from 1 in
/// source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LoopId(pub u32);

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "loop {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Implies,
    Iff,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "==>",
            BinOp::Iff => "<==>",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Iff => 1,
            BinOp::Implies => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Ne => 5,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 6,
            BinOp::Add | BinOp::Sub => 7,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 8,
        }
    }

    pub fn is_right_assoc(self) -> bool {
        matches!(self, BinOp::Implies)
    }

    pub fn is_relational(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem
        )
    }

    pub fn is_spec_only(self) -> bool {
        matches!(self, BinOp::Implies | BinOp::Iff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantKind {
    Forall,
    Exists,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    IntLit(i32),
    CharLit(char),
    BoolLit(bool),
    StringLit(String),
    Var(String),
    Index(Box<Expr>, Box<Expr>),
    /// `a.length`
    Length(Box<Expr>),
    /// `s.length()`
    StrLength(Box<Expr>),
    CharAt(Box<Expr>, Box<Expr>),
    /// `new int[n]`
    NewArray(Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    // Specification-only forms.
    Result,
    Old(Box<Expr>),
    Quant {
        kind: QuantKind,
        binder: String,
        range: Box<Expr>,
        body: Box<Expr>,
    },
    /// Infilling placeholder, printed as `<MASK>`.
    Mask,
}

/// Placeholder text; also the callee name of a call whose method name is
/// masked.
pub const MASK: &str = "<MASK>";

/// Specification expressions are ordinary expressions that may use the
/// spec-only variants.
pub type SpecExpr = Expr;

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Self {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn negate(e: Expr) -> Self {
        Expr::Unary(UnaryOp::Not, Box::new(e))
    }

    /// Direct children, in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::IntLit(_)
            | Expr::CharLit(_)
            | Expr::BoolLit(_)
            | Expr::StringLit(_)
            | Expr::Var(_)
            | Expr::Result
            | Expr::Mask => vec![],
            Expr::Index(a, b) | Expr::CharAt(a, b) | Expr::Binary(_, a, b) => vec![a, b],
            Expr::Length(a)
            | Expr::StrLength(a)
            | Expr::NewArray(a)
            | Expr::Unary(_, a)
            | Expr::Old(a) => vec![a],
            Expr::Call(_, args) => args.iter().collect(),
            Expr::Quant { range, body, .. } => vec![range, body],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::IntLit(_)
            | Expr::CharLit(_)
            | Expr::BoolLit(_)
            | Expr::StringLit(_)
            | Expr::Var(_)
            | Expr::Result
            | Expr::Mask => vec![],
            Expr::Index(a, b) | Expr::CharAt(a, b) | Expr::Binary(_, a, b) => vec![a, b],
            Expr::Length(a)
            | Expr::StrLength(a)
            | Expr::NewArray(a)
            | Expr::Unary(_, a)
            | Expr::Old(a) => vec![a],
            Expr::Call(_, args) => args.iter_mut().collect(),
            Expr::Quant { range, body, .. } => vec![range, body],
        }
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Names referenced but not bound by a quantifier inside `self`.
    pub fn free_vars(&self) -> Vec<String> {
        fn go(e: &Expr, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match e {
                Expr::Var(n) => {
                    if !bound.contains(n) && !out.contains(n) {
                        out.push(n.clone());
                    }
                }
                Expr::Quant {
                    binder,
                    range,
                    body,
                    ..
                } => {
                    bound.push(binder.clone());
                    go(range, bound, out);
                    go(body, bound, out);
                    bound.pop();
                }
                _ => {
                    for c in e.children() {
                        go(c, bound, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Node reached by following child indices from `self`.
    pub fn at_path(&self, path: &[usize]) -> Option<&Expr> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children().get(*i).and_then(|c| c.at_path(rest)),
        }
    }

    pub fn at_path_mut(&mut self, path: &[usize]) -> Option<&mut Expr> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => {
                let mut kids = self.children_mut();
                if *i < kids.len() {
                    kids.swap_remove(*i).at_path_mut(rest)
                } else {
                    None
                }
            }
        }
    }

    /// True if any node is a method call.
    pub fn has_call(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Call(..)));
        found
    }

    /// True if evaluating the expression can raise a runtime fault.
    pub fn may_fault(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            found |= matches!(
                e,
                Expr::Index(..)
                    | Expr::CharAt(..)
                    | Expr::NewArray(_)
                    | Expr::Call(..)
            ) || matches!(
                e,
                Expr::Binary(BinOp::Div | BinOp::Rem, _, d) if !matches!(**d, Expr::IntLit(v) if v != 0)
            )
        });
        found
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Rem => "%=",
        }
    }

    pub fn binop(self) -> Option<BinOp> {
        match self {
            AssignOp::Set => None,
            AssignOp::Add => Some(BinOp::Add),
            AssignOp::Sub => Some(BinOp::Sub),
            AssignOp::Mul => Some(BinOp::Mul),
            AssignOp::Div => Some(BinOp::Div),
            AssignOp::Rem => Some(BinOp::Rem),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LValue {
    Var(String),
    Index(String, Expr),
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) | LValue::Index(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StmtKind {
    VarDecl {
        name: String,
        ty: TypeTag,
        init: Expr,
    },
    Assign {
        target: LValue,
        op: AssignOp,
        value: Expr,
    },
    /// A call evaluated for its effects.
    Call(String, Vec<Expr>),
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Option<Vec<Stmt>>,
    },
    While {
        id: LoopId,
        cond: Expr,
        body: Vec<Stmt>,
    },
    For {
        id: LoopId,
        init: Option<Box<Stmt>>,
        cond: Expr,
        update: Option<Box<Stmt>>,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Block(Vec<Stmt>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: Line,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt {
            kind,
            line: Line(0),
        }
    }

    pub fn at(kind: StmtKind, line: u32) -> Self {
        Stmt {
            kind,
            line: Line(line),
        }
    }

    pub fn loop_id(&self) -> Option<LoopId> {
        match &self.kind {
            StmtKind::While { id, .. } | StmtKind::For { id, .. } => Some(*id),
            _ => None,
        }
    }

    pub fn is_loop(&self) -> bool {
        self.loop_id().is_some()
    }

    /// Nested statement lists directly owned by this statement.
    pub fn blocks(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let mut v = vec![then_branch];
                if let Some(e) = else_branch {
                    v.push(e);
                }
                v
            }
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body],
            StmtKind::Block(b) => vec![b],
            _ => vec![],
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match &mut self.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let mut v = vec![then_branch];
                if let Some(e) = else_branch {
                    v.push(e);
                }
                v
            }
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body],
            StmtKind::Block(b) => vec![b],
            _ => vec![],
        }
    }

    /// Pre-order walk over this statement and every nested statement,
    /// including `for` headers.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        if let StmtKind::For { init, update, .. } = &self.kind {
            if let Some(s) = init {
                s.walk(f);
            }
            if let Some(s) = update {
                s.walk(f);
            }
        }
        for b in self.blocks() {
            for s in b {
                s.walk(f);
            }
        }
    }

    /// Expressions appearing directly in this statement (not in nested
    /// statements).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::VarDecl { init, .. } => vec![init],
            StmtKind::Assign { target, value, .. } => match target {
                LValue::Var(_) => vec![value],
                LValue::Index(_, i) => vec![i, value],
            },
            StmtKind::Call(_, args) => args.iter().collect(),
            StmtKind::If { cond, .. }
            | StmtKind::While { cond, .. }
            | StmtKind::For { cond, .. } => {
                vec![cond]
            }
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Block(_) => vec![],
        }
    }

    /// True if this statement or anything nested in it contains `return`.
    pub fn contains_return(&self) -> bool {
        let mut found = false;
        self.walk(&mut |s| found |= matches!(s.kind, StmtKind::Return(_)));
        found
    }

    pub fn contains_call(&self) -> bool {
        let mut found = false;
        self.walk(&mut |s| {
            found |=
                matches!(s.kind, StmtKind::Call(..)) || s.own_exprs().iter().any(|e| e.has_call())
        });
        found
    }

    pub fn is_compound(&self) -> bool {
        !self.blocks().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: TypeTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub params: Vec<Param>,
    /// `None` for `void`.
    pub return_type: Option<TypeTag>,
    pub body: Vec<Stmt>,
    pub line: Line,
}

impl Method {
    pub fn param_types(&self) -> Vec<TypeTag> {
        self.params.iter().map(|p| p.ty).collect()
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for s in &self.body {
            s.walk(f);
        }
    }

    pub fn loops(&self) -> Vec<LoopId> {
        let mut ids = Vec::new();
        self.walk(&mut |s| {
            if let Some(id) = s.loop_id() {
                ids.push(id);
            }
        });
        ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpecKind {
    Requires,
    Ensures,
    LoopInvariant,
}

impl SpecKind {
    pub fn keyword(self) -> &'static str {
        match self {
            SpecKind::Requires => "requires",
            SpecKind::Ensures => "ensures",
            SpecKind::LoopInvariant => "loop_invariant",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "requires" => Some(SpecKind::Requires),
            "ensures" => Some(SpecKind::Ensures),
            "loop_invariant" | "maintaining" => Some(SpecKind::LoopInvariant),
            _ => None,
        }
    }
}

impl fmt::Display for SpecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Where a specification clause is checked.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Anchor {
    Method(String),
    Loop(LoopId),
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Method(m) => write!(f, "method {m}"),
            Anchor::Loop(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecClause {
    pub kind: SpecKind,
    pub anchor: Anchor,
    pub expr: SpecExpr,
}

impl SpecClause {
    pub fn new(kind: SpecKind, anchor: Anchor, expr: SpecExpr) -> Self {
        SpecClause { kind, anchor, expr }
    }
}

/// One compilation unit: a single class of static methods plus the
/// specifications attached to its methods and loops.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceUnit {
    pub name: String,
    pub methods: Vec<Method>,
    pub specs: Vec<SpecClause>,
}

impl SourceUnit {
    pub fn method(&self, name: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.name == name)
    }

    /// Every loop id with the name of the method that contains it, in
    /// source order.
    pub fn loops(&self) -> Vec<(LoopId, &str)> {
        self.methods
            .iter()
            .flat_map(|m| m.loops().into_iter().map(move |l| (l, m.name.as_str())))
            .collect()
    }

    pub fn method_of_loop(&self, id: LoopId) -> Option<&Method> {
        self.methods.iter().find(|m| m.loops().contains(&id))
    }

    /// The method a clause is evaluated in.
    pub fn anchor_method(&self, anchor: &Anchor) -> Option<&Method> {
        match anchor {
            Anchor::Method(m) => self.method(m),
            Anchor::Loop(l) => self.method_of_loop(*l),
        }
    }

    pub fn specs_at<'a>(&'a self, anchor: &'a Anchor) -> impl Iterator<Item = &'a SpecClause> + 'a {
        self.specs.iter().filter(move |s| &s.anchor == anchor)
    }

    /// Same program with a different specification list.
    pub fn with_specs(&self, specs: Vec<SpecClause>) -> SourceUnit {
        SourceUnit {
            name: self.name.clone(),
            methods: self.methods.clone(),
            specs,
        }
    }
}
