//! Scope resolution and type checking.

use std::collections::BTreeMap;

use serde::Serialize;

use super::ast::*;
use super::interval;
use super::LangError;

/// A statement position inside a method: the pre-order index of the
/// statement as visited by [`Stmt::walk`] over the method body, or `None`
/// for the method header (parameter bindings).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Site {
    pub method: String,
    pub stmt: Option<usize>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VarInfo {
    pub name: String,
    pub ty: TypeTag,
    pub is_param: bool,
    pub decl: Site,
    pub defs: Vec<Site>,
    pub uses: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MethodSig {
    pub params: Vec<TypeTag>,
    pub ret: Option<TypeTag>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SymbolTable {
    pub methods: BTreeMap<String, MethodSig>,
    /// Every declared variable, in declaration order per method.
    pub vars: Vec<VarInfo>,
    /// Names visible where the clauses of each anchor are evaluated.
    pub anchor_scopes: BTreeMap<Anchor, Vec<(String, TypeTag)>>,
}

impl SymbolTable {
    pub fn visible_at(&self, anchor: &Anchor) -> &[(String, TypeTag)] {
        self.anchor_scopes
            .get(anchor)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn lookup(&self, anchor: &Anchor, name: &str) -> Option<TypeTag> {
        self.visible_at(anchor)
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| *t)
    }

    pub fn vars_of<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a VarInfo> + 'a {
        self.vars.iter().filter(move |v| v.decl.method == method)
    }

    /// Distinct variable names across the unit with their types. A name
    /// declared with several types appears once per type.
    pub fn var_names(&self) -> Vec<(String, TypeTag)> {
        let mut v: Vec<(String, TypeTag)> =
            self.vars.iter().map(|v| (v.name.clone(), v.ty)).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Result type of `\result` at a method anchor.
    pub fn result_type(&self, anchor: &Anchor) -> Option<TypeTag> {
        match anchor {
            Anchor::Method(m) => self.methods.get(m).and_then(|s| s.ret),
            Anchor::Loop(_) => None,
        }
    }
}

/// What the expression being checked may contain.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ExprCtx {
    pub spec: Option<SpecKind>,
    /// Type of `\result`, when allowed.
    pub result: Option<TypeTag>,
}

impl ExprCtx {
    const CODE: ExprCtx = ExprCtx {
        spec: None,
        result: None,
    };
}

pub(crate) struct TypeEnv<'a> {
    pub methods: &'a BTreeMap<String, MethodSig>,
}

impl TypeEnv<'_> {
    /// Type of `e`. `lookup` resolves free names; quantifier binders are
    /// tracked in `binders`. `on_use` sees every resolved non-binder name.
    pub fn type_of(
        &self,
        e: &Expr,
        ctx: ExprCtx,
        lookup: &dyn Fn(&str) -> Option<TypeTag>,
        binders: &mut Vec<String>,
        on_use: &mut dyn FnMut(&str),
    ) -> Result<TypeTag, LangError> {
        use TypeTag::*;
        let mismatch = |what: &str, got: TypeTag| {
            Err(LangError::Type(format!(
                "{what}: found `{got}` in `{}`",
                super::printer::print_expr(e)
            )))
        };
        Ok(match e {
            Expr::IntLit(_) | Expr::CharLit(_) => Int,
            Expr::BoolLit(_) => Boolean,
            Expr::StringLit(_) => Str,
            Expr::Var(n) => {
                if binders.iter().any(|b| b == n) {
                    Int
                } else if let Some(t) = lookup(n) {
                    on_use(n);
                    t
                } else {
                    return Err(LangError::Scope {
                        name: n.clone(),
                        context: "unknown identifier".into(),
                    });
                }
            }
            Expr::Index(a, i) => {
                let ta = self.type_of(a, ctx, lookup, binders, on_use)?;
                if ta != IntArray {
                    return mismatch("indexing a non-array", ta);
                }
                let ti = self.type_of(i, ctx, lookup, binders, on_use)?;
                if ti != Int {
                    return mismatch("array index must be int", ti);
                }
                Int
            }
            Expr::Length(a) => {
                let ta = self.type_of(a, ctx, lookup, binders, on_use)?;
                if ta != IntArray {
                    return mismatch("`.length` needs an array", ta);
                }
                Int
            }
            Expr::StrLength(a) => {
                let ta = self.type_of(a, ctx, lookup, binders, on_use)?;
                if ta != Str {
                    return mismatch("`.length()` needs a String", ta);
                }
                Int
            }
            Expr::CharAt(s, i) => {
                let ts = self.type_of(s, ctx, lookup, binders, on_use)?;
                if ts != Str {
                    return mismatch("`.charAt` needs a String", ts);
                }
                let ti = self.type_of(i, ctx, lookup, binders, on_use)?;
                if ti != Int {
                    return mismatch("`.charAt` index must be int", ti);
                }
                Int
            }
            Expr::NewArray(n) => {
                let tn = self.type_of(n, ctx, lookup, binders, on_use)?;
                if tn != Int {
                    return mismatch("array size must be int", tn);
                }
                IntArray
            }
            Expr::Unary(op, inner) => {
                let t = self.type_of(inner, ctx, lookup, binders, on_use)?;
                match (op, t) {
                    (UnaryOp::Neg, Int) => Int,
                    (UnaryOp::Not, Boolean) => Boolean,
                    (UnaryOp::Neg, t) => return mismatch("negation needs int", t),
                    (UnaryOp::Not, t) => return mismatch("`!` needs boolean", t),
                }
            }
            Expr::Binary(op, l, r) => {
                if op.is_spec_only() && ctx.spec.is_none() {
                    return Err(LangError::Unsupported(format!(
                        "`{}` outside a specification",
                        op.symbol()
                    )));
                }
                let tl = self.type_of(l, ctx, lookup, binders, on_use)?;
                let tr = self.type_of(r, ctx, lookup, binders, on_use)?;
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                        if tl != Int {
                            return mismatch("arithmetic needs int", tl);
                        }
                        if tr != Int {
                            return mismatch("arithmetic needs int", tr);
                        }
                        Int
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if tl != Int {
                            return mismatch("comparison needs int", tl);
                        }
                        if tr != Int {
                            return mismatch("comparison needs int", tr);
                        }
                        Boolean
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if tl != tr {
                            return mismatch(&format!("comparing `{tl}` with"), tr);
                        }
                        if !matches!(tl, Int | Boolean) {
                            return Err(LangError::Unsupported(format!(
                                "reference comparison of `{tl}`"
                            )));
                        }
                        Boolean
                    }
                    BinOp::And | BinOp::Or | BinOp::Implies | BinOp::Iff => {
                        if tl != Boolean {
                            return mismatch("logical operator needs boolean", tl);
                        }
                        if tr != Boolean {
                            return mismatch("logical operator needs boolean", tr);
                        }
                        Boolean
                    }
                }
            }
            Expr::Call(name, args) => {
                let sig = self.methods.get(name).ok_or_else(|| LangError::Scope {
                    name: name.clone(),
                    context: "unknown method".into(),
                })?;
                if sig.params.len() != args.len() {
                    return Err(LangError::Type(format!(
                        "`{name}` expects {} arguments, got {}",
                        sig.params.len(),
                        args.len()
                    )));
                }
                for (a, want) in args.iter().zip(&sig.params) {
                    let t = self.type_of(a, ctx, lookup, binders, on_use)?;
                    if t != *want {
                        return mismatch(&format!("argument of `{name}` must be `{want}`"), t);
                    }
                }
                match sig.ret {
                    Some(t) => t,
                    None => {
                        return Err(LangError::Type(format!(
                            "void method `{name}` used as a value"
                        )))
                    }
                }
            }
            Expr::Result => match (ctx.spec, ctx.result) {
                (Some(SpecKind::Ensures), Some(t)) => t,
                (Some(SpecKind::Ensures), None) => {
                    return Err(LangError::Type("`\\result` in a void method".into()))
                }
                _ => {
                    return Err(LangError::Scope {
                        name: "\\result".into(),
                        context: "only allowed in ensures clauses".into(),
                    })
                }
            },
            Expr::Old(inner) => {
                if ctx.spec != Some(SpecKind::Ensures) {
                    return Err(LangError::Scope {
                        name: "\\old".into(),
                        context: "only allowed in ensures clauses".into(),
                    });
                }
                self.type_of(inner, ctx, lookup, binders, on_use)?
            }
            Expr::Quant {
                binder,
                range,
                body,
                ..
            } => {
                if ctx.spec.is_none() {
                    return Err(LangError::Unsupported("quantifier in code".into()));
                }
                if binders.contains(binder) || lookup(binder).is_some() {
                    return Err(LangError::Scope {
                        name: binder.clone(),
                        context: "quantifier variable shadows a visible name".into(),
                    });
                }
                if interval::extract(range, binder).is_none() {
                    return Err(LangError::UnboundedQuantifier(super::printer::print_expr(
                        e,
                    )));
                }
                binders.push(binder.clone());
                let tr = self.type_of(range, ctx, lookup, binders, on_use);
                let tb = self.type_of(body, ctx, lookup, binders, on_use);
                binders.pop();
                if tr? != Boolean || tb? != Boolean {
                    return Err(LangError::Type(
                        "quantifier range and body must be boolean".into(),
                    ));
                }
                Boolean
            }
            Expr::Mask => {
                return Err(LangError::Syntax {
                    line: 0,
                    col: 0,
                    message: "unfilled <MASK> placeholder".into(),
                })
            }
        })
    }
}

struct Resolver<'a> {
    env: TypeEnv<'a>,
    method: String,
    return_type: Option<TypeTag>,
    /// Stack of scopes; entries index into `vars`.
    scopes: Vec<Vec<usize>>,
    vars: Vec<VarInfo>,
    counter: usize,
    anchor_scopes: BTreeMap<Anchor, Vec<(String, TypeTag)>>,
}

impl Resolver<'_> {
    fn find(&self, name: &str) -> Option<usize> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .copied()
            .find(|&i| self.vars[i].name == name)
    }

    fn visible(&self) -> Vec<(String, TypeTag)> {
        self.scopes
            .iter()
            .flatten()
            .map(|&i| (self.vars[i].name.clone(), self.vars[i].ty))
            .collect()
    }

    fn declare(
        &mut self,
        name: &str,
        ty: TypeTag,
        site: Site,
        is_param: bool,
    ) -> Result<(), LangError> {
        if self.find(name).is_some() {
            return Err(LangError::Scope {
                name: name.to_string(),
                context: format!("already declared in method `{}`", self.method),
            });
        }
        self.vars.push(VarInfo {
            name: name.to_string(),
            ty,
            is_param,
            decl: site.clone(),
            defs: vec![site],
            uses: Vec::new(),
        });
        let idx = self.vars.len() - 1;
        self.scopes.last_mut().expect("scope").push(idx);
        Ok(())
    }

    fn expr(&mut self, e: &Expr, site: &Site) -> Result<TypeTag, LangError> {
        let visible: Vec<(String, usize)> = self
            .scopes
            .iter()
            .flatten()
            .map(|&i| (self.vars[i].name.clone(), i))
            .collect();
        let vars = &self.vars;
        let lookup = |n: &str| {
            visible
                .iter()
                .rev()
                .find(|(v, _)| v == n)
                .map(|(_, i)| vars[*i].ty)
        };
        let mut used = Vec::new();
        let t = self
            .env
            .type_of(e, ExprCtx::CODE, &lookup, &mut Vec::new(), &mut |n| {
                used.push(n.to_string())
            })?;
        for n in used {
            if let Some(i) = self.find(&n) {
                self.vars[i].uses.push(site.clone());
            }
        }
        Ok(t)
    }

    fn site(&mut self, s: &Stmt) -> Site {
        let site = Site {
            method: self.method.clone(),
            stmt: Some(self.counter),
            line: s.line.0,
        };
        self.counter += 1;
        site
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), LangError> {
        self.scopes.push(Vec::new());
        let r = body.iter().try_for_each(|s| self.stmt(s));
        self.scopes.pop();
        r
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), LangError> {
        let site = self.site(s);
        match &s.kind {
            StmtKind::VarDecl { name, ty, init } => {
                let t = self.expr(init, &site)?;
                if t != *ty {
                    return Err(LangError::Type(format!(
                        "`{name}` declared `{ty}` but initialized with `{t}`"
                    )));
                }
                self.declare(name, *ty, site, false)?;
            }
            StmtKind::Assign { target, op, value } => {
                let idx = self.find(target.name()).ok_or_else(|| LangError::Scope {
                    name: target.name().to_string(),
                    context: "assignment to undeclared variable".into(),
                })?;
                let var_ty = self.vars[idx].ty;
                let slot_ty = match target {
                    LValue::Var(_) => var_ty,
                    LValue::Index(_, i) => {
                        if var_ty != TypeTag::IntArray {
                            return Err(LangError::Type(format!(
                                "indexing non-array `{}`",
                                target.name()
                            )));
                        }
                        if self.expr(i, &site)? != TypeTag::Int {
                            return Err(LangError::Type("array index must be int".into()));
                        }
                        self.vars[idx].uses.push(site.clone());
                        TypeTag::Int
                    }
                };
                let t = self.expr(value, &site)?;
                if t != slot_ty || (*op != AssignOp::Set && slot_ty != TypeTag::Int) {
                    return Err(LangError::Type(format!(
                        "cannot assign `{t}` to `{}` with `{}`",
                        target.name(),
                        op.symbol()
                    )));
                }
                if *op != AssignOp::Set && matches!(target, LValue::Var(_)) {
                    self.vars[idx].uses.push(site.clone());
                }
                self.vars[idx].defs.push(site);
            }
            StmtKind::Call(name, args) => {
                let sig = self.env.methods.get(name).ok_or_else(|| LangError::Scope {
                    name: name.clone(),
                    context: "unknown method".into(),
                })?;
                let want = sig.params.clone();
                if want.len() != args.len() {
                    return Err(LangError::Type(format!(
                        "`{name}` expects {} arguments, got {}",
                        want.len(),
                        args.len()
                    )));
                }
                for (a, w) in args.iter().zip(want) {
                    if self.expr(a, &site)? != w {
                        return Err(LangError::Type(format!(
                            "argument of `{name}` must be `{w}`"
                        )));
                    }
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.cond(cond, &site)?;
                self.block(then_branch)?;
                if let Some(e) = else_branch {
                    self.block(e)?;
                }
            }
            StmtKind::While { id, cond, body } => {
                self.anchor_scopes.insert(Anchor::Loop(*id), self.visible());
                self.cond(cond, &site)?;
                self.block(body)?;
            }
            StmtKind::For {
                id,
                init,
                cond,
                update,
                body,
            } => {
                self.scopes.push(Vec::new());
                let r = (|| {
                    if let Some(i) = init {
                        if i.is_compound() {
                            return Err(LangError::Unsupported("compound for-initializer".into()));
                        }
                        self.stmt(i)?;
                    }
                    self.anchor_scopes.insert(Anchor::Loop(*id), self.visible());
                    self.cond(cond, &site)?;
                    if let Some(u) = update {
                        if matches!(u.kind, StmtKind::VarDecl { .. }) || u.is_compound() {
                            return Err(LangError::Unsupported("declaration in for-update".into()));
                        }
                        self.stmt(u)?;
                    }
                    self.block(body)
                })();
                self.scopes.pop();
                r?;
            }
            StmtKind::Return(e) => match (e, self.return_type) {
                (None, None) => {}
                (Some(e), Some(want)) => {
                    let t = self.expr(e, &site)?;
                    if t != want {
                        return Err(LangError::Type(format!(
                            "returning `{t}` from method `{}` declared `{want}`",
                            self.method
                        )));
                    }
                }
                (None, Some(want)) => {
                    return Err(LangError::Type(format!(
                        "missing return value in method `{}` returning `{want}`",
                        self.method
                    )))
                }
                (Some(_), None) => {
                    return Err(LangError::Type(format!(
                        "void method `{}` returns a value",
                        self.method
                    )))
                }
            },
            StmtKind::Block(b) => self.block(b)?,
        }
        Ok(())
    }

    fn cond(&mut self, cond: &Expr, site: &Site) -> Result<(), LangError> {
        let t = self.expr(cond, site)?;
        if t != TypeTag::Boolean {
            return Err(LangError::Type(format!("condition has type `{t}`")));
        }
        Ok(())
    }
}

/// Bind every variable reference and index def/use sites. Also type-checks
/// all method bodies.
pub fn resolve_scopes(unit: &SourceUnit) -> Result<SymbolTable, LangError> {
    let mut methods = BTreeMap::new();
    for m in &unit.methods {
        let sig = MethodSig {
            params: m.param_types(),
            ret: m.return_type,
        };
        if methods.insert(m.name.clone(), sig).is_some() {
            return Err(LangError::Scope {
                name: m.name.clone(),
                context: "duplicate method".into(),
            });
        }
    }
    let mut all_vars = Vec::new();
    let mut anchor_scopes = BTreeMap::new();
    let mut seen_loops = std::collections::BTreeSet::new();
    for m in &unit.methods {
        for id in m.loops() {
            if !seen_loops.insert(id) {
                return Err(LangError::Scope {
                    name: id.to_string(),
                    context: "duplicate loop id".into(),
                });
            }
        }
        let mut r = Resolver {
            env: TypeEnv { methods: &methods },
            method: m.name.clone(),
            return_type: m.return_type,
            scopes: vec![Vec::new()],
            vars: Vec::new(),
            counter: 0,
            anchor_scopes: BTreeMap::new(),
        };
        for p in &m.params {
            let site = Site {
                method: m.name.clone(),
                stmt: None,
                line: m.line.0,
            };
            r.declare(&p.name, p.ty, site, true)?;
        }
        let params = r.visible();
        r.block(&m.body)?;
        anchor_scopes.insert(Anchor::Method(m.name.clone()), params);
        anchor_scopes.append(&mut r.anchor_scopes);
        all_vars.append(&mut r.vars);
    }
    Ok(SymbolTable {
        methods,
        vars: all_vars,
        anchor_scopes,
    })
}

/// Type-check a specification expression for `kind` at `anchor`.
pub fn check_spec_expr(
    table: &SymbolTable,
    anchor: &Anchor,
    kind: SpecKind,
    expr: &SpecExpr,
) -> Result<(), LangError> {
    if !table.anchor_scopes.contains_key(anchor) {
        return Err(LangError::Scope {
            name: anchor.to_string(),
            context: "unknown anchor".into(),
        });
    }
    match (kind, anchor) {
        (SpecKind::LoopInvariant, Anchor::Method(_)) => {
            return Err(LangError::Type(
                "loop_invariant anchored to a method".into(),
            ))
        }
        (SpecKind::Requires | SpecKind::Ensures, Anchor::Loop(_)) => {
            return Err(LangError::Type(format!("{kind} anchored to a loop")))
        }
        _ => {}
    }
    let env = TypeEnv {
        methods: &table.methods,
    };
    let ctx = ExprCtx {
        spec: Some(kind),
        result: table.result_type(anchor),
    };
    let lookup = |n: &str| table.lookup(anchor, n);
    let t = env.type_of(expr, ctx, &lookup, &mut Vec::new(), &mut |_| {})?;
    if t != TypeTag::Boolean {
        return Err(LangError::Type(format!(
            "specification has type `{t}`, expected boolean"
        )));
    }
    Ok(())
}

/// Type of a sub-expression of a specification, with the given binders in
/// scope. Used by mutation to find same-typed replacements.
pub fn spec_subexpr_type(
    table: &SymbolTable,
    anchor: &Anchor,
    kind: SpecKind,
    expr: &Expr,
    binders: &[String],
) -> Option<TypeTag> {
    let env = TypeEnv {
        methods: &table.methods,
    };
    let ctx = ExprCtx {
        spec: Some(kind),
        result: table.result_type(anchor),
    };
    let lookup = |n: &str| table.lookup(anchor, n);
    env.type_of(expr, ctx, &lookup, &mut binders.to_vec(), &mut |_| {})
        .ok()
}
