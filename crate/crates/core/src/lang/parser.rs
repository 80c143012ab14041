//! Recursive-descent parser for subject units and specification text.

use super::ast::*;
use super::lexer::{tokenize, tokenize_spec, Tok, Token};
use super::LangError;

/// Parse source text into an unchecked unit. Callers normally go through
/// [`super::parse_unit`], which also resolves scopes and type-checks.
pub fn parse_unit_syntax(src: &str) -> Result<SourceUnit, LangError> {
    let tokens = tokenize(src)?;
    let mut p = Parser::new(tokens);
    p.unit()
}

/// Parse a bare specification expression. A trailing `;` is tolerated.
pub fn parse_spec_syntax(src: &str) -> Result<SpecExpr, LangError> {
    let tokens = tokenize_spec(src)?;
    let mut p = Parser::new(tokens);
    let e = p.expr()?;
    p.eat(";");
    p.expect_eof()?;
    Ok(e)
}

/// Parse `requires e;` / `ensures e;` / `loop_invariant e;`, with or
/// without a leading `//@`.
pub fn parse_clause_syntax(src: &str) -> Result<(SpecKind, SpecExpr), LangError> {
    let trimmed = src.trim().trim_start_matches("//@").trim();
    let tokens = tokenize_spec(trimmed)?;
    let mut p = Parser::new(tokens);
    let kind = match &p.peek().tok {
        Tok::Ident(w) => SpecKind::from_keyword(w),
        _ => None,
    }
    .ok_or_else(|| p.err("expected `requires`, `ensures` or `loop_invariant`"))?;
    p.bump();
    let e = p.expr()?;
    p.eat(";");
    p.expect_eof()?;
    Ok((kind, e))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_loop: u32,
    specs: Vec<SpecClause>,
}

type PResult<T> = Result<T, LangError>;

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            next_loop: 1,
            specs: Vec::new(),
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, off: usize) -> &Tok {
        &self.tokens[(self.pos + off).min(self.tokens.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> LangError {
        let t = self.peek();
        LangError::Syntax {
            line: t.line,
            col: t.col,
            message: msg.into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek().tok, Tok::Punct(q) if q == p)
    }

    fn is_ident(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == w)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(format!(
                "expected `{p}`, found {}",
                describe(&self.peek().tok)
            )))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek().tok {
            Tok::Eof => Ok(()),
            ref t => Err(self.err(format!("unexpected {}", describe(t)))),
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().tok.clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            t => Err(self.err(format!("expected identifier, found {}", describe(&t)))),
        }
    }

    // ----- units ---------------------------------------------------------

    fn unit(&mut self) -> PResult<SourceUnit> {
        self.modifiers();
        if !self.is_ident("class") {
            return Err(self.err("expected `class`"));
        }
        self.bump();
        let name = self.ident()?;
        self.expect("{")?;
        let mut methods = Vec::new();
        loop {
            if self.is_punct("}") && !self.peek().in_spec {
                self.bump();
                break;
            }
            if matches!(self.peek().tok, Tok::Eof) {
                return Err(self.err("unexpected end of input, expected `}`"));
            }
            let pending = self.spec_block()?;
            let line = self.peek().line;
            self.modifiers();
            let return_type = if self.is_ident("void") {
                self.bump();
                None
            } else {
                Some(self.type_tag()?)
            };
            let mname = self.ident()?;
            if !self.is_punct("(") {
                return Err(LangError::Unsupported("fields".into()));
            }
            self.bump();
            let mut params = Vec::new();
            if !self.eat(")") {
                loop {
                    let ty = self.type_tag()?;
                    let pname = self.ident()?;
                    params.push(Param { name: pname, ty });
                    if self.eat(")") {
                        break;
                    }
                    self.expect(",")?;
                }
            }
            for (kind, expr) in pending {
                if kind == SpecKind::LoopInvariant {
                    return Err(LangError::Syntax {
                        line,
                        col: 1,
                        message: "loop_invariant must precede a loop".into(),
                    });
                }
                self.specs
                    .push(SpecClause::new(kind, Anchor::Method(mname.clone()), expr));
            }
            let body = self.block()?;
            methods.push(Method {
                name: mname,
                params,
                return_type,
                body,
                line: Line(line),
            });
        }
        self.expect_eof()?;
        Ok(SourceUnit {
            name,
            methods,
            specs: std::mem::take(&mut self.specs),
        })
    }

    fn modifiers(&mut self) {
        while let Tok::Ident(w) = &self.peek().tok {
            if matches!(
                w.as_str(),
                "public" | "private" | "protected" | "static" | "final"
            ) && !self.peek().in_spec
            {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn type_tag(&mut self) -> PResult<TypeTag> {
        let t = self.bump();
        match &t.tok {
            Tok::Ident(w) if w == "int" => {
                if self.is_punct("[") {
                    self.bump();
                    self.expect("]")?;
                    Ok(TypeTag::IntArray)
                } else {
                    Ok(TypeTag::Int)
                }
            }
            Tok::Ident(w) if w == "boolean" => Ok(TypeTag::Boolean),
            Tok::Ident(w) if w == "String" => Ok(TypeTag::Str),
            Tok::Ident(w)
                if matches!(
                    w.as_str(),
                    "long" | "double" | "float" | "char" | "short" | "byte"
                ) =>
            {
                Err(LangError::Unsupported(format!("type `{w}`")))
            }
            other => Err(LangError::Syntax {
                line: t.line,
                col: t.col,
                message: format!("expected type, found {}", describe(other)),
            }),
        }
    }

    fn at_type(&self) -> bool {
        match self.peek_at(0) {
            Tok::Ident(w) if w == "int" || w == "boolean" || w == "String" => true,
            Tok::Ident(w) if matches!(w.as_str(), "long" | "double" | "float" | "char") => {
                matches!(self.peek_at(1), Tok::Ident(_))
            }
            _ => false,
        }
    }

    /// Collect consecutive `//@` clauses.
    fn spec_block(&mut self) -> PResult<Vec<(SpecKind, SpecExpr)>> {
        let mut out = Vec::new();
        while self.peek().in_spec {
            let kind = match &self.peek().tok {
                Tok::Ident(w) => SpecKind::from_keyword(w),
                _ => None,
            };
            let kind = match kind {
                Some(k) => k,
                None => match &self.peek().tok {
                    Tok::Ident(w) => {
                        return Err(LangError::Unsupported(format!(
                            "specification clause `{w}`"
                        )))
                    }
                    _ => return Err(self.err("expected specification clause")),
                },
            };
            self.bump();
            let e = self.expr()?;
            if !(self.is_punct(";") && self.peek().in_spec) {
                return Err(self.err("expected `;` ending the specification clause"));
            }
            self.bump();
            out.push((kind, e));
        }
        Ok(out)
    }

    // ----- statements ----------------------------------------------------

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect("{")?;
        let mut out = Vec::new();
        loop {
            if self.is_punct("}") && !self.peek().in_spec {
                self.bump();
                return Ok(out);
            }
            if matches!(self.peek().tok, Tok::Eof) {
                return Err(self.err("unexpected end of input, expected `}`"));
            }
            out.push(self.stmt()?);
        }
    }

    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_punct("{") {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pending = self.spec_block()?;
        let line = self.peek().line;
        if !pending.is_empty() && !(self.is_ident("while") || self.is_ident("for")) {
            return Err(LangError::Syntax {
                line,
                col: self.peek().col,
                message: "specification comment must precede a method or a loop".into(),
            });
        }
        if self.is_ident("while") {
            self.bump();
            let id = self.fresh_loop();
            self.attach_loop_specs(id, pending, line)?;
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let body = self.body()?;
            return Ok(Stmt::at(StmtKind::While { id, cond, body }, line));
        }
        if self.is_ident("for") {
            self.bump();
            let id = self.fresh_loop();
            self.attach_loop_specs(id, pending, line)?;
            self.expect("(")?;
            let init = if self.is_punct(";") {
                None
            } else {
                Some(Box::new(self.simple_stmt(line)?))
            };
            self.expect(";")?;
            if self.is_punct(";") {
                return Err(LangError::Unsupported("for loop without condition".into()));
            }
            let cond = self.expr()?;
            self.expect(";")?;
            let update = if self.is_punct(")") {
                None
            } else {
                Some(Box::new(self.simple_stmt(line)?))
            };
            self.expect(")")?;
            let body = self.body()?;
            return Ok(Stmt::at(
                StmtKind::For {
                    id,
                    init,
                    cond,
                    update,
                    body,
                },
                line,
            ));
        }
        if self.is_ident("if") {
            self.bump();
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then_branch = self.body()?;
            let else_branch = if self.is_ident("else") {
                self.bump();
                Some(self.body()?)
            } else {
                None
            };
            return Ok(Stmt::at(
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                },
                line,
            ));
        }
        if self.is_ident("return") {
            self.bump();
            let e = if self.is_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect(";")?;
            return Ok(Stmt::at(StmtKind::Return(e), line));
        }
        if self.is_punct("{") {
            let b = self.block()?;
            return Ok(Stmt::at(StmtKind::Block(b), line));
        }
        if let Tok::Ident(w) = &self.peek().tok {
            if matches!(
                w.as_str(),
                "do" | "switch" | "break" | "continue" | "try" | "throw" | "new"
            ) {
                return Err(LangError::Unsupported(format!("`{w}` statement")));
            }
        }
        let s = self.simple_stmt(line)?;
        self.expect(";")?;
        Ok(s)
    }

    /// Declaration, assignment, increment or call, without the trailing `;`.
    fn simple_stmt(&mut self, line: u32) -> PResult<Stmt> {
        if self.at_type() {
            let ty = self.type_tag()?;
            let name = self.ident()?;
            if !self.is_punct("=") {
                return Err(LangError::Unsupported(
                    "declaration without initializer".into(),
                ));
            }
            self.bump();
            let init = self.expr()?;
            return Ok(Stmt::at(StmtKind::VarDecl { name, ty, init }, line));
        }
        if self.is_punct("++") || self.is_punct("--") {
            let op = if self.is_punct("++") {
                AssignOp::Add
            } else {
                AssignOp::Sub
            };
            self.bump();
            let name = self.ident()?;
            return Ok(Stmt::at(
                StmtKind::Assign {
                    target: LValue::Var(name),
                    op,
                    value: Expr::IntLit(1),
                },
                line,
            ));
        }
        let name = self.ident()?;
        if self.is_punct("(") {
            self.bump();
            let args = self.args()?;
            return Ok(Stmt::at(StmtKind::Call(name, args), line));
        }
        let target = if self.eat("[") {
            let i = self.expr()?;
            self.expect("]")?;
            LValue::Index(name, i)
        } else {
            LValue::Var(name)
        };
        let tok = self.bump();
        let op = match tok.tok {
            Tok::Punct("=") => AssignOp::Set,
            Tok::Punct("+=") => AssignOp::Add,
            Tok::Punct("-=") => AssignOp::Sub,
            Tok::Punct("*=") => AssignOp::Mul,
            Tok::Punct("/=") => AssignOp::Div,
            Tok::Punct("%=") => AssignOp::Rem,
            Tok::Punct("++") | Tok::Punct("--") => {
                let op = if tok.tok == Tok::Punct("++") {
                    AssignOp::Add
                } else {
                    AssignOp::Sub
                };
                return Ok(Stmt::at(
                    StmtKind::Assign {
                        target,
                        op,
                        value: Expr::IntLit(1),
                    },
                    line,
                ));
            }
            other => {
                return Err(LangError::Syntax {
                    line: tok.line,
                    col: tok.col,
                    message: format!("expected assignment, found {}", describe(&other)),
                })
            }
        };
        let value = self.expr()?;
        Ok(Stmt::at(StmtKind::Assign { target, op, value }, line))
    }

    fn fresh_loop(&mut self) -> LoopId {
        let id = LoopId(self.next_loop);
        self.next_loop += 1;
        id
    }

    fn attach_loop_specs(
        &mut self,
        id: LoopId,
        pending: Vec<(SpecKind, SpecExpr)>,
        line: u32,
    ) -> PResult<()> {
        for (kind, expr) in pending {
            if kind != SpecKind::LoopInvariant {
                return Err(LangError::Syntax {
                    line,
                    col: 1,
                    message: format!("`{kind}` cannot annotate a loop"),
                });
            }
            self.specs
                .push(SpecClause::new(kind, Anchor::Loop(id), expr));
        }
        Ok(())
    }

    // ----- expressions ---------------------------------------------------

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        if let Tok::Backslash(w) = &self.peek().tok {
            if w == "forall" || w == "exists" {
                return self.quant();
            }
        }
        self.binary(1)
    }

    fn quant(&mut self) -> PResult<Expr> {
        let kind = match self.bump().tok {
            Tok::Backslash(w) if w == "forall" => QuantKind::Forall,
            _ => QuantKind::Exists,
        };
        let ty = self.type_tag()?;
        if ty != TypeTag::Int {
            return Err(LangError::Unsupported(format!("quantifier over `{ty}`")));
        }
        let binder = self.ident()?;
        self.expect(";")?;
        let range = if self.is_punct(";") {
            Expr::BoolLit(true)
        } else {
            self.expr()?
        };
        self.expect(";")?;
        let body = self.expr()?;
        Ok(Expr::Quant {
            kind,
            binder,
            range: Box::new(range),
            body: Box::new(body),
        })
    }

    fn binop(&self) -> Option<BinOp> {
        let p = match self.peek().tok {
            Tok::Punct(p) => p,
            _ => return None,
        };
        Some(match p {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            "==>" => BinOp::Implies,
            "<==>" => BinOp::Iff,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let next = if op.is_right_assoc() { prec } else { prec + 1 };
            let rhs = if matches!(&self.peek().tok, Tok::Backslash(w) if w == "forall" || w == "exists")
            {
                self.quant()?
            } else {
                self.binary(next)?
            };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_punct("-") {
            self.bump();
            if let Tok::Int(v) = self.peek().tok {
                if v == i64::from(i32::MAX) + 1 {
                    self.bump();
                    return self.postfix(Expr::IntLit(i32::MIN));
                }
            }
            let e = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(e)));
        }
        if self.is_punct("!") {
            self.bump();
            let e = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(e)));
        }
        if self.is_punct("++") || self.is_punct("--") {
            return Err(LangError::Unsupported(
                "increment inside an expression".into(),
            ));
        }
        let p = self.primary()?;
        self.postfix(p)
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            if self.eat("[") {
                let i = self.expr()?;
                self.expect("]")?;
                e = Expr::Index(Box::new(e), Box::new(i));
            } else if self.is_punct(".") {
                self.bump();
                let member = self.ident()?;
                match member.as_str() {
                    "length" => {
                        if self.eat("(") {
                            self.expect(")")?;
                            e = Expr::StrLength(Box::new(e));
                        } else {
                            e = Expr::Length(Box::new(e));
                        }
                    }
                    "charAt" => {
                        self.expect("(")?;
                        let i = self.expr()?;
                        self.expect(")")?;
                        e = Expr::CharAt(Box::new(e), Box::new(i));
                    }
                    other => return Err(LangError::Unsupported(format!("member `{other}`"))),
                }
            } else if self.is_punct("++") || self.is_punct("--") {
                return Err(LangError::Unsupported(
                    "increment inside an expression".into(),
                ));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.bump();
        match t.tok {
            Tok::Int(v) => i32::try_from(v)
                .map(Expr::IntLit)
                .map_err(|_| LangError::Syntax {
                    line: t.line,
                    col: t.col,
                    message: "integer literal out of range".into(),
                }),
            Tok::Char(c) => Ok(Expr::CharLit(c)),
            Tok::Str(s) => Ok(Expr::StringLit(s)),
            Tok::Mask => {
                if self.eat("(") {
                    let args = self.args()?;
                    Ok(Expr::Call(MASK.to_string(), args))
                } else {
                    Ok(Expr::Mask)
                }
            }
            Tok::Backslash(w) => match w.as_str() {
                "result" => Ok(Expr::Result),
                "old" => {
                    self.expect("(")?;
                    let e = self.expr()?;
                    self.expect(")")?;
                    Ok(Expr::Old(Box::new(e)))
                }
                _ => {
                    // Quantifier in operand position, e.g. `!\exists ...`.
                    self.pos -= 1;
                    self.quant()
                }
            },
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(w) => match w.as_str() {
                "true" => Ok(Expr::BoolLit(true)),
                "false" => Ok(Expr::BoolLit(false)),
                "null" => Err(LangError::Unsupported("null".into())),
                "new" => {
                    let ty = self.bump();
                    if ty.tok != Tok::Ident("int".into()) {
                        return Err(LangError::Unsupported("object allocation".into()));
                    }
                    self.expect("[")?;
                    let n = self.expr()?;
                    self.expect("]")?;
                    Ok(Expr::NewArray(Box::new(n)))
                }
                "Integer" if self.is_punct(".") => {
                    self.bump();
                    let c = self.ident()?;
                    match c.as_str() {
                        "MAX_VALUE" => Ok(Expr::IntLit(i32::MAX)),
                        "MIN_VALUE" => Ok(Expr::IntLit(i32::MIN)),
                        other => Err(LangError::Unsupported(format!("Integer.{other}"))),
                    }
                }
                _ if is_reserved(&w) => Err(LangError::Syntax {
                    line: t.line,
                    col: t.col,
                    message: format!("unexpected keyword `{w}`"),
                }),
                _ => {
                    if self.eat("(") {
                        let args = self.args()?;
                        Ok(Expr::Call(w, args))
                    } else {
                        Ok(Expr::Var(w))
                    }
                }
            },
            other => Err(LangError::Syntax {
                line: t.line,
                col: t.col,
                message: format!("expected expression, found {}", describe(&other)),
            }),
        }
    }

    /// Arguments after the opening parenthesis.
    fn args(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(")") {
                return Ok(args);
            }
            self.expect(",")?;
        }
    }
}

fn is_reserved(w: &str) -> bool {
    matches!(
        w,
        "class"
            | "public"
            | "private"
            | "protected"
            | "static"
            | "final"
            | "void"
            | "int"
            | "boolean"
            | "String"
            | "if"
            | "else"
            | "while"
            | "for"
            | "return"
            | "new"
            | "true"
            | "false"
            | "null"
            | "do"
            | "switch"
            | "break"
            | "continue"
    )
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Char(c) => format!("{c:?}"),
        Tok::Str(s) => format!("{s:?}"),
        Tok::Backslash(s) => format!("`\\{s}`"),
        Tok::Mask => "`<MASK>`".into(),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".into(),
    }
}
