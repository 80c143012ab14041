//! Canonical pretty-printer. Output re-parses to a structurally equal unit.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn print_unit(unit: &SourceUnit) -> String {
    let mut p = Printer {
        out: String::new(),
        unit,
        marker: None,
    };
    p.unit();
    p.out
}

/// Print a unit with a marker comment line placed where the specifications
/// of `anchor` would go.
pub fn print_unit_with_marker(unit: &SourceUnit, anchor: &Anchor, marker: &str) -> String {
    let mut p = Printer {
        out: String::new(),
        unit,
        marker: Some((anchor, marker)),
    };
    p.unit();
    p.out
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e);
    s
}

/// `ensures e;`
pub fn print_clause(c: &SpecClause) -> String {
    format!("{} {};", c.kind.keyword(), print_expr(&c.expr))
}

pub fn print_stmt_inline(s: &Stmt) -> String {
    let mut out = String::new();
    simple(&mut out, s);
    out
}

struct Printer<'a> {
    out: String,
    unit: &'a SourceUnit,
    marker: Option<(&'a Anchor, &'a str)>,
}

impl Printer<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn specs(&mut self, depth: usize, anchor: &Anchor) {
        if let Some((a, m)) = self.marker {
            if a == anchor {
                self.line(depth, m);
            }
        }
        let lines: Vec<String> = self
            .unit
            .specs_at(anchor)
            .map(|c| format!("//@ {}", print_clause(c)))
            .collect();
        for l in lines {
            self.line(depth, &l);
        }
    }

    fn unit(&mut self) {
        let u = self.unit;
        self.line(0, &format!("class {} {{", u.name));
        for (i, m) in u.methods.iter().enumerate() {
            if i > 0 {
                self.out.push('\n');
            }
            self.specs(1, &Anchor::Method(m.name.clone()));
            let ret = m
                .return_type
                .map(|t| t.to_string())
                .unwrap_or_else(|| "void".into());
            let params: Vec<String> = m
                .params
                .iter()
                .map(|p| format!("{} {}", p.ty, p.name))
                .collect();
            self.line(
                1,
                &format!("public static {ret} {}({}) {{", m.name, params.join(", ")),
            );
            self.stmts(2, &m.body);
            self.line(1, "}");
        }
        self.line(0, "}");
    }

    fn stmts(&mut self, depth: usize, body: &[Stmt]) {
        for s in body {
            self.stmt(depth, s);
        }
    }

    fn stmt(&mut self, depth: usize, s: &Stmt) {
        match &s.kind {
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.line(depth, &format!("if ({}) {{", print_expr(cond)));
                self.if_tail(depth, then_branch, else_branch.as_deref());
            }
            StmtKind::While { id, cond, body } => {
                self.specs(depth, &Anchor::Loop(*id));
                self.line(depth, &format!("while ({}) {{", print_expr(cond)));
                self.stmts(depth + 1, body);
                self.line(depth, "}");
            }
            StmtKind::For {
                id,
                init,
                cond,
                update,
                body,
            } => {
                self.specs(depth, &Anchor::Loop(*id));
                let init = init.as_deref().map(print_stmt_inline).unwrap_or_default();
                let update = update.as_deref().map(print_stmt_inline).unwrap_or_default();
                self.line(
                    depth,
                    &format!("for ({init}; {}; {update}) {{", print_expr(cond)),
                );
                self.stmts(depth + 1, body);
                self.line(depth, "}");
            }
            StmtKind::Block(b) => {
                self.line(depth, "{");
                self.stmts(depth + 1, b);
                self.line(depth, "}");
            }
            _ => {
                let text = format!("{};", print_stmt_inline(s));
                self.line(depth, &text);
            }
        }
    }

    /// Body of an if after its header line, folding `else { if .. }` into
    /// `else if`.
    fn if_tail(&mut self, depth: usize, then_branch: &[Stmt], else_branch: Option<&[Stmt]>) {
        self.stmts(depth + 1, then_branch);
        match else_branch {
            None => self.line(depth, "}"),
            Some([single]) if matches!(single.kind, StmtKind::If { .. }) => {
                if let StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } = &single.kind
                {
                    self.line(depth, &format!("}} else if ({}) {{", print_expr(cond)));
                    self.if_tail(depth, then_branch, else_branch.as_deref());
                }
            }
            Some(e) => {
                self.line(depth, "} else {");
                self.stmts(depth + 1, e);
                self.line(depth, "}");
            }
        }
    }
}

fn simple(out: &mut String, s: &Stmt) {
    match &s.kind {
        StmtKind::VarDecl { name, ty, init } => {
            let _ = write!(out, "{ty} {name} = {}", print_expr(init));
        }
        StmtKind::Assign { target, op, value } => {
            match target {
                LValue::Var(n) => out.push_str(n),
                LValue::Index(n, i) => {
                    let _ = write!(out, "{n}[{}]", print_expr(i));
                }
            }
            match (op, value) {
                (AssignOp::Add, Expr::IntLit(1)) => out.push_str("++"),
                (AssignOp::Sub, Expr::IntLit(1)) => out.push_str("--"),
                _ => {
                    let _ = write!(out, " {} {}", op.symbol(), print_expr(value));
                }
            }
        }
        StmtKind::Call(name, args) => {
            let _ = write!(out, "{name}({})", args_text(args));
        }
        StmtKind::Return(None) => out.push_str("return"),
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {}", print_expr(e));
        }
        // Compound statements never appear in `for` headers.
        _ => out.push_str("/* compound */"),
    }
}

fn args_text(args: &[Expr]) -> String {
    args.iter().map(print_expr).collect::<Vec<_>>().join(", ")
}

const UNARY_PREC: u8 = 9;
const POSTFIX_PREC: u8 = 10;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) => UNARY_PREC,
        // Quantifiers are always printed parenthesized.
        _ => POSTFIX_PREC,
    }
}

fn sub(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        expr(out, e);
        out.push(')');
    } else {
        expr(out, e);
    }
}

fn expr(out: &mut String, e: &Expr) {
    match e {
        Expr::IntLit(i32::MAX) => out.push_str("Integer.MAX_VALUE"),
        Expr::IntLit(i32::MIN) => out.push_str("Integer.MIN_VALUE"),
        Expr::IntLit(v) if *v < 0 => {
            let _ = write!(out, "(-{})", -(i64::from(*v)));
        }
        Expr::IntLit(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::CharLit(c) => out.push_str(&char_literal(*c)),
        Expr::BoolLit(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::StringLit(s) => out.push_str(&string_literal(s)),
        Expr::Var(n) => out.push_str(n),
        Expr::Index(a, i) => {
            sub(out, a, prec(a) < POSTFIX_PREC);
            out.push('[');
            expr(out, i);
            out.push(']');
        }
        Expr::Length(a) => {
            sub(out, a, prec(a) < POSTFIX_PREC);
            out.push_str(".length");
        }
        Expr::StrLength(a) => {
            sub(out, a, prec(a) < POSTFIX_PREC);
            out.push_str(".length()");
        }
        Expr::CharAt(s, i) => {
            sub(out, s, prec(s) < POSTFIX_PREC);
            out.push_str(".charAt(");
            expr(out, i);
            out.push(')');
        }
        Expr::NewArray(n) => {
            out.push_str("new int[");
            expr(out, n);
            out.push(']');
        }
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
            });
            // `- -x` would lex as a decrement; negative literals print with
            // their own parentheses.
            let needs = prec(inner) < UNARY_PREC
                || (*op == UnaryOp::Neg && matches!(**inner, Expr::Unary(UnaryOp::Neg, _)));
            sub(out, inner, needs);
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            let lp = prec(l);
            let rp = prec(r);
            // Operands of the logical connectives `<==>` and `==>` are
            // bracketed whenever they are themselves binary.
            let spell_out = matches!(op, BinOp::Iff | BinOp::Implies);
            let left_parens = lp < p
                || (lp == p && op.is_right_assoc())
                || (spell_out && matches!(**l, Expr::Binary(..)));
            let right_parens = rp < p
                || (rp == p && !op.is_right_assoc())
                || (spell_out && matches!(**r, Expr::Binary(..)));
            sub(out, l, left_parens);
            let _ = write!(out, " {} ", op.symbol());
            sub(out, r, right_parens);
        }
        Expr::Call(name, args) => {
            let _ = write!(out, "{name}({})", args_text(args));
        }
        Expr::Result => out.push_str("\\result"),
        Expr::Old(inner) => {
            out.push_str("\\old(");
            expr(out, inner);
            out.push(')');
        }
        Expr::Quant {
            kind,
            binder,
            range,
            body,
        } => {
            let kw = match kind {
                QuantKind::Forall => "\\forall",
                QuantKind::Exists => "\\exists",
            };
            let _ = write!(out, "({kw} int {binder}; ");
            expr(out, range);
            out.push_str("; ");
            expr(out, body);
            out.push(')');
        }
        Expr::Mask => out.push_str("<MASK>"),
    }
}

fn escape(c: char, quote: char) -> String {
    match c {
        '\n' => "\\n".into(),
        '\t' => "\\t".into(),
        '\\' => "\\\\".into(),
        '\0' => "\\0".into(),
        c if c == quote => format!("\\{c}"),
        c => c.to_string(),
    }
}

fn char_literal(c: char) -> String {
    format!("'{}'", escape(c, '\''))
}

fn string_literal(s: &str) -> String {
    let body: String = s.chars().map(|c| escape(c, '"')).collect();
    format!("\"{body}\"")
}
