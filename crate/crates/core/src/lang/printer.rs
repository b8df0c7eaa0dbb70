use super::ast::*;
use super::lexer::{PATCH_MARKER, TRUST_COMMENT};

const PREC_UNARY: u8 = 8;
const PREC_POSTFIX: u8 = 9;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Chain(..) => 5,
        Expr::Unary(..) => PREC_UNARY,
        Expr::Int(n) if *n < 0 => PREC_UNARY,
        Expr::Quant(_) => 0,
        _ => PREC_POSTFIX,
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr_at(e, 0, &mut s);
    s
}

fn expr_at(e: &Expr, min: u8, out: &mut String) {
    let p = prec(e);
    let paren = p < min || (matches!(e, Expr::Quant(_)) && min > 0);
    if paren {
        out.push('(');
    }
    match e {
        Expr::Int(n) => out.push_str(&n.to_string()),
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Null => out.push_str("null"),
        Expr::Var(v) => out.push_str(v),
        Expr::Unary(UnOp::Not, a) => {
            out.push('!');
            expr_at(a, PREC_UNARY, out);
        }
        Expr::Unary(UnOp::Neg, a) => {
            out.push('-');
            if let Expr::Int(n) = **a {
                out.push_str(&format!("({n})"));
            } else {
                expr_at(a, PREC_UNARY, out);
            }
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            let (lm, rm) = match op {
                BinOp::Imp => (p + 1, p),
                _ if op.is_comparison() => (p + 1, p + 1),
                _ => (p, p + 1),
            };
            expr_at(l, lm, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            expr_at(r, rm, out);
        }
        Expr::Chain(xs, ops) => {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                    out.push_str(ops[i - 1].symbol());
                    out.push(' ');
                }
                expr_at(x, 6, out);
            }
        }
        Expr::Index(a, i) => {
            expr_at(a, PREC_POSTFIX, out);
            out.push('[');
            expr_at(i, 0, out);
            out.push(']');
        }
        Expr::Length(a) => {
            expr_at(a, PREC_POSTFIX, out);
            out.push_str(".Length");
        }
        Expr::Quant(q) => {
            out.push_str(match q.kind {
                QuantKind::Forall => "forall ",
                QuantKind::Exists => "exists ",
            });
            out.push_str(&q.var);
            out.push_str(" :: ");
            expr_at(&q.lo, 6, out);
            out.push_str(" <= ");
            out.push_str(&q.var);
            out.push_str(" < ");
            expr_at(&q.hi, 6, out);
            match q.kind {
                QuantKind::Forall => {
                    out.push_str(" ==> ");
                    expr_at(&q.body, 2, out);
                }
                QuantKind::Exists => {
                    out.push_str(" && ");
                    expr_at(&q.body, 4, out);
                }
            }
        }
        Expr::ArrayLit(xs) => {
            let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("new int[]{{{}}}", parts.join(", ")));
        }
    }
    if paren {
        out.push(')');
    }
}

struct Printer {
    out: String,
    /// Inside a user-trusted method every node is implicitly trusted.
    implied: bool,
}

impl Printer {
    fn attr(&self, t: TrustTag) -> &'static str {
        if t.trusted && !t.is_patched() && !self.implied {
            " {:trusted}"
        } else {
            ""
        }
    }

    fn line(&mut self, indent: usize, text: &str, t: TrustTag, comment_form: bool) {
        for _ in 0..indent {
            self.out.push(' ');
        }
        self.out.push_str(text);
        if t.is_patched() {
            self.out.push(' ');
            self.out.push_str(PATCH_MARKER);
        } else if comment_form && t.trusted && !self.implied {
            self.out.push(' ');
            self.out.push_str(TRUST_COMMENT);
        }
        self.out.push('\n');
    }

    fn clause(&mut self, indent: usize, kw: &str, c: &Clause) {
        let text = format!("{kw}{} {}", self.attr(c.trust), print_expr(&c.formula));
        self.line(indent, &text, c.trust, false);
    }

    fn method(&mut self, m: &Method) {
        self.implied = false;
        let params = params_of(&m.params);
        let head = format!("method{} {}({params})", self.attr(m.trust), m.name);
        self.line(0, &head, m.trust, false);
        self.implied = m.trust.trusted && !m.trust.is_patched();
        if !m.returns.is_empty() {
            self.out.push_str(&format!("    returns ({})\n", params_of(&m.returns)));
        }
        for c in &m.requires {
            self.clause(2, "requires", c);
        }
        for c in &m.ensures {
            self.clause(2, "ensures", c);
        }
        if let Some(body) = &m.body {
            self.out.push_str("{\n");
            self.block(2, body);
            self.out.push_str("}\n");
        }
        self.implied = false;
    }

    fn block(&mut self, indent: usize, body: &[Stmt]) {
        for s in body {
            self.stmt(indent, s);
        }
    }

    fn stmt(&mut self, indent: usize, s: &Stmt) {
        let a = self.attr(s.trust);
        match &s.kind {
            StmtKind::VarDecl { name, ty, init } => {
                let mut text = format!("var{a} {name}");
                if let Some(t) = ty {
                    text.push_str(&format!(": {t}"));
                }
                if let Some(e) = init {
                    text.push_str(&format!(" := {}", print_expr(e)));
                }
                text.push(';');
                self.line(indent, &text, s.trust, false);
            }
            StmtKind::Assign { target, value } => {
                let text = format!("{target} := {};", print_expr(value));
                self.line(indent, &text, s.trust, true);
            }
            StmtKind::Call { declare, targets, method, args } => {
                let args: Vec<String> = args.iter().map(print_expr).collect();
                let text = format!(
                    "{}{} := {method}({});",
                    if *declare { "var " } else { "" },
                    targets.join(", "),
                    args.join(", ")
                );
                self.line(indent, &text, s.trust, true);
            }
            StmtKind::Assert(e) => {
                let text = format!("assert{a} {};", print_expr(e));
                self.line(indent, &text, s.trust, false);
            }
            StmtKind::Assume(e) => {
                let text = format!("assume{a} {};", print_expr(e));
                self.line(indent, &text, s.trust, false);
            }
            StmtKind::Break => {
                let text = format!("break{a};");
                self.line(indent, &text, s.trust, false);
            }
            StmtKind::If { .. } => self.if_stmt(indent, s, ""),
            StmtKind::While { cond, invariants, decreases, body } => {
                let head = format!("while{a} {}", print_expr(cond));
                self.looped(indent, head, s.trust, invariants, decreases, body);
            }
            StmtKind::For { var, lo, hi, invariants, decreases, body } => {
                let head = format!("for{a} {var} := {} to {}", print_expr(lo), print_expr(hi));
                self.looped(indent, head, s.trust, invariants, decreases, body);
            }
        }
    }

    fn if_stmt(&mut self, indent: usize, s: &Stmt, prefix: &str) {
        let StmtKind::If { cond, then_branch, else_branch } = &s.kind else { return };
        let text = format!("{prefix}if{} {} {{", self.attr(s.trust), print_expr(cond));
        self.line(indent, &text, s.trust, false);
        self.block(indent + 2, then_branch);
        match else_branch {
            None => self.line(indent, "}", TrustTag::default(), false),
            Some(els) => match els.as_slice() {
                [inner @ Stmt { kind: StmtKind::If { .. }, .. }] => self.if_stmt(indent, inner, "} else "),
                _ => {
                    self.line(indent, "} else {", TrustTag::default(), false);
                    self.block(indent + 2, els);
                    self.line(indent, "}", TrustTag::default(), false);
                }
            },
        }
    }

    fn looped(
        &mut self,
        indent: usize,
        head: String,
        trust: TrustTag,
        invariants: &[Clause],
        decreases: &Option<Clause>,
        body: &[Stmt],
    ) {
        if invariants.is_empty() && decreases.is_none() {
            self.line(indent, &format!("{head} {{"), trust, false);
        } else {
            self.line(indent, &head, trust, false);
            for c in invariants {
                self.clause(indent + 2, "invariant", c);
            }
            if let Some(d) = decreases {
                self.clause(indent + 2, "decreases", d);
            }
            self.line(indent, "{", TrustTag::default(), false);
        }
        self.block(indent + 2, body);
        self.line(indent, "}", TrustTag::default(), false);
    }
}

fn params_of(ps: &[Param]) -> String {
    ps.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect::<Vec<_>>().join(", ")
}

pub fn print_method(m: &Method) -> String {
    let mut p = Printer { out: String::new(), implied: false };
    p.method(m);
    p.out
}

pub fn print_program(prog: &Program) -> String {
    let mut p = Printer { out: String::new(), implied: false };
    for (i, m) in prog.methods.iter().enumerate() {
        if i > 0 {
            p.out.push('\n');
        }
        p.method(m);
    }
    p.out
}

/// One-line rendering of a node as it appears in source, without trust markers.
pub fn print_node(n: &NodeRef<'_>) -> String {
    let clause = |kw: &str, c: &Clause| format!("{kw} {}", print_expr(&c.formula));
    match n {
        NodeRef::Requires(_, c) => clause("requires", c),
        NodeRef::Ensures(_, c) => clause("ensures", c),
        NodeRef::Invariant(_, c) => clause("invariant", c),
        NodeRef::Decreases(_, c) => clause("decreases", c),
        NodeRef::Stmt(_, s) => {
            let mut p = Printer { out: String::new(), implied: true };
            let mut bare = (*s).clone();
            bare.trust = TrustTag::default();
            match &s.kind {
                StmtKind::If { cond, .. } => format!("if {}", print_expr(cond)),
                StmtKind::While { cond, .. } => format!("while {}", print_expr(cond)),
                StmtKind::For { var, lo, hi, .. } => {
                    format!("for {var} := {} to {}", print_expr(lo), print_expr(hi))
                }
                _ => {
                    p.stmt(0, &bare);
                    p.out.trim_end().to_string()
                }
            }
        }
    }
}
