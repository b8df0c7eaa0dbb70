use super::ast::*;
use super::lexer::{lex, LineMarker, Tok, Token};
use super::LangError;
use std::collections::BTreeMap;

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    markers: BTreeMap<u32, LineMarker>,
    next_id: u32,
    loop_depth: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Parser, LangError> {
        let lexed = lex(src)?;
        Ok(Parser { tokens: lexed.tokens, pos: 0, markers: lexed.markers, next_id: 0, loop_depth: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].span.end
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, LangError> {
        Err(LangError::Syntax { span: self.span(), message: message.into() })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), LangError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected '{s}', found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), LangError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.error(format!("expected '{k}', found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn fresh_id(&mut self) -> StmtId {
        let id = StmtId(self.next_id);
        self.next_id += 1;
        id
    }

    /// `{:trusted}` directly after a keyword.
    fn attrs(&mut self) -> Result<bool, LangError> {
        let mut trusted = false;
        while let Tok::Attr(name) = self.peek().clone() {
            if name != "trusted" {
                return self.error(format!("unknown attribute {{:{name}}}"));
            }
            trusted = true;
            self.bump();
        }
        Ok(trusted)
    }

    fn trust_for(&self, line: u32, attr: bool) -> TrustTag {
        match self.markers.get(&line) {
            Some(LineMarker::Patched) => TrustTag::patched(),
            Some(LineMarker::Trusted) => TrustTag::user(),
            None if attr => TrustTag::user(),
            None => TrustTag::default(),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn program(&mut self, source_name: &str) -> Result<Program, LangError> {
        let mut methods = Vec::new();
        while !self.at_eof() {
            methods.push(self.method()?);
        }
        Ok(Program { methods, source_name: source_name.to_string() })
    }

    pub fn method(&mut self) -> Result<Method, LangError> {
        let start = self.span();
        self.expect_kw("method")?;
        let attr = self.attrs()?;
        let name = self.ident()?;
        let params = self.param_list()?;
        let returns = if self.eat_kw("returns") { self.param_list()? } else { Vec::new() };
        let mut requires = Vec::new();
        let mut ensures = Vec::new();
        loop {
            if self.is_kw("requires") {
                self.bump();
                requires.push(self.clause_after_kw(self.tokens[self.pos - 1].span)?);
            } else if self.is_kw("ensures") {
                self.bump();
                ensures.push(self.clause_after_kw(self.tokens[self.pos - 1].span)?);
            } else {
                break;
            }
        }
        let (body, body_span) = if self.is_sym("{") {
            let sp = self.span();
            (Some(self.block()?), sp)
        } else {
            (None, Span::default())
        };
        let trust = self.trust_for(start.line, attr);
        Ok(Method {
            name,
            span: Span::new(start.start, self.prev_end(), start.line, start.col),
            trust,
            params,
            returns,
            requires,
            ensures,
            body,
            body_span,
        })
    }

    fn param_list(&mut self) -> Result<Vec<Param>, LangError> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if !self.is_sym(")") {
            loop {
                let name = self.ident()?;
                self.expect_sym(":")?;
                let ty = self.ty()?;
                out.push(Param { name, ty });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(out)
    }

    fn ty(&mut self) -> Result<Type, LangError> {
        if self.eat_kw("int") {
            Ok(Type::Int)
        } else if self.eat_kw("bool") {
            Ok(Type::Bool)
        } else if self.eat_kw("array") {
            self.expect_sym("<")?;
            self.expect_kw("int")?;
            self.expect_sym(">")?;
            Ok(Type::Array)
        } else {
            self.error(format!("expected a type, found {}", describe(self.peek())))
        }
    }

    /// Clause body after its keyword; optional trailing `;`.
    fn clause_after_kw(&mut self, kw_span: Span) -> Result<Clause, LangError> {
        let id = self.fresh_id();
        let attr = self.attrs()?;
        let formula = self.expr()?;
        self.eat_sym(";");
        Ok(Clause {
            id,
            span: Span::new(kw_span.start, self.prev_end(), kw_span.line, kw_span.col),
            trust: self.trust_for(kw_span.line, attr),
            formula,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, LangError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if self.at_eof() {
                return self.error("unexpected end of input, expected '}'");
            }
            out.push(self.stmt()?);
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    pub fn stmt(&mut self) -> Result<Stmt, LangError> {
        let start = self.span();
        let id = self.fresh_id();
        let mut attr = false;
        let kind = match self.peek().clone() {
            Tok::Kw("var") => {
                self.bump();
                attr = self.attrs()?;
                let name = self.ident()?;
                let ty = if self.eat_sym(":") { Some(self.ty()?) } else { None };
                if self.eat_sym(":=") {
                    if let (Tok::Ident(callee), Tok::Sym("(")) = (self.peek().clone(), self.peek_at(1).clone()) {
                        self.bump();
                        let args = self.args()?;
                        self.expect_sym(";")?;
                        StmtKind::Call { declare: true, targets: vec![name], method: callee, args }
                    } else {
                        let init = self.expr()?;
                        self.expect_sym(";")?;
                        StmtKind::VarDecl { name, ty, init: Some(init) }
                    }
                } else {
                    self.expect_sym(";")?;
                    if ty.is_none() {
                        return Err(LangError::Syntax {
                            span: start,
                            message: "variable declaration needs a type or an initializer".into(),
                        });
                    }
                    StmtKind::VarDecl { name, ty, init: None }
                }
            }
            Tok::Kw("assert") => {
                self.bump();
                attr = self.attrs()?;
                let e = self.expr()?;
                self.expect_sym(";")?;
                StmtKind::Assert(e)
            }
            Tok::Kw("assume") => {
                self.bump();
                attr = self.attrs()?;
                let e = self.expr()?;
                self.expect_sym(";")?;
                StmtKind::Assume(e)
            }
            Tok::Kw("break") => {
                self.bump();
                attr = self.attrs()?;
                if self.loop_depth == 0 {
                    return Err(LangError::Syntax { span: start, message: "break outside of a loop".into() });
                }
                self.expect_sym(";")?;
                StmtKind::Break
            }
            Tok::Kw("if") => {
                self.bump();
                attr = self.attrs()?;
                self.if_rest()?
            }
            Tok::Kw("while") => {
                self.bump();
                attr = self.attrs()?;
                let cond = self.expr()?;
                let (invariants, decreases) = self.loop_specs()?;
                self.loop_depth += 1;
                let body = self.block();
                self.loop_depth -= 1;
                StmtKind::While { cond, invariants, decreases, body: body? }
            }
            Tok::Kw("for") => {
                self.bump();
                attr = self.attrs()?;
                let var = self.ident()?;
                self.expect_sym(":=")?;
                let lo = self.expr()?;
                self.expect_kw("to")?;
                let hi = self.expr()?;
                let (invariants, decreases) = self.loop_specs()?;
                self.loop_depth += 1;
                let body = self.block();
                self.loop_depth -= 1;
                StmtKind::For { var, lo, hi, invariants, decreases, body: body? }
            }
            Tok::Ident(_) => {
                let mut targets = vec![self.ident()?];
                while self.eat_sym(",") {
                    targets.push(self.ident()?);
                }
                self.expect_sym(":=")?;
                if let (Tok::Ident(callee), Tok::Sym("(")) = (self.peek().clone(), self.peek_at(1).clone()) {
                    self.bump();
                    let args = self.args()?;
                    self.expect_sym(";")?;
                    StmtKind::Call { declare: false, targets, method: callee, args }
                } else {
                    if targets.len() != 1 {
                        return self.error("multiple assignment targets need a method call");
                    }
                    let value = self.expr()?;
                    self.expect_sym(";")?;
                    StmtKind::Assign { target: targets.pop().unwrap_or_default(), value }
                }
            }
            other => return self.error(format!("expected a statement, found {}", describe(&other))),
        };
        Ok(Stmt {
            id,
            span: Span::new(start.start, self.prev_end(), start.line, start.col),
            trust: self.trust_for(start.line, attr),
            kind,
        })
    }

    fn if_rest(&mut self) -> Result<StmtKind, LangError> {
        let cond = self.expr()?;
        let then_branch = self.block()?;
        let else_branch = if self.eat_kw("else") {
            if self.is_kw("if") {
                Some(vec![self.stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(StmtKind::If { cond, then_branch, else_branch })
    }

    fn loop_specs(&mut self) -> Result<(Vec<Clause>, Option<Clause>), LangError> {
        let mut invariants = Vec::new();
        let mut decreases = None;
        loop {
            if self.is_kw("invariant") {
                let sp = self.bump().span;
                invariants.push(self.clause_after_kw(sp)?);
            } else if self.is_kw("decreases") {
                let sp = self.bump().span;
                if decreases.is_some() {
                    return Err(LangError::Syntax { span: sp, message: "duplicate decreases clause".into() });
                }
                decreases = Some(self.clause_after_kw(sp)?);
            } else {
                break;
            }
        }
        Ok((invariants, decreases))
    }

    fn args(&mut self) -> Result<Vec<Expr>, LangError> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if !self.is_sym(")") {
            loop {
                out.push(self.expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(out)
    }

    pub fn expr(&mut self) -> Result<Expr, LangError> {
        self.iff()
    }

    fn iff(&mut self) -> Result<Expr, LangError> {
        let mut l = self.imp()?;
        while self.eat_sym("<==>") {
            let r = self.imp()?;
            l = Expr::bin(BinOp::Iff, l, r);
        }
        Ok(l)
    }

    fn imp(&mut self) -> Result<Expr, LangError> {
        let l = self.or()?;
        if self.eat_sym("==>") {
            let r = self.imp()?;
            return Ok(Expr::bin(BinOp::Imp, l, r));
        }
        Ok(l)
    }

    fn or(&mut self) -> Result<Expr, LangError> {
        let mut l = self.and()?;
        while self.eat_sym("||") {
            let r = self.and()?;
            l = Expr::bin(BinOp::Or, l, r);
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<Expr, LangError> {
        let mut l = self.cmp()?;
        while self.eat_sym("&&") {
            let r = self.cmp()?;
            l = Expr::bin(BinOp::And, l, r);
        }
        Ok(l)
    }

    fn cmp_op(&self) -> Option<BinOp> {
        match self.peek() {
            Tok::Sym("==") => Some(BinOp::Eq),
            Tok::Sym("!=") => Some(BinOp::Ne),
            Tok::Sym("<") => Some(BinOp::Lt),
            Tok::Sym("<=") => Some(BinOp::Le),
            Tok::Sym(">") => Some(BinOp::Gt),
            Tok::Sym(">=") => Some(BinOp::Ge),
            _ => None,
        }
    }

    fn cmp(&mut self) -> Result<Expr, LangError> {
        let first = self.add()?;
        let mut operands = vec![first];
        let mut ops = Vec::new();
        while let Some(op) = self.cmp_op() {
            self.bump();
            ops.push(op);
            operands.push(self.add()?);
        }
        Ok(match ops.len() {
            0 => operands.pop().unwrap_or(Expr::Bool(true)),
            1 => {
                let r = operands.pop().unwrap_or(Expr::Bool(true));
                let l = operands.pop().unwrap_or(Expr::Bool(true));
                Expr::bin(ops[0], l, r)
            }
            _ => Expr::Chain(operands, ops),
        })
    }

    fn add(&mut self) -> Result<Expr, LangError> {
        let mut l = self.mul()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let r = self.mul()?;
            l = Expr::bin(op, l, r);
        }
        Ok(l)
    }

    fn mul(&mut self) -> Result<Expr, LangError> {
        let mut l = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                Tok::Sym("%") => BinOp::Mod,
                _ => break,
            };
            self.bump();
            let r = self.unary()?;
            l = Expr::bin(op, l, r);
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.eat_sym("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat_sym("-") {
            if let Tok::Int(n) = *self.peek() {
                self.bump();
                return self.postfix(Expr::Int(-n));
            }
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        let p = self.primary()?;
        self.postfix(p)
    }

    fn postfix(&mut self, mut e: Expr) -> Result<Expr, LangError> {
        loop {
            if self.eat_sym("[") {
                let idx = self.expr()?;
                self.expect_sym("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else if self.is_sym(".") {
                self.bump();
                match self.peek().clone() {
                    Tok::Ident(ref f) if f == "Length" => {
                        self.bump();
                        e = Expr::Length(Box::new(e));
                    }
                    other => return self.error(format!("expected 'Length', found {}", describe(&other))),
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Kw("null") => {
                self.bump();
                Ok(Expr::Null)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.is_sym("(") {
                    return self.error(format!("method call '{name}' is not allowed inside an expression"));
                }
                Ok(Expr::Var(name))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Kw("new") => {
                self.bump();
                self.expect_kw("int")?;
                self.expect_sym("[")?;
                self.expect_sym("]")?;
                self.expect_sym("{")?;
                let mut vals = Vec::new();
                if !self.is_sym("}") {
                    loop {
                        let neg = self.eat_sym("-");
                        match *self.peek() {
                            Tok::Int(n) => {
                                self.bump();
                                vals.push(if neg { -n } else { n });
                            }
                            _ => return self.error("array literal elements must be integer literals"),
                        }
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym("}")?;
                Ok(Expr::ArrayLit(vals))
            }
            Tok::Kw(k @ ("forall" | "exists")) => {
                let start = self.span();
                self.bump();
                let var = self.ident()?;
                if self.eat_sym(":") {
                    self.expect_kw("int")?;
                }
                self.expect_sym("::")?;
                let body = self.expr()?;
                let kind = if k == "forall" { QuantKind::Forall } else { QuantKind::Exists };
                split_quant(kind, var, body).ok_or(LangError::Syntax {
                    span: start,
                    message: match kind {
                        QuantKind::Forall => "quantifier must have the form 'forall i :: lo <= i < hi ==> body'".into(),
                        QuantKind::Exists => "quantifier must have the form 'exists i :: lo <= i < hi && body'".into(),
                    },
                })
            }
            other => self.error(format!("expected an expression, found {}", describe(&other))),
        }
    }
}

/// Extracts the explicit range `lo <= v < hi` from a quantifier body.
fn split_quant(kind: QuantKind, var: String, body: Expr) -> Option<Expr> {
    let joiner = match kind {
        QuantKind::Forall => BinOp::Imp,
        QuantKind::Exists => BinOp::And,
    };
    let (range, rest) = match kind {
        QuantKind::Forall => match body {
            Expr::Binary(op, range, rest) if op == joiner => (range, rest),
            _ => return None,
        },
        QuantKind::Exists => {
            // `lo <= v < hi && b1 && b2` parses left-nested; peel the range off the spine.
            let mut spine = Vec::new();
            let mut cur = body;
            while let Expr::Binary(BinOp::And, l, r) = cur {
                spine.push(*r);
                cur = *l;
            }
            if spine.is_empty() {
                return None;
            }
            spine.reverse();
            let mut it = spine.into_iter();
            let first = it.next()?;
            let rest = it.fold(first, Expr::and);
            (Box::new(cur), Box::new(rest))
        }
    };
    let (lo, hi) = match *range {
        Expr::Chain(mut xs, ops) if xs.len() == 3 && ops == [BinOp::Le, BinOp::Lt] => {
            if xs[1] != Expr::Var(var.clone()) {
                return None;
            }
            let hi = xs.pop()?;
            xs.pop();
            let lo = xs.pop()?;
            (lo, hi)
        }
        _ => return None,
    };
    Some(Expr::Quant(Quant { kind, var, lo: Box::new(lo), hi: Box::new(hi), body: rest }))
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Int(n) => format!("integer {n}"),
        Tok::Attr(a) => format!("attribute {{:{a}}}"),
        Tok::Kw(k) => format!("'{k}'"),
        Tok::Sym(s) => format!("'{s}'"),
        Tok::Eof => "end of input".to_string(),
    }
}
