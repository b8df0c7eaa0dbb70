use super::ast::*;
use super::LangError;
use std::collections::HashSet;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Param,
    Return,
    Local,
    LoopVar,
    Bound,
}

struct Scope {
    frames: Vec<Vec<(String, Type, Role)>>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<(Type, Role)> {
        self.frames
            .iter()
            .rev()
            .flat_map(|f| f.iter().rev())
            .find(|(n, _, _)| n == name)
            .map(|(_, t, r)| (*t, *r))
    }

    fn declare(&mut self, name: &str, ty: Type, role: Role, span: Span) -> Result<(), LangError> {
        if self.lookup(name).is_some() {
            return Err(type_err(span, format!("'{name}' is already declared")));
        }
        if let Some(f) = self.frames.last_mut() {
            f.push((name.to_string(), ty, role));
        }
        Ok(())
    }
}

fn type_err(span: Span, message: impl Into<String>) -> LangError {
    LangError::Type { span, message: message.into() }
}

struct Checker<'p> {
    program: &'p Program,
    /// When false, calls to methods outside the program are accepted untyped.
    resolve_calls: bool,
}

/// Checks every method of the program.
pub fn check_program(p: &Program, resolve_calls: bool) -> Result<(), LangError> {
    let mut seen = HashSet::new();
    for m in &p.methods {
        if !seen.insert(m.name.as_str()) {
            return Err(type_err(m.span, format!("duplicate method '{}'", m.name)));
        }
    }
    let c = Checker { program: p, resolve_calls };
    for m in &p.methods {
        c.method(m)?;
    }
    Ok(())
}

impl<'p> Checker<'p> {
    fn method(&self, m: &Method) -> Result<(), LangError> {
        let mut scope = Scope { frames: vec![Vec::new()] };
        for p in &m.params {
            scope.declare(&p.name, p.ty, Role::Param, m.span)?;
        }
        for c in &m.requires {
            self.expect(&mut scope, &c.formula, Type::Bool, c.span)?;
        }
        for p in &m.returns {
            scope.declare(&p.name, p.ty, Role::Return, m.span)?;
        }
        for c in &m.ensures {
            self.expect(&mut scope, &c.formula, Type::Bool, c.span)?;
        }
        if let Some(body) = &m.body {
            self.block(&mut scope, body, 0)?;
        }
        Ok(())
    }

    fn block(&self, scope: &mut Scope, body: &[Stmt], loops: usize) -> Result<(), LangError> {
        scope.frames.push(Vec::new());
        let r = body.iter().try_for_each(|s| self.stmt(scope, s, loops));
        scope.frames.pop();
        r
    }

    fn assignable(&self, scope: &Scope, name: &str, span: Span) -> Result<Type, LangError> {
        match scope.lookup(name) {
            None => Err(type_err(span, format!("unknown variable '{name}'"))),
            Some((_, Role::Param)) => Err(type_err(span, format!("cannot assign to parameter '{name}'"))),
            Some((_, Role::LoopVar)) => Err(type_err(span, format!("cannot assign to loop variable '{name}'"))),
            Some((_, Role::Bound)) => Err(type_err(span, format!("cannot assign to bound variable '{name}'"))),
            Some((t, _)) => Ok(t),
        }
    }

    fn stmt(&self, scope: &mut Scope, s: &Stmt, loops: usize) -> Result<(), LangError> {
        let sp = s.span;
        match &s.kind {
            StmtKind::VarDecl { name, ty, init } => {
                let t = match (ty, init) {
                    (Some(t), Some(e)) => {
                        self.expect(scope, e, *t, sp)?;
                        *t
                    }
                    (None, Some(e)) => self.infer(scope, e, sp)?,
                    (Some(t), None) => *t,
                    (None, None) => return Err(type_err(sp, "declaration without type")),
                };
                scope.declare(name, t, Role::Local, sp)?;
            }
            StmtKind::Assign { target, value } => {
                let t = self.assignable(scope, target, sp)?;
                self.expect(scope, value, t, sp)?;
            }
            StmtKind::Call { declare, targets, method, args } => {
                let callee = self.program.method(method);
                let callee = match callee {
                    Some(c) => Some(c),
                    None if self.resolve_calls => {
                        return Err(type_err(sp, format!("unknown method '{method}'")));
                    }
                    None => None,
                };
                match callee {
                    Some(c) => {
                        if c.params.len() != args.len() {
                            return Err(type_err(
                                sp,
                                format!("'{method}' expects {} arguments, got {}", c.params.len(), args.len()),
                            ));
                        }
                        for (p, a) in c.params.iter().zip(args) {
                            self.expect(scope, a, p.ty, sp)?;
                        }
                        if c.returns.len() != targets.len() {
                            return Err(type_err(
                                sp,
                                format!("'{method}' returns {} values, got {} targets", c.returns.len(), targets.len()),
                            ));
                        }
                        for (r, t) in c.returns.iter().zip(targets) {
                            if *declare {
                                scope.declare(t, r.ty, Role::Local, sp)?;
                            } else {
                                let tt = self.assignable(scope, t, sp)?;
                                if tt != r.ty {
                                    return Err(type_err(sp, format!("'{t}' has type {tt}, call returns {}", r.ty)));
                                }
                            }
                        }
                    }
                    None => {
                        for a in args {
                            self.infer(scope, a, sp)?;
                        }
                        for t in targets {
                            if *declare {
                                // Result type is unknown without the callee; ints are the common case.
                                scope.declare(t, Type::Int, Role::Local, sp)?;
                            } else {
                                self.assignable(scope, t, sp)?;
                            }
                        }
                    }
                }
            }
            StmtKind::Assert(e) | StmtKind::Assume(e) => self.expect(scope, e, Type::Bool, sp)?,
            StmtKind::If { cond, then_branch, else_branch } => {
                self.expect(scope, cond, Type::Bool, sp)?;
                self.block(scope, then_branch, loops)?;
                if let Some(e) = else_branch {
                    self.block(scope, e, loops)?;
                }
            }
            StmtKind::While { cond, invariants, decreases, body } => {
                self.expect(scope, cond, Type::Bool, sp)?;
                self.loop_specs(scope, invariants, decreases)?;
                self.block(scope, body, loops + 1)?;
            }
            StmtKind::For { var, lo, hi, invariants, decreases, body } => {
                self.expect(scope, lo, Type::Int, sp)?;
                self.expect(scope, hi, Type::Int, sp)?;
                scope.frames.push(Vec::new());
                let r = (|| {
                    scope.declare(var, Type::Int, Role::LoopVar, sp)?;
                    self.loop_specs(scope, invariants, decreases)?;
                    self.block(scope, body, loops + 1)
                })();
                scope.frames.pop();
                r?;
            }
            StmtKind::Break => {
                if loops == 0 {
                    return Err(type_err(sp, "break outside of a loop"));
                }
            }
        }
        Ok(())
    }

    fn loop_specs(&self, scope: &mut Scope, inv: &[Clause], dec: &Option<Clause>) -> Result<(), LangError> {
        for c in inv {
            self.expect(scope, &c.formula, Type::Bool, c.span)?;
        }
        if let Some(d) = dec {
            self.expect(scope, &d.formula, Type::Int, d.span)?;
        }
        Ok(())
    }

    fn expect(&self, scope: &mut Scope, e: &Expr, t: Type, sp: Span) -> Result<(), LangError> {
        let got = self.infer(scope, e, sp)?;
        if got != t {
            return Err(type_err(sp, format!("expected {t}, found {got} in '{}'", super::print_expr(e))));
        }
        Ok(())
    }

    fn infer(&self, scope: &mut Scope, e: &Expr, sp: Span) -> Result<Type, LangError> {
        Ok(match e {
            Expr::Int(_) => Type::Int,
            Expr::Bool(_) => Type::Bool,
            Expr::Null | Expr::ArrayLit(_) => Type::Array,
            Expr::Var(v) => match scope.lookup(v) {
                Some((t, _)) => t,
                None => return Err(type_err(sp, format!("unknown variable '{v}'"))),
            },
            Expr::Unary(UnOp::Not, a) => {
                self.expect(scope, a, Type::Bool, sp)?;
                Type::Bool
            }
            Expr::Unary(UnOp::Neg, a) => {
                self.expect(scope, a, Type::Int, sp)?;
                Type::Int
            }
            Expr::Binary(op, l, r) => match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                    self.expect(scope, l, Type::Int, sp)?;
                    self.expect(scope, r, Type::Int, sp)?;
                    Type::Int
                }
                BinOp::Eq | BinOp::Ne => {
                    let lt = self.infer(scope, l, sp)?;
                    self.expect(scope, r, lt, sp)?;
                    Type::Bool
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    self.expect(scope, l, Type::Int, sp)?;
                    self.expect(scope, r, Type::Int, sp)?;
                    Type::Bool
                }
                BinOp::And | BinOp::Or | BinOp::Imp | BinOp::Iff => {
                    self.expect(scope, l, Type::Bool, sp)?;
                    self.expect(scope, r, Type::Bool, sp)?;
                    Type::Bool
                }
            },
            Expr::Chain(xs, ops) => {
                let ordered = ops.iter().any(|o| !matches!(o, BinOp::Eq | BinOp::Ne));
                let first = self.infer(scope, &xs[0], sp)?;
                if ordered && first != Type::Int {
                    return Err(type_err(sp, "ordering comparison on non-integers"));
                }
                for x in &xs[1..] {
                    self.expect(scope, x, first, sp)?;
                }
                Type::Bool
            }
            Expr::Index(a, i) => {
                self.expect(scope, a, Type::Array, sp)?;
                self.expect(scope, i, Type::Int, sp)?;
                Type::Int
            }
            Expr::Length(a) => {
                self.expect(scope, a, Type::Array, sp)?;
                Type::Int
            }
            Expr::Quant(q) => {
                self.expect(scope, &q.lo, Type::Int, sp)?;
                self.expect(scope, &q.hi, Type::Int, sp)?;
                scope.frames.push(Vec::new());
                let r = scope
                    .declare(&q.var, Type::Int, Role::Bound, sp)
                    .and_then(|_| self.expect(scope, &q.body, Type::Bool, sp));
                scope.frames.pop();
                r?;
                Type::Bool
            }
        })
    }
}
