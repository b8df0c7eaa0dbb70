use crate::lang::{print_expr, BinOp, Expr, QuantKind, UnOp, Value};
use std::collections::BTreeMap;
use thiserror::Error;

pub type Assignment = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero in '{expr}'")]
    DivisionByZero { expr: String },
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
    #[error("ill-typed expression '{0}'")]
    IllTyped(String),
    #[error("quantifier range too large in '{0}'")]
    RangeTooLarge(String),
}

/// Environment key holding the length of a lazily assigned array.
pub fn len_var(v: &str) -> String {
    format!("{v}#len")
}

/// Environment key holding cell `k` of a lazily assigned array.
pub fn elem_var(v: &str, k: i64) -> String {
    format!("{v}#{k}")
}

/// Replaces lazy `v#len`/`v#k` entries by whole arrays; unset cells are 0.
pub fn assemble(env: &Assignment) -> Assignment {
    let mut out = Assignment::new();
    let mut arrays: BTreeMap<String, (i64, BTreeMap<i64, i64>)> = BTreeMap::new();
    for (k, val) in env {
        match k.split_once('#') {
            Some((v, "len")) => {
                if let Value::Int(n) = val {
                    arrays.entry(v.to_string()).or_default().0 = *n;
                }
            }
            Some((v, idx)) => {
                if let (Ok(i), Value::Int(n)) = (idx.parse::<i64>(), val) {
                    arrays.entry(v.to_string()).or_default().1.insert(i, *n);
                }
            }
            None => {
                out.insert(k.clone(), val.clone());
            }
        }
    }
    for (v, (n, cells)) in arrays {
        let xs = (0..n.max(0)).map(|k| cells.get(&k).copied().unwrap_or(0)).collect();
        out.entry(v).or_insert(Value::Array(xs));
    }
    out
}

const MAX_RANGE: i64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
enum V {
    I(i64),
    B(bool),
    A(Vec<i64>),
    Null,
}

/// Evaluator over (possibly partial) assignments. `strict` makes division
/// by zero an error; otherwise `x / 0 = 0` and `x % 0 = x`.
pub struct Evaluator<'a> {
    env: &'a Assignment,
    strict: bool,
    bound: Vec<(String, i64)>,
}

fn ill(e: &Expr) -> EvalError {
    EvalError::IllTyped(print_expr(e))
}

impl<'a> Evaluator<'a> {
    pub fn new(env: &'a Assignment, strict: bool) -> Evaluator<'a> {
        Evaluator { env, strict, bound: Vec::new() }
    }

    pub fn bool(&mut self, e: &Expr) -> Result<bool, EvalError> {
        match self.eval(e)? {
            V::B(b) => Ok(b),
            _ => Err(ill(e)),
        }
    }

    pub fn int(&mut self, e: &Expr) -> Result<i64, EvalError> {
        match self.eval(e)? {
            V::I(n) => Ok(n),
            _ => Err(ill(e)),
        }
    }

    pub fn value(&mut self, e: &Expr) -> Result<Value, EvalError> {
        match self.eval(e)? {
            V::I(n) => Ok(Value::Int(n)),
            V::B(b) => Ok(Value::Bool(b)),
            V::A(xs) => Ok(Value::Array(xs)),
            V::Null => Err(ill(e)),
        }
    }

    fn array(&mut self, e: &Expr) -> Result<Vec<i64>, EvalError> {
        match self.eval(e)? {
            V::A(xs) => Ok(xs),
            _ => Err(ill(e)),
        }
    }

    /// An array variable absent from the environment; it is read through
    /// `v#len` and `v#k` entries so that only inspected cells need values.
    fn is_lazy(&self, a: &Expr) -> bool {
        matches!(a, Expr::Var(v) if !self.env.contains_key(v) && !self.bound.iter().any(|(b, _)| b == v))
    }

    fn lazy_len(&self, v: &str) -> Result<i64, EvalError> {
        let key = len_var(v);
        match self.env.get(&key) {
            Some(Value::Int(n)) => Ok(*n),
            Some(_) => Err(EvalError::IllTyped(key)),
            None => Err(EvalError::UnboundVariable(key)),
        }
    }

    fn lazy_elem(&self, v: &str, k: i64) -> Result<i64, EvalError> {
        let key = elem_var(v, k);
        match self.env.get(&key) {
            Some(Value::Int(n)) => Ok(*n),
            Some(_) => Err(EvalError::IllTyped(key)),
            None => Err(EvalError::UnboundVariable(key)),
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<V, EvalError> {
        Ok(match e {
            Expr::Int(n) => V::I(*n),
            Expr::Bool(b) => V::B(*b),
            Expr::Null => V::Null,
            Expr::ArrayLit(xs) => V::A(xs.clone()),
            Expr::Var(v) => {
                if let Some((_, n)) = self.bound.iter().rev().find(|(b, _)| b == v) {
                    return Ok(V::I(*n));
                }
                match self.env.get(v) {
                    Some(Value::Int(n)) => V::I(*n),
                    Some(Value::Bool(b)) => V::B(*b),
                    Some(Value::Array(xs)) => V::A(xs.clone()),
                    None if self.env.contains_key(&len_var(v)) => {
                        let n = self.lazy_len(v)?;
                        let mut xs = Vec::new();
                        for k in 0..n {
                            xs.push(self.lazy_elem(v, k)?);
                        }
                        V::A(xs)
                    }
                    None => return Err(EvalError::UnboundVariable(v.clone())),
                }
            }
            Expr::Unary(UnOp::Not, a) => V::B(!self.bool(a)?),
            Expr::Unary(UnOp::Neg, a) => V::I(self.int(a)?.wrapping_neg()),
            Expr::Binary(op, l, r) => self.binary(e, *op, l, r)?,
            Expr::Chain(xs, ops) => {
                // Every link is evaluated so that a false link decides the chain
                // even when another link is undetermined.
                let mut pending = None;
                for (i, op) in ops.iter().enumerate() {
                    match self.compare(&xs[i], *op, &xs[i + 1]) {
                        Ok(true) => {}
                        Ok(false) => return Ok(V::B(false)),
                        Err(err) => {
                            pending.get_or_insert(err);
                        }
                    }
                }
                match pending {
                    Some(err) => return Err(err),
                    None => V::B(true),
                }
            }
            Expr::Index(a, i) if self.is_lazy(a) => {
                let Expr::Var(v) = &**a else { return Err(ill(e)) };
                let n = self.lazy_len(v)?;
                let k = self.int(i)?;
                V::I(if k >= 0 && k < n { self.lazy_elem(v, k)? } else { 0 })
            }
            Expr::Length(a) if self.is_lazy(a) => {
                let Expr::Var(v) = &**a else { return Err(ill(e)) };
                V::I(self.lazy_len(v)?)
            }
            Expr::Index(a, i) => {
                let xs = self.array(a)?;
                let k = self.int(i)?;
                V::I(if k >= 0 && (k as usize) < xs.len() { xs[k as usize] } else { 0 })
            }
            Expr::Length(a) => V::I(self.array(a)?.len() as i64),
            Expr::Quant(q) => {
                let lo = self.int(&q.lo)?;
                let hi = self.int(&q.hi)?;
                if hi.saturating_sub(lo) > MAX_RANGE {
                    return Err(EvalError::RangeTooLarge(print_expr(e)));
                }
                let want = q.kind == QuantKind::Exists;
                let mut pending = None;
                for k in lo..hi {
                    self.bound.push((q.var.clone(), k));
                    let r = self.bool(&q.body);
                    self.bound.pop();
                    match r {
                        Ok(b) if b == want => return Ok(V::B(want)),
                        Ok(_) => {}
                        Err(err) => {
                            pending.get_or_insert(err);
                        }
                    }
                }
                match pending {
                    Some(err) => return Err(err),
                    None => V::B(!want),
                }
            }
        })
    }

    fn compare(&mut self, l: &Expr, op: BinOp, r: &Expr) -> Result<bool, EvalError> {
        let a = self.eval(l)?;
        let b = self.eval(r)?;
        Ok(match (op, a, b) {
            (BinOp::Eq, V::Null, V::Null) => true,
            (BinOp::Ne, V::Null, V::Null) => false,
            // Arrays in this language are never null.
            (BinOp::Eq, V::Null, _) | (BinOp::Eq, _, V::Null) => false,
            (BinOp::Ne, V::Null, _) | (BinOp::Ne, _, V::Null) => true,
            (BinOp::Eq, a, b) => a == b,
            (BinOp::Ne, a, b) => a != b,
            (op, V::I(a), V::I(b)) => match op {
                BinOp::Lt => a < b,
                BinOp::Le => a <= b,
                BinOp::Gt => a > b,
                BinOp::Ge => a >= b,
                _ => return Err(EvalError::IllTyped(op.symbol().to_string())),
            },
            _ => return Err(EvalError::IllTyped(op.symbol().to_string())),
        })
    }

    fn binary(&mut self, e: &Expr, op: BinOp, l: &Expr, r: &Expr) -> Result<V, EvalError> {
        Ok(match op {
            BinOp::And | BinOp::Or | BinOp::Imp => {
                // Left to right, but a deciding right operand wins over an
                // undetermined left one.
                let (short_l, result) = match op {
                    BinOp::And => (false, false),
                    BinOp::Or => (true, true),
                    _ => (false, true),
                };
                let lv = self.bool(l);
                if let Ok(b) = lv {
                    if b == short_l {
                        return Ok(V::B(result));
                    }
                }
                let rv = self.bool(r);
                let short_r = op != BinOp::And;
                if let Ok(b) = rv {
                    if b == short_r {
                        return Ok(V::B(short_r));
                    }
                }
                lv?;
                V::B(rv?)
            }
            BinOp::Iff => V::B(self.bool(l)? == self.bool(r)?),
            BinOp::Add => V::I(self.int(l)?.wrapping_add(self.int(r)?)),
            BinOp::Sub => V::I(self.int(l)?.wrapping_sub(self.int(r)?)),
            BinOp::Mul => V::I(self.int(l)?.wrapping_mul(self.int(r)?)),
            BinOp::Div | BinOp::Mod => {
                let a = self.int(l)?;
                let b = self.int(r)?;
                if b == 0 {
                    if self.strict {
                        return Err(EvalError::DivisionByZero { expr: print_expr(e) });
                    }
                    return Ok(V::I(if op == BinOp::Div { 0 } else { a }));
                }
                V::I(if op == BinOp::Div {
                    a.checked_div_euclid(b).unwrap_or(0)
                } else {
                    a.checked_rem_euclid(b).unwrap_or(0)
                })
            }
            _ => V::B(self.compare(l, op, r)?),
        })
    }
}

/// Strict evaluation: every free variable must be bound and divisors non-zero.
pub fn evaluate(f: &Expr, env: &Assignment) -> Result<bool, EvalError> {
    Evaluator::new(env, true).bool(f)
}

/// Total evaluation as used by the solvers.
pub fn evaluate_total(f: &Expr, env: &Assignment) -> Result<bool, EvalError> {
    Evaluator::new(env, false).bool(f)
}
