use super::eval::Assignment;
use super::SolverError;
use crate::lang::{BinOp, Expr, QuantKind, Type, UnOp, Value};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtConfig {
    /// Command line, split on whitespace.
    pub cmd: String,
    pub timeout_ms: u64,
}

impl Default for SmtConfig {
    fn default() -> Self {
        SmtConfig { cmd: "z3 -in -smt2".into(), timeout_ms: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmtAnswer {
    Unsat,
    Sat(Assignment),
    Unknown,
}

/// Longer model arrays are not materialized; the answer becomes unknown.
const MAX_MODEL_ARRAY: i64 = 1 << 16;

fn sym(name: &str) -> String {
    format!("|{name}|")
}

fn len_sym(name: &str) -> String {
    format!("|{name}#len|")
}

fn int_lit(n: i64) -> String {
    if n < 0 {
        format!("(- {})", n.unsigned_abs())
    } else {
        n.to_string()
    }
}

struct Encoder<'a> {
    types: &'a BTreeMap<String, Type>,
    bound: Vec<String>,
}

impl<'a> Encoder<'a> {
    fn ty(&self, e: &Expr) -> Type {
        match e {
            Expr::Var(v) if !self.bound.contains(v) => self.types.get(v).copied().unwrap_or(Type::Int),
            Expr::ArrayLit(_) | Expr::Null => Type::Array,
            Expr::Bool(_) | Expr::Unary(UnOp::Not, _) | Expr::Chain(..) | Expr::Quant(_) => Type::Bool,
            Expr::Binary(op, ..) if op.precedence() <= 5 => Type::Bool,
            _ => Type::Int,
        }
    }

    fn select(&self, a: &Expr, idx: String) -> String {
        match a {
            Expr::ArrayLit(xs) => {
                let mut out = "0".to_string();
                for (k, x) in xs.iter().enumerate().rev() {
                    out = format!("(ite (= {idx} {k}) {} {out})", int_lit(*x));
                }
                out
            }
            other => format!("(select {} {idx})", self.enc(other)),
        }
    }

    fn length(&self, a: &Expr) -> String {
        match a {
            Expr::ArrayLit(xs) => xs.len().to_string(),
            Expr::Var(v) => len_sym(v),
            _ => "0".into(),
        }
    }

    fn array_eq(&self, l: &Expr, r: &Expr) -> String {
        match (l, r) {
            (Expr::Null, Expr::Null) => "true".into(),
            (Expr::Null, _) | (_, Expr::Null) => "false".into(),
            (a, Expr::ArrayLit(xs)) | (Expr::ArrayLit(xs), a) => {
                let mut parts = vec![format!("(= {} {})", self.length(a), xs.len())];
                for (k, x) in xs.iter().enumerate() {
                    parts.push(format!("(= {} {})", self.select(a, k.to_string()), int_lit(*x)));
                }
                format!("(and {})", parts.join(" "))
            }
            (a, b) => format!("(and (= {} {}) (= {} {}))", self.length(a), self.length(b), self.enc(a), self.enc(b)),
        }
    }

    fn cmp(&self, op: BinOp, l: &Expr, r: &Expr) -> String {
        let arrays = self.ty(l) == Type::Array || self.ty(r) == Type::Array;
        match op {
            BinOp::Eq if arrays => self.array_eq(l, r),
            BinOp::Ne if arrays => format!("(not {})", self.array_eq(l, r)),
            BinOp::Eq => format!("(= {} {})", self.enc(l), self.enc(r)),
            BinOp::Ne => format!("(not (= {} {}))", self.enc(l), self.enc(r)),
            _ => {
                let s = match op {
                    BinOp::Lt => "<",
                    BinOp::Le => "<=",
                    BinOp::Gt => ">",
                    _ => ">=",
                };
                format!("({s} {} {})", self.enc(l), self.enc(r))
            }
        }
    }

    fn enc(&self, e: &Expr) -> String {
        match e {
            Expr::Int(n) => int_lit(*n),
            Expr::Bool(b) => b.to_string(),
            Expr::Null => "0".into(),
            Expr::Var(v) => sym(v),
            Expr::ArrayLit(_) => "((as const (Array Int Int)) 0)".into(),
            Expr::Unary(UnOp::Not, a) => format!("(not {})", self.enc(a)),
            Expr::Unary(UnOp::Neg, a) => format!("(- {})", self.enc(a)),
            Expr::Binary(op, l, r) => {
                let (a, b) = (self.enc(l), self.enc(r));
                match op {
                    BinOp::Add => format!("(+ {a} {b})"),
                    BinOp::Sub => format!("(- {a} {b})"),
                    BinOp::Mul => format!("(* {a} {b})"),
                    BinOp::Div => format!("(ite (= {b} 0) 0 (div {a} {b}))"),
                    BinOp::Mod => format!("(ite (= {b} 0) {a} (mod {a} {b}))"),
                    BinOp::And => format!("(and {a} {b})"),
                    BinOp::Or => format!("(or {a} {b})"),
                    BinOp::Imp => format!("(=> {a} {b})"),
                    BinOp::Iff => format!("(= {a} {b})"),
                    _ => self.cmp(*op, l, r),
                }
            }
            Expr::Chain(xs, ops) => {
                let parts: Vec<String> = ops.iter().enumerate().map(|(i, op)| self.cmp(*op, &xs[i], &xs[i + 1])).collect();
                format!("(and {})", parts.join(" "))
            }
            Expr::Index(a, i) => self.select(a, self.enc(i)),
            Expr::Length(a) => self.length(a),
            Expr::Quant(q) => {
                let v = sym(&q.var);
                let range = format!("(and (<= {} {v}) (< {v} {}))", self.enc(&q.lo), self.enc(&q.hi));
                let mut inner = Encoder { types: self.types, bound: self.bound.clone() };
                inner.bound.push(q.var.clone());
                let body = inner.enc(&q.body);
                match q.kind {
                    QuantKind::Forall => format!("(forall (({v} Int)) (=> {range} {body}))"),
                    QuantKind::Exists => format!("(exists (({v} Int)) (and {range} {body}))"),
                }
            }
        }
    }
}

/// SMT-LIB2 script checking the validity of `vc` by refuting its negation.
pub fn script(vc: &Expr, types: &BTreeMap<String, Type>) -> String {
    let mut out = String::from("(set-option :produce-models true)\n(set-logic ALL)\n");
    let free: BTreeSet<String> = vc.free_vars().into_iter().collect();
    for v in &free {
        match types.get(v).copied().unwrap_or(Type::Int) {
            Type::Int => out.push_str(&format!("(declare-fun {} () Int)\n", sym(v))),
            Type::Bool => out.push_str(&format!("(declare-fun {} () Bool)\n", sym(v))),
            Type::Array => {
                out.push_str(&format!("(declare-fun {} () (Array Int Int))\n", sym(v)));
                out.push_str(&format!("(declare-fun {} () Int)\n", len_sym(v)));
                out.push_str(&format!("(assert (>= {} 0))\n", len_sym(v)));
                out.push_str(&format!(
                    "(assert (forall ((k Int)) (=> (or (< k 0) (>= k {})) (= (select {} k) 0))))\n",
                    len_sym(v),
                    sym(v)
                ));
            }
        }
    }
    let enc = Encoder { types, bound: Vec::new() };
    out.push_str(&format!("(assert (not {}))\n(check-sat)\n", enc.enc(vc)));
    out
}

/// Runs the solver and interprets its answer.
pub fn run(cfg: &SmtConfig, vc: &Expr, types: &BTreeMap<String, Type>) -> Result<SmtAnswer, SolverError> {
    let mut text = script(vc, types);
    text.push_str("(get-model)\n(exit)\n");
    let mut parts = cfg.cmd.split_whitespace();
    let prog = parts.next().ok_or_else(|| SolverError::BackendUnavailable("empty solver command".into()))?;
    let mut child = Command::new(prog)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SolverError::BackendUnavailable(format!("{prog}: {e}")))?;
    if let Some(mut stdin) = child.stdin.take() {
        // A solver that exits early closes the pipe; its answer still counts.
        let _ = stdin.write_all(text.as_bytes());
    }
    let mut stdout = child.stdout.take().ok_or_else(|| SolverError::BackendUnavailable("no stdout".into()))?;
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + Duration::from_millis(cfg.timeout_ms);
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SmtAnswer::Unknown);
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => return Err(SolverError::BackendUnavailable(e.to_string())),
        }
    }
    let reply = reader.join().unwrap_or_default();
    parse_reply(&reply, vc, types)
}

/// Interprets `sat`/`unsat`/`unknown` followed by an optional model.
pub fn parse_reply(reply: &str, vc: &Expr, types: &BTreeMap<String, Type>) -> Result<SmtAnswer, SolverError> {
    let trimmed = reply.trim_start();
    let (status, rest) = match trimmed.find(char::is_whitespace) {
        Some(i) => (&trimmed[..i], &trimmed[i..]),
        None => (trimmed, ""),
    };
    match status {
        "unsat" => Ok(SmtAnswer::Unsat),
        "unknown" | "timeout" => Ok(SmtAnswer::Unknown),
        "sat" => {
            let model = parse_model(rest)?;
            let mut out = Assignment::new();
            for v in vc.free_vars() {
                let t = types.get(&v).copied().unwrap_or(Type::Int);
                let val = match t {
                    Type::Int => Value::Int(model.int(&sym_key(&v))?.unwrap_or(0)),
                    Type::Bool => Value::Bool(model.boolean(&sym_key(&v))?.unwrap_or(false)),
                    Type::Array => {
                        let n = model.int(&format!("{v}#len"))?.unwrap_or(0).max(0);
                        if n > MAX_MODEL_ARRAY {
                            return Ok(SmtAnswer::Unknown);
                        }
                        let mut xs = Vec::new();
                        for k in 0..n {
                            xs.push(model.select(&sym_key(&v), k)?);
                        }
                        Value::Array(xs)
                    }
                };
                out.insert(v, val);
            }
            Ok(SmtAnswer::Sat(out))
        }
        other => Err(SolverError::MalformedModel(format!("unexpected solver answer '{other}'"))),
    }
}

fn sym_key(v: &str) -> String {
    v.to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

pub fn parse_sexps(s: &str) -> Result<Vec<Sexp>, SolverError> {
    let chars: Vec<char> = s.chars().collect();
    let mut pos = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(&chars, &mut pos);
        if pos >= chars.len() {
            return Ok(out);
        }
        out.push(parse_one(&chars, &mut pos)?);
    }
}

fn skip_ws(c: &[char], pos: &mut usize) {
    while *pos < c.len() {
        if c[*pos].is_whitespace() {
            *pos += 1;
        } else if c[*pos] == ';' {
            while *pos < c.len() && c[*pos] != '\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_one(c: &[char], pos: &mut usize) -> Result<Sexp, SolverError> {
    skip_ws(c, pos);
    let bad = |m: &str| SolverError::MalformedModel(m.to_string());
    match c.get(*pos) {
        None => Err(bad("unexpected end of model")),
        Some('(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(c, pos);
                match c.get(*pos) {
                    None => return Err(bad("unbalanced parenthesis in model")),
                    Some(')') => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(parse_one(c, pos)?),
                }
            }
        }
        Some(')') => Err(bad("unexpected ')' in model")),
        Some('|') => {
            let start = *pos + 1;
            let end = c[start..].iter().position(|x| *x == '|').ok_or_else(|| bad("unterminated symbol"))? + start;
            *pos = end + 1;
            Ok(Sexp::Atom(c[start..end].iter().collect()))
        }
        Some(_) => {
            let start = *pos;
            while *pos < c.len() && !c[*pos].is_whitespace() && c[*pos] != '(' && c[*pos] != ')' {
                *pos += 1;
            }
            Ok(Sexp::Atom(c[start..*pos].iter().collect()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum MV {
    I(i64),
    B(bool),
    Arr(ArrVal),
}

#[derive(Debug, Clone, PartialEq)]
enum ArrVal {
    Const(i64, Vec<(i64, i64)>),
    Func(String),
    Lambda(String, Sexp, HashMap<String, MV>),
}

struct FunDef {
    params: Vec<String>,
    body: Sexp,
}

pub struct Model {
    defs: HashMap<String, FunDef>,
}

fn parse_model(text: &str) -> Result<Model, SolverError> {
    let mut defs = HashMap::new();
    let bad = |m: String| SolverError::MalformedModel(m);
    let items = parse_sexps(text)?;
    let mut entries = Vec::new();
    for it in items {
        match it {
            Sexp::List(xs) if matches!(xs.first(), Some(Sexp::Atom(a)) if a == "model") => entries.extend(xs.into_iter().skip(1)),
            Sexp::List(xs) if matches!(xs.first(), Some(Sexp::Atom(a)) if a == "define-fun") => entries.push(Sexp::List(xs)),
            Sexp::List(xs) => entries.extend(xs),
            Sexp::Atom(a) => return Err(bad(format!("unexpected token '{a}' in model"))),
        }
    }
    for e in entries {
        let Sexp::List(xs) = e else { return Err(bad("model entry is not a list".into())) };
        match xs.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(params), _sort, body] if kw == "define-fun" => {
                let mut ps = Vec::new();
                for p in params {
                    match p {
                        Sexp::List(pv) => match pv.first() {
                            Some(Sexp::Atom(n)) => ps.push(n.clone()),
                            _ => return Err(bad("malformed parameter".into())),
                        },
                        _ => return Err(bad("malformed parameter".into())),
                    }
                }
                defs.insert(name.clone(), FunDef { params: ps, body: body.clone() });
            }
            [Sexp::Atom(kw), ..] if kw == "declare-fun" || kw == "forall" || kw == "declare-sort" => {}
            _ => return Err(bad("unsupported model entry".into())),
        }
    }
    Ok(Model { defs })
}

impl Model {
    fn value(&self, name: &str) -> Result<Option<MV>, SolverError> {
        match self.defs.get(name) {
            None => Ok(None),
            Some(d) if d.params.is_empty() => Ok(Some(self.eval(&d.body, &HashMap::new(), 0)?)),
            Some(_) => Err(SolverError::MalformedModel(format!("'{name}' is a function"))),
        }
    }

    fn int(&self, name: &str) -> Result<Option<i64>, SolverError> {
        match self.value(name)? {
            None => Ok(None),
            Some(MV::I(n)) => Ok(Some(n)),
            Some(_) => Err(SolverError::MalformedModel(format!("'{name}' is not an integer"))),
        }
    }

    fn boolean(&self, name: &str) -> Result<Option<bool>, SolverError> {
        match self.value(name)? {
            None => Ok(None),
            Some(MV::B(b)) => Ok(Some(b)),
            Some(_) => Err(SolverError::MalformedModel(format!("'{name}' is not a boolean"))),
        }
    }

    fn select(&self, name: &str, k: i64) -> Result<i64, SolverError> {
        match self.value(name)? {
            None => Ok(0),
            Some(MV::Arr(a)) => self.read(&a, k),
            Some(_) => Err(SolverError::MalformedModel(format!("'{name}' is not an array"))),
        }
    }

    fn read(&self, a: &ArrVal, k: i64) -> Result<i64, SolverError> {
        match a {
            ArrVal::Const(d, stores) => Ok(stores.iter().rev().find(|(i, _)| *i == k).map(|(_, v)| *v).unwrap_or(*d)),
            ArrVal::Lambda(p, body, env) => {
                let mut env = env.clone();
                env.insert(p.clone(), MV::I(k));
                match self.eval(body, &env, 0)? {
                    MV::I(n) => Ok(n),
                    _ => Err(SolverError::MalformedModel("lambda does not return an integer".into())),
                }
            }
            ArrVal::Func(f) => {
                let d = self.defs.get(f).ok_or_else(|| SolverError::MalformedModel(format!("unknown function '{f}'")))?;
                let [p] = d.params.as_slice() else {
                    return Err(SolverError::MalformedModel(format!("'{f}' is not unary")));
                };
                let mut env = HashMap::new();
                env.insert(p.clone(), MV::I(k));
                match self.eval(&d.body, &env, 0)? {
                    MV::I(n) => Ok(n),
                    _ => Err(SolverError::MalformedModel(format!("'{f}' does not return an integer"))),
                }
            }
        }
    }

    fn eval(&self, e: &Sexp, env: &HashMap<String, MV>, depth: usize) -> Result<MV, SolverError> {
        let bad = |m: String| SolverError::MalformedModel(m);
        if depth > 200 {
            return Err(bad("model term too deep".into()));
        }
        match e {
            Sexp::Atom(a) => {
                if let Some(v) = env.get(a) {
                    return Ok(v.clone());
                }
                if a == "true" || a == "false" {
                    return Ok(MV::B(a == "true"));
                }
                if let Ok(n) = a.parse::<i64>() {
                    return Ok(MV::I(n));
                }
                match self.defs.get(a) {
                    Some(d) if d.params.is_empty() => self.eval(&d.body, &HashMap::new(), depth + 1),
                    _ => Err(bad(format!("unknown atom '{a}' in model"))),
                }
            }
            Sexp::List(xs) => {
                let head = match xs.first() {
                    Some(Sexp::Atom(h)) => h.as_str(),
                    Some(Sexp::List(inner)) => {
                        // ((as const (Array Int Int)) v)
                        if matches!(inner.first(), Some(Sexp::Atom(a)) if a == "as")
                            && matches!(inner.get(1), Some(Sexp::Atom(c)) if c == "const")
                        {
                            let v = self.eval(xs.get(1).ok_or_else(|| bad("const without value".into()))?, env, depth + 1)?;
                            return match v {
                                MV::I(n) => Ok(MV::Arr(ArrVal::Const(n, Vec::new()))),
                                _ => Err(bad("non-integer array default".into())),
                            };
                        }
                        return Err(bad("unsupported term in model".into()));
                    }
                    None => return Err(bad("empty list in model".into())),
                };
                let args = &xs[1..];
                let ints = |s: &Self| -> Result<Vec<i64>, SolverError> {
                    args.iter()
                        .map(|a| match s.eval(a, env, depth + 1)? {
                            MV::I(n) => Ok(n),
                            _ => Err(bad(format!("non-integer argument to '{head}'"))),
                        })
                        .collect()
                };
                let bools = |s: &Self| -> Result<Vec<bool>, SolverError> {
                    args.iter()
                        .map(|a| match s.eval(a, env, depth + 1)? {
                            MV::B(b) => Ok(b),
                            _ => Err(bad(format!("non-boolean argument to '{head}'"))),
                        })
                        .collect()
                };
                match head {
                    "-" => {
                        let v = ints(self)?;
                        Ok(MV::I(match v.as_slice() {
                            [a] => a.wrapping_neg(),
                            [a, rest @ ..] => rest.iter().fold(*a, |x, y| x.wrapping_sub(*y)),
                            [] => return Err(bad("empty subtraction".into())),
                        }))
                    }
                    "+" => Ok(MV::I(ints(self)?.iter().fold(0i64, |x, y| x.wrapping_add(*y)))),
                    "*" => Ok(MV::I(ints(self)?.iter().fold(1i64, |x, y| x.wrapping_mul(*y)))),
                    "not" => Ok(MV::B(!bools(self)?.first().copied().unwrap_or(false))),
                    "and" => Ok(MV::B(bools(self)?.iter().all(|b| *b))),
                    "or" => Ok(MV::B(bools(self)?.iter().any(|b| *b))),
                    "<" | "<=" | ">" | ">=" => {
                        let v = ints(self)?;
                        let [a, b] = v.as_slice() else { return Err(bad(format!("'{head}' needs two arguments"))) };
                        Ok(MV::B(match head {
                            "<" => a < b,
                            "<=" => a <= b,
                            ">" => a > b,
                            _ => a >= b,
                        }))
                    }
                    "=" => {
                        let vs: Vec<MV> = args.iter().map(|a| self.eval(a, env, depth + 1)).collect::<Result<_, _>>()?;
                        Ok(MV::B(vs.windows(2).all(|w| w[0] == w[1])))
                    }
                    "ite" => {
                        let [c, t, f] = args else { return Err(bad("ite needs three arguments".into())) };
                        match self.eval(c, env, depth + 1)? {
                            MV::B(true) => self.eval(t, env, depth + 1),
                            MV::B(false) => self.eval(f, env, depth + 1),
                            _ => Err(bad("non-boolean ite condition".into())),
                        }
                    }
                    "store" => {
                        let [a, i, v] = args else { return Err(bad("store needs three arguments".into())) };
                        let base = self.eval(a, env, depth + 1)?;
                        let (MV::I(i), MV::I(v)) = (self.eval(i, env, depth + 1)?, self.eval(v, env, depth + 1)?) else {
                            return Err(bad("non-integer store".into()));
                        };
                        match base {
                            MV::Arr(ArrVal::Const(d, mut st)) => {
                                st.push((i, v));
                                Ok(MV::Arr(ArrVal::Const(d, st)))
                            }
                            _ => Err(bad("store over unsupported array".into())),
                        }
                    }
                    "_" => match args {
                        [Sexp::Atom(k), Sexp::Atom(f)] if k == "as-array" => Ok(MV::Arr(ArrVal::Func(f.clone()))),
                        _ => Err(bad("unsupported indexed term".into())),
                    },
                    "lambda" => {
                        let [Sexp::List(ps), body] = args else { return Err(bad("malformed lambda".into())) };
                        let [Sexp::List(p)] = ps.as_slice() else { return Err(bad("lambda is not unary".into())) };
                        let Some(Sexp::Atom(p)) = p.first() else { return Err(bad("malformed lambda parameter".into())) };
                        Ok(MV::Arr(ArrVal::Lambda(p.clone(), body.clone(), env.clone())))
                    }
                    "select" => {
                        let [a, i] = args else { return Err(bad("select needs two arguments".into())) };
                        let MV::Arr(a) = self.eval(a, env, depth + 1)? else { return Err(bad("select on non-array".into())) };
                        let MV::I(i) = self.eval(i, env, depth + 1)? else { return Err(bad("non-integer index".into())) };
                        Ok(MV::I(self.read(&a, i)?))
                    }
                    "div" | "mod" => {
                        let v = ints(self)?;
                        let [a, b] = v.as_slice() else { return Err(bad(format!("'{head}' needs two arguments"))) };
                        let r = if head == "div" { a.checked_div_euclid(*b) } else { a.checked_rem_euclid(*b) };
                        Ok(MV::I(r.ok_or_else(|| bad(format!("'{head}' by zero in model")))?))
                    }
                    "let" => {
                        let [Sexp::List(binds), body] = args else { return Err(bad("malformed let".into())) };
                        let mut inner = env.clone();
                        for b in binds {
                            let Sexp::List(pair) = b else { return Err(bad("malformed let binding".into())) };
                            let [Sexp::Atom(n), v] = pair.as_slice() else { return Err(bad("malformed let binding".into())) };
                            inner.insert(n.clone(), self.eval(v, env, depth + 1)?);
                        }
                        self.eval(body, &inner, depth + 1)
                    }
                    f => match self.defs.get(f) {
                        Some(d) if d.params.len() == args.len() => {
                            let mut inner = HashMap::new();
                            for (p, a) in d.params.iter().zip(args) {
                                inner.insert(p.clone(), self.eval(a, env, depth + 1)?);
                            }
                            self.eval(&d.body.clone(), &inner, depth + 1)
                        }
                        _ => Err(bad(format!("unsupported function '{f}' in model"))),
                    },
                }
            }
        }
    }
}
