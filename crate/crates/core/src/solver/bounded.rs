use super::eval::{assemble, Assignment, EvalError, Evaluator};
use crate::lang::{BinOp, Expr, QuantKind, Type, UnOp, Value};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BoundedDomain {
    pub int_lo: i64,
    pub int_hi: i64,
    pub max_array_len: usize,
}

impl Default for BoundedDomain {
    fn default() -> Self {
        BoundedDomain { int_lo: -4, int_hi: 4, max_array_len: 3 }
    }
}

impl BoundedDomain {
    /// Integers in enumeration order: 0, 1, -1, 2, -2, ...
    pub fn ints(&self) -> Vec<i64> {
        let mut out = Vec::new();
        if self.int_lo <= 0 && 0 <= self.int_hi {
            out.push(0);
        }
        let reach = self.int_hi.max(-self.int_lo).max(0);
        for k in 1..=reach {
            if k <= self.int_hi && k >= self.int_lo {
                out.push(k);
            }
            if -k >= self.int_lo && -k <= self.int_hi {
                out.push(-k);
            }
        }
        if out.is_empty() {
            out.extend(self.int_lo..=self.int_hi);
        }
        out
    }

    /// Arrays by length ascending, elements in integer order.
    pub fn arrays(&self) -> Vec<Vec<i64>> {
        let ints = self.ints();
        let mut out = vec![Vec::new()];
        let mut layer = vec![Vec::new()];
        for _ in 0..self.max_array_len {
            let mut next = Vec::new();
            for a in &layer {
                for x in &ints {
                    let mut b = a.clone();
                    b.push(*x);
                    next.push(b);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    pub fn values(&self, t: Type) -> Vec<Value> {
        match t {
            Type::Int => self.ints().into_iter().map(Value::Int).collect(),
            Type::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Type::Array => self.arrays().into_iter().map(Value::Array).collect(),
        }
    }
}

pub fn default_value(t: Type) -> Value {
    match t {
        Type::Int => Value::Int(0),
        Type::Bool => Value::Bool(false),
        Type::Array => Value::Array(Vec::new()),
    }
}

/// Goal-driven backtracking search for an assignment giving each goal
/// formula its wanted truth value.
pub struct Search<'a> {
    domain: &'a BoundedDomain,
    types: &'a BTreeMap<String, Type>,
    cache: BTreeMap<Type, Vec<Value>>,
    pub nodes: u64,
    /// Search nodes allowed before giving up; `exhausted` is set when hit.
    pub max_nodes: u64,
    pub exhausted: bool,
}

enum Step {
    Fail,
    Done,
    Next(Vec<(Expr, bool)>),
}

impl<'a> Search<'a> {
    pub fn new(domain: &'a BoundedDomain, types: &'a BTreeMap<String, Type>) -> Search<'a> {
        Search { domain, types, cache: BTreeMap::new(), nodes: 0, max_nodes: u64::MAX, exhausted: false }
    }

    fn ty(&self, v: &str) -> Type {
        self.types.get(v).copied().unwrap_or(Type::Int)
    }

    fn candidates(&mut self, v: &str) -> Vec<Value> {
        match v.split_once('#') {
            Some((_, "len")) => (0..=self.domain.max_array_len as i64).map(Value::Int).collect(),
            Some(_) => self.domain_of(Type::Int),
            None => {
                let t = self.ty(v);
                self.domain_of(t)
            }
        }
    }

    fn domain_of(&mut self, t: Type) -> Vec<Value> {
        if let Some(v) = self.cache.get(&t) {
            return v.clone();
        }
        let v = self.domain.values(t);
        self.cache.insert(t, v.clone());
        v
    }

    /// Finds an assignment satisfying all goals, if one exists in the domain.
    pub fn solve(&mut self, goals: Vec<(Expr, bool)>) -> Option<Assignment> {
        let mut env = Assignment::new();
        if self.go(goals, &mut env) {
            Some(assemble(&env))
        } else {
            None
        }
    }

    fn go(&mut self, goals: Vec<(Expr, bool)>, env: &mut Assignment) -> bool {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.exhausted = true;
            return false;
        }
        match self.step(goals, env) {
            Step::Fail => false,
            Step::Done => true,
            Step::Next(goals) => self.go(goals, env),
        }
    }

    fn step(&mut self, goals: Vec<(Expr, bool)>, env: &mut Assignment) -> Step {
        let mut open = Vec::new();
        let mut stuck = None;
        for (f, want) in goals {
            match Evaluator::new(env, false).bool(&f) {
                Ok(b) if b == want => {}
                Ok(_) => return Step::Fail,
                Err(EvalError::UnboundVariable(v)) => {
                    stuck.get_or_insert(v);
                    open.push((f, want));
                }
                Err(_) => return Step::Fail,
            }
        }
        if open.is_empty() {
            return Step::Done;
        }
        // Equalities with an evaluable side bind the other side directly.
        for (i, (f, want)) in open.iter().enumerate() {
            if !*want {
                continue;
            }
            if let Expr::Binary(BinOp::Eq, l, r) = f {
                for (v, e) in [(l, r), (r, l)] {
                    let Expr::Var(name) = &**v else { continue };
                    let prefix = format!("{name}#");
                    if env.contains_key(name) || env.range(prefix.clone()..).next().is_some_and(|(k, _)| k.starts_with(&prefix)) {
                        continue;
                    }
                    if let Ok(val) = Evaluator::new(env, false).value(e) {
                        if val.ty() != self.ty(name) {
                            continue;
                        }
                        let mut rest = open.clone();
                        rest.remove(i);
                        return self.bind(name.clone(), vec![val], rest, env);
                    }
                }
            }
        }
        // Only decompositions with a single alternative are applied; choices
        // are made by enumerating values so witnesses come in domain order.
        for (i, (f, want)) in open.iter().enumerate() {
            if let Some(g) = decompose(f, *want, env) {
                let mut rest = open.clone();
                rest.remove(i);
                let mut g = g;
                g.extend(rest);
                return Step::Next(g);
            }
        }
        // Goals sharing no unbound variable are solved independently.
        let comps = components(&open, env);
        if comps.len() > 1 {
            for c in comps {
                if !self.go(c, env) {
                    return Step::Fail;
                }
            }
            return Step::Done;
        }
        // Enumerate the variable the first open goal is blocked on.
        let Some(v) = stuck else {
            return Step::Fail;
        };
        let vals = self.candidates(&v);
        self.bind(v, vals, open, env)
    }

    fn bind(&mut self, name: String, vals: Vec<Value>, goals: Vec<(Expr, bool)>, env: &mut Assignment) -> Step {
        for val in vals {
            env.insert(name.clone(), val);
            if self.go(goals.clone(), env) {
                return Step::Done;
            }
        }
        env.remove(&name);
        Step::Fail
    }
}

fn components(goals: &[(Expr, bool)], env: &Assignment) -> Vec<Vec<(Expr, bool)>> {
    let vars: Vec<Vec<String>> =
        goals.iter().map(|(f, _)| f.free_vars().into_iter().filter(|v| !env.contains_key(v)).collect()).collect();
    let mut comp: Vec<usize> = (0..goals.len()).collect();
    fn root(c: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while c[r] != r {
            r = c[r];
        }
        c[i] = r;
        r
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, vs) in vars.iter().enumerate() {
        for v in vs {
            match owner.get(v.as_str()) {
                Some(&j) => {
                    let (a, b) = (root(&mut comp, i), root(&mut comp, j));
                    comp[a.max(b)] = a.min(b);
                }
                None => {
                    owner.insert(v, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<(Expr, bool)>> = BTreeMap::new();
    for (i, g) in goals.iter().enumerate() {
        let r = root(&mut comp, i);
        groups.entry(r).or_default().push(g.clone());
    }
    groups.into_values().collect()
}

/// Goals equivalent to `f` having truth `want`, when no case split is needed.
fn decompose(f: &Expr, want: bool, env: &Assignment) -> Option<Vec<(Expr, bool)>> {
    let g = |e: &Expr, w: bool| (e.clone(), w);
    Some(match f {
        Expr::Unary(UnOp::Not, a) => vec![g(a, !want)],
        Expr::Binary(BinOp::And, a, b) if want => vec![g(a, true), g(b, true)],
        Expr::Binary(BinOp::Or, a, b) if !want => vec![g(a, false), g(b, false)],
        Expr::Binary(BinOp::Imp, a, b) if !want => vec![g(a, true), g(b, false)],
        Expr::Chain(xs, ops) => {
            let pairs: Vec<Expr> =
                ops.iter().enumerate().map(|(i, op)| Expr::bin(*op, xs[i].clone(), xs[i + 1].clone())).collect();
            vec![g(&Expr::conj(pairs), want)]
        }
        Expr::Quant(q) => {
            let lo = Evaluator::new(env, false).int(&q.lo).ok()?;
            let hi = Evaluator::new(env, false).int(&q.hi).ok()?;
            if hi.saturating_sub(lo) > 10_000 {
                return None;
            }
            let inst: Vec<Expr> = (lo..hi)
                .map(|k| q.body.subst(&|v| if v == q.var { Some(Expr::Int(k)) } else { None }))
                .collect();
            let combined = match q.kind {
                QuantKind::Forall => Expr::conj(inst),
                QuantKind::Exists => {
                    let mut it = inst.into_iter();
                    match it.next() {
                        None => Expr::Bool(false),
                        Some(first) => it.fold(first, |a, b| Expr::bin(BinOp::Or, a, b)),
                    }
                }
            };
            vec![g(&combined, want)]
        }
        _ => return None,
    })
}
