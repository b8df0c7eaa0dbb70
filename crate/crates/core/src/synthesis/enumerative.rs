//! Builtin synthesizer: a fixed, ordered set of syntactic mutation classes.
//! Each candidate is screened against the failure it is meant to remove.

use super::{Hunk, Patch, RepairContext, SynthError, SynthRequest, Synthesizer};
use crate::intent::Checked;
use crate::lang::{
    find_node, parse_named, print_program, BinOp, Clause, Expr, Method, NodeRef, Program, Quant, QuantKind, Stmt,
    StmtId, StmtKind, TrustTag, Type, UnOp, Value,
};
use crate::solver::Solver;
use crate::vcgen::{erase, vc_gen_method, wf, VcKind};
use similar::{capture_diff_slices, Algorithm, DiffOp};
use std::collections::BTreeSet;

/// Upper bound on candidates screened per request.
const MAX_SCREENED: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationClass {
    GuardWeakening,
    TestEnsures,
    TermReplacement,
    InvariantGuard,
    ConstantReplacement,
    ClauseDeletion,
}

#[derive(Debug, Default)]
pub struct Enumerative;

impl Synthesizer for Enumerative {
    fn id(&self) -> String {
        "enumerative".to_string()
    }

    fn propose(&mut self, req: &SynthRequest, ctx: &RepairContext<'_>) -> Result<Vec<Patch>, SynthError> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for (screened, (_, cand)) in candidates(ctx).into_iter().enumerate() {
            if out.len() >= req.k || screened >= MAX_SCREENED {
                break;
            }
            let text = print_program(&cand);
            if text == req.annotated_program || !seen.insert(text.clone()) {
                continue;
            }
            let Ok(reparsed) = parse_named(&text, &req.filename) else { continue };
            if still_fails(&reparsed, ctx.failure, ctx.solver)? {
                continue;
            }
            let hunks = hunks_between(&req.annotated_program, &text, &req.filename);
            out.push(Patch { hunks, synthesizer_id: self.id(), campaign: ctx.campaign });
        }
        Ok(out)
    }
}

/// Whether `p` still has a non-valid partition with the failure's signature.
pub fn still_fails(p: &Program, failure: &Checked, solver: &Solver) -> Result<bool, crate::solver::SolverError> {
    let sig = failure.partition.signature();
    let Some(m) = p.method(&failure.partition.method) else { return Ok(false) };
    let parts = match vc_gen_method(p, m, 0) {
        Ok(ps) => ps,
        Err(_) => return Ok(true),
    };
    for part in parts.iter().filter(|q| q.signature() == sig) {
        if !solver.check_validity(&part.vc, &part.types)?.is_valid() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Line hunks turning `old` into `new`. Each hunk is widened with
/// neighbouring lines until its original text is non-empty and unique.
pub fn hunks_between(old: &str, new: &str, file: &str) -> Vec<Hunk> {
    let o: Vec<&str> = old.split('\n').collect();
    let n: Vec<&str> = new.split('\n').collect();
    let mut groups: Vec<(usize, usize, usize, usize)> = Vec::new();
    for op in capture_diff_slices(Algorithm::Myers, &o, &n) {
        let g = match op {
            DiffOp::Equal { .. } => continue,
            DiffOp::Delete { old_index, old_len, new_index } => (old_index, old_index + old_len, new_index, new_index),
            DiffOp::Insert { old_index, new_index, new_len } => (old_index, old_index, new_index, new_index + new_len),
            DiffOp::Replace { old_index, old_len, new_index, new_len } => {
                (old_index, old_index + old_len, new_index, new_index + new_len)
            }
        };
        match groups.last_mut() {
            Some(last) if last.1 == g.0 => {
                last.1 = g.1;
                last.3 = g.3;
            }
            _ => groups.push(g),
        }
    }
    let unique = |a: usize, b: usize| {
        let slice = &o[a..b];
        b > a && (0..=o.len() - slice.len()).filter(|&i| o[i..i + slice.len()] == *slice).count() == 1
    };
    for g in groups.iter_mut() {
        while !unique(g.0, g.1) {
            if g.0 > 0 {
                g.0 -= 1;
                g.2 -= 1;
            } else if g.1 < o.len() {
                g.1 += 1;
                g.3 += 1;
            } else {
                break;
            }
        }
    }
    let mut merged: Vec<(usize, usize, usize, usize)> = Vec::new();
    for g in groups {
        match merged.last_mut() {
            Some(last) if g.0 <= last.1 => {
                last.1 = last.1.max(g.1);
                last.3 = last.3.max(g.3);
            }
            _ => merged.push(g),
        }
    }
    merged
        .into_iter()
        .map(|(a, b, c, d)| Hunk { file: file.to_string(), original: o[a..b].join("\n"), patched: n[c..d].join("\n") })
        .collect()
}

/// Every candidate program, in class order.
pub fn candidates(ctx: &RepairContext<'_>) -> Vec<(MutationClass, Program)> {
    let mut out = Vec::new();
    let mut push = |class, ps: Vec<Program>| out.extend(ps.into_iter().map(|p| (class, p)));
    push(MutationClass::GuardWeakening, guard_weakening(ctx));
    push(MutationClass::TestEnsures, test_ensures(ctx));
    push(MutationClass::TermReplacement, term_replacement(ctx));
    push(MutationClass::InvariantGuard, invariant_guard(ctx));
    push(MutationClass::ConstantReplacement, constant_replacement(ctx));
    push(MutationClass::ClauseDeletion, clause_deletion(ctx));
    out
}

fn frozen(p: &Program, id: StmtId) -> bool {
    find_node(p, id).is_none_or(|n| n.trust().trusted)
}

fn push_unique(v: &mut Vec<StmtId>, id: StmtId) {
    if !v.contains(&id) {
        v.push(id);
    }
}

/// Failing target first, then origins of the top-priority facts.
fn focus(ctx: &RepairContext<'_>) -> Vec<StmtId> {
    let mut v = vec![ctx.failure.partition.target.origin];
    for f in ctx.top {
        push_unique(&mut v, f.origin.node());
    }
    v
}

fn clause_in<'a>(body: &'a mut [Stmt], id: StmtId) -> Option<&'a mut Clause> {
    for s in body {
        match &mut s.kind {
            StmtKind::While { invariants, decreases, body, .. } | StmtKind::For { invariants, decreases, body, .. } => {
                if let Some(c) = invariants.iter_mut().find(|c| c.id == id) {
                    return Some(c);
                }
                if let Some(d) = decreases.as_mut().filter(|d| d.id == id) {
                    return Some(d);
                }
                if let Some(c) = clause_in(body, id) {
                    return Some(c);
                }
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                if let Some(c) = clause_in(then_branch, id) {
                    return Some(c);
                }
                if let Some(c) = else_branch.as_mut().and_then(|e| clause_in(e, id)) {
                    return Some(c);
                }
            }
            _ => {}
        }
    }
    None
}

fn clause_mut(p: &mut Program, id: StmtId) -> Option<&mut Clause> {
    for m in &mut p.methods {
        if let Some(c) = m.requires.iter_mut().chain(m.ensures.iter_mut()).find(|c| c.id == id) {
            return Some(c);
        }
        if let Some(c) = m.body.as_mut().and_then(|b| clause_in(b, id)) {
            return Some(c);
        }
    }
    None
}

fn stmt_in<'a>(body: &'a mut [Stmt], id: StmtId) -> Option<&'a mut Stmt> {
    for s in body {
        if s.id == id {
            return Some(s);
        }
        match &mut s.kind {
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => {
                if let Some(x) = stmt_in(body, id) {
                    return Some(x);
                }
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                if let Some(x) = stmt_in(then_branch, id) {
                    return Some(x);
                }
                if let Some(x) = else_branch.as_mut().and_then(|e| stmt_in(e, id)) {
                    return Some(x);
                }
            }
            _ => {}
        }
    }
    None
}

fn stmt_mut(p: &mut Program, id: StmtId) -> Option<&mut Stmt> {
    p.methods.iter_mut().find_map(|m| m.body.as_mut().and_then(|b| stmt_in(b, id)))
}

fn remove_in(body: &mut Vec<Stmt>, id: StmtId) -> bool {
    let before = body.len();
    body.retain(|s| s.id != id);
    if body.len() != before {
        return true;
    }
    for s in body.iter_mut() {
        let hit = match &mut s.kind {
            StmtKind::While { invariants, body, .. } | StmtKind::For { invariants, body, .. } => {
                let n = invariants.len();
                invariants.retain(|c| c.id != id);
                invariants.len() != n || remove_in(body, id)
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                remove_in(then_branch, id) || else_branch.as_mut().is_some_and(|e| remove_in(e, id))
            }
            _ => false,
        };
        if hit {
            return true;
        }
    }
    false
}

fn remove_node(p: &mut Program, id: StmtId) -> bool {
    for m in &mut p.methods {
        let n = m.requires.len() + m.ensures.len();
        m.requires.retain(|c| c.id != id);
        m.ensures.retain(|c| c.id != id);
        if m.requires.len() + m.ensures.len() != n {
            return true;
        }
        if m.body.as_mut().is_some_and(|b| remove_in(b, id)) {
            return true;
        }
    }
    false
}

/// Replaces the formula of a clause or assert and marks it patched.
fn with_formula(p: &Program, id: StmtId, f: Expr) -> Option<Program> {
    let mut q = p.clone();
    if let Some(c) = clause_mut(&mut q, id) {
        c.formula = f;
        c.trust = TrustTag::patched();
        return Some(q);
    }
    let s = stmt_mut(&mut q, id)?;
    match &mut s.kind {
        StmtKind::Assert(e) => *e = f,
        _ => return None,
    }
    s.trust = TrustTag::patched();
    Some(q)
}

fn formula_of(p: &Program, id: StmtId) -> Option<Expr> {
    match find_node(p, id)? {
        NodeRef::Requires(_, c) | NodeRef::Ensures(_, c) | NodeRef::Invariant(_, c) => Some(c.formula.clone()),
        NodeRef::Stmt(_, Stmt { kind: StmtKind::Assert(e), .. }) => Some(e.clone()),
        _ => None,
    }
}

fn bound_range<'a>(e: &'a Expr, var: &str) -> Option<&'a Quant> {
    let mut found = None;
    e.walk(&mut |x| {
        if let Expr::Quant(q) = x {
            if q.var == var && found.is_none() {
                found = Some(q);
            }
        }
    });
    found
}

fn bound_vars(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    e.walk(&mut |x| {
        if let Expr::Quant(q) = x {
            out.insert(q.var.clone());
        }
    });
    out
}

/// `0 <= v < a.Length` for each access, where v is the index or, for an
/// index bound by a quantifier, that quantifier's upper bound.
fn access_guards(f: &Expr) -> Vec<Expr> {
    let bound = bound_vars(f);
    let mut out: Vec<Expr> = Vec::new();
    for o in wf::obligations(f) {
        let Expr::Index(arr, idx) = &o.access else { continue };
        let v = match &**idx {
            Expr::Var(i) if bound.contains(i) => match bound_range(f, i) {
                Some(q) => (*q.hi).clone(),
                None => continue,
            },
            other => other.clone(),
        };
        if v.free_vars().iter().any(|x| bound.contains(x)) || arr.free_vars().iter().any(|x| bound.contains(x)) {
            continue;
        }
        let g = Expr::in_bounds((**arr).clone(), v);
        if !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

fn guard_weakening(ctx: &RepairContext<'_>) -> Vec<Program> {
    let p = ctx.program;
    let part = &ctx.failure.partition;
    let failing_wf: BTreeSet<StmtId> = ctx
        .report
        .partitions
        .iter()
        .filter(|s| s.kind.is_wf() && s.status != crate::solver::Status::Valid)
        .map(|s| s.target)
        .collect();
    let mut targets = Vec::new();
    if part.kind.is_wf() {
        targets.push(part.target.origin);
    }
    for id in focus(ctx) {
        if failing_wf.contains(&id) {
            push_unique(&mut targets, id);
        }
    }
    let mut out = Vec::new();
    for id in targets {
        if frozen(p, id) {
            continue;
        }
        let Some(f) = formula_of(p, id) else { continue };
        let guards = access_guards(&f);
        if guards.is_empty() {
            continue;
        }
        if let Some(q) = with_formula(p, id, Expr::imp(Expr::conj(guards), f)) {
            out.push(q);
        }
    }
    out
}

fn const_int(e: &Expr) -> Option<i64> {
    match e {
        Expr::Int(n) => Some(*n),
        Expr::Unary(UnOp::Neg, a) => const_int(a).map(|n| -n),
        _ => None,
    }
}

/// Element properties tried as antecedents, in order.
fn element_properties(a: &str, i: &str) -> Vec<(Expr, fn(i64) -> bool)> {
    let el = || Expr::Index(Box::new(Expr::var(a)), Box::new(Expr::var(i)));
    let m2 = || Expr::bin(BinOp::Mod, el(), Expr::Int(2));
    vec![
        (Expr::eq(m2(), Expr::Int(0)), |v| v % 2 == 0),
        (Expr::bin(BinOp::Ne, m2(), Expr::Int(0)), |v| v % 2 != 0),
        (Expr::eq(el(), Expr::Int(0)), |v| v == 0),
        (Expr::bin(BinOp::Gt, el(), Expr::Int(0)), |v| v > 0),
        (Expr::bin(BinOp::Ge, el(), Expr::Int(0)), |v| v >= 0),
        (Expr::bin(BinOp::Lt, el(), Expr::Int(0)), |v| v < 0),
        (Expr::bin(BinOp::Le, el(), Expr::Int(0)), |v| v <= 0),
    ]
}

fn literal_of(e: &Expr) -> Option<Value> {
    match e {
        Expr::ArrayLit(xs) => Some(Value::Array(xs.clone())),
        Expr::Bool(b) => Some(Value::Bool(*b)),
        _ => const_int(e).map(Value::Int),
    }
}

/// Input literals fixed by `x == lit` requires clauses.
fn pinned_inputs(m: &Method) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    for c in &m.requires {
        for conj in c.formula.conjuncts() {
            if let Expr::Binary(BinOp::Eq, l, r) = conj {
                match (&**l, &**r) {
                    (Expr::Var(v), e) | (e, Expr::Var(v)) => {
                        if let Some(val) = literal_of(e) {
                            out.push((v.clone(), val));
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    out
}

fn fresh_var(taken: &BTreeSet<String>) -> String {
    ["i", "j", "k", "n"].iter().map(|s| s.to_string()).find(|s| !taken.contains(s)).unwrap_or_else(|| "i0".into())
}

/// For a failing ensures of a wrapper that calls an opaque method once:
/// add `P(inputs) ==> oracle` to the callee, with P true of the pinned
/// inputs.
fn test_ensures(ctx: &RepairContext<'_>) -> Vec<Program> {
    let p = ctx.program;
    let part = &ctx.failure.partition;
    if part.kind != VcKind::Postcondition {
        return Vec::new();
    }
    let Some(wrapper) = p.method(&part.method) else { return Vec::new() };
    let Some(oracle) = wrapper.ensures.iter().find(|c| c.id == part.target.origin).map(|c| c.formula.clone()) else {
        return Vec::new();
    };
    let calls: Vec<&Stmt> = wrapper
        .body
        .iter()
        .flatten()
        .filter(|s| matches!(s.kind, StmtKind::Call { .. }))
        .collect();
    let [Stmt { kind: StmtKind::Call { targets, method, args, .. }, .. }] = calls.as_slice() else {
        return Vec::new();
    };
    let Some(callee) = p.method(method) else { return Vec::new() };
    if callee.trust.trusted || callee.name == wrapper.name {
        return Vec::new();
    }
    let mut rename: Vec<(String, String)> = Vec::new();
    for (a, param) in args.iter().zip(&callee.params) {
        if let Expr::Var(x) = a {
            rename.push((x.clone(), param.name.clone()));
        }
    }
    for (t, r) in targets.iter().zip(&callee.returns) {
        rename.push((t.clone(), r.name.clone()));
    }
    let bound = bound_vars(&oracle);
    if oracle.free_vars().iter().any(|v| !bound.contains(v) && !rename.iter().any(|(x, _)| x == v)) {
        return Vec::new();
    }
    let post = oracle.subst(&|v| rename.iter().find(|(x, _)| x == v).map(|(_, y)| Expr::var(y)));
    let mut taken: BTreeSet<String> = callee.params.iter().chain(&callee.returns).map(|p| p.name.clone()).collect();
    taken.extend(post.free_vars());
    taken.extend(bound);
    let i = fresh_var(&taken);
    let mut antecedents = Vec::new();
    for (x, val) in pinned_inputs(wrapper) {
        let Some((_, param)) = rename.iter().find(|(a, _)| *a == x) else { continue };
        match val {
            Value::Array(xs) if !xs.is_empty() => {
                for (prop, holds) in element_properties(param, &i) {
                    if xs.iter().all(|v| holds(*v)) {
                        antecedents.push(Expr::Quant(Quant {
                            kind: QuantKind::Forall,
                            var: i.clone(),
                            lo: Box::new(Expr::Int(0)),
                            hi: Box::new(Expr::Length(Box::new(Expr::var(param)))),
                            body: Box::new(prop),
                        }));
                    }
                }
            }
            Value::Int(n) => antecedents.push(Expr::eq(Expr::var(param), Expr::Int(n))),
            _ => {}
        }
    }
    let next_id = StmtId(crate::lang::nodes(p).iter().map(|n| n.id().0).max().unwrap_or(0) + 1);
    let mut out = Vec::new();
    for a in antecedents {
        let mut q = p.clone();
        if let Some(m) = q.method_mut(&callee.name) {
            let span = m.ensures.last().map(|c| c.span).unwrap_or(m.span);
            m.ensures.push(Clause { id: next_id, span, trust: TrustTag::patched(), formula: Expr::imp(a, post.clone()) });
            out.push(q);
        }
    }
    out
}

fn locals_of(m: &Method) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = m.returns.iter().map(|p| p.name.clone()).collect();
    fn walk(body: &[Stmt], out: &mut BTreeSet<String>) {
        for s in body {
            match &s.kind {
                StmtKind::VarDecl { name, .. } => {
                    out.insert(name.clone());
                }
                StmtKind::If { then_branch, else_branch, .. } => {
                    walk(then_branch, out);
                    if let Some(e) = else_branch {
                        walk(e, out);
                    }
                }
                StmtKind::While { body, .. } | StmtKind::For { body, .. } => walk(body, out),
                _ => {}
            }
        }
    }
    walk(m.body.as_deref().unwrap_or_default(), &mut out);
    out
}

/// `v == t` subterms of a formula, `v` a local or result.
fn equalities(f: &Expr, locals: &BTreeSet<String>, params: &BTreeSet<String>) -> Vec<(String, Expr)> {
    let mut out = Vec::new();
    f.walk(&mut |x| {
        if let Expr::Binary(BinOp::Eq, l, r) = x {
            for (a, b) in [(l, r), (r, l)] {
                if let Expr::Var(v) = &**a {
                    let ok = locals.contains(v) && b.free_vars().iter().all(|y| params.contains(y));
                    if ok && !matches!(**b, Expr::Quant(_)) && !out.contains(&(v.clone(), (**b).clone())) {
                        out.push((v.clone(), (**b).clone()));
                    }
                }
            }
        }
    });
    out
}

/// Assignments `v := c` with a constant right-hand side.
fn constant_assignments(m: &Method) -> Vec<(StmtId, String, i64)> {
    let mut out = Vec::new();
    fn walk(body: &[Stmt], out: &mut Vec<(StmtId, String, i64)>) {
        for s in body {
            match &s.kind {
                StmtKind::Assign { target, value } => {
                    if let Some(c) = const_int(value) {
                        out.push((s.id, target.clone(), c));
                    }
                }
                StmtKind::VarDecl { name, init: Some(value), .. } => {
                    if let Some(c) = const_int(value) {
                        out.push((s.id, name.clone(), c));
                    }
                }
                StmtKind::If { then_branch, else_branch, .. } => {
                    walk(then_branch, out);
                    if let Some(e) = else_branch {
                        walk(e, out);
                    }
                }
                StmtKind::While { body, .. } | StmtKind::For { body, .. } => walk(body, out),
                _ => {}
            }
        }
    }
    walk(m.body.as_deref().unwrap_or_default(), &mut out);
    out
}

fn set_value(q: &mut Program, id: StmtId, t: Expr) -> bool {
    let Some(s) = stmt_mut(q, id) else { return false };
    match &mut s.kind {
        StmtKind::Assign { value, .. } => *value = t,
        StmtKind::VarDecl { init: Some(value), .. } => *value = t,
        _ => return false,
    }
    s.trust = TrustTag::patched();
    true
}

fn method_clauses(m: &Method) -> Vec<(StmtId, Expr)> {
    let mut out: Vec<(StmtId, Expr)> = m.ensures.iter().map(|c| (c.id, c.formula.clone())).collect();
    fn walk(body: &[Stmt], out: &mut Vec<(StmtId, Expr)>) {
        for s in body {
            match &s.kind {
                StmtKind::While { invariants, body, .. } | StmtKind::For { invariants, body, .. } => {
                    out.extend(invariants.iter().map(|c| (c.id, c.formula.clone())));
                    walk(body, out);
                }
                StmtKind::If { then_branch, else_branch, .. } => {
                    walk(then_branch, out);
                    if let Some(e) = else_branch {
                        walk(e, out);
                    }
                }
                _ => {}
            }
        }
    }
    walk(m.body.as_deref().unwrap_or_default(), &mut out);
    out
}

/// Rewrites `v == c` to `v == t` inside a formula.
fn replace_eq(f: &Expr, v: &str, c: i64, t: &Expr) -> Expr {
    f.map(&mut |x| match &x {
        Expr::Binary(BinOp::Eq, l, r) => match (&**l, &**r) {
            (Expr::Var(a), b) if a == v && const_int(b) == Some(c) => Expr::eq(Expr::var(v), t.clone()),
            (b, Expr::Var(a)) if a == v && const_int(b) == Some(c) => Expr::eq(t.clone(), Expr::var(v)),
            _ => x,
        },
        _ => x,
    })
}

/// The failing target demands `v == t`: replace the constant `c` assigned to
/// `v`, and every clause equating `v` with `c`, by `t` in one patch.
fn term_replacement(ctx: &RepairContext<'_>) -> Vec<Program> {
    let p = ctx.program;
    let part = &ctx.failure.partition;
    let Some(m) = p.method(&part.method) else { return Vec::new() };
    let locals = locals_of(m);
    let params: BTreeSet<String> = m.params.iter().map(|p| p.name.clone()).collect();
    let target = erase(&part.target.source);
    let mut out = Vec::new();
    for (v, t) in equalities(&target, &locals, &params) {
        let mut q = p.clone();
        let mut changed = false;
        let mut consts = BTreeSet::new();
        for (id, var, c) in constant_assignments(m) {
            if var == v && Some(c) != const_int(&t) && !frozen(p, id) && set_value(&mut q, id, t.clone()) {
                changed = true;
                consts.insert(c);
            }
        }
        if !changed {
            continue;
        }
        for (id, f) in method_clauses(m) {
            if frozen(p, id) {
                continue;
            }
            let mut g = f.clone();
            for c in &consts {
                g = replace_eq(&g, &v, *c, &t);
            }
            if g != f {
                if let Some(c) = clause_mut(&mut q, id) {
                    c.formula = g;
                    c.trust = TrustTag::patched();
                }
            }
        }
        out.push(q);
    }
    out
}

fn bool_vars(m: &Method) -> Vec<String> {
    let mut out: Vec<String> =
        m.params.iter().chain(&m.returns).filter(|p| p.ty == Type::Bool).map(|p| p.name.clone()).collect();
    fn walk(body: &[Stmt], out: &mut Vec<String>) {
        for s in body {
            match &s.kind {
                StmtKind::VarDecl { name, ty, init } => {
                    if *ty == Some(Type::Bool) || matches!(init, Some(Expr::Bool(_))) {
                        out.push(name.clone());
                    }
                }
                StmtKind::If { then_branch, else_branch, .. } => {
                    walk(then_branch, out);
                    if let Some(e) = else_branch {
                        walk(e, out);
                    }
                }
                StmtKind::While { body, .. } | StmtKind::For { body, .. } => walk(body, out),
                _ => {}
            }
        }
    }
    walk(m.body.as_deref().unwrap_or_default(), &mut out);
    out
}

fn invariant_guard(ctx: &RepairContext<'_>) -> Vec<Program> {
    let p = ctx.program;
    let part = &ctx.failure.partition;
    if !matches!(part.kind, VcKind::InvariantEntry | VcKind::InvariantMaintain) {
        return Vec::new();
    }
    let id = part.target.origin;
    let (Some(m), Some(f)) = (p.method(&part.method), formula_of(p, id)) else { return Vec::new() };
    if frozen(p, id) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for b in bool_vars(m) {
        for g in [Expr::var(&b), Expr::not(Expr::var(&b))] {
            out.extend(with_formula(p, id, Expr::imp(g, f.clone())));
        }
    }
    out
}

fn constant_replacement(ctx: &RepairContext<'_>) -> Vec<Program> {
    let p = ctx.program;
    let part = &ctx.failure.partition;
    let Some(m) = p.method(&part.method) else { return Vec::new() };
    let mut near: Vec<StmtId> = part.path.iter().filter_map(|s| s.origin).collect();
    for id in focus(ctx) {
        push_unique(&mut near, id);
    }
    let mut out = Vec::new();
    for (id, _, c) in constant_assignments(m) {
        if !near.contains(&id) || frozen(p, id) {
            continue;
        }
        let mut values: Vec<i64> = (ctx.domain.int_lo..=ctx.domain.int_hi).filter(|v| *v != c).collect();
        values.sort_by_key(|v| ((v - c).abs(), *v));
        for v in values {
            let mut q = p.clone();
            if set_value(&mut q, id, Expr::Int(v)) {
                out.push(q);
            }
        }
    }
    out
}

fn clause_deletion(ctx: &RepairContext<'_>) -> Vec<Program> {
    let p = ctx.program;
    let mut out = Vec::new();
    for id in focus(ctx) {
        if frozen(p, id) {
            continue;
        }
        let deletable = matches!(
            find_node(p, id),
            Some(NodeRef::Ensures(..) | NodeRef::Invariant(..) | NodeRef::Stmt(_, Stmt { kind: StmtKind::Assert(_), .. }))
        );
        if !deletable {
            continue;
        }
        let mut q = p.clone();
        if remove_node(&mut q, id) {
            out.push(q);
        }
    }
    out
}
