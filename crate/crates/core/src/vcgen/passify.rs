use super::{wf, PKind, PStmt, PassiveBlock, PassiveGraph, VcError, VcKind};
use crate::lang::{Clause, Expr, Method, Program, Stmt, StmtId, StmtKind, Type, UnOp};
use std::collections::{BTreeMap, BTreeSet, HashMap};

type Env = BTreeMap<String, String>;

struct LoopCtx {
    breaks: Vec<(usize, Env)>,
}

struct Builder<'a> {
    prog: &'a Program,
    blocks: Vec<PassiveBlock>,
    cur: Option<usize>,
    env: Env,
    versions: HashMap<String, u32>,
    types: BTreeMap<String, Type>,
    loops: Vec<LoopCtx>,
}

/// SSA name for version `k`; version 0 is the plain source name.
pub fn ssa_name(name: &str, k: u32) -> String {
    if k == 0 {
        name.to_string()
    } else {
        format!("{name}@{k}")
    }
}

/// Drops SSA suffixes, mapping `x@3` back to `x`.
pub fn erase(e: &Expr) -> Expr {
    e.map(&mut |x| match x {
        Expr::Var(v) if v.contains('@') => Expr::Var(v.split('@').next().unwrap_or_default().to_string()),
        other => other,
    })
}

impl<'a> Builder<'a> {
    fn new_block(&mut self) -> usize {
        let id = self.blocks.len();
        self.blocks.push(PassiveBlock { id, stmts: Vec::new(), succs: Vec::new() });
        id
    }

    fn link(&mut self, from: usize, to: usize) {
        self.blocks[from].succs.push(to);
    }

    fn ssa(&self, e: &Expr) -> Expr {
        e.subst(&|v| self.env.get(v).map(|s| Expr::Var(s.clone())))
    }

    fn fresh(&mut self, name: &str, ty: Type) -> String {
        let k = self.versions.entry(name.to_string()).or_insert(0);
        *k += 1;
        let s = ssa_name(name, *k);
        self.types.insert(s.clone(), ty);
        self.env.insert(name.to_string(), s.clone());
        s
    }

    fn base(&mut self, name: &str, ty: Type) {
        self.versions.insert(name.to_string(), 0);
        self.types.insert(name.to_string(), ty);
        self.env.insert(name.to_string(), name.to_string());
    }

    fn type_of(&self, name: &str) -> Type {
        self.env.get(name).and_then(|s| self.types.get(s)).copied().unwrap_or(Type::Int)
    }

    fn push(&mut self, st: PStmt) {
        if let Some(b) = self.cur {
            self.blocks[b].stmts.push(st);
        }
    }

    fn assume(&mut self, source: &Expr, origin: StmtId) {
        let formula = self.ssa(source);
        self.push(PStmt {
            op: PKind::Assume,
            formula,
            source: source.clone(),
            origin: Some(origin),
            kind: None,
            plumbing: false,
            wf_access: None,
        });
    }

    fn plumbing(&mut self, block: usize, formula: Expr) {
        self.blocks[block].stmts.push(PStmt {
            op: PKind::Assume,
            source: erase(&formula),
            formula,
            origin: None,
            kind: None,
            plumbing: true,
            wf_access: None,
        });
    }

    fn assert(&mut self, source: &Expr, origin: StmtId, kind: VcKind) {
        for c in source.conjuncts() {
            let formula = self.ssa(c);
            self.push(PStmt {
                op: PKind::Assert,
                formula,
                source: c.clone(),
                origin: Some(origin),
                kind: Some(kind),
                plumbing: false,
                wf_access: None,
            });
        }
    }

    fn wf(&mut self, e: &Expr, origin: StmtId) {
        for o in wf::obligations(e) {
            let formula = self.ssa(&o.formula);
            self.push(PStmt {
                op: PKind::Assert,
                formula,
                source: o.formula,
                origin: Some(origin),
                kind: Some(VcKind::WfCheck),
                plumbing: false,
                wf_access: Some(o.access),
            });
        }
    }

    /// Merges live incoming edges into a fresh block, adding copy assumes
    /// where SSA versions disagree.
    fn join(&mut self, incoming: Vec<(usize, Env)>, keys: &BTreeSet<String>) {
        if incoming.is_empty() {
            self.cur = None;
            return;
        }
        let j = self.new_block();
        let mut env = Env::new();
        for k in keys {
            let names: BTreeSet<&String> = incoming.iter().filter_map(|(_, e)| e.get(k)).collect();
            if names.len() == 1 {
                if let Some(n) = names.into_iter().next() {
                    env.insert(k.clone(), n.clone());
                }
                continue;
            }
            let ty = incoming
                .iter()
                .find_map(|(_, e)| e.get(k).and_then(|s| self.types.get(s)))
                .copied()
                .unwrap_or(Type::Int);
            let fresh = self.fresh(k, ty);
            for (b, e) in &incoming {
                if let Some(old) = e.get(k) {
                    self.plumbing(*b, Expr::eq(Expr::Var(fresh.clone()), Expr::Var(old.clone())));
                }
            }
            env.insert(k.clone(), fresh);
        }
        for (b, _) in &incoming {
            self.link(*b, j);
        }
        self.cur = Some(j);
        self.env = env;
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), VcError> {
        let keys: BTreeSet<String> = self.env.keys().cloned().collect();
        for s in body {
            if self.cur.is_none() {
                break;
            }
            self.stmt(s)?;
        }
        self.env.retain(|k, _| keys.contains(k));
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), VcError> {
        match &s.kind {
            StmtKind::VarDecl { name, ty, init } => {
                let t = match (ty, init) {
                    (Some(t), _) => *t,
                    (None, Some(e)) => self.infer(e),
                    (None, None) => Type::Int,
                };
                match init {
                    Some(e) => {
                        self.wf(e, s.id);
                        let rhs = self.ssa(e);
                        let v = self.fresh(name, t);
                        self.push(PStmt {
                            op: PKind::Assume,
                            formula: Expr::eq(Expr::Var(v), rhs),
                            source: Expr::eq(Expr::var(name), e.clone()),
                            origin: Some(s.id),
                            kind: None,
                            plumbing: false,
                            wf_access: None,
                        });
                    }
                    None => {
                        self.fresh(name, t);
                    }
                }
            }
            StmtKind::Assign { target, value } => {
                self.wf(value, s.id);
                let rhs = self.ssa(value);
                let t = self.type_of(target);
                let v = self.fresh(target, t);
                self.push(PStmt {
                    op: PKind::Assume,
                    formula: Expr::eq(Expr::Var(v), rhs),
                    source: Expr::eq(Expr::var(target), value.clone()),
                    origin: Some(s.id),
                    kind: None,
                    plumbing: false,
                    wf_access: None,
                });
            }
            StmtKind::Call { targets, method, args, .. } => self.call(s, targets, method, args)?,
            StmtKind::Assert(e) => {
                self.wf(e, s.id);
                self.assert(e, s.id, VcKind::IntermediateAssert);
            }
            StmtKind::Assume(e) => {
                self.wf(e, s.id);
                self.assume(e, s.id);
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.wf(cond, s.id);
                let Some(base) = self.cur else { return Ok(()) };
                let env0 = self.env.clone();
                let keys: BTreeSet<String> = env0.keys().cloned().collect();

                let t = self.new_block();
                self.link(base, t);
                self.cur = Some(t);
                self.assume(cond, s.id);
                self.block(then_branch)?;
                let then_out = self.cur.map(|c| (c, self.env.clone()));

                self.env = env0;
                let e = self.new_block();
                self.link(base, e);
                self.cur = Some(e);
                self.assume(&Expr::Unary(UnOp::Not, Box::new(cond.clone())), s.id);
                if let Some(els) = else_branch {
                    self.block(els)?;
                }
                let else_out = self.cur.map(|c| (c, self.env.clone()));
                self.join(then_out.into_iter().chain(else_out).collect(), &keys);
            }
            StmtKind::While { cond, invariants, body, .. } => {
                self.looped(s, cond.clone(), invariants, body, None)?;
            }
            StmtKind::For { var, lo, hi, invariants, body, .. } => {
                let cond = Expr::bin(crate::lang::BinOp::Lt, Expr::var(var), hi.clone());
                self.looped(s, cond, invariants, body, Some((var, lo)))?;
            }
            StmtKind::Break => {
                if let (Some(c), Some(l)) = (self.cur, self.loops.last_mut()) {
                    l.breaks.push((c, self.env.clone()));
                } else if self.loops.is_empty() {
                    return Err(VcError::Unsupported { span: s.span, what: "break outside of a loop".into() });
                }
                self.cur = None;
            }
        }
        Ok(())
    }

    fn infer(&self, e: &Expr) -> Type {
        match e {
            Expr::Bool(_) | Expr::Unary(UnOp::Not, _) | Expr::Chain(..) | Expr::Quant(_) => Type::Bool,
            Expr::Binary(op, ..) if op.precedence() <= 5 => Type::Bool,
            Expr::ArrayLit(_) | Expr::Null => Type::Array,
            Expr::Var(v) => self.type_of(v),
            _ => Type::Int,
        }
    }

    fn call(&mut self, s: &Stmt, targets: &[String], method: &str, args: &[Expr]) -> Result<(), VcError> {
        let callee = self
            .prog
            .method(method)
            .ok_or_else(|| VcError::Unsupported { span: s.span, what: format!("call to unknown method '{method}'") })?;
        for a in args {
            self.wf(a, s.id);
        }
        let actual: HashMap<String, (Expr, Expr)> = callee
            .params
            .iter()
            .zip(args)
            .map(|(p, a)| (p.name.clone(), (self.ssa(a), a.clone())))
            .collect();
        for c in &callee.requires {
            for conj in c.formula.conjuncts() {
                let formula = conj.subst(&|v| actual.get(v).map(|x| x.0.clone()));
                let source = conj.subst(&|v| actual.get(v).map(|x| x.1.clone()));
                self.push(PStmt {
                    op: PKind::Assert,
                    formula,
                    source,
                    origin: Some(s.id),
                    kind: Some(VcKind::IntermediateAssert),
                    plumbing: false,
                    wf_access: None,
                });
            }
        }
        let mut results: HashMap<String, (Expr, Expr)> = HashMap::new();
        for (r, t) in callee.returns.iter().zip(targets) {
            let v = self.fresh(t, r.ty);
            results.insert(r.name.clone(), (Expr::Var(v), Expr::var(t)));
        }
        for c in &callee.ensures {
            let formula = c.formula.subst(&|v| actual.get(v).or_else(|| results.get(v)).map(|x| x.0.clone()));
            let source = c.formula.subst(&|v| actual.get(v).or_else(|| results.get(v)).map(|x| x.1.clone()));
            self.push(PStmt {
                op: PKind::Assume,
                formula,
                source,
                origin: Some(c.id),
                kind: None,
                plumbing: false,
                wf_access: None,
            });
        }
        Ok(())
    }

    fn looped(
        &mut self,
        s: &Stmt,
        cond: Expr,
        invariants: &[Clause],
        body: &[Stmt],
        for_var: Option<(&String, &Expr)>,
    ) -> Result<(), VcError> {
        let outer: BTreeSet<String> = self.env.keys().cloned().collect();
        if let Some((v, lo)) = for_var {
            self.wf(lo, s.id);
            let rhs = self.ssa(lo);
            let x = self.fresh(v, Type::Int);
            self.push(PStmt {
                op: PKind::Assume,
                formula: Expr::eq(Expr::Var(x), rhs),
                source: Expr::eq(Expr::var(v), lo.clone()),
                origin: Some(s.id),
                kind: None,
                plumbing: false,
                wf_access: None,
            });
        }
        for inv in invariants {
            self.assert(&inv.formula, inv.id, VcKind::InvariantEntry);
        }
        let Some(pre) = self.cur else { return Ok(()) };

        let mut modified = BTreeSet::new();
        assigned(body, &mut modified);
        if let Some((v, _)) = for_var {
            modified.insert(v.clone());
        }
        for m in &modified {
            if self.env.contains_key(m) {
                let t = self.type_of(m);
                self.fresh(m, t);
            }
        }
        let head = self.new_block();
        self.link(pre, head);
        self.cur = Some(head);
        for inv in invariants {
            self.wf(&inv.formula, inv.id);
            self.assume(&inv.formula, inv.id);
        }
        self.wf(&cond, s.id);
        let head_env = self.env.clone();

        let b = self.new_block();
        self.link(head, b);
        self.cur = Some(b);
        self.assume(&cond, s.id);
        self.loops.push(LoopCtx { breaks: Vec::new() });
        self.block(body)?;
        if let (Some((v, _)), Some(_)) = (for_var, self.cur) {
            let inc = Expr::bin(crate::lang::BinOp::Add, Expr::var(v), Expr::Int(1));
            let rhs = self.ssa(&inc);
            let x = self.fresh(v, Type::Int);
            self.push(PStmt {
                op: PKind::Assume,
                formula: Expr::eq(Expr::Var(x), rhs),
                source: Expr::eq(Expr::var(v), inc),
                origin: Some(s.id),
                kind: None,
                plumbing: false,
                wf_access: None,
            });
        }
        if let Some(c) = self.cur {
            for inv in invariants {
                self.assert(&inv.formula, inv.id, VcKind::InvariantMaintain);
            }
            self.plumbing(c, Expr::Bool(false));
        }
        let breaks = self.loops.pop().map(|l| l.breaks).unwrap_or_default();

        self.env = head_env;
        let x = self.new_block();
        self.link(head, x);
        self.cur = Some(x);
        self.assume(&Expr::Unary(UnOp::Not, Box::new(cond)), s.id);
        let exit = (x, self.env.clone());
        self.join(std::iter::once(exit).chain(breaks).collect(), &outer);
        Ok(())
    }
}

/// Variables assigned anywhere in `body`, declarations excluded.
fn assigned(body: &[Stmt], out: &mut BTreeSet<String>) {
    for s in body {
        match &s.kind {
            StmtKind::Assign { target, .. } => {
                out.insert(target.clone());
            }
            StmtKind::Call { declare: false, targets, .. } => out.extend(targets.iter().cloned()),
            StmtKind::If { then_branch, else_branch, .. } => {
                assigned(then_branch, out);
                if let Some(e) = else_branch {
                    assigned(e, out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => assigned(body, out),
            _ => {}
        }
    }
}

/// Builds the passive acyclic graph of a method with a body.
pub fn passify(prog: &Program, m: &Method) -> Result<PassiveGraph, VcError> {
    let mut b = Builder {
        prog,
        blocks: Vec::new(),
        cur: None,
        env: Env::new(),
        versions: HashMap::new(),
        types: BTreeMap::new(),
        loops: Vec::new(),
    };
    for p in m.params.iter().chain(m.returns.iter()) {
        b.base(&p.name, p.ty);
    }
    let entry = b.new_block();
    b.cur = Some(entry);
    for c in &m.requires {
        b.assume(&c.formula, c.id);
    }
    let Some(body) = &m.body else {
        return Err(VcError::Unsupported { span: m.span, what: format!("method '{}' has no body", m.name) });
    };
    b.block(body)?;
    if b.cur.is_some() {
        for c in &m.ensures {
            b.assert(&c.formula, c.id, VcKind::Postcondition);
        }
    }
    Ok(PassiveGraph { method: m.name.clone(), blocks: b.blocks, types: b.types })
}
