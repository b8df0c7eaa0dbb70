//! Hard/soft intent extraction over verification-condition partitions.

use crate::lang::{find_node, nodes, print_expr, BinOp, Expr, NodeRef, Program, Quant, StmtId, Type};
use crate::solver::{Solver, SolverError, Status, Verdict};
use crate::vcgen::{erase, vc_gen, VcError, VcKind, VcPartition};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntentError {
    #[error(transparent)]
    Vc(#[from] VcError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "node", rename_all = "snake_case")]
pub enum Origin {
    ProgramStmt(StmtId),
    SpecClause(StmtId),
    WfCheck(StmtId),
    Trusted(StmtId),
}

impl Origin {
    pub fn node(&self) -> StmtId {
        match self {
            Origin::ProgramStmt(s) | Origin::SpecClause(s) | Origin::WfCheck(s) | Origin::Trusted(s) => *s,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Origin::ProgramStmt(_) => "program_stmt",
            Origin::SpecClause(_) => "spec_clause",
            Origin::WfCheck(_) => "wf_check",
            Origin::Trusted(_) => "trusted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Hard,
    Soft,
}

/// Marker for "the statement this check was created for still exists".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Presence {
    pub node: StmtId,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PriorityKey {
    pub h_conflicts: usize,
    pub s_conflicts: usize,
    /// Number of strictly stronger soft facts; lower is stronger.
    pub strength_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentFact {
    pub fact_id: usize,
    pub method: String,
    /// Normalized formula used for identity and solving.
    pub formula: Expr,
    /// The same fact over source names, for rendering.
    pub source: Expr,
    pub origin: Origin,
    pub classification: Class,
    pub presence: Option<Presence>,
    /// `Some` when the fact is a partition target or a whole partition VC.
    pub kind: Option<VcKind>,
    pub whole_vc: bool,
    pub partitions: Vec<usize>,
    pub line: u32,
    #[serde(skip)]
    pub types: BTreeMap<String, Type>,
    pub priority: Option<PriorityKey>,
}

impl IntentFact {
    fn key(&self) -> (Origin, String) {
        (self.origin, print_expr(&self.formula))
    }

    /// The formula with its presence guard resolved against `p`.
    pub fn effective(&self, p: &Program) -> Expr {
        match &self.presence {
            Some(pr) if !is_present(p, pr) => Expr::Bool(true),
            _ => self.formula.clone(),
        }
    }

    /// `presence(sid) ==> f` as text.
    pub fn render(&self) -> String {
        let f = print_expr(&self.source);
        match &self.presence {
            Some(pr) => format!("presence({}) ==> {f}", pr.node),
            None => f,
        }
    }
}

/// A partition together with its solver verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checked {
    pub partition: VcPartition,
    pub verdict: Verdict,
}

impl Checked {
    pub fn conforms(&self) -> bool {
        self.verdict.status == Status::Valid
    }
}

/// Generates and checks every partition of `p`.
pub fn check_all(p: &Program, solver: &Solver) -> Result<Vec<Checked>, IntentError> {
    let mut out = Vec::new();
    for part in vc_gen(p)? {
        let verdict = solver.check_validity(&part.vc, &part.types)?;
        out.push(Checked { partition: part, verdict });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionStatus {
    pub id: usize,
    pub method: String,
    pub kind: VcKind,
    pub status: Status,
    pub target: StmtId,
    pub target_line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentReport {
    pub partitions: Vec<PartitionStatus>,
    pub hard: Vec<IntentFact>,
    pub soft: Vec<IntentFact>,
    /// Partitions whose verdict was unknown.
    pub unknown: Vec<usize>,
}

impl IntentReport {
    /// Target nodes of partitions that did not verify.
    pub fn failing_targets(&self) -> BTreeSet<StmtId> {
        self.partitions.iter().filter(|s| s.status != Status::Valid).map(|s| s.target).collect()
    }

    /// Stable structured-text dump.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let bad = self.partitions.iter().filter(|s| s.status != Status::Valid).count();
        let _ = writeln!(out, "partitions: {} ({} nonconforming, {} unknown)", self.partitions.len(), bad, self.unknown.len());
        for s in &self.partitions {
            let st = match s.status {
                Status::Valid => "valid",
                Status::Invalid => "invalid",
                Status::Unknown => "unknown",
            };
            let _ = writeln!(out, "  p{} {} {} line {} {}", s.id, s.method, s.kind.name(), s.target_line, st);
        }
        for (name, set) in [("hard", &self.hard), ("soft", &self.soft)] {
            let _ = writeln!(out, "{name}: {}", set.len());
            for f in set {
                let kind = f.kind.map(|k| format!(" {}", k.name())).unwrap_or_default();
                let vc = if f.whole_vc { " vc" } else { "" };
                let pri = f
                    .priority
                    .map(|k| format!(" priority=({},{},{})", k.h_conflicts, k.s_conflicts, k.strength_rank))
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "  f{} {} {} line {}{kind}{vc}{pri}: {}",
                    f.fact_id,
                    f.origin.label(),
                    f.origin.node(),
                    f.line,
                    f.render()
                );
            }
        }
        out
    }
}

/// Hash of a node's method, category and trust-free text.
pub fn fingerprint(n: &NodeRef<'_>) -> String {
    let mut h = Sha256::new();
    h.update(n.method().name.as_bytes());
    h.update(b"\n");
    h.update(n.category().as_bytes());
    h.update(b"\n");
    h.update(crate::lang::print_node(n).as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn presence_of(p: &Program, node: StmtId) -> Option<Presence> {
    find_node(p, node).map(|n| Presence { node, fingerprint: fingerprint(&n) })
}

/// Whether a node with the recorded fingerprint exists in `p`.
pub fn is_present(p: &Program, pr: &Presence) -> bool {
    nodes(p).iter().any(|n| fingerprint(n) == pr.fingerprint)
}

/// Guards a well-formedness fact with the presence of its site.
pub fn transform_wf(fact: &IntentFact, p: &Program) -> IntentFact {
    let mut f = fact.clone();
    f.presence = presence_of(p, fact.origin.node());
    f
}

/// Canonical form: chains split into conjunctions, bound variables
/// renamed by nesting depth, associative-commutative operands sorted and
/// SSA versions renumbered by first appearance. Returns the old-to-new
/// variable renaming.
pub fn normalize(e: &Expr) -> (Expr, BTreeMap<String, String>) {
    let e = canon(e, 0);
    let mut order: Vec<String> = Vec::new();
    e.walk(&mut |x| {
        if let Expr::Var(v) = x {
            if !v.starts_with('$') && !order.contains(v) {
                order.push(v.clone());
            }
        }
    });
    let mut next: HashMap<String, u32> = HashMap::new();
    let mut map = BTreeMap::new();
    for v in order {
        let base = v.split('@').next().unwrap_or_default().to_string();
        let k = next.entry(base.clone()).or_insert(0);
        let new = if *k == 0 { base.clone() } else { format!("{base}@{k}") };
        *k += 1;
        map.insert(v, new);
    }
    let out = e.subst(&|v| map.get(v).map(|n| Expr::Var(n.clone())));
    (out, map)
}

fn sort_key(e: &Expr) -> String {
    print_expr(&erase(e))
}

fn flatten(op: BinOp, e: Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Binary(o, l, r) if o == op => {
            flatten(op, *l, out);
            flatten(op, *r, out);
        }
        other => out.push(other),
    }
}

fn canon(e: &Expr, depth: usize) -> Expr {
    match e {
        Expr::Chain(xs, ops) => {
            let pairs = ops.iter().enumerate().map(|(i, op)| Expr::bin(*op, xs[i].clone(), xs[i + 1].clone())).collect();
            canon(&Expr::conj(pairs), depth)
        }
        Expr::Binary(op, l, r) if op.is_commutative() => {
            let assoc = matches!(op, BinOp::And | BinOp::Or | BinOp::Add | BinOp::Mul);
            let mut parts = Vec::new();
            if assoc {
                flatten(*op, Expr::bin(*op, canon(l, depth), canon(r, depth)), &mut parts);
            } else {
                parts = vec![canon(l, depth), canon(r, depth)];
            }
            parts.sort_by_key(sort_key);
            let mut it = parts.into_iter();
            let first = it.next().unwrap_or(Expr::Bool(true));
            it.fold(first, |a, b| Expr::bin(*op, a, b))
        }
        Expr::Binary(op, l, r) => Expr::bin(*op, canon(l, depth), canon(r, depth)),
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(canon(a, depth))),
        Expr::Index(a, i) => Expr::Index(Box::new(canon(a, depth)), Box::new(canon(i, depth))),
        Expr::Length(a) => Expr::Length(Box::new(canon(a, depth))),
        Expr::Quant(q) => {
            let v = format!("${depth}");
            Expr::Quant(Quant {
                kind: q.kind,
                var: v.clone(),
                lo: Box::new(canon(&q.lo, depth)),
                hi: Box::new(canon(&q.hi, depth)),
                body: Box::new(canon(&q.body.rename(&q.var, &v), depth + 1)),
            })
        }
        other => other.clone(),
    }
}

fn category_origin(p: &Program, id: StmtId) -> Origin {
    match find_node(p, id) {
        Some(n) if n.trust().trusted => Origin::Trusted(id),
        Some(NodeRef::Stmt(..)) => Origin::ProgramStmt(id),
        Some(_) => Origin::SpecClause(id),
        None => Origin::ProgramStmt(id),
    }
}

struct Builder<'a> {
    prog: &'a Program,
    hard: Vec<IntentFact>,
    soft: Vec<IntentFact>,
    hard_idx: HashMap<(Origin, String), usize>,
    soft_idx: HashMap<(Origin, String), usize>,
}

impl Builder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn fact(
        &self,
        part: &VcPartition,
        formula: &Expr,
        source: &Expr,
        origin: Origin,
        class: Class,
        kind: Option<VcKind>,
        whole_vc: bool,
    ) -> IntentFact {
        let (norm, map) = normalize(formula);
        let mut types = BTreeMap::new();
        for (old, new) in &map {
            if let Some(t) = part.types.get(old) {
                types.insert(new.clone(), *t);
            }
        }
        let line = find_node(self.prog, origin.node()).map(|n| n.span().line).unwrap_or(0);
        IntentFact {
            fact_id: 0,
            method: part.method.clone(),
            formula: norm,
            source: erase(source),
            origin,
            classification: class,
            presence: None,
            kind,
            whole_vc,
            partitions: vec![part.id],
            line,
            types,
            priority: None,
        }
    }

    fn add(&mut self, f: IntentFact) {
        let key = f.key();
        let (set, idx) = match f.classification {
            Class::Hard => (&mut self.hard, &mut self.hard_idx),
            Class::Soft => (&mut self.soft, &mut self.soft_idx),
        };
        match idx.get(&key) {
            Some(&i) => {
                for p in f.partitions {
                    if !set[i].partitions.contains(&p) {
                        set[i].partitions.push(p);
                    }
                }
            }
            None => {
                idx.insert(key, set.len());
                set.push(f);
            }
        }
    }
}

/// Classifies every fact of every partition as hard or soft.
pub fn extract_hs_intent(p: &Program, checked: &[Checked]) -> IntentReport {
    let mut b = Builder { prog: p, hard: Vec::new(), soft: Vec::new(), hard_idx: HashMap::new(), soft_idx: HashMap::new() };
    let mut partitions = Vec::new();
    let mut unknown = Vec::new();
    for c in checked {
        let part = &c.partition;
        let line = find_node(p, part.target.origin).map(|n| n.span().line).unwrap_or(0);
        partitions.push(PartitionStatus {
            id: part.id,
            method: part.method.clone(),
            kind: part.kind,
            status: c.verdict.status,
            target: part.target.origin,
            target_line: line,
        });
        let target_origin = match category_origin(p, part.target.origin) {
            Origin::Trusted(id) => Origin::Trusted(id),
            _ if part.kind.is_wf() => Origin::WfCheck(part.target.origin),
            o => o,
        };
        match c.verdict.status {
            Status::Valid => {
                let f = b.fact(part, &part.vc, &part.vc, target_origin, Class::Hard, Some(part.kind), true);
                b.add(f);
            }
            status => {
                let unsure = status == Status::Unknown;
                if unsure {
                    unknown.push(part.id);
                }
                let mut pieces = Vec::new();
                for s in part.facts() {
                    let Some(o) = s.origin else { continue };
                    let origin = match category_origin(p, o) {
                        Origin::Trusted(id) => Origin::Trusted(id),
                        _ if s.wf => Origin::WfCheck(o),
                        x => x,
                    };
                    pieces.push((s.formula.clone(), s.source.clone(), origin, None));
                }
                pieces.push((part.target.formula.clone(), part.target.source.clone(), target_origin, Some(part.kind)));
                for (formula, source, origin, kind) in pieces {
                    let class = match origin {
                        _ if unsure => Class::Soft,
                        Origin::Trusted(_) | Origin::WfCheck(_) => Class::Hard,
                        _ => Class::Soft,
                    };
                    let mut f = b.fact(part, &formula, &source, origin, class, kind, false);
                    if matches!(origin, Origin::WfCheck(_)) && class == Class::Hard {
                        f = transform_wf(&f, p);
                    }
                    b.add(f);
                }
            }
        }
    }
    // Duplicates stay hard.
    let hard_keys: BTreeSet<(Origin, String)> = b.hard.iter().map(|f| f.key()).collect();
    let mut soft: Vec<IntentFact> = b.soft.into_iter().filter(|f| !hard_keys.contains(&f.key())).collect();
    let mut hard = b.hard;
    for (i, f) in hard.iter_mut().chain(soft.iter_mut()).enumerate() {
        f.fact_id = i + 1;
    }
    IntentReport { partitions, hard, soft, unknown }
}
