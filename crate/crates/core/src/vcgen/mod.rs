//! Passification, verification-condition generation and partitioning.

pub mod partition;
pub mod passify;
pub mod trace;
pub mod wf;

use crate::lang::{print_expr, Expr, Span, StmtId, Type};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write;
use thiserror::Error;

pub use partition::{signature_partitions, vc_gen, vc_gen_method, MAX_PATHS};
pub use passify::{erase, passify};
pub use trace::{trace_of, FailingTrace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VcError {
    #[error("line {}: unsupported construct: {what}", span.line)]
    Unsupported { span: Span, what: String },
    #[error("method '{method}' has {paths} paths, more than the limit of {limit}")]
    PathExplosion { method: String, paths: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VcKind {
    Postcondition,
    IntermediateAssert,
    WfCheck,
    InvariantEntry,
    InvariantMaintain,
    SignatureWf,
}

impl VcKind {
    pub fn name(self) -> &'static str {
        match self {
            VcKind::Postcondition => "postcondition",
            VcKind::IntermediateAssert => "intermediate_assert",
            VcKind::WfCheck => "wf_check",
            VcKind::InvariantEntry => "invariant_entry",
            VcKind::InvariantMaintain => "invariant_maintain",
            VcKind::SignatureWf => "signature_wf",
        }
    }

    pub fn is_wf(self) -> bool {
        matches!(self, VcKind::WfCheck | VcKind::SignatureWf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PKind {
    Assume,
    Assert,
}

/// A passive statement: `assume e` or `assert e` over SSA names.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PStmt {
    pub op: PKind,
    pub formula: Expr,
    /// The same formula over source names.
    pub source: Expr,
    pub origin: Option<StmtId>,
    pub kind: Option<VcKind>,
    /// Join copies and path terminators; never facts.
    pub plumbing: bool,
    pub wf_access: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassiveBlock {
    pub id: usize,
    pub stmts: Vec<PStmt>,
    pub succs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassiveGraph {
    pub method: String,
    pub blocks: Vec<PassiveBlock>,
    pub types: BTreeMap<String, Type>,
}

impl PassiveGraph {
    /// Textual listing in `id: stmt; goto id*` form.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            let _ = writeln!(out, "b{}:", b.id);
            if b.stmts.is_empty() {
                out.push_str("  skip;\n");
            }
            for s in &b.stmts {
                let op = match s.op {
                    PKind::Assume => "assume",
                    PKind::Assert => "assert",
                };
                let _ = writeln!(out, "  {op} {};", print_expr(&s.formula));
            }
            if b.succs.is_empty() {
                out.push_str("  goto;\n");
            } else {
                let succ: Vec<String> = b.succs.iter().map(|s| format!("b{s}")).collect();
                let _ = writeln!(out, "  goto {};", succ.join(", "));
            }
        }
        out
    }
}

/// One step on a partition's path. Asserts earlier on the path appear here
/// as assumptions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStep {
    pub formula: Expr,
    pub source: Expr,
    pub origin: Option<StmtId>,
    pub plumbing: bool,
    pub was_assert: bool,
    /// An earlier well-formedness assertion.
    pub wf: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Target {
    pub origin: StmtId,
    pub formula: Expr,
    pub source: Expr,
    pub wf_access: Option<Expr>,
}

/// One passified path together with one assertion on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VcPartition {
    pub id: usize,
    pub method: String,
    pub kind: VcKind,
    pub path: Vec<PathStep>,
    pub target: Target,
    /// `a1 ==> (a2 ==> ... ==> target)`.
    pub vc: Expr,
    /// Source text of the path assumes relevant to the target.
    pub path_sig: Vec<String>,
    pub types: BTreeMap<String, Type>,
}

impl VcPartition {
    /// Path assumes that carry meaning (no join copies).
    pub fn facts(&self) -> impl Iterator<Item = &PathStep> {
        self.path.iter().filter(|s| !s.plumbing)
    }

    /// Identity of the failure independent of statement ids and SSA
    /// numbering: method, kind, target text and relevant path text.
    pub fn signature(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.method,
            self.kind.name(),
            print_expr(&erase(&self.target.source)),
            self.path_sig.join(";")
        )
    }
}
