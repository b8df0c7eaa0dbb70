//! Patch synthesis: prioritization, repair requests, plugins and the patch
//! filter.

pub mod enumerative;
pub mod patch;
pub mod priority;
pub mod subprocess;
pub mod wire;

pub use enumerative::Enumerative;
pub use patch::{apply_patch, check_patch, PatchError};
pub use priority::{prioritize, top_class};
pub use subprocess::Subprocess;

use crate::intent::{Checked, IntentFact, IntentReport};
use crate::lang::{find_node, nodes, print_expr, print_node, print_program, NodeRef, Program, StmtKind, TrustTag};
use crate::solver::{BoundedDomain, Solver, SolverError};
use crate::vcgen::{erase, trace_of, VcKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub const SYSTEM_PROMPT: &str = include_str!("prompts/system.txt");
pub const REPAIR_TEMPLATE: &str = include_str!("prompts/repair.txt");

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("synthesizer failed: {0}")]
    PluginFailure(String),
    #[error("no usable patches ({dropped} dropped)")]
    NoPatches { dropped: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hunk {
    pub file: String,
    pub original: String,
    pub patched: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Patch {
    pub hunks: Vec<Hunk>,
    pub synthesizer_id: String,
    pub campaign: usize,
}

/// Everything a synthesizer is told about one failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthRequest {
    pub filename: String,
    #[serde(rename = "program")]
    pub annotated_program: String,
    pub error_trace: String,
    pub error: String,
    pub trace_assertions: String,
    pub context: String,
    pub priority: String,
    pub k: usize,
    pub system: String,
    pub prompt: String,
}

/// Structured view of the same failure for builtin synthesizers.
pub struct RepairContext<'a> {
    /// The program with hard intent marked trusted; it prints to
    /// `SynthRequest::annotated_program`.
    pub program: &'a Program,
    pub report: &'a IntentReport,
    pub failure: &'a Checked,
    pub top: &'a [IntentFact],
    pub solver: &'a Solver,
    pub domain: BoundedDomain,
    pub campaign: usize,
}

pub trait Synthesizer {
    fn id(&self) -> String;
    fn propose(&mut self, req: &SynthRequest, ctx: &RepairContext<'_>) -> Result<Vec<Patch>, SynthError>;
}

/// A patch that survived the filter, with the resulting annotated text.
#[derive(Debug, Clone)]
pub struct Accepted {
    pub patch: Patch,
    pub text: String,
    pub program: Program,
}

#[derive(Debug, Clone, Default)]
pub struct Synthesized {
    pub accepted: Vec<Accepted>,
    pub dropped: Vec<String>,
}

/// Nodes to mark trusted: those behind hard facts that no soft fact and no
/// failing partition points at.
pub fn annotation_targets(p: &Program, report: &IntentReport) -> BTreeSet<crate::lang::StmtId> {
    let soft: BTreeSet<_> = report.soft.iter().map(|f| f.origin.node()).collect();
    let failing = report.failing_targets();
    let hard: BTreeSet<_> = report.hard.iter().map(|f| f.origin.node()).collect();
    nodes(p)
        .iter()
        .filter(|n| !n.trust().trusted)
        .map(|n| n.id())
        .filter(|id| hard.contains(id) && !soft.contains(id) && !failing.contains(id))
        .collect()
}

pub fn annotate(p: &Program, report: &IntentReport) -> Program {
    let targets = annotation_targets(p, report);
    let mut out = p.clone();
    crate::lang::for_each_trust_mut(&mut out, &mut |id, t| {
        if targets.contains(&id) {
            *t = TrustTag::user();
        }
    });
    out
}

pub fn describe(kind: VcKind, node: Option<&NodeRef<'_>>) -> &'static str {
    match kind {
        VcKind::SignatureWf | VcKind::WfCheck => "index out of range",
        VcKind::Postcondition => "a postcondition could not be proved on this return path",
        VcKind::InvariantEntry => "this loop invariant could not be proved on entry",
        VcKind::InvariantMaintain => "this loop invariant could not be proved to be maintained by the loop",
        VcKind::IntermediateAssert => match node {
            Some(NodeRef::Stmt(_, s)) if matches!(s.kind, StmtKind::Call { .. }) => {
                "a precondition for this call could not be proved"
            }
            _ => "assertion might not hold",
        },
    }
}

fn hints(kind: VcKind, underlying: &str, access: Option<String>) -> Vec<String> {
    match (kind, access) {
        (VcKind::SignatureWf | VcKind::WfCheck, Some(a)) => {
            vec![format!("The access `{a}` is only well-formed where `{underlying}` holds; guard the expression or establish the bound.")]
        }
        (VcKind::Postcondition, _) => vec![format!("`{underlying}` must hold on every path that reaches the end of the method.")],
        (VcKind::InvariantEntry, _) => vec![format!("`{underlying}` must hold before the first iteration.")],
        (VcKind::InvariantMaintain, _) => vec![format!("`{underlying}` must hold again at the end of every iteration.")],
        _ => Vec::new(),
    }
}

/// Fills the repair template.
#[allow(clippy::too_many_arguments)]
pub fn render_prompt(
    file_name: &str,
    program: &str,
    trace: &str,
    textual_description: &str,
    underlying_assertion: &str,
    failing_assert: &str,
    failing_constraint_info: &str,
    satisfied_assertions: &str,
    repair_hints: &str,
    trace_priority: &str,
) -> String {
    REPAIR_TEMPLATE
        .replace("{file_name}", file_name)
        .replace("{trace}", trace)
        .replace("{textual_description}", textual_description)
        .replace("{underlying_assertion}", underlying_assertion)
        .replace("{failing_assert}", failing_assert)
        .replace("{failing_constraint_info}", failing_constraint_info)
        .replace("{satisfied_assertions}", satisfied_assertions)
        .replace("{repair_hints}", repair_hints)
        .replace("{trace_priority}", trace_priority)
        .replace("{program}", program)
}

/// Builds the request for one failing partition of `annotated`.
pub fn build_request(annotated: &Program, failure: &Checked, top: &[IntentFact], k: usize) -> SynthRequest {
    let part = &failure.partition;
    let trace = trace_of(annotated, part);
    let text = print_program(annotated);
    let filename = annotated.source_name.clone();
    let node_text = |id| find_node(annotated, id).map(|n| print_node(&n)).unwrap_or_default();
    let error_trace: Vec<String> =
        trace.steps.iter().zip(&trace.lines).map(|(s, l)| format!("line {l}: {}", node_text(*s))).collect();
    let target = find_node(annotated, part.target.origin);
    let description = describe(part.kind, target.as_ref());
    let underlying = print_expr(&erase(&part.target.source));
    let failing = node_text(part.target.origin);
    let mut info = Vec::new();
    if let Some(w) = &failure.verdict.witness {
        let vals: Vec<String> = w.iter().filter(|(v, _)| !v.contains('@') && !v.contains('#')).map(|(v, x)| format!("{v} = {x}")).collect();
        if !vals.is_empty() {
            info.push(format!("Counterexample: {}", vals.join(", ")));
        }
    }
    let mut assertions: Vec<String> = Vec::new();
    for s in part.facts() {
        let a = print_expr(&erase(&s.source));
        if !assertions.contains(&a) {
            assertions.push(a);
        }
    }
    let access = part.target.wf_access.as_ref().map(|a| print_expr(&erase(a)));
    let hint = hints(part.kind, &underlying, access).join("\n");
    let context = format!(
        "In Dafny, assertions do not stop the verification process or remove states that do not satisfy it. \nThey only make explicit checks of a property.\n\n{hint}"
    );
    let priority: Vec<String> = top.iter().map(|f| format!("line {}: {}", f.line, f.render())).collect();
    let error = format!(
        "The error is `{description}` (failing assert `{underlying}`) for the statement `{failing}`.\n{}",
        info.join("\n")
    );
    let prompt = render_prompt(
        &filename,
        &text,
        &error_trace.join("\n"),
        description,
        &underlying,
        &failing,
        &info.join("\n"),
        &assertions.join("\n"),
        &hint,
        &priority.join("\n"),
    );
    SynthRequest {
        filename,
        annotated_program: text,
        error_trace: error_trace.join("\n"),
        error,
        trace_assertions: assertions.join("\n"),
        context,
        priority: priority.join("\n"),
        k: k.max(1),
        system: SYSTEM_PROMPT.to_string(),
        prompt,
    }
}

/// Runs the plugin and keeps at most `k` patches that pass the filter.
pub fn synthesize(
    req: &SynthRequest,
    ctx: &RepairContext<'_>,
    plugin: &mut dyn Synthesizer,
) -> Result<Synthesized, SynthError> {
    let proposed = plugin.propose(req, ctx)?;
    let mut out = Synthesized::default();
    let mut seen = BTreeSet::new();
    for (i, p) in proposed.into_iter().enumerate() {
        if out.accepted.len() >= req.k {
            break;
        }
        match check_patch(&req.annotated_program, ctx.program, &req.filename, &p) {
            Ok((text, program)) => {
                if seen.insert(text.clone()) {
                    out.accepted.push(Accepted { patch: p, text, program });
                }
            }
            Err(reason) => out.dropped.push(format!("patch {}: {reason}", i + 1)),
        }
    }
    if out.accepted.is_empty() {
        return Err(SynthError::NoPatches { dropped: out.dropped.len() });
    }
    Ok(out)
}
