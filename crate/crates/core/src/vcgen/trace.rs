use super::{VcKind, VcPartition};
use crate::lang::{find_node, Program, StmtId};
use serde::Serialize;

/// The statements leading to an assertion, ending at the assertion itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailingTrace {
    pub partition: usize,
    pub method: String,
    pub kind: VcKind,
    pub steps: Vec<StmtId>,
    /// Source line of each step.
    pub lines: Vec<u32>,
    pub target: StmtId,
    pub target_line: u32,
    pub unknown: bool,
}

impl FailingTrace {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }
}

/// Maps a partition back to source statements. Consecutive steps with the
/// same origin collapse into one.
pub fn trace_of(p: &Program, part: &VcPartition) -> FailingTrace {
    let mut steps: Vec<StmtId> = Vec::new();
    for s in part.facts() {
        if let Some(o) = s.origin {
            if steps.last() != Some(&o) {
                steps.push(o);
            }
        }
    }
    if steps.last() != Some(&part.target.origin) {
        steps.push(part.target.origin);
    }
    let line = |id: StmtId| find_node(p, id).map(|n| n.span().line).unwrap_or(0);
    FailingTrace {
        partition: part.id,
        method: part.method.clone(),
        kind: part.kind,
        lines: steps.iter().map(|s| line(*s)).collect(),
        target: part.target.origin,
        target_line: line(part.target.origin),
        steps,
        unknown: false,
    }
}
