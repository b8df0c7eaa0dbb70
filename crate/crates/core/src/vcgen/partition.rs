use super::passify::{erase, passify};
use super::{wf, PKind, PStmt, PassiveGraph, PathStep, Target, VcError, VcKind, VcPartition};
use crate::lang::{print_expr, Expr, Method, Program, Type};
use std::collections::{BTreeMap, BTreeSet, HashSet};

pub const MAX_PATHS: usize = 256;

fn paths(g: &PassiveGraph) -> Result<Vec<Vec<usize>>, VcError> {
    let mut out = Vec::new();
    let mut stack = vec![vec![0usize]];
    while let Some(p) = stack.pop() {
        let last = *p.last().unwrap_or(&0);
        let succs = &g.blocks[last].succs;
        if succs.is_empty() {
            out.push(p);
            if out.len() > MAX_PATHS {
                return Err(VcError::PathExplosion { method: g.method.clone(), paths: out.len(), limit: MAX_PATHS });
            }
            continue;
        }
        // Reverse so the first successor is explored first.
        for s in succs.iter().rev() {
            let mut q = p.clone();
            q.push(*s);
            stack.push(q);
        }
    }
    Ok(out)
}

fn nest(path: &[PathStep], target: &Expr) -> Expr {
    path.iter().rev().fold(target.clone(), |acc, s| Expr::imp(s.formula.clone(), acc))
}

fn step(s: &PStmt) -> PathStep {
    PathStep {
        formula: s.formula.clone(),
        source: s.source.clone(),
        origin: s.origin,
        plumbing: s.plumbing,
        was_assert: s.op == PKind::Assert,
        wf: s.kind.is_some_and(|k| k.is_wf()),
    }
}

/// Cone of influence: the path steps sharing variables, transitively, with the target.
pub fn slice(path: &[PathStep], target: &Expr) -> Vec<usize> {
    let vars: Vec<BTreeSet<String>> = path.iter().map(|s| s.formula.free_vars().into_iter().collect()).collect();
    let mut relevant: BTreeSet<String> = target.free_vars().into_iter().collect();
    let mut keep = vec![false; path.len()];
    loop {
        let mut changed = false;
        for (i, vs) in vars.iter().enumerate() {
            if keep[i] {
                continue;
            }
            let constant = vs.is_empty();
            if constant || vs.iter().any(|v| relevant.contains(v)) {
                keep[i] = true;
                relevant.extend(vs.iter().cloned());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..path.len()).filter(|i| keep[*i]).collect()
}

fn signature(path: &[PathStep], target: &Expr) -> Vec<String> {
    slice(path, target)
        .into_iter()
        .filter(|i| !path[*i].plumbing)
        .map(|i| print_expr(&erase(&path[i].formula)))
        .collect()
}

fn used_types(types: &BTreeMap<String, Type>, path: &[PathStep], target: &Expr) -> BTreeMap<String, Type> {
    let mut out = BTreeMap::new();
    for e in path.iter().map(|s| &s.formula).chain(std::iter::once(target)) {
        for v in e.free_vars() {
            if let Some(t) = types.get(&v) {
                out.insert(v, *t);
            }
        }
    }
    out
}

fn make(
    id: usize,
    method: &str,
    kind: VcKind,
    path: Vec<PathStep>,
    target: Target,
    types: &BTreeMap<String, Type>,
) -> VcPartition {
    let vc = nest(&path, &target.formula);
    let path_sig = signature(&path, &target.formula);
    let types = used_types(types, &path, &target.formula);
    VcPartition { id, method: method.to_string(), kind, path, target, vc, path_sig, types }
}

/// Well-formedness of the method signature: every array access in a
/// requires clause is checked under the clauses before it, and every
/// access in an ensures clause under all requires clauses.
pub fn signature_partitions(m: &Method, first_id: usize) -> Vec<VcPartition> {
    let mut types = BTreeMap::new();
    for p in m.params.iter().chain(m.returns.iter()) {
        types.insert(p.name.clone(), p.ty);
    }
    let assume = |c: &crate::lang::Clause| PathStep {
        formula: c.formula.clone(),
        source: c.formula.clone(),
        origin: Some(c.id),
        plumbing: false,
        was_assert: false,
        wf: false,
    };
    let mut out = Vec::new();
    let clauses = m.requires.iter().enumerate().map(|(k, c)| (c, k)).chain(m.ensures.iter().map(|c| (c, m.requires.len())));
    for (c, k) in clauses {
        for o in wf::obligations(&c.formula) {
            let path: Vec<PathStep> = m.requires[..k].iter().map(assume).collect();
            let target = Target {
                origin: c.id,
                formula: o.formula.clone(),
                source: o.formula,
                wf_access: Some(o.access),
            };
            out.push(make(first_id + out.len(), &m.name, VcKind::SignatureWf, path, target, &types));
        }
    }
    out
}

fn body_partitions(g: &PassiveGraph, first_id: usize) -> Result<Vec<VcPartition>, VcError> {
    let mut out = Vec::new();
    let mut seen: HashSet<(Vec<usize>, usize)> = HashSet::new();
    for p in paths(g)? {
        let mut steps: Vec<PathStep> = Vec::new();
        for (bi, b) in p.iter().enumerate() {
            let block_start = steps.len();
            for (j, s) in g.blocks[*b].stmts.iter().enumerate() {
                if s.op == PKind::Assert && seen.insert((p[..=bi].to_vec(), j)) {
                    // Sibling conjuncts of the same assertion are not assumed.
                    let wf = s.kind.is_some_and(|k| k.is_wf());
                    let mut cut = steps.len();
                    while cut > block_start
                        && steps[cut - 1].was_assert
                        && steps[cut - 1].origin == s.origin
                        && steps[cut - 1].wf == wf
                    {
                        cut -= 1;
                    }
                    let target = Target {
                        origin: s.origin.unwrap_or_default(),
                        formula: s.formula.clone(),
                        source: s.source.clone(),
                        wf_access: s.wf_access.clone(),
                    };
                    let kind = s.kind.unwrap_or(VcKind::IntermediateAssert);
                    out.push(make(first_id + out.len(), &g.method, kind, steps[..cut].to_vec(), target, &g.types));
                }
                steps.push(step(s));
            }
        }
    }
    Ok(out)
}

/// Partitions of one method; ids start at `first_id`.
pub fn vc_gen_method(p: &Program, m: &Method, first_id: usize) -> Result<Vec<VcPartition>, VcError> {
    let mut out = signature_partitions(m, first_id);
    if m.body.is_some() {
        let g = passify(p, m)?;
        out.extend(body_partitions(&g, first_id + out.len())?);
    }
    Ok(out)
}

/// All partitions of a program in deterministic order.
pub fn vc_gen(p: &Program) -> Result<Vec<VcPartition>, VcError> {
    let mut out = Vec::new();
    for m in &p.methods {
        let parts = vc_gen_method(p, m, out.len())?;
        out.extend(parts);
    }
    Ok(out)
}
