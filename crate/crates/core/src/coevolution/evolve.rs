//! The candidate-pool repair loop.

use super::conformance::{conforms_prog_spec, renumber};
use super::CoevolveError;
use crate::intent::{extract_hs_intent, normalize, Checked};
use crate::lang::{parse_named, print_program, Program};
use crate::solver::{BoundedDomain, Solver, Status};
use crate::synthesis::enumerative::still_fails;
use crate::synthesis::{
    annotate, build_request, prioritize, synthesize, top_class, wire, RepairContext, SynthError, Synthesizer,
};
use crate::vcgen::{erase, VcKind};
use serde::Serialize;
use similar::{capture_diff_slices, Algorithm, DiffOp};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    pub wall_clock: Duration,
    pub max_campaigns: usize,
    pub k: usize,
    pub max_candidates: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { wall_clock: Duration::from_secs(20 * 60), max_campaigns: 5, k: 5, max_candidates: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Stop at the first verified candidate.
    First,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Solved,
    PoolEmpty,
    BudgetExhausted,
}

/// One applied patch in a candidate's history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatchRecord {
    pub id: String,
    pub campaign: usize,
    pub synthesizer: String,
    /// The patch in modification-block form.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub source: String,
    #[serde(skip)]
    pub program: Program,
    pub lineage: Vec<PatchRecord>,
    pub campaign: usize,
}

impl Candidate {
    pub fn new(program: Program) -> Candidate {
        Candidate { source: print_program(&program), program, lineage: Vec::new(), campaign: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignLog {
    pub campaign: usize,
    pub method: String,
    pub kind: VcKind,
    pub target_line: u32,
    pub failing: usize,
    pub valid: usize,
    pub priority: Vec<String>,
    pub proposed: usize,
    pub admitted: Vec<String>,
    pub rejected: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explain: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evolved {
    pub verified: Vec<Candidate>,
    pub outcome: Outcome,
}

/// A child admitted into the pool, with the program it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Admission {
    pub campaign: usize,
    pub patch: String,
    pub parent: String,
    pub child: String,
}

/// Shared state of one run: solver, synthesizer, budget and logs.
pub struct Session<'a> {
    pub solver: &'a Solver,
    pub plugin: &'a mut dyn Synthesizer,
    pub budget: Budget,
    pub mode: Mode,
    pub seed: u64,
    pub domain: BoundedDomain,
    pub explain: bool,
    pub campaigns: usize,
    pub log: Vec<CampaignLog>,
    pub admissions: Vec<Admission>,
    started: Instant,
    next_patch: usize,
}

impl<'a> Session<'a> {
    pub fn new(solver: &'a Solver, plugin: &'a mut dyn Synthesizer, budget: Budget, mode: Mode, seed: u64) -> Session<'a> {
        Session {
            solver,
            plugin,
            budget,
            mode,
            seed,
            domain: BoundedDomain::default(),
            explain: false,
            campaigns: 0,
            log: Vec::new(),
            admissions: Vec::new(),
            started: Instant::now(),
            next_patch: 0,
        }
    }

    fn out_of_time(&self) -> bool {
        self.started.elapsed() >= self.budget.wall_clock
    }

    fn out_of_campaigns(&self) -> bool {
        self.campaigns >= self.budget.max_campaigns
    }
}

/// Restores lines that differ from `plain` only by added trust
/// annotations, wherever the patch left them untouched.
pub fn strip_annotations(plain: &str, annotated: &str, patched: &str) -> String {
    let p: Vec<&str> = plain.split('\n').collect();
    let a: Vec<&str> = annotated.split('\n').collect();
    let mut out: Vec<&str> = patched.split('\n').collect();
    if p.len() != a.len() {
        return patched.to_string();
    }
    for op in capture_diff_slices(Algorithm::Myers, &a, &out.clone()) {
        if let DiffOp::Equal { old_index, new_index, len } = op {
            for d in 0..len {
                if p[old_index + d] != a[old_index + d] {
                    out[new_index + d] = p[old_index + d];
                }
            }
        }
    }
    out.join("\n")
}

type HardKey = (String, VcKind, String);

fn hard_key(c: &Checked) -> HardKey {
    let (n, _) = normalize(&erase(&c.partition.target.source));
    (c.partition.method.clone(), c.partition.kind, crate::lang::print_expr(&n))
}

/// Keys whose partitions all verify.
pub fn hard_keys(checked: &[Checked]) -> BTreeSet<HardKey> {
    let mut all: BTreeMap<HardKey, bool> = BTreeMap::new();
    for c in checked {
        let e = all.entry(hard_key(c)).or_insert(true);
        *e &= c.verdict.status == Status::Valid;
    }
    all.into_iter().filter(|(_, ok)| *ok).map(|(k, _)| k).collect()
}

/// Hard facts of `before` that `after` no longer establishes. A fact whose
/// clause was rewritten or removed is retired, not broken.
pub fn broken_hard_facts(before: &[Checked], after: &[Checked]) -> Vec<String> {
    let keep = hard_keys(before);
    let mut out = BTreeSet::new();
    for c in after {
        let k = hard_key(c);
        if keep.contains(&k) && c.verdict.status != Status::Valid {
            out.insert(format!("{} {} {}", k.0, k.1.name(), k.2));
        }
    }
    out.into_iter().collect()
}

/// Campaign batches: the newest campaign's children are tried first, in
/// the order they were proposed.
#[derive(Default)]
struct Pool {
    batches: Vec<VecDeque<Candidate>>,
    seen: BTreeSet<String>,
}

impl Pool {
    fn len(&self) -> usize {
        self.batches.iter().map(|b| b.len()).sum()
    }

    fn pop(&mut self) -> Option<Candidate> {
        while let Some(b) = self.batches.last_mut() {
            if let Some(c) = b.pop_front() {
                return Some(c);
            }
            self.batches.pop();
        }
        None
    }
}

/// Repairs `input` until it conforms, the pool empties or the budget runs out.
pub fn co_evolve(s: &mut Session<'_>, input: Program) -> Result<Evolved, CoevolveError> {
    let mut pool = Pool::default();
    let first = Candidate::new(input);
    pool.seen.insert(first.source.clone());
    pool.batches.push(VecDeque::from([first]));
    let mut verified = Vec::new();
    let mut exhausted = false;
    while let Some(cand) = pool.pop() {
        if s.out_of_time() {
            exhausted = true;
            break;
        }
        let verdict = conforms_prog_spec(&cand.program, s.solver)?;
        if verdict.holds {
            verified.push(cand);
            if s.mode == Mode::First {
                return Ok(Evolved { verified, outcome: Outcome::Solved });
            }
            continue;
        }
        if s.out_of_campaigns() {
            exhausted = true;
            continue;
        }
        s.campaigns += 1;
        let children = campaign(s, &cand, &verdict.checked, &verdict.failing[0])?;
        let room = s.budget.max_candidates.saturating_sub(pool.len());
        let mut batch = VecDeque::new();
        for child in children {
            if batch.len() < room && pool.seen.insert(child.source.clone()) {
                batch.push_back(child);
            }
        }
        pool.batches.push(batch);
    }
    let outcome = match (verified.is_empty(), exhausted) {
        (false, _) => Outcome::Solved,
        (true, true) => Outcome::BudgetExhausted,
        (true, false) => Outcome::PoolEmpty,
    };
    Ok(Evolved { verified, outcome })
}

/// One campaign: intent, prioritization, synthesis and admission.
fn campaign(s: &mut Session<'_>, cand: &Candidate, checked: &[Checked], failure: &Checked) -> Result<Vec<Candidate>, CoevolveError> {
    let campaign = s.campaigns;
    let report = extract_hs_intent(&cand.program, checked);
    let ordered = prioritize(&report.soft, &report.hard, s.solver, s.seed.wrapping_add(campaign as u64))?;
    let top = top_class(&ordered);
    let annotated = annotate(&cand.program, &report);
    // Statement ids survive annotation, so the failure applies unchanged.
    let req = build_request(&annotated, failure, &top, s.budget.k);
    let trace = crate::vcgen::trace_of(&cand.program, &failure.partition);
    let mut log = CampaignLog {
        campaign,
        method: failure.partition.method.clone(),
        kind: failure.partition.kind,
        target_line: trace.target_line,
        failing: checked.iter().filter(|c| !c.conforms()).count(),
        valid: checked.iter().filter(|c| c.conforms()).count(),
        priority: req.priority.lines().map(str::to_string).collect(),
        proposed: 0,
        admitted: Vec::new(),
        rejected: Vec::new(),
        explain: s.explain.then(|| report.dump()),
    };
    let ctx = RepairContext {
        program: &annotated,
        report: &report,
        failure,
        top: &top,
        solver: s.solver,
        domain: s.domain,
        campaign,
    };
    let synthesized = match synthesize(&req, &ctx, &mut *s.plugin) {
        Ok(x) => x,
        Err(SynthError::NoPatches { .. }) => Default::default(),
        Err(SynthError::Solver(e)) => return Err(e.into()),
        Err(e) => {
            log.rejected.push(e.to_string());
            s.log.push(log);
            return Ok(Vec::new());
        }
    };
    log.proposed = synthesized.accepted.len() + synthesized.dropped.len();
    log.rejected.extend(synthesized.dropped);
    let plain = print_program(&cand.program);
    let mut children = Vec::new();
    for acc in synthesized.accepted {
        s.next_patch += 1;
        let id = format!("patch-{:03}", s.next_patch);
        let text = strip_annotations(&plain, &req.annotated_program, &acc.text);
        let program = match parse_named(&text, &cand.program.source_name).map_err(CoevolveError::from).and_then(|p| renumber(&p)) {
            Ok(p) => p,
            Err(e) => {
                log.rejected.push(format!("{id}: {e}"));
                continue;
            }
        };
        if still_fails(&program, failure, s.solver)? {
            log.rejected.push(format!("{id}: the failure it targets remains"));
            continue;
        }
        let after = crate::intent::check_all(&program, s.solver)?;
        let broken = broken_hard_facts(checked, &after);
        if !broken.is_empty() {
            log.rejected.push(format!("{id}: breaks hard intent: {}", broken.join("; ")));
            continue;
        }
        log.admitted.push(id.clone());
        let mut lineage = cand.lineage.clone();
        lineage.push(PatchRecord {
            id,
            campaign,
            synthesizer: acc.patch.synthesizer_id.clone(),
            text: wire::render(&acc.patch.hunks),
        });
        let mut child = Candidate::new(program);
        child.lineage = lineage;
        child.campaign = campaign;
        s.admissions.push(Admission { campaign, patch: child.lineage.last().map(|r| r.id.clone()).unwrap_or_default(), parent: cand.source.clone(), child: child.source.clone() });
        children.push(child);
    }
    s.log.push(log);
    Ok(children)
}
