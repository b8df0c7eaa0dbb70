//! Folding tests into the repair loop through the test/spec translations.

use super::conformance::{assurance_program, conforms_prog_spec, conforms_prog_test, renumber};
use super::evolve::{co_evolve, Candidate, Mode, Outcome, Session};
use super::CoevolveError;
use crate::lang::{Program, Test};
use serde::Serialize;

/// A program, its embedded specification and the tests it was aligned with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Triple {
    pub candidate: Candidate,
    pub tests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aligned {
    pub triples: Vec<Triple>,
    pub outcome: Outcome,
}

/// `p` with the specification of `name` taken from `from`.
pub fn with_spec_of(p: &Program, from: &Program, name: &str) -> Result<Program, CoevolveError> {
    let src = from.method(name).ok_or_else(|| CoevolveError::UnknownMethod(name.to_string()))?;
    let mut q = p.clone();
    let m = q.method_mut(name).ok_or_else(|| CoevolveError::UnknownMethod(name.to_string()))?;
    m.requires = src.requires.clone();
    m.ensures = src.ensures.clone();
    renumber(&q)
}

fn admit(s: &Session<'_>, p: &Program, tests: &[Test]) -> Result<bool, CoevolveError> {
    if !conforms_prog_spec(p, s.solver)?.holds {
        return Ok(false);
    }
    for t in tests {
        if !conforms_prog_test(p, t, s.solver)?.holds {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Repairs `p`, then aligns each verified candidate's specification with
/// `tests`, re-entering when the aligned specification breaks the program.
pub fn automated_assurance(s: &mut Session<'_>, p: Program, tests: &[Test]) -> Result<Aligned, CoevolveError> {
    assure(s, p, tests, 0)
}

fn assure(s: &mut Session<'_>, p: Program, tests: &[Test], depth: usize) -> Result<Aligned, CoevolveError> {
    let names: Vec<String> = tests.iter().map(|t| t.name.clone()).collect();
    let evolved = co_evolve(s, p)?;
    let mut outcome = evolved.outcome;
    if tests.is_empty() {
        let triples = evolved.verified.into_iter().map(|c| Triple { candidate: c, tests: Vec::new() }).collect();
        return Ok(Aligned { triples, outcome });
    }
    let mut callees: Vec<String> = Vec::new();
    for t in tests {
        if !callees.contains(&t.call.method) {
            callees.push(t.call.method.clone());
        }
    }
    let mut triples = Vec::new();
    for cand in evolved.verified {
        let mut current = cand.program.clone();
        let mut lineage = cand.lineage.clone();
        let mut failed = false;
        for name in &callees {
            let m = current.method(name).ok_or_else(|| CoevolveError::UnknownMethod(name.clone()))?;
            let group: Vec<Test> = tests.iter().filter(|t| &t.call.method == name).cloned().collect();
            let a = assurance_program(m, &group, &current.source_name)?;
            let aligned = co_evolve(s, a)?;
            let Some(best) = aligned.verified.into_iter().next() else {
                outcome = aligned.outcome;
                failed = true;
                break;
            };
            current = with_spec_of(&current, &best.program, name)?;
            lineage.extend(best.lineage);
        }
        if failed {
            continue;
        }
        if admit(s, &current, tests)? {
            let mut c = Candidate::new(current);
            c.lineage = lineage;
            c.campaign = s.campaigns;
            triples.push(Triple { candidate: c, tests: names.clone() });
        } else if depth < s.budget.max_campaigns && s.campaigns < s.budget.max_campaigns {
            let mut inner = assure(s, current, tests, depth + 1)?;
            for t in &mut inner.triples {
                let mut l = lineage.clone();
                l.extend(t.candidate.lineage.drain(..));
                t.candidate.lineage = l;
            }
            outcome = inner.outcome;
            triples.extend(inner.triples);
        } else {
            outcome = Outcome::BudgetExhausted;
        }
        if s.mode == Mode::First && !triples.is_empty() {
            break;
        }
    }
    if !triples.is_empty() {
        outcome = Outcome::Solved;
    }
    Ok(Aligned { triples, outcome })
}
