//! Ordering of soft facts by conflicts with the rest of the intent.

use crate::intent::{IntentFact, PriorityKey};
use crate::lang::{Expr, Type};
use crate::solver::{Solver, SolverError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

fn merged(a: &IntentFact, b: &IntentFact) -> BTreeMap<String, Type> {
    let mut t = a.types.clone();
    for (k, v) in &b.types {
        t.entry(k.clone()).or_insert(*v);
    }
    t
}

fn vars(f: &IntentFact) -> BTreeSet<String> {
    f.formula.free_vars().into_iter().collect()
}

struct Oracle<'a> {
    solver: &'a Solver,
    unsat: BTreeMap<usize, bool>,
}

impl Oracle<'_> {
    fn unsat_alone(&mut self, f: &IntentFact) -> Result<bool, SolverError> {
        if let Some(u) = self.unsat.get(&f.fact_id) {
            return Ok(*u);
        }
        let u = self.solver.satisfiable(std::slice::from_ref(&f.formula), &f.types)? == Some(false);
        self.unsat.insert(f.fact_id, u);
        Ok(u)
    }

    /// Joint unsatisfiability; unknown answers count as no conflict.
    fn conflict(&mut self, a: &IntentFact, b: &IntentFact) -> Result<bool, SolverError> {
        if self.unsat_alone(a)? || self.unsat_alone(b)? {
            return Ok(true);
        }
        if vars(a).is_disjoint(&vars(b)) {
            return Ok(false);
        }
        let fs: Vec<Expr> = vec![a.formula.clone(), b.formula.clone()];
        Ok(self.solver.satisfiable(&fs, &merged(a, b))? == Some(false))
    }

    /// A hard fact against a soft one. A well-formedness obligation of a
    /// failing clause conflicts with every fact taken from that clause.
    fn hard_conflict(&mut self, h: &IntentFact, f: &IntentFact) -> Result<bool, SolverError> {
        let wf = h.kind.is_some_and(|k| k.is_wf());
        if wf && !h.whole_vc && h.origin.node() == f.origin.node() {
            return Ok(true);
        }
        if h.whole_vc {
            return self.unsat_alone(f);
        }
        self.conflict(h, f)
    }

    fn stronger(&mut self, f: &IntentFact, g: &IntentFact) -> Result<bool, SolverError> {
        let t = merged(f, g);
        Ok(self.solver.implies(&f.formula, &g.formula, &t)? == Some(true)
            && self.solver.implies(&g.formula, &f.formula, &t)? != Some(true))
    }
}

/// Orders `soft` by (hard conflicts desc, soft conflicts desc, strength rank
/// asc) with a seeded random tie-break, filling in each fact's key.
pub fn prioritize(
    soft: &[IntentFact],
    hard: &[IntentFact],
    solver: &Solver,
    seed: u64,
) -> Result<Vec<IntentFact>, SolverError> {
    let mut o = Oracle { solver, unsat: BTreeMap::new() };
    let n = soft.len();
    let mut stronger = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                stronger[i][j] = o.stronger(&soft[i], &soft[j])?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed = Vec::new();
    for (i, f) in soft.iter().enumerate() {
        let mut h_conflicts = 0;
        for h in hard {
            if o.hard_conflict(h, f)? {
                h_conflicts += 1;
            }
        }
        let mut s_conflicts = 0;
        for (j, g) in soft.iter().enumerate() {
            if i != j && o.conflict(f, g)? {
                s_conflicts += 1;
            }
        }
        let strength_rank = (0..n).filter(|&j| stronger[j][i]).count();
        let mut f = f.clone();
        f.priority = Some(PriorityKey { h_conflicts, s_conflicts, strength_rank });
        keyed.push((f, rng.gen::<u64>()));
    }
    keyed.sort_by(|(a, ra), (b, rb)| {
        let (ka, kb) = (a.priority.unwrap(), b.priority.unwrap());
        kb.h_conflicts
            .cmp(&ka.h_conflicts)
            .then(kb.s_conflicts.cmp(&ka.s_conflicts))
            .then(ka.strength_rank.cmp(&kb.strength_rank))
            .then(ra.cmp(rb))
    });
    Ok(keyed.into_iter().map(|(f, _)| f).collect())
}

/// The leading facts sharing the first fact's key.
pub fn top_class(ordered: &[IntentFact]) -> Vec<IntentFact> {
    let Some(first) = ordered.first() else { return Vec::new() };
    ordered.iter().take_while(|f| f.priority == first.priority).cloned().collect()
}
