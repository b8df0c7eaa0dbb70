//! Postcondition completeness against seeded output mutations, and the
//! summary prompt.

use crate::coevolution::conformance::test_spec_for;
use crate::lang::{print_expr, print_program, BinOp, Expr, Method, Program, Test, Type, Value};
use crate::solver::{evaluate_total, Assignment, Solver, SolverError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const SUMMARY_SYSTEM: &str = include_str!("summary_system.txt");
pub const SUMMARY_TEMPLATE: &str = include_str!("summary_prompt.txt");

/// Mutants scored per test unless asked otherwise.
pub const DEFAULT_MUTATIONS: usize = 20;

/// Value substituted by the sentinel operator.
pub const SENTINEL: i64 = 1000;

const LONGEST_CHAIN: usize = 4;
const REROLLS_PER_MUTANT: usize = 200;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("could not draw {wanted} distinct mutants for test '{test}' (got {got})")]
    InsufficientDistinctMutations { test: String, wanted: usize, got: usize },
    #[error("no test has an oracle of the form `result == expr`")]
    NothingToMutate,
    #[error("test '{test}' calls '{method}', which the specification does not define")]
    UnknownMethod { test: String, method: String },
    #[error("at least one mutation per test is required")]
    ZeroMutations,
    #[error("{0}")]
    Shape(String),
    #[error("cannot evaluate the oracle of '{test}': {message}")]
    Eval { test: String, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationOp {
    Inc,
    Dec,
    Neg,
    /// Length of an input array.
    Len,
    Zero,
    Sentinel,
}

impl MutationOp {
    const ALL: [MutationOp; 6] =
        [MutationOp::Inc, MutationOp::Dec, MutationOp::Neg, MutationOp::Len, MutationOp::Zero, MutationOp::Sentinel];

    fn apply(self, v: i64, len: Option<i64>) -> Option<i64> {
        match self {
            MutationOp::Inc => Some(v.wrapping_add(1)),
            MutationOp::Dec => Some(v.wrapping_sub(1)),
            MutationOp::Neg => Some(v.wrapping_neg()),
            MutationOp::Len => len,
            MutationOp::Zero => Some(0),
            MutationOp::Sentinel => Some(SENTINEL),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MutationRecord {
    pub test: String,
    pub ops: Vec<MutationOp>,
    /// The oracle with its output value replaced.
    pub oracle: String,
    pub inconsistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessResult {
    pub score: f64,
    pub killed: usize,
    pub total_mutations: usize,
    pub per_mutation: Vec<MutationRecord>,
    /// Tests without an output equality; they contribute no mutants.
    pub skipped: Vec<String>,
}

/// The oracle conjunct pinning a result: its index, the result name and the
/// expected value.
fn output_equality(t: &Test) -> Result<Option<(usize, String, Value)>, MetricsError> {
    let env: Assignment = t.inputs.iter().cloned().collect();
    for (k, o) in t.oracle.iter().enumerate() {
        let Expr::Binary(BinOp::Eq, l, r) = o else { continue };
        let pinned = match (&**l, &**r) {
            (Expr::Var(x), e) | (e, Expr::Var(x)) if t.call.results.contains(x) => Some((x.clone(), e.clone())),
            _ => None,
        };
        let Some((x, e)) = pinned else { continue };
        if e.free_vars().iter().any(|v| t.call.results.contains(v)) {
            continue;
        }
        let v = crate::solver::Evaluator::new(&env, false)
            .value(&e)
            .map_err(|err| MetricsError::Eval { test: t.name.clone(), message: err.to_string() })?;
        return Ok(Some((k, x, v)));
    }
    Ok(None)
}

/// `n` distinct mutants of `v`, each with the operator chain producing it.
fn draw_mutants(t: &Test, v: &Value, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(Vec<MutationOp>, Value)>, MetricsError> {
    let short = |got| MetricsError::InsufficientDistinctMutations { test: t.name.clone(), wanted: n, got };
    let v = match v {
        Value::Int(x) => *x,
        Value::Bool(b) => {
            return if n <= 1 { Ok(vec![(vec![MutationOp::Neg], Value::Bool(!b))]) } else { Err(short(1)) };
        }
        Value::Array(_) => return Err(short(0)),
    };
    let lens: Vec<i64> = t
        .inputs
        .iter()
        .filter_map(|(_, x)| match x {
            Value::Array(xs) => Some(xs.len() as i64),
            _ => None,
        })
        .collect();
    let mut seen = BTreeSet::from([v]);
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < n {
        if tries >= REROLLS_PER_MUTANT * n {
            return Err(short(out.len()));
        }
        tries += 1;
        let steps = rng.gen_range(1..=LONGEST_CHAIN);
        let mut x = v;
        let mut ops = Vec::new();
        for _ in 0..steps {
            let op = *MutationOp::ALL.choose(rng).expect("non-empty");
            let len = lens.choose(rng).copied();
            if let Some(y) = op.apply(x, len) {
                x = y;
                ops.push(op);
            }
        }
        if !ops.is_empty() && seen.insert(x) {
            out.push((ops, Value::Int(x)));
        }
    }
    Ok(out)
}

/// Whether the specification admits the inputs of `t` together with
/// `result = v` and the rest of the oracle.
fn consistent(spec: &Method, t: &Test, eq: usize, result: &str, v: &Value, solver: &Solver) -> Result<bool, MetricsError> {
    let mut mutated = t.clone();
    mutated.oracle[eq] = Expr::eq(Expr::var(result), v.to_expr());
    let ts = test_spec_for(&mutated, spec).map_err(|e| MetricsError::Shape(e.to_string()))?;
    let mut env = Assignment::new();
    for (p, a) in spec.params.iter().zip(&t.call.args) {
        let closed = a.subst(&|x| t.input(x).map(Value::to_expr));
        if let Ok(val) = crate::solver::Evaluator::new(&Assignment::new(), false).value(&closed) {
            env.insert(p.name.clone(), val);
        }
    }
    if let Some(k) = t.call.results.iter().position(|r| r == result) {
        env.insert(spec.returns[k].name.clone(), v.clone());
    }
    let mut parts: Vec<Expr> = spec.requires.iter().map(|c| c.formula.clone()).collect();
    parts.extend(spec.ensures.iter().map(|c| c.formula.clone()));
    parts.extend(ts.ensures);
    let f = Expr::conj(parts).subst(&|x| env.get(x).map(Value::to_expr));
    let free = f.free_vars();
    if free.is_empty() {
        return Ok(evaluate_total(&f, &Assignment::new()).unwrap_or(false));
    }
    let types: BTreeMap<String, Type> = free.iter().map(|x| (x.clone(), spec.var_type(x).unwrap_or(Type::Int))).collect();
    // An undecided query counts as consistent, so it is never a kill.
    Ok(solver.satisfiable(&[f], &types)?.unwrap_or(true))
}

/// Fraction of seeded output mutations of `tests` that the specifications
/// in `spec` reject.
pub fn completeness(spec: &Program, tests: &[Test], n: usize, seed: u64, solver: &Solver) -> Result<CompletenessResult, MetricsError> {
    if n == 0 {
        return Err(MetricsError::ZeroMutations);
    }
    let mut per_mutation = Vec::new();
    let mut skipped = Vec::new();
    for (i, t) in tests.iter().enumerate() {
        let m = spec
            .method(&t.call.method)
            .ok_or_else(|| MetricsError::UnknownMethod { test: t.name.clone(), method: t.call.method.clone() })?;
        let Some((eq, result, expected)) = output_equality(t)? else {
            skipped.push(t.name.clone());
            continue;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        for (ops, v) in draw_mutants(t, &expected, n, &mut rng)? {
            let inconsistent = !consistent(m, t, eq, &result, &v, solver)?;
            let mut oracle = t.oracle.clone();
            oracle[eq] = Expr::eq(Expr::var(&result), v.to_expr());
            per_mutation.push(MutationRecord {
                test: t.name.clone(),
                ops,
                oracle: print_expr(&Expr::conj(oracle)),
                inconsistent,
            });
        }
    }
    if per_mutation.is_empty() {
        return Err(MetricsError::NothingToMutate);
    }
    let killed = per_mutation.iter().filter(|r| r.inconsistent).count();
    let total = per_mutation.len();
    Ok(CompletenessResult { score: killed as f64 / total as f64, killed, total_mutations: total, per_mutation, skipped })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryPrompt {
    pub system: String,
    pub prompt: String,
}

/// The summary prompt for `p`, printed as is; trusted lines should already
/// be marked.
pub fn build_summary_prompt(p: &Program) -> SummaryPrompt {
    SummaryPrompt {
        system: SUMMARY_SYSTEM.to_string(),
        prompt: SUMMARY_TEMPLATE.replace("{program}", &print_program(p)),
    }
}
