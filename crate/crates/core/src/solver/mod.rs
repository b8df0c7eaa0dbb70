//! Validity checking: a bounded enumerative oracle and an SMT-LIB2 subprocess.

pub mod bounded;
pub mod eval;
pub mod smt;

use crate::lang::{print_expr, Expr, Type};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

pub use bounded::{default_value, BoundedDomain, Search};
pub use eval::{evaluate, evaluate_total, Assignment, EvalError, Evaluator};
pub use smt::SmtConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("solver backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed solver model: {0}")]
    MalformedModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Valid,
    Invalid,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Bounded,
    Smt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub witness: Option<Assignment>,
    pub backend: BackendKind,
    /// Search nodes visited (bounded backend only).
    pub nodes: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }

    pub fn is_invalid(&self) -> bool {
        self.status == Status::Invalid
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Bounded(BoundedDomain),
    Smt(SmtConfig),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Bounded(BoundedDomain::default())
    }
}

/// Node limit for one bounded query; exceeding it yields `Unknown`.
pub const MAX_NODES: u64 = 20_000_000;

/// A validity checker with a per-instance query cache.
pub struct Solver {
    pub backend: Backend,
    cache: Mutex<HashMap<String, Verdict>>,
    queries: Mutex<u64>,
}

impl Solver {
    pub fn new(backend: Backend) -> Solver {
        Solver { backend, cache: Mutex::new(HashMap::new()), queries: Mutex::new(0) }
    }

    pub fn bounded(domain: BoundedDomain) -> Solver {
        Solver::new(Backend::Bounded(domain))
    }

    /// Number of distinct queries sent to the backend.
    pub fn queries(&self) -> u64 {
        *self.queries.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn check_validity(&self, vc: &Expr, types: &BTreeMap<String, Type>) -> Result<Verdict, SolverError> {
        let mut key = print_expr(vc);
        for (v, t) in types {
            key.push_str(&format!(";{v}:{t:?}"));
        }
        if let Some(v) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(v.clone());
        }
        *self.queries.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        let v = check_validity(vc, types, &self.backend)?;
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, v.clone());
        Ok(v)
    }

    /// `Some(true)` if the formulas are jointly satisfiable, `Some(false)` if
    /// not, `None` when the backend cannot tell.
    pub fn satisfiable(&self, fs: &[Expr], types: &BTreeMap<String, Type>) -> Result<Option<bool>, SolverError> {
        let v = self.check_validity(&Expr::not(Expr::conj(fs.to_vec())), types)?;
        Ok(match v.status {
            Status::Valid => Some(false),
            Status::Invalid => Some(true),
            Status::Unknown => None,
        })
    }

    /// `Some(true)` iff `a ==> b` is valid.
    pub fn implies(&self, a: &Expr, b: &Expr, types: &BTreeMap<String, Type>) -> Result<Option<bool>, SolverError> {
        let v = self.check_validity(&Expr::imp(a.clone(), b.clone()), types)?;
        Ok(match v.status {
            Status::Valid => Some(true),
            Status::Invalid => Some(false),
            Status::Unknown => None,
        })
    }
}

/// Types for the free variables of `vc`, defaulting to `int`.
fn complete_types(vc: &Expr, types: &BTreeMap<String, Type>) -> BTreeMap<String, Type> {
    let mut out = types.clone();
    for v in vc.free_vars() {
        out.entry(v).or_insert(Type::Int);
    }
    out
}

/// Decides validity of `vc` with the given backend. Bounded validity means
/// no falsifying assignment exists inside the domain.
pub fn check_validity(vc: &Expr, types: &BTreeMap<String, Type>, backend: &Backend) -> Result<Verdict, SolverError> {
    let start = Instant::now();
    let types = complete_types(vc, types);
    match backend {
        Backend::Bounded(domain) => {
            let mut search = Search::new(domain, &types);
            search.max_nodes = MAX_NODES;
            let found = search.solve(vec![(vc.clone(), false)]);
            let (status, witness) = match found {
                Some(mut env) => {
                    for v in vc.free_vars() {
                        let t = types.get(&v).copied().unwrap_or(Type::Int);
                        env.entry(v).or_insert_with(|| default_value(t));
                    }
                    (Status::Invalid, Some(env))
                }
                None if search.exhausted => (Status::Unknown, None),
                None => (Status::Valid, None),
            };
            Ok(Verdict { status, witness, backend: BackendKind::Bounded, nodes: search.nodes, elapsed: start.elapsed() })
        }
        Backend::Smt(cfg) => {
            let (status, witness) = match smt::run(cfg, vc, &types)? {
                smt::SmtAnswer::Unsat => (Status::Valid, None),
                // A model the evaluator cannot replay as a counterexample is
                // not reported as one.
                smt::SmtAnswer::Sat(env) if evaluate_total(vc, &env) == Ok(false) => (Status::Invalid, Some(env)),
                smt::SmtAnswer::Sat(_) | smt::SmtAnswer::Unknown => (Status::Unknown, None),
            };
            Ok(Verdict { status, witness, backend: BackendKind::Smt, nodes: 0, elapsed: start.elapsed() })
        }
    }
}
