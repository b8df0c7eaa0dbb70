//! Program/spec/test conformance relations and the test and spec translations.

use super::CoevolveError;
use crate::intent::{check_all, Checked};
use crate::lang::{
    parse_named, print_program, Clause, Expr, Method, Param, Program, Span, Stmt, StmtId, StmtKind, Test, TrustTag,
    Value,
};
use crate::solver::{Solver, Status};
use crate::vcgen::{trace_of, vc_gen_method, FailingTrace};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    ProgSpec,
    ProgTest,
    SpecTest,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceVerdict {
    pub relation: Relation,
    pub holds: bool,
    /// Non-valid partitions, earliest failure first.
    #[serde(skip)]
    pub failing: Vec<Checked>,
    pub failing_traces: Vec<FailingTrace>,
    #[serde(skip)]
    pub checked: Vec<Checked>,
}

fn verdict(p: &Program, relation: Relation, checked: Vec<Checked>) -> ConformanceVerdict {
    let mut failing: Vec<(FailingTrace, Checked)> = checked
        .iter()
        .filter(|c| !c.conforms())
        .map(|c| {
            let mut t = trace_of(p, &c.partition);
            t.unknown = c.verdict.status == Status::Unknown;
            (t, c.clone())
        })
        .collect();
    failing.sort_by_key(|(t, _)| (t.unknown, t.depth(), t.target_line, t.partition));
    ConformanceVerdict {
        relation,
        holds: failing.is_empty(),
        failing_traces: failing.iter().map(|(t, _)| t.clone()).collect(),
        failing: failing.into_iter().map(|(_, c)| c).collect(),
        checked,
    }
}

pub fn conforms_prog_spec(p: &Program, solver: &Solver) -> Result<ConformanceVerdict, CoevolveError> {
    let checked = check_all(p, solver)?;
    Ok(verdict(p, Relation::ProgSpec, checked))
}

fn check_method(p: &Program, name: &str, solver: &Solver, relation: Relation) -> Result<ConformanceVerdict, CoevolveError> {
    let m = p.method(name).ok_or_else(|| CoevolveError::UnknownMethod(name.to_string()))?;
    let mut checked = Vec::new();
    for part in vc_gen_method(p, m, 0)? {
        let verdict = solver.check_validity(&part.vc, &part.types)?;
        checked.push(Checked { partition: part, verdict });
    }
    Ok(verdict(p, relation, checked))
}

/// A test read as a specification over its own variable names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestSpec {
    pub requires: Vec<Expr>,
    pub ensures: Vec<Expr>,
}

pub fn test_to_spec(t: &Test) -> TestSpec {
    let requires = t.inputs.iter().map(|(x, v)| Expr::eq(Expr::var(x), v.to_expr())).collect();
    let ensures = if t.oracle.is_empty() { vec![Expr::Bool(true)] } else { t.oracle.clone() };
    TestSpec { requires, ensures }
}

/// The test's specification restated over `m`'s parameters and results.
pub fn test_spec_for(t: &Test, m: &Method) -> Result<TestSpec, CoevolveError> {
    if t.call.args.len() != m.params.len() || t.call.results.len() != m.returns.len() {
        return Err(CoevolveError::TestShape(format!("{} does not match the signature of {}", t.name, m.name)));
    }
    let close = |e: &Expr| e.subst(&|v| t.input(v).map(Value::to_expr));
    let mut rename: Vec<(String, String)> = Vec::new();
    for (a, p) in t.call.args.iter().zip(&m.params) {
        if let Expr::Var(x) = a {
            rename.push((x.clone(), p.name.clone()));
        }
    }
    for (r, p) in t.call.results.iter().zip(&m.returns) {
        rename.push((r.clone(), p.name.clone()));
    }
    let requires = t.call.args.iter().zip(&m.params).map(|(a, p)| Expr::eq(Expr::var(&p.name), close(a))).collect();
    let over = |e: &Expr| {
        e.subst(&|v| match rename.iter().find(|(x, _)| x == v) {
            Some((_, y)) => Some(Expr::var(y)),
            None => t.input(v).map(Value::to_expr),
        })
    };
    let ensures = test_to_spec(t).ensures.iter().map(over).collect();
    Ok(TestSpec { requires, ensures })
}

fn clause(formula: Expr) -> Clause {
    Clause { id: StmtId(0), span: Span::default(), trust: TrustTag::default(), formula }
}

/// Prints and reparses so that statement ids and spans are fresh.
pub fn renumber(p: &Program) -> Result<Program, CoevolveError> {
    let text = print_program(p);
    parse_named(&text, &p.source_name).map_err(|e| CoevolveError::Internal(format!("{e}\n{text}")))
}

pub fn conforms_prog_test(p: &Program, t: &Test, solver: &Solver) -> Result<ConformanceVerdict, CoevolveError> {
    let mut q = p.clone();
    let m = q.method_mut(&t.call.method).ok_or_else(|| CoevolveError::UnknownMethod(t.call.method.clone()))?;
    let spec = test_spec_for(t, m)?;
    m.requires = spec.requires.into_iter().map(clause).collect();
    m.ensures = spec.ensures.into_iter().map(clause).collect();
    let q = renumber(&q)?;
    check_method(&q, &t.call.method, solver, Relation::ProgTest)
}

/// The method's signature and specification with an opaque body.
pub fn spec_to_program(m: &Method) -> Method {
    let mut stub = m.clone();
    stub.body = None;
    stub
}

/// The test as a trusted method whose specification is the test's, calling
/// `callee` once.
pub fn test_method(t: &Test, callee: &Method) -> Result<Method, CoevolveError> {
    if t.call.results.len() != callee.returns.len() {
        return Err(CoevolveError::TestShape(format!("{} does not match the signature of {}", t.name, callee.name)));
    }
    let spec = test_to_spec(t);
    let params = t.inputs.iter().map(|(x, v)| Param { name: x.clone(), ty: v.ty() }).collect();
    let returns = t.call.results.iter().zip(&callee.returns).map(|(r, p)| Param { name: r.clone(), ty: p.ty }).collect();
    let call = Stmt {
        id: StmtId(0),
        span: Span::default(),
        trust: TrustTag::default(),
        kind: StmtKind::Call {
            declare: false,
            targets: t.call.results.clone(),
            method: callee.name.clone(),
            args: t.call.args.clone(),
        },
    };
    Ok(Method {
        name: t.name.clone(),
        span: Span::default(),
        trust: TrustTag::user(),
        params,
        returns,
        requires: spec.requires.into_iter().map(clause).collect(),
        ensures: spec.ensures.into_iter().map(clause).collect(),
        body: Some(vec![call]),
        body_span: Span::default(),
    })
}

/// The stub for `m` followed by one trusted method per test.
pub fn assurance_program(m: &Method, tests: &[Test], name: &str) -> Result<Program, CoevolveError> {
    let mut methods = vec![spec_to_program(m)];
    for t in tests {
        methods.push(test_method(t, m)?);
    }
    renumber(&Program { methods, source_name: name.to_string() })
}

pub fn conforms_spec_test(m: &Method, t: &Test, solver: &Solver) -> Result<ConformanceVerdict, CoevolveError> {
    let a = assurance_program(m, std::slice::from_ref(t), "assurance")?;
    let mut v = conforms_prog_spec(&a, solver)?;
    v.relation = Relation::SpecTest;
    Ok(v)
}
