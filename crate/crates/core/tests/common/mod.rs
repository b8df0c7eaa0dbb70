#![allow(dead_code)]

use coevolve::intent::check_all;
use coevolve::lang::{parse_named, print_expr, Expr, Method, Program, Stmt, StmtKind, Type};
use coevolve::solver::{Solver, Status};
use coevolve::vcgen::erase;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name)).unwrap()
}

pub fn program(name: &str) -> Program {
    let file = name.rsplit('/').next().unwrap();
    parse_named(&corpus(name), file).unwrap()
}

pub fn seeded_corpus() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(corpus_path("seeded"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
        .filter(|n| n.ends_with(".mvl"))
        .collect();
    names.sort();
    names.into_iter().map(|n| format!("seeded/{n}")).collect()
}

// ---- random loop-free methods -------------------------------------------

struct Gen {
    rng: ChaCha8Rng,
    ints: Vec<&'static str>,
}

impl Gen {
    fn int(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.4) {
            return if self.rng.gen_bool(0.6) {
                self.ints.choose(&mut self.rng).unwrap().to_string()
            } else {
                self.rng.gen_range(-2..=2).to_string()
            };
        }
        let op = ["+", "-", "*", "%", "/"].choose(&mut self.rng).unwrap();
        let l = self.int(depth - 1);
        if *op == "%" || *op == "/" {
            let d = [2, 3, -2].choose(&mut self.rng).unwrap();
            return format!("({l} {op} {d})");
        }
        let r = self.int(depth - 1);
        format!("({l} {op} {r})")
    }

    fn boolean(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.5) {
            if self.rng.gen_bool(0.15) {
                return "b".into();
            }
            let op = ["<", "<=", "==", "!=", ">", ">="].choose(&mut self.rng).unwrap();
            let l = self.int(1);
            let r = self.int(1);
            return format!("{l} {op} {r}");
        }
        let l = self.boolean(depth - 1);
        let r = self.boolean(depth - 1);
        match self.rng.gen_range(0..4) {
            0 => format!("({l} && {r})"),
            1 => format!("({l} || {r})"),
            2 => format!("({l} ==> {r})"),
            _ => format!("!({l})"),
        }
    }

    fn simple(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 => format!("assert {};", self.boolean(1)),
            1 => format!("assume {};", self.boolean(1)),
            2 => format!("t := {};", self.int(2)),
            _ => format!("r := {};", self.int(2)),
        }
    }
}

/// A loop-free method over `x, y: int` and `b: bool` with at most two
/// sequential conditionals, hence at most four paths.
pub fn random_method(seed: u64) -> String {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), ints: vec!["x", "y"] };
    let mut body = vec![format!("var t := {};", g.int(1))];
    g.ints = vec!["x", "y", "r", "t"];
    let mut ifs = 0;
    for _ in 0..g.rng.gen_range(1..=4) {
        if ifs < 2 && g.rng.gen_bool(0.4) {
            ifs += 1;
            let c = g.boolean(1);
            let a = g.simple();
            let b = g.simple();
            body.push(format!("if {c} {{\n    {a}\n  }} else {{\n    {b}\n  }}"));
        } else {
            body.push(g.simple());
        }
    }
    g.ints = vec!["x", "y"];
    let mut spec = String::new();
    if g.rng.gen_bool(0.5) {
        spec.push_str(&format!("  requires {}\n", g.boolean(1)));
    }
    g.ints = vec!["x", "y", "r"];
    for _ in 0..g.rng.gen_range(1..=2) {
        spec.push_str(&format!("  ensures {}\n", g.boolean(1)));
    }
    let body: Vec<String> = body.iter().map(|s| format!("  {s}")).collect();
    format!("method M(x: int, y: int, b: bool) returns (r: int)\n{spec}{{\n{}\n}}\n", body.join("\n"))
}

fn wp(stmts: &[Stmt], post: Expr) -> Expr {
    stmts.iter().rev().fold(post, |q, s| match &s.kind {
        StmtKind::VarDecl { name, init: Some(e), .. } | StmtKind::Assign { target: name, value: e } => {
            q.subst(&|v| (v == name).then(|| e.clone()))
        }
        StmtKind::VarDecl { init: None, .. } => q,
        StmtKind::Assert(e) => Expr::and(e.clone(), q),
        StmtKind::Assume(e) => Expr::imp(e.clone(), q),
        StmtKind::If { cond, then_branch, else_branch } => {
            let t = wp(then_branch, q.clone());
            let f = wp(else_branch.as_deref().unwrap_or(&[]), q);
            Expr::and(Expr::imp(cond.clone(), t), Expr::imp(Expr::not(cond.clone()), f))
        }
        other => panic!("unsupported in the oracle: {other:?}"),
    })
}

/// `requires ==> wp(body, ensures)` computed directly on the AST.
pub fn monolithic_vc(m: &Method) -> Expr {
    let pre = Expr::conj(m.requires.iter().map(|c| c.formula.clone()).collect());
    let post = Expr::conj(m.ensures.iter().map(|c| c.formula.clone()).collect());
    Expr::imp(pre, wp(m.body.as_deref().unwrap_or(&[]), post))
}

pub fn method_types(m: &Method) -> BTreeMap<String, Type> {
    let mut t: BTreeMap<String, Type> = m.params.iter().chain(&m.returns).map(|p| (p.name.clone(), p.ty)).collect();
    t.insert("t".into(), Type::Int);
    t
}

// ---- random closed formulas ---------------------------------------------

/// A random formula over `x, y: int`, `b: bool` and `a: array<int>`.
pub fn random_formula(seed: u64) -> String {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), ints: vec!["x", "y", "a.Length", "a[x]", "a[0]"] };
    let mut f = g.boolean(2);
    if g.rng.gen_bool(0.3) {
        let body = g.boolean(0).replace("x", "i");
        let q = if g.rng.gen_bool(0.5) { "forall" } else { "exists" };
        let join = if q == "forall" { "==>" } else { "&&" };
        f = format!("({q} i :: 0 <= i < a.Length {join} {body}) || {f}");
    }
    f
}

pub fn formula_types() -> BTreeMap<String, Type> {
    BTreeMap::from([
        ("x".to_string(), Type::Int),
        ("y".to_string(), Type::Int),
        ("b".to_string(), Type::Bool),
        ("a".to_string(), Type::Array),
    ])
}

// ---- independent hard-fact recheck --------------------------------------

/// Targets (method, kind, erased text) whose partitions all verify.
pub fn verified_targets(p: &Program, solver: &Solver) -> BTreeSet<(String, String, String)> {
    let mut all: BTreeMap<(String, String, String), bool> = BTreeMap::new();
    for c in check_all(p, solver).unwrap() {
        let k = (c.partition.method.clone(), c.partition.kind.name().to_string(), print_expr(&erase(&c.partition.target.source)));
        *all.entry(k).or_insert(true) &= c.verdict.status == Status::Valid;
    }
    all.into_iter().filter(|(_, ok)| *ok).map(|(k, _)| k).collect()
}

/// Facts verified in `parent` that `child` still states but no longer proves.
pub fn broken_in(parent: &Program, child: &Program, solver: &Solver) -> Vec<(String, String, String)> {
    let before = verified_targets(parent, solver);
    let mut present: BTreeMap<(String, String, String), bool> = BTreeMap::new();
    for c in check_all(child, solver).unwrap() {
        let k = (c.partition.method.clone(), c.partition.kind.name().to_string(), print_expr(&erase(&c.partition.target.source)));
        *present.entry(k).or_insert(true) &= c.verdict.status == Status::Valid;
    }
    present.into_iter().filter(|(k, ok)| before.contains(k) && !ok).map(|(k, _)| k).collect()
}
