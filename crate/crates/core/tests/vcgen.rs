mod common;

use coevolve::intent::check_all;
use coevolve::lang::{parse_program, print_expr, Expr};
use coevolve::solver::{BoundedDomain, Solver, Status};
use coevolve::vcgen::{erase, passify, trace_of, vc_gen, VcError, VcKind};
use common::{monolithic_vc, program, random_method};
use proptest::prelude::*;

fn bounded() -> Solver {
    Solver::bounded(BoundedDomain::default())
}

fn failing(src: &str) -> Vec<(VcKind, u32)> {
    let p = parse_program(src).unwrap();
    let solver = bounded();
    let mut out: Vec<(VcKind, u32)> = vc_gen(&p)
        .unwrap()
        .iter()
        .filter(|part| solver.check_validity(&part.vc, &part.types).unwrap().status != Status::Valid)
        .map(|part| (part.kind, trace_of(&p, part).target_line))
        .collect();
    out.sort();
    out
}

#[test]
fn two_assignments_passify_to_one_block() {
    let p = parse_program("method M() { var x := 1; var y := 2; assert x + y >= 2; }").unwrap();
    let g = passify(&p, &p.methods[0]).unwrap();
    assert_eq!(g.dump(), "b0:\n  assume x@1 == 1;\n  assume y@1 == 2;\n  assert x@1 + y@1 >= 2;\n  goto;\n");
}

#[test]
fn two_assignments_vc_is_nested_implication() {
    let p = parse_program("method M() { var x := 1; var y := 2; assert x + y >= 2; }").unwrap();
    let parts = vc_gen(&p).unwrap();
    assert_eq!(parts.len(), 1);
    assert_eq!(print_expr(&parts[0].vc), "x@1 == 1 ==> y@1 == 2 ==> x@1 + y@1 >= 2");
    let expected = Expr::imp(
        Expr::eq(Expr::var("x@1"), Expr::Int(1)),
        Expr::imp(Expr::eq(Expr::var("y@1"), Expr::Int(2)), parts[0].target.formula.clone()),
    );
    assert_eq!(parts[0].vc, expected);
    assert_eq!(bounded().check_validity(&parts[0].vc, &parts[0].types).unwrap().status, Status::Valid);
}

#[test]
fn empty_body_is_one_skip_block() {
    let p = parse_program("method M() { }").unwrap();
    let g = passify(&p, &p.methods[0]).unwrap();
    assert_eq!(g.dump(), "b0:\n  skip;\n  goto;\n");
    assert!(vc_gen(&p).unwrap().is_empty());
}

#[test]
fn find_first_odd_has_three_paths() {
    // Break, back edge and loop exit.
    let p = program("FindFirstOdd.mvl");
    let g = passify(&p, &p.methods[0]).unwrap();
    let mut paths = 0;
    let mut stack = vec![0usize];
    while let Some(b) = stack.pop() {
        let succs = &g.blocks[b].succs;
        if succs.is_empty() {
            paths += 1;
        }
        stack.extend(succs.iter().copied());
    }
    assert_eq!(paths, 3);
}

#[test]
fn conjunction_is_split() {
    let p = parse_program("method M(a: bool, b: bool) { assert a && b; }").unwrap();
    let parts = vc_gen(&p).unwrap();
    assert_eq!(parts.len(), 2);
    assert_eq!(parts[0].path, parts[1].path);
}

#[test]
fn conjunction_count_scales_with_paths() {
    let src = "method M(c: bool, d: bool, x: int) returns (r: int) {
      if c { r := 1; } else { r := 2; }
      if d { r := r + x; }
      assert r > 0 && r < 9 && r != 3;
    }";
    let p = parse_program(src).unwrap();
    let asserts = vc_gen(&p).unwrap().iter().filter(|q| q.kind == VcKind::IntermediateAssert).count();
    assert_eq!(asserts, 3 * 4);
}

#[test]
fn find_first_odd_failures_match_the_listing() {
    assert_eq!(
        failing(&common::corpus("FindFirstOdd.mvl")),
        vec![(VcKind::Postcondition, 4), (VcKind::SignatureWf, 4), (VcKind::SignatureWf, 5)]
    );
}

#[test]
fn signature_wf_for_odd_index() {
    let p = program("FindFirstOdd.mvl");
    let parts = vc_gen(&p).unwrap();
    let wf = parts.iter().find(|q| q.kind == VcKind::SignatureWf && trace_of(&p, q).target_line == 4).unwrap();
    assert_eq!(print_expr(&erase(&wf.target.source)), "0 <= odd < arr.Length");
    let v = bounded().check_validity(&wf.vc, &wf.types).unwrap();
    assert_eq!(v.status, Status::Invalid);
}

#[test]
fn exit_path_trace_ends_at_the_ensures() {
    let p = program("FindFirstOdd.mvl");
    let solver = bounded();
    let post = check_all(&p, &solver)
        .unwrap()
        .into_iter()
        .find(|c| c.partition.kind == VcKind::Postcondition && !c.conforms())
        .unwrap();
    let t = trace_of(&p, &post.partition);
    assert_eq!(t.target_line, 4);
    assert_eq!(*t.lines.last().unwrap(), 4);
    assert!(t.depth() > 1);
}

#[test]
fn single_assert_trace_has_length_one() {
    let p = parse_program("method M() { assert false; }").unwrap();
    let parts = vc_gen(&p).unwrap();
    assert_eq!(trace_of(&p, &parts[0]).depth(), 1);
}

#[test]
fn wf_trace_ends_at_the_clause() {
    let p = program("FindFirstOdd.mvl");
    let parts = vc_gen(&p).unwrap();
    let wf = parts.iter().find(|q| q.kind == VcKind::SignatureWf).unwrap();
    let t = trace_of(&p, wf);
    assert_eq!(t.target, wf.target.origin);
    assert_eq!(t.target_line, 4);
}

#[test]
fn body_access_is_checked() {
    assert_eq!(
        failing("method F(a: array<int>) returns (x: int) requires a != null { x := a[0]; }"),
        vec![(VcKind::WfCheck, 1)]
    );
}

fn counter(init: i64) -> String {
    format!("method C(n: int) returns (c: int)\n  requires n >= 0\n{{\n  c := {init};\n  var i := 0;\n  while i < n\n    invariant c == i\n    invariant i <= n + 5\n  {{\n    i := i + 1;\n    c := c + 2;\n  }}\n}}\n")
}

#[test]
fn invariant_entry_failure() {
    // Earlier asserts are assumed, so the maintain check is vacuous here.
    assert_eq!(failing(&counter(1)), vec![(VcKind::InvariantEntry, 7)]);
}

#[test]
fn invariant_maintain_failure() {
    assert_eq!(failing(&counter(0)), vec![(VcKind::InvariantMaintain, 7)]);
}

#[test]
fn too_many_paths_are_rejected() {
    let ifs: String = (0..9).map(|k| format!("if x > {k} {{ r := r + 1; }}\n")).collect();
    let p = parse_program(&format!("method M(x: int) returns (r: int) {{\n{ifs}}}")).unwrap();
    assert!(matches!(vc_gen(&p), Err(VcError::PathExplosion { limit: 256, .. })));
}

#[test]
fn vc_gen_is_deterministic() {
    let p = program("FindFirstOdd.mvl");
    assert_eq!(vc_gen(&p).unwrap(), vc_gen(&p).unwrap());
}

fn agree(seed: u64) -> Result<(), TestCaseError> {
    let src = random_method(seed);
    let p = parse_program(&src).unwrap();
    let solver = bounded();
    let partitions_ok = check_all(&p, &solver).unwrap().iter().all(|c| c.verdict.status == Status::Valid);
    let m = &p.methods[0];
    let whole = solver.check_validity(&monolithic_vc(m), &common::method_types(m)).unwrap();
    prop_assert_eq!(partitions_ok, whole.status == Status::Valid, "{}", src);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn partitions_agree_with_monolithic_wp(seed in any::<u64>()) {
        agree(seed)?;
    }

    #[test]
    fn conjunct_splitting_multiplies(n in 1usize..5, branches in 0usize..3) {
        let conj: Vec<String> = (0..n).map(|k| format!("x != {k}")).collect();
        let ifs: String = (0..branches).map(|k| format!("if x > {k} {{ x := x - 1; }}\n")).collect();
        let p = parse_program(&format!("method M(y: int) {{\nvar x := y;\n{ifs}assert {};\n}}", conj.join(" && "))).unwrap();
        let count = vc_gen(&p).unwrap().len();
        prop_assert_eq!(count, n << branches);
    }
}

#[test]
fn z3_agrees_on_find_first_odd() {
    use coevolve::solver::{Backend, SmtConfig, SolverError};
    let p = program("FindFirstOdd.mvl");
    let smt = Solver::new(Backend::Smt(SmtConfig::default()));
    let b = bounded();
    for part in vc_gen(&p).unwrap() {
        let v = match smt.check_validity(&part.vc, &part.types) {
            Err(SolverError::BackendUnavailable(_)) => return,
            other => other.unwrap(),
        };
        assert_eq!(v.status, b.check_validity(&part.vc, &part.types).unwrap().status, "partition {}", part.id);
    }
}
