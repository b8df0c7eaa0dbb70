mod common;

use coevolve::coevolution::{conforms_prog_spec, conforms_prog_test};
use coevolve::intent::{check_all, extract_hs_intent, Checked, IntentFact, IntentReport};
use coevolve::lang::{parse_named, parse_program, parse_test, print_expr, print_program, Program};
use coevolve::solver::{BoundedDomain, Solver, Status};
use coevolve::synthesis::patch::apply_text;
use coevolve::synthesis::*;
use coevolve::vcgen::{trace_of, VcKind};
use common::{corpus, program, random_method, seeded_corpus};
use proptest::prelude::*;

const MARKER: &str = "// pr {:trusted}";

fn solver() -> Solver {
    Solver::bounded(BoundedDomain::default())
}

struct Setup {
    program: Program,
    annotated: Program,
    report: IntentReport,
    failing: Vec<Checked>,
}

fn setup(p: Program, s: &Solver) -> Setup {
    let v = conforms_prog_spec(&p, s).unwrap();
    let report = extract_hs_intent(&p, &v.checked);
    let annotated = annotate(&p, &report);
    Setup { program: p, annotated, report, failing: v.failing }
}

fn failure<'a>(st: &'a Setup, kind: VcKind, line: u32) -> &'a Checked {
    st.failing
        .iter()
        .find(|c| c.partition.kind == kind && trace_of(&st.program, &c.partition).target_line == line)
        .unwrap()
}

fn propose(st: &Setup, f: &Checked, top: &[IntentFact], k: usize, s: &Solver) -> Vec<Patch> {
    let req = build_request(&st.annotated, f, top, k);
    let ctx = RepairContext {
        program: &st.annotated,
        report: &st.report,
        failure: f,
        top,
        solver: s,
        domain: BoundedDomain::default(),
        campaign: 1,
    };
    Enumerative.propose(&req, &ctx).unwrap()
}

fn position(ordered: &[IntentFact], line: u32, text: &str) -> usize {
    ordered.iter().position(|f| f.line == line && print_expr(&f.source) == text).unwrap()
}

#[test]
fn ensures_conflicting_with_wf_ranks_above_invariant() {
    let s = solver();
    let st = setup(program("FindFirstOdd.mvl"), &s);
    let ordered = prioritize(&st.report.soft, &st.report.hard, &s, 0).unwrap();
    let s2 = position(&ordered, 4, "arr[odd] % 2 != 0");
    let s1 = position(&ordered, 12, "!found ==> odd == -1");
    assert!(s2 < s1);
    assert!(ordered[s2].priority.unwrap().h_conflicts > 0);
    assert_eq!(ordered[s1].priority.unwrap().h_conflicts, 0);
}

#[test]
fn stronger_fact_wins_a_tie() {
    let s = solver();
    let p = parse_program("method M(x: int) {\n  assert x > 0;\n  assert x > 2;\n}\n").unwrap();
    let r = extract_hs_intent(&p, &check_all(&p, &s).unwrap());
    let ordered = prioritize(&r.soft, &r.hard, &s, 0).unwrap();
    let texts: Vec<String> = ordered.iter().map(|f| print_expr(&f.source)).collect();
    assert_eq!(texts, vec!["x > 2", "x > 0"]);
    assert_eq!(top_class(&ordered).len(), 1);
}

#[test]
fn singleton_and_empty_soft_sets() {
    let s = solver();
    let p = parse_program("method M(x: int) {\n  assert x > 0;\n}\n").unwrap();
    let r = extract_hs_intent(&p, &check_all(&p, &s).unwrap());
    let ordered = prioritize(&r.soft, &r.hard, &s, 9).unwrap();
    assert_eq!(ordered.len(), 1);
    assert_eq!(print_expr(&ordered[0].source), "x > 0");
    assert!(prioritize(&[], &r.hard, &s, 9).unwrap().is_empty());
    assert!(top_class(&[]).is_empty());
}

#[test]
fn priority_is_deterministic() {
    let s = solver();
    let st = setup(program("FindFirstOdd.mvl"), &s);
    for seed in [0, 1, 42] {
        let a = prioritize(&st.report.soft, &st.report.hard, &s, seed).unwrap();
        let b = prioritize(&st.report.soft, &st.report.hard, &s, seed).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn request_names_the_failing_ensures() {
    let s = solver();
    let st = setup(program("FindFirstOdd.mvl"), &s);
    let f = failure(&st, VcKind::Postcondition, 4);
    let ordered = prioritize(&st.report.soft, &st.report.hard, &s, 0).unwrap();
    let top = top_class(&ordered);
    let req = build_request(&st.annotated, f, &top, 3);
    assert!(req.error.contains("(failing assert `arr[odd] % 2 != 0`)"), "{}", req.error);
    assert!(req.priority.contains("line 4: arr[odd] % 2 != 0"), "{}", req.priority);
    assert_eq!(req.filename, "FindFirstOdd.mvl");
    assert_eq!(req.k, 3);
    let json: serde_json::Value = serde_json::to_value(&req).unwrap();
    assert_eq!(json["k"], 3);
    assert_eq!(parse_named(&req.annotated_program, "FindFirstOdd.mvl").unwrap().methods, st.annotated.methods);
    assert!(req.annotated_program.contains("    if {:trusted} arr[i] % 2 != 0 {\n"));
}

#[test]
fn unknown_failure_with_all_hard_facts_has_empty_priority() {
    let s = solver();
    let st = setup(parse_program("method M(x: int) {\n  assert {:trusted} x > 0;\n}\n").unwrap(), &s);
    let mut f = st.failing[0].clone();
    f.verdict.status = Status::Unknown;
    f.verdict.witness = None;
    assert!(st.report.soft.is_empty());
    let ordered = prioritize(&st.report.soft, &st.report.hard, &s, 0).unwrap();
    let req = build_request(&st.annotated, &f, &top_class(&ordered), 1);
    assert_eq!(req.priority, "");
}

#[test]
fn guard_weakening_reproduces_the_first_patch() {
    let s = solver();
    let st = setup(program("FindFirstOdd.mvl"), &s);
    let f = failure(&st, VcKind::Postcondition, 4);
    let patches = propose(&st, f, &[], 5, &s);
    let lines: Vec<&str> = patches.iter().flat_map(|p| p.hunks.iter().map(|h| h.patched.as_str())).collect();
    assert!(lines.contains(&"  ensures 0 <= odd < arr.Length ==> arr[odd] % 2 != 0 // pr {:trusted}"), "{lines:?}");
}

#[test]
fn second_patch_guards_line_five() {
    let src = corpus("FindFirstOdd.mvl");
    let patch = Patch {
        hunks: vec![Hunk {
            file: "FindFirstOdd.mvl".into(),
            original: "  ensures forall i :: 0 <= i < odd ==> arr[i] % 2 == 0".into(),
            patched: "  ensures 0 <= odd < arr.Length ==> (forall i :: 0 <= i < odd ==> arr[i] % 2 == 0) // pr {:trusted}".into(),
        }],
        synthesizer_id: "test".into(),
        campaign: 1,
    };
    let (text, p) = apply_patch(&src, &patch, "FindFirstOdd.mvl").unwrap();
    assert_eq!(
        text.lines().nth(4).unwrap(),
        "  ensures 0 <= odd < arr.Length ==> (forall i :: 0 <= i < odd ==> arr[i] % 2 == 0) // pr {:trusted}"
    );
    assert!(p.methods[0].ensures[1].trust.is_patched());
    let empty = Patch { hunks: vec![], synthesizer_id: "test".into(), campaign: 1 };
    assert_eq!(apply_text(&src, &empty).unwrap(), src);
    let mut twice = patch.clone();
    twice.hunks.push(patch.hunks[0].clone());
    assert_eq!(apply_patch(&src, &twice, "FindFirstOdd.mvl").unwrap_err(), PatchError::OriginalNotFound { hunk: 2 });
}

#[test]
fn edits_to_trusted_lines_are_dropped() {
    struct Fixed(Vec<Patch>);
    impl Synthesizer for Fixed {
        fn id(&self) -> String {
            "fixed".into()
        }
        fn propose(&mut self, _: &SynthRequest, _: &RepairContext<'_>) -> Result<Vec<Patch>, SynthError> {
            Ok(self.0.clone())
        }
    }
    let s = solver();
    let st = setup(program("FindFirstOdd.mvl"), &s);
    let f = failure(&st, VcKind::Postcondition, 4);
    let req = build_request(&st.annotated, f, &[], 2);
    let hunk = |original: &str, patched: &str| Patch {
        hunks: vec![Hunk { file: "FindFirstOdd.mvl".into(), original: original.into(), patched: patched.into() }],
        synthesizer_id: "fixed".into(),
        campaign: 1,
    };
    let bad = hunk("    if {:trusted} arr[i] % 2 != 0 {", "    if true { // pr {:trusted}");
    let unmarked = hunk("  ensures arr[odd] % 2 != 0", "  ensures true");
    let foreign = Patch { hunks: vec![Hunk { file: "Other.mvl".into(), ..unmarked.hunks[0].clone() }], ..unmarked.clone() };
    let good = hunk("  ensures arr[odd] % 2 != 0", "  ensures 0 <= odd < arr.Length ==> arr[odd] % 2 != 0 // pr {:trusted}");
    let ctx = RepairContext {
        program: &st.annotated,
        report: &st.report,
        failure: f,
        top: &[],
        solver: &s,
        domain: BoundedDomain::default(),
        campaign: 1,
    };
    let mut plugin = Fixed(vec![bad, unmarked, foreign, good.clone()]);
    let out = synthesize(&req, &ctx, &mut plugin).unwrap();
    assert_eq!(out.accepted.len(), 1);
    assert_eq!(out.accepted[0].patch, good);
    assert_eq!(out.dropped.len(), 3);
    assert!(out.dropped[0].contains("modifies trusted line"), "{:?}", out.dropped);
    assert!(out.dropped[1].contains("lacks the patch marker"));
    assert!(out.dropped[2].contains("targets 'Other.mvl'"));
}

const WRONG_CONSTANT: &str = "method FindFirstOdd(arr: array<int>)
    returns (odd: int)
  requires arr != null
  ensures 0 <= odd < arr.Length ==> arr[odd] % 2 != 0
  ensures 0 <= odd < arr.Length ==> (forall i :: 0 <= i < odd ==> arr[i] % 2 == 0)
  ensures (forall i :: 0 <= i < arr.Length ==> arr[i] % 2 == 0) ==> odd == -1
{
  var found := false;
  odd := -2;

  for i := 0 to arr.Length
    invariant 0 <= i <= arr.Length
    invariant !found ==> odd == -1
    invariant found ==>
        0 <= odd < i && arr[odd] % 2 != 0
    invariant forall j :: 0 <= j < i
        ==> ((found ==> arr[j] % 2 == 0)
          && (!found ==> arr[j] % 2 == 0))
  {
    if arr[i] % 2 != 0 {
      odd := i;
      found := true;
      break;
    }
  }
}
";

#[test]
fn constant_scan_finds_minus_one() {
    let s = solver();
    // Oracle: only one constant in the domain makes the method verify.
    let fixes: Vec<i64> = (-4..=4)
        .filter(|c| {
            let src = WRONG_CONSTANT.replace("odd := -2;", &format!("odd := {c};"));
            conforms_prog_spec(&parse_program(&src).unwrap(), &s).unwrap().holds
        })
        .collect();
    assert_eq!(fixes, vec![-1]);

    let st = setup(parse_named(WRONG_CONSTANT, "FindFirstOdd.mvl").unwrap(), &s);
    let f = st.failing[0].clone();
    assert_eq!(f.partition.kind, VcKind::InvariantEntry);
    let patches = propose(&st, &f, &[], 10, &s);
    let fixed = patches
        .iter()
        .find(|p| p.hunks.iter().any(|h| h.patched == "  odd := -1; // pr {:trusted}"))
        .expect("constant replacement");
    let text = apply_text(&print_program(&st.annotated), fixed).unwrap();
    let q = parse_named(&text, "FindFirstOdd.mvl").unwrap();
    assert!(conforms_prog_spec(&q, &s).unwrap().holds);
    let t = parse_test(&corpus("tests/AllEven.mvl")).unwrap();
    assert!(conforms_prog_test(&q, &t, &s).unwrap().holds);
}

fn changed_lines_are_marked(before: &str, after: &str) -> bool {
    use similar::{capture_diff_slices, Algorithm, DiffOp};
    let a: Vec<&str> = before.lines().collect();
    let b: Vec<&str> = after.lines().collect();
    capture_diff_slices(Algorithm::Myers, &a, &b).iter().all(|op| match *op {
        DiffOp::Equal { .. } | DiffOp::Delete { .. } => true,
        DiffOp::Insert { new_index, new_len, .. } | DiffOp::Replace { new_index, new_len, .. } => {
            b[new_index..new_index + new_len].iter().all(|l| l.ends_with(MARKER))
        }
    })
}

#[test]
fn enumerative_patches_are_marked_across_the_corpus() {
    let s = solver();
    let mut seen = 0;
    for name in seeded_corpus() {
        let st = setup(program(&name), &s);
        let Some(f) = st.failing.first() else { continue };
        let req = build_request(&st.annotated, f, &[], 5);
        for p in propose(&st, f, &[], 5, &s) {
            let after = apply_text(&req.annotated_program, &p).unwrap();
            assert!(changed_lines_are_marked(&req.annotated_program, &after), "{name}\n{after}");
            seen += 1;
        }
    }
    assert!(seen > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn strictly_stronger_facts_rank_lower(seed in any::<u64>()) {
        let s = solver();
        let p = parse_program(&random_method(seed)).unwrap();
        let r = extract_hs_intent(&p, &check_all(&p, &s).unwrap());
        let ordered = prioritize(&r.soft, &r.hard, &s, seed).unwrap();
        for f in &ordered {
            for g in &ordered {
                let t: std::collections::BTreeMap<_, _> = f.types.iter().chain(&g.types).map(|(k, v)| (k.clone(), *v)).collect();
                let fg = s.implies(&f.formula, &g.formula, &t).unwrap() == Some(true);
                let gf = s.implies(&g.formula, &f.formula, &t).unwrap() == Some(true);
                let (rf, rg) = (f.priority.unwrap().strength_rank, g.priority.unwrap().strength_rank);
                if fg && !gf {
                    prop_assert!(rf < rg);
                }
                prop_assert!(!(rf < rg && rg < rf));
            }
        }
        prop_assert_eq!(&ordered, &prioritize(&r.soft, &r.hard, &s, seed).unwrap());
    }
}
