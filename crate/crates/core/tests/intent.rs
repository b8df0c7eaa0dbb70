mod common;

use coevolve::intent::*;
use coevolve::lang::{parse_program, print_expr, Program};
use coevolve::solver::{BoundedDomain, Solver};
use coevolve::vcgen::VcKind;
use common::{program, random_method};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn solver() -> Solver {
    Solver::bounded(BoundedDomain::default())
}

fn report(p: &Program) -> IntentReport {
    extract_hs_intent(p, &check_all(p, &solver()).unwrap())
}

fn keys(fs: &[IntentFact]) -> BTreeSet<(coevolve::lang::StmtId, String)> {
    fs.iter().map(|f| (f.origin.node(), print_expr(&f.formula))).collect()
}

#[test]
fn find_first_odd_classification() {
    let r = report(&program("FindFirstOdd.mvl"));
    let soft = |line: u32, text: &str| r.soft.iter().any(|f| f.line == line && print_expr(&f.source) == text);
    // The first-odd prefix property is agreed on by every path.
    assert!(r.hard.iter().any(|f| f.line == 5 && f.kind == Some(VcKind::Postcondition)));
    assert!(r.soft.iter().all(|f| f.line != 5));
    assert!(soft(4, "arr[odd] % 2 != 0"));
    assert!(soft(12, "!found ==> odd == -1"));
    assert!(soft(13, "found ==> 0 <= odd < i && arr[odd] % 2 != 0"));
}

#[test]
fn wf_facts_are_hard_and_guarded() {
    let p = program("FindFirstOdd.mvl");
    let r = report(&p);
    let wf = r.hard.iter().find(|f| f.kind == Some(VcKind::SignatureWf) && f.line == 4).unwrap();
    assert!(matches!(wf.origin, Origin::WfCheck(_)));
    assert_eq!(wf.render(), format!("presence({}) ==> 0 <= odd < arr.Length", wf.origin.node()));
    assert!(r.soft.iter().all(|f| !matches!(f.origin, Origin::WfCheck(_))));
    assert_eq!(wf.effective(&p), wf.formula);
}

#[test]
fn deleting_the_site_discharges_the_wf_fact() {
    let p = program("FindFirstOdd.mvl");
    let r = report(&p);
    let wf = r.hard.iter().find(|f| f.kind == Some(VcKind::SignatureWf) && f.line == 4).unwrap();
    let src = common::corpus("FindFirstOdd.mvl").replace("  ensures arr[odd] % 2 != 0\n", "");
    let q = parse_program(&src).unwrap();
    assert_eq!(wf.effective(&q), coevolve::lang::Expr::Bool(true));
}

#[test]
fn rewriting_the_site_keeps_the_obligation() {
    let src = common::corpus("FindFirstOdd.mvl").replace("ensures arr[odd] % 2 != 0", "ensures arr[odd] % 2 == 1");
    let r = report(&parse_program(&src).unwrap());
    let wf = r.hard.iter().find(|f| f.kind == Some(VcKind::SignatureWf) && f.line == 4).unwrap();
    assert_eq!(print_expr(&wf.source), "0 <= odd < arr.Length");
    assert!(r.partitions.iter().any(|s| s.kind == VcKind::SignatureWf && s.target_line == 4));
}

#[test]
fn verifying_method_has_no_soft_intent() {
    let r = report(&program("seeded/03_Abs.mvl").clone());
    assert!(!r.soft.is_empty());
    let fixed = common::corpus("seeded/03_Abs.mvl").replace("y := x - 1;", "y := x;");
    let r = report(&parse_program(&fixed).unwrap());
    assert!(r.soft.is_empty(), "{}", r.dump());
    assert!(!r.hard.is_empty());
}

#[test]
fn trusted_failing_assert_is_hard() {
    let plain = parse_program("method M(x: int) {\n  assert x > 0;\n}\n").unwrap();
    let r = report(&plain);
    assert!(r.soft.iter().any(|f| print_expr(&f.source) == "x > 0"));
    let trusted = parse_program("method M(x: int) {\n  assert {:trusted} x > 0;\n}\n").unwrap();
    let r = report(&trusted);
    assert!(r.soft.is_empty(), "{}", r.dump());
    assert!(r.hard.iter().any(|f| matches!(f.origin, Origin::Trusted(_)) && print_expr(&f.source) == "x > 0"));
}

#[test]
fn normalization_ignores_operand_order_and_bound_names() {
    let a = parse_program("method M(x: int, y: int, a: array<int>) requires x + y > 0 && (forall i :: 0 <= i < x ==> a[i] > y) { }").unwrap();
    let b = parse_program("method M(x: int, y: int, a: array<int>) requires (forall k :: 0 <= k < x ==> a[k] > y) && y + x > 0 { }").unwrap();
    let na = normalize(&a.methods[0].requires[0].formula).0;
    let nb = normalize(&b.methods[0].requires[0].formula).0;
    assert_eq!(na, nb);
}

#[test]
fn dump_is_stable() {
    let p = program("FindFirstOdd.mvl");
    assert_eq!(report(&p).dump(), report(&p).dump());
    assert!(report(&p).dump().starts_with("partitions: 18 (3 nonconforming, 0 unknown)\n"));
}

/// Adds `{:trusted}` to the `k`-th ensures or assert line.
fn trust_one(src: &str, k: usize) -> String {
    let sites: Vec<usize> = src
        .lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim_start();
            t.starts_with("ensures ") || t.starts_with("assert ") || t.starts_with("requires ")
        })
        .map(|(i, _)| i)
        .collect();
    let pick = sites[k % sites.len()];
    src.lines()
        .enumerate()
        .map(|(i, l)| {
            if i != pick {
                return l.to_string();
            }
            let (kw, rest) = l.trim_start().split_once(' ').unwrap();
            let indent = &l[..l.len() - l.trim_start().len()];
            format!("{indent}{kw} {{:trusted}} {rest}")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn facts_are_partitioned(seed in any::<u64>()) {
        let p = parse_program(&random_method(seed)).unwrap();
        let checked = check_all(&p, &solver()).unwrap();
        let r = extract_hs_intent(&p, &checked);
        let (h, s) = (keys(&r.hard), keys(&r.soft));
        prop_assert!(h.is_disjoint(&s));
        prop_assert_eq!(h.len(), r.hard.len());
        prop_assert_eq!(s.len(), r.soft.len());
        prop_assert_eq!(r.partitions.len(), checked.len());
        // Every failing target shows up as a fact.
        for c in checked.iter().filter(|c| !c.conforms()) {
            let t = c.partition.target.origin;
            prop_assert!(r.hard.iter().chain(&r.soft).any(|f| f.origin.node() == t));
        }
    }

    #[test]
    fn trust_never_shrinks_hard_intent(seed in any::<u64>(), k in 0usize..8) {
        let src = random_method(seed);
        let before = report(&parse_program(&src).unwrap());
        let after = report(&parse_program(&trust_one(&src, k)).unwrap());
        let (b, a) = (keys(&before.hard), keys(&after.hard));
        prop_assert!(b.is_subset(&a), "lost {:?}", b.difference(&a).collect::<Vec<_>>());
    }

    #[test]
    fn conforming_programs_are_fixed_points(seed in any::<u64>()) {
        let p = parse_program(&random_method(seed)).unwrap();
        let r = report(&p);
        if r.partitions.iter().all(|s| s.status == coevolve::solver::Status::Valid) {
            prop_assert!(r.soft.is_empty());
            prop_assert_eq!(report(&p).dump(), r.dump());
        }
    }
}
