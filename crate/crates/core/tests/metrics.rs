mod common;

use coevolve::lang::{parse_program, parse_test, print_program, Program, Test, Value};
use coevolve::metrics::*;
use coevolve::solver::{evaluate_total, Assignment, BoundedDomain, Solver};
use common::{corpus, program};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solver() -> Solver {
    Solver::bounded(BoundedDomain::default())
}

fn test(name: &str) -> Test {
    parse_test(&corpus(&format!("tests/{name}.mvl"))).unwrap()
}

fn spec(ensures: &[&str]) -> Program {
    let clauses: String = ensures.iter().map(|e| format!("  ensures {e}\n")).collect();
    parse_program(&format!("method FindFirstOdd(arr: array<int>)\n    returns (odd: int)\n  requires arr != null\n{clauses}{{ }}\n"))
        .unwrap()
}

const ALL_EVEN: &str = "(forall i :: 0 <= i < arr.Length ==> arr[i] % 2 == 0) ==> odd == -1";

#[test]
fn true_kills_nothing() {
    let r = completeness(&spec(&["true"]), &[test("AllEven"), test("AllEvenLength")], 20, 0, &solver()).unwrap();
    assert_eq!(r.total_mutations, 40);
    assert_eq!(r.killed, 0);
    assert_eq!(r.score, 0.0);
}

/// Mutant values drawn for AllEven with seed 0.
const ALL_EVEN_MUTANTS: [i64; 20] = [-2, 3, 0, 1000, 2, 1, 999, 1001, 4, -3, -4, 998, -1000, -999, -1001, -998, 6, 5, -5, 997];

fn mutant_value(oracle: &str) -> i64 {
    oracle.strip_prefix("s == ").unwrap().parse().unwrap()
}

#[test]
fn exact_spec_kills_every_mutant() {
    let p = spec(&[ALL_EVEN]);
    let r = completeness(&p, &[test("AllEven")], DEFAULT_MUTATIONS, 0, &solver()).unwrap();
    assert_eq!(r.total_mutations, 20);
    let values: Vec<i64> = r.per_mutation.iter().map(|m| mutant_value(&m.oracle)).collect();
    assert_eq!(values, ALL_EVEN_MUTANTS);
    // Oracle: the ensures evaluated directly on [2,2,4] rejects each value.
    for v in values {
        let env: Assignment =
            [("arr".to_string(), Value::Array(vec![2, 2, 4])), ("odd".to_string(), Value::Int(v))].into_iter().collect();
        assert_eq!(evaluate_total(&p.methods[0].ensures[0].formula, &env), Ok(false));
    }
    assert_eq!(r.killed, 20);
    assert_eq!(r.score, 1.0);
}

#[test]
fn fig1_spec_scores_the_corpus() {
    let tests = [test("AllEven"), test("AllEvenLength"), test("OddInArray")];
    let r = completeness(&program("FindFirstOdd.mvl"), &tests, 20, 0, &solver()).unwrap();
    assert_eq!(r.skipped, vec!["OddInArray"]);
    assert_eq!(r.total_mutations, 40);
    assert_eq!(r.score, r.killed as f64 / 40.0);
}

#[test]
fn results_depend_only_on_the_seed() {
    let tests = [test("AllEven"), test("AllEvenLength")];
    let p = spec(&[ALL_EVEN]);
    let a = completeness(&p, &tests, 20, 5, &solver()).unwrap();
    let b = completeness(&p, &tests, 20, 5, &solver()).unwrap();
    assert_eq!(a, b);
    let c = completeness(&p, &tests, 20, 6, &solver()).unwrap();
    assert_ne!(a.per_mutation, c.per_mutation);
}

#[test]
fn error_cases() {
    let s = solver();
    let p = spec(&["true"]);
    assert!(matches!(completeness(&p, &[test("AllEven")], 0, 0, &s), Err(MetricsError::ZeroMutations)));
    assert!(matches!(completeness(&p, &[test("OddInArray")], 20, 0, &s), Err(MetricsError::NothingToMutate)));
    let other = parse_program("method G(a: array<int>) returns (r: int) { }").unwrap();
    assert!(matches!(completeness(&other, &[test("AllEven")], 20, 0, &s), Err(MetricsError::UnknownMethod { .. })));
}

const POOL: [&str; 10] = [
    "odd >= -3",
    "odd < arr.Length",
    "odd != 0",
    "odd <= 0",
    "odd % 2 == 1 || odd < 0",
    ALL_EVEN,
    "odd == -arr.Length || odd >= 0",
    "odd > -1000",
    "0 <= odd < arr.Length ==> arr[odd] % 2 != 0",
    "odd != 1000",
];

#[test]
fn strengthening_never_lowers_the_score() {
    let s = solver();
    let tests = [test("AllEven"), test("AllEvenLength")];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for pair in 0..50 {
        let mut pool = POOL.to_vec();
        pool.shuffle(&mut rng);
        let n = rng.gen_range(0..4);
        let base: Vec<&str> = if n == 0 { vec!["true"] } else { pool[..n].to_vec() };
        let mut stronger = base.clone();
        stronger.push(pool[n]);
        let a = completeness(&spec(&base), &tests, 20, pair, &s).unwrap();
        let b = completeness(&spec(&stronger), &tests, 20, pair, &s).unwrap();
        assert!(b.score >= a.score, "{base:?} vs {stronger:?}");
        for (x, y) in a.per_mutation.iter().zip(&b.per_mutation) {
            assert_eq!(x.oracle, y.oracle);
            assert!(!x.inconsistent || y.inconsistent);
        }
    }
}

#[test]
fn summary_prompt_embeds_the_annotated_program() {
    let p = program("FindFirstOdd.mvl");
    let s = build_summary_prompt(&p);
    assert!(s.prompt.starts_with("This is a program in Dafny. Lines with {:trusted} represent statements"));
    assert!(s.prompt.contains(&print_program(&p)));
    assert_eq!(s.prompt, SUMMARY_TEMPLATE.replace("{program}", &print_program(&p)));
    let empty = build_summary_prompt(&parse_program("").unwrap());
    assert_eq!(empty.prompt, SUMMARY_TEMPLATE.replace("{program}", ""));
    assert_eq!(empty.system, SUMMARY_SYSTEM);
}
