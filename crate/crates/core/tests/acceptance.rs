//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use coevolve::coevolution::{co_evolve, conforms_prog_spec, Budget, Mode, Session};
use coevolve::intent::{check_all, extract_hs_intent, normalize};
use coevolve::lang::{parse_named, parse_program, print_expr, Expr, Program, StmtKind};
use coevolve::metrics::completeness;
use coevolve::solver::{evaluate_total, BoundedDomain, Solver, Status};
use coevolve::synthesis::{annotate, build_request, wire, Subprocess};
use coevolve::vcgen::{trace_of, vc_gen, VcKind};
use common::{broken_in, corpus, corpus_path, method_types, monolithic_vc, program, random_formula, random_method, seeded_corpus};
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_coevolve");
const MOCK: &str = env!("CARGO_BIN_EXE_coevolve-mock-synth");
const SEED: &str = "7";
const MARKER: &str = "// pr {:trusted}";

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn bounded() -> Solver {
    Solver::bounded(BoundedDomain::default())
}

fn path(name: &str) -> String {
    corpus_path(name).to_string_lossy().to_string()
}

/// Runs the CLI, returning its exit code, stdout and wall time.
fn cli(args: &[&str]) -> (Option<i32>, String, Duration) {
    let start = Instant::now();
    let o = Command::new(BIN).args(args).output().expect("run coevolve");
    (o.status.code(), String::from_utf8_lossy(&o.stdout).to_string(), start.elapsed())
}

fn formula(src: &str) -> Expr {
    let m = format!("method M(arr: array<int>) returns (odd: int)\n  ensures {src}\n{{ }}\n");
    parse_program(&m).unwrap().methods[0].ensures[0].formula.clone()
}

fn norm(e: &Expr) -> String {
    print_expr(&normalize(e).0)
}

// ---- results directories --------------------------------------------------

struct Runs {
    repair: Duration,
    align: Vec<(String, Duration)>,
}

/// Every command that writes a results directory, rooted at `root`.
fn produce(root: &Path) -> Result<Runs, String> {
    let out = |n: &str| root.join(n).to_string_lossy().to_string();
    let (code, _, repair) =
        cli(&["repair", &path("FindFirstOdd.mvl"), "--synth", "enumerative", "--seed", SEED, "--out", &out("repair")]);
    ensure!(code == Some(0), "repair exited with {code:?}");
    let mut align = Vec::new();
    for t in ["AllEven", "AllEvenLength"] {
        let dir = root.join(format!("tests-{t}"));
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        std::fs::copy(corpus_path(&format!("tests/{t}.mvl")), dir.join(format!("{t}.mvl"))).map_err(|e| e.to_string())?;
        let tests = dir.to_string_lossy().to_string();
        let (code, _, took) = cli(&["align", &path("FindFirstOdd.mvl"), "--tests", &tests, "--seed", SEED, "--out", &out(t)]);
        ensure!(code == Some(0), "align {t} exited with {code:?}");
        align.push((t.to_string(), took));
    }
    for name in seeded_corpus() {
        let stem = name.trim_start_matches("seeded/").trim_end_matches(".mvl").to_string();
        let (code, _, _) = cli(&["repair", &path(&name), "--seed", SEED, "--out", &out(&format!("seeded-{stem}"))]);
        ensure!(matches!(code, Some(0) | Some(3)), "repair {name} exited with {code:?}");
    }
    Ok(Runs { repair, align })
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn candidate(root: &Path, run: &str) -> Result<Program, String> {
    let f = root.join(run).join("candidate-001/FindFirstOdd.mvl");
    let text = std::fs::read_to_string(&f).map_err(|e| format!("{}: {e}", f.display()))?;
    parse_named(&text, "FindFirstOdd.mvl").map_err(|e| e.to_string())
}

// ---- criteria -------------------------------------------------------------

fn running_example() -> Outcome {
    let (code, out, took) = cli(&["--json", "verify", &path("FindFirstOdd.mvl")]);
    ensure!(code == Some(1), "exit {code:?}");
    let v: serde_json::Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let got: Vec<(String, u64)> = v["errors"]
        .as_array()
        .ok_or("no errors array")?
        .iter()
        .map(|e| (e["kind"].as_str().unwrap_or("").to_string(), e["related_line"].as_u64().unwrap_or(e["line"].as_u64().unwrap_or(0))))
        .collect();
    let want: Vec<(String, u64)> =
        vec![("signature_wf".into(), 4), ("signature_wf".into(), 5), ("postcondition".into(), 4)];
    ensure!(got == want, "traces {got:?}");
    let (_, text, _) = cli(&["verify", &path("FindFirstOdd.mvl")]);
    let panel = "line 4: Error 1: index out of range.\nline 5: Error 2: index out of range.\n\
                 line 6: Error 3: A postcondition might not hold on this path.\n\
                 line 4: This is the postcondition that might not hold.\n3 errors\n";
    ensure!(text == panel, "panel:\n{text}");
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(format!("3 traces in {took:.2?}"))
}

fn repair_replay(root: &Path, runs: &Runs) -> Outcome {
    let p = candidate(root, "repair")?;
    let input = program("FindFirstOdd.mvl");
    let want = [
        formula("0 <= odd < arr.Length ==> arr[odd] % 2 != 0"),
        formula("0 <= odd < arr.Length ==> (forall i :: 0 <= i < odd ==> arr[i] % 2 == 0)"),
    ];
    let got: Vec<String> = p.methods[0].ensures.iter().map(|c| norm(&c.formula)).collect();
    let want: Vec<String> = want.iter().map(norm).collect();
    ensure!(got == want, "ensures {got:?}");
    ensure!(p.methods[0].requires == input.methods[0].requires, "requires changed");
    ensure!(p.methods[0].body == input.methods[0].body, "body changed");
    ensure!(conforms_prog_spec(&p, &bounded()).map_err(|e| e.to_string())?.holds, "candidate does not verify");
    ensure!(runs.repair < Duration::from_secs(60), "took {:?}", runs.repair);
    Ok(format!("both ensures patches in {:.2?}", runs.repair))
}

fn assurance_replay(root: &Path, runs: &Runs) -> Outcome {
    let even = candidate(root, "AllEven")?;
    let implication = norm(&formula("(forall i :: 0 <= i< arr.Length ==> arr[i] % 2 == 0) ==> odd == -1"));
    ensure!(
        even.methods[0].ensures.iter().any(|c| norm(&c.formula) == implication),
        "AllEven: no implication ensures"
    );
    let length = candidate(root, "AllEvenLength")?;
    let target = norm(&formula("odd == -arr.Length"));
    let assigns = length.methods[0].body.as_deref().unwrap_or(&[]).iter().any(|s| match &s.kind {
        StmtKind::Assign { target: t, value } => t == "odd" && norm(&Expr::eq(Expr::var("odd"), value.clone())) == target,
        _ => false,
    });
    ensure!(assigns, "AllEvenLength: no `odd := -arr.Length`");
    for (t, took) in &runs.align {
        ensure!(*took < Duration::from_secs(120), "{t} took {took:?}");
    }
    let times: Vec<String> = runs.align.iter().map(|(t, d)| format!("{t} {d:.2?}")).collect();
    Ok(times.join(", "))
}

fn partition_soundness() -> Outcome {
    let s = bounded();
    let n = 200;
    for seed in 0..n {
        let p = parse_program(&random_method(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
        let parts = vc_gen(&p).map_err(|e| e.to_string())?;
        let mut split = true;
        for part in &parts {
            split &= s.check_validity(&part.vc, &part.types).map_err(|e| e.to_string())?.status == Status::Valid;
        }
        let m = &p.methods[0];
        let whole = s.check_validity(&monolithic_vc(m), &method_types(m)).map_err(|e| e.to_string())?.status == Status::Valid;
        ensure!(split == whole, "seed {seed}: partitions say {split}, monolithic says {whole}");
    }
    Ok(format!("{n}/{n} methods agree"))
}

fn hard_intent_preservation() -> Outcome {
    let s = bounded();
    let mut admitted = 0;
    for name in seeded_corpus() {
        let mut plugin = coevolve::synthesis::Enumerative;
        let budget = Budget { max_campaigns: 5, ..Budget::default() };
        let mut sess = Session::new(&s, &mut plugin, budget, Mode::All, 7);
        co_evolve(&mut sess, program(&name)).map_err(|e| e.to_string())?;
        for a in &sess.admissions {
            admitted += 1;
            let parent = parse_named(&a.parent, &name).map_err(|e| e.to_string())?;
            let child = parse_named(&a.child, &name).map_err(|e| e.to_string())?;
            let broken = broken_in(&parent, &child, &bounded());
            ensure!(broken.is_empty(), "{name} {}: broke {broken:?}", a.patch);
        }
    }
    ensure!(admitted > 0, "no patch was admitted");
    Ok(format!("0 violations over {admitted} admitted patches"))
}

fn solver_agreement() -> Outcome {
    let t = common::formula_types();
    let small = Solver::bounded(BoundedDomain { int_lo: -2, int_hi: 2, max_array_len: 2 });
    let large = bounded();
    let (mut invalid, mut checked_mono) = (0, 0);
    for seed in 0..500 {
        let src = format!("method M(x: int, y: int, b: bool, a: array<int>)\n  requires {}\n{{ }}\n", random_formula(seed));
        let f = parse_program(&src).map_err(|e| e.to_string())?.methods[0].requires[0].formula.clone();
        let v = large.check_validity(&f, &t).map_err(|e| e.to_string())?;
        ensure!(v.witness.is_some() == v.is_invalid(), "seed {seed}: witness presence");
        if let Some(w) = &v.witness {
            invalid += 1;
            ensure!(evaluate_total(&f, w) == Ok(false), "seed {seed}: witness does not falsify");
        }
        let sv = small.check_validity(&f, &t).map_err(|e| e.to_string())?;
        if sv.is_invalid() {
            checked_mono += 1;
            ensure!(v.is_invalid(), "seed {seed}: invalid became valid when the domain grew");
        }
    }
    Ok(format!("500 formulas, {invalid} witnesses replayed, {checked_mono} monotonicity cases"))
}

fn completeness_metric() -> Outcome {
    let s = bounded();
    let spec = |ensures: &[&str]| {
        let cl: String = ensures.iter().map(|e| format!("  ensures {e}\n")).collect();
        parse_program(&format!("method FindFirstOdd(arr: array<int>) returns (odd: int)\n  requires arr != null\n{cl}{{ }}\n"))
            .unwrap()
    };
    let test = |n: &str| coevolve::lang::parse_test(&corpus(&format!("tests/{n}.mvl"))).unwrap();
    let tests = [test("AllEven"), test("AllEvenLength")];
    let t = completeness(&spec(&["true"]), &tests, 20, 0, &s).map_err(|e| e.to_string())?;
    ensure!(t.score == 0.0, "true scores {}", t.score);
    let exact = "(forall i :: 0 <= i < arr.Length ==> arr[i] % 2 == 0) ==> odd == -1";
    let e = completeness(&spec(&[exact]), &tests[..1], 20, 0, &s).map_err(|e| e.to_string())?;
    ensure!(e.total_mutations == 20 && e.score == 1.0, "exact spec scores {} on {}", e.score, e.total_mutations);
    let pool = [
        "odd >= -3",
        "odd < arr.Length",
        "odd != 0",
        "odd <= 0",
        "odd % 2 == 1 || odd < 0",
        exact,
        "odd == -arr.Length || odd >= 0",
        "odd > -1000",
        "0 <= odd < arr.Length ==> arr[odd] % 2 != 0",
        "odd != 1000",
    ];
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for pair in 0..50u64 {
        let mut p = pool.to_vec();
        p.shuffle(&mut rng);
        let n = rng.gen_range(0..4);
        let base: Vec<&str> = if n == 0 { vec!["true"] } else { p[..n].to_vec() };
        let mut stronger = base.clone();
        stronger.push(p[n]);
        let a = completeness(&spec(&base), &tests, 20, pair, &s).map_err(|e| e.to_string())?;
        let b = completeness(&spec(&stronger), &tests, 20, pair, &s).map_err(|e| e.to_string())?;
        ensure!(b.score >= a.score, "pair {pair}: {} -> {}", a.score, b.score);
    }
    Ok("true = 0, exact AllEven = 1.0 on 20, 50/50 pairs monotone".into())
}

fn determinism(first: &Path) -> Outcome {
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    produce(second.path())?;
    let (a, b) = (tree(first), tree(second.path()));
    ensure!(a.keys().eq(b.keys()), "file sets differ");
    for (k, v) in &a {
        ensure!(b[k] == *v, "{} differs", k.display());
    }
    Ok(format!("{} files identical", a.len()))
}

fn protocol() -> Outcome {
    let p = program("FindFirstOdd.mvl");
    let s = bounded();
    let checked = check_all(&p, &s).map_err(|e| e.to_string())?;
    let report = extract_hs_intent(&p, &checked);
    let annotated = annotate(&p, &report);
    let failure = checked
        .iter()
        .find(|c| c.partition.kind == VcKind::Postcondition && !c.conforms() && trace_of(&p, &c.partition).target_line == 4)
        .ok_or("no postcondition failure")?;
    let req = build_request(&annotated, failure, &[], 2);
    let mut hunks = Vec::new();
    for attempt in 0..2 {
        let reply = Subprocess::new(MOCK, Duration::from_secs(30)).call(&req, attempt).map_err(|e| e.to_string())?;
        let parsed = wire::parse(&reply).map_err(|e| e.to_string())?;
        ensure!(!parsed.is_empty(), "attempt {attempt}: no modification block");
        let rendered = wire::render(&parsed);
        ensure!(reply.contains(&rendered), "attempt {attempt}: render(parse(reply)) is not in the reply");
        ensure!(wire::parse(&rendered).map_err(|e| e.to_string())? == parsed, "attempt {attempt}: round trip differs");
        for h in &parsed {
            ensure!(h.file == "FindFirstOdd.mvl", "hunk targets {}", h.file);
            ensure!(h.patched.lines().all(|l| l.trim_end().ends_with(MARKER)), "unmarked line in {:?}", h.patched);
        }
        hunks.extend(parsed);
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out").to_string_lossy().to_string();
    let (code, _, _) = cli(&["repair", &path("FindFirstOdd.mvl"), "--synth", MOCK, "--k", "2", "--out", &out]);
    ensure!(code == Some(0), "repair through the mock exited with {code:?}");
    Ok(format!("{} hunks round-tripped", hunks.len()))
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let runs = produce(root.path());
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut check = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match &r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => println!("FAIL  {name}: {d}"),
        }
        results.push((name, r));
    };
    check("running example verify", &running_example);
    match &runs {
        Ok(runs) => {
            check("repair replay", &|| repair_replay(root.path(), runs));
            check("assurance replay", &|| assurance_replay(root.path(), runs));
        }
        Err(e) => {
            check("repair replay", &|| Err(e.clone()));
            check("assurance replay", &|| Err(e.clone()));
        }
    }
    check("partition soundness", &partition_soundness);
    check("hard-intent preservation", &hard_intent_preservation);
    check("solver oracle agreement", &solver_agreement);
    check("completeness metric", &completeness_metric);
    check("determinism", &|| runs.as_ref().map_err(|e| e.clone()).and_then(|_| determinism(root.path())));
    check("protocol conformance", &protocol);
    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
