//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails. The report goes straight to
//! stderr so it shows up without `--nocapture`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use horncfa::bench::{default_matrix, load_manifest, run_matrix, summarize, summary_table};
use horncfa::cegar::{CegarConfig, Domain, PredSplit, Refinement, SelfCheck};
use horncfa::cfa::CfaOp;
use horncfa::chc::{parse_script, ChcSystem};
use horncfa::fuzz::{run_fuzz, FuzzOptions};
use horncfa::pipeline::{solve_with, Answer, SolveOptions, Status};
use horncfa::proof::{validate_model, validate_refutation, Validation};
use horncfa::smt::{SolverConfig, SolverSession};
use horncfa::term::{Term, Value, Var};
use horncfa::transform::{forward_transform, Direction};

/// Budget for each worked example.
const EXAMPLE_LIMIT: Duration = Duration::from_secs(10);
/// Per-task timeout of the directional experiment and the property suite.
const TASK_TIMEOUT: Duration = Duration::from_secs(60);
const FUZZ_COUNT: usize = 200;
const FUZZ_LIMIT: Duration = Duration::from_secs(15 * 60);

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn read(name: &str) -> ChcSystem {
    parse_script(&fs::read_to_string(corpus_dir().join(name)).unwrap()).unwrap()
}

fn session() -> SolverSession {
    SolverSession::new(SolverConfig::from_env())
}

fn pred_cart_wp() -> CegarConfig {
    CegarConfig {
        domain: Domain::PredCart,
        refinement: Refinement::Wp,
        pred_split: PredSplit::Whole,
        ..CegarConfig::default()
    }
}

fn options(direction: Direction) -> SolveOptions {
    SolveOptions { direction, cegar: pred_cart_wp(), timeout: Some(TASK_TIMEOUT), ..SolveOptions::default() }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

type Check = Result<String, String>;
/// Writes past the test harness's output capture.
fn report(text: &str) {
    let _ = std::io::stderr().write_all(text.as_bytes());
}

type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn worked_example_sat() -> Check {
    let sys = read("example1.smt2");
    let mut s = session();
    let out = solve_with(&sys, &options(Direction::Forward), &mut s);
    ensure(out.elapsed < EXAMPLE_LIMIT, format!("took {:.2?}", out.elapsed))?;
    let Answer::Sat(model) = &out.answer else {
        return Err(format!("answer {}: {:?}", out.claimed(), out.reason()));
    };
    ensure(validate_model(&sys, model, &mut s) == Validation::Valid, "model does not validate")?;
    let n = Var::int("n");
    let a = model.defs[0].instantiate(&[n.term()]);
    let below = Term::lt(n.term(), Term::Int(100));
    let forth = s.check_valid(std::slice::from_ref(&n), &Term::implies(a.clone(), below.clone()));
    let back = s.check_valid(&[n], &Term::implies(below, a));
    ensure(forth == Ok(true) && back == Ok(true), format!("A is not n < 100: {}", model.defs[0].body))?;
    Ok(format!("sat in {:.2?}, A(a_1) = {}", out.elapsed, model.defs[0].body))
}

fn worked_example_unsat() -> Check {
    let sys = read("example7.smt2");
    let out = solve_with(&sys, &options(Direction::Forward), &mut session());
    ensure(out.elapsed < EXAMPLE_LIMIT, format!("took {:.2?}", out.elapsed))?;
    let Answer::Unsat(r) = &out.answer else {
        return Err(format!("answer {}: {:?}", out.claimed(), out.reason()));
    };
    ensure(r.len() == 2, format!("{} steps", r.len()))?;
    let fact = &r.steps[0];
    ensure(
        sys.clauses[fact.clause].head.is_some() && sys.clauses[fact.clause].body.is_none(),
        "first step is not a fact",
    )?;
    ensure(fact.substitution.get("n") == Some(&Value::Int(100)), format!("fact step binds {:?}", fact.substitution))?;
    ensure(validate_refutation(&sys, r) == Validation::Valid, "refutation does not validate")?;
    Ok(format!("unsat in {:.2?} with 2 steps, n = 100", out.elapsed))
}

fn golden_transform() -> Check {
    let tr = forward_transform(&read("example1.smt2"));
    let names: Vec<&str> = tr.cfa.locations.iter().map(|l| l.name.as_str()).collect();
    ensure(names == ["Init", "Err", "A", "B", "C"], format!("locations {names:?}"))?;
    let mut params: Vec<&str> =
        tr.cfa.variables.iter().filter(|v| !v.name.contains('!')).map(|v| v.name.as_str()).collect();
    params.sort_unstable();
    ensure(params == ["a_1", "b_1", "b_2", "c_1", "c_2"], format!("parameters {params:?}"))?;
    let expected = [
        (0, 2, "[(and (> n 0) (< n 100))]; a_1 := n"),
        (2, 3, "n := a_1; [(> x 0)]; b_1 := n; b_2 := x"),
        (3, 4, "n := b_1; x := b_2; [(and (= y (- n x)) (> y 0))]; c_1 := y; c_2 := x"),
        (4, 2, "y := c_1; x := c_2; [(= n (+ y (mod y x)))]; a_1 := n"),
        (2, 1, "n := a_1; [(>= n 100)]"),
    ];
    ensure(tr.cfa.edges.len() == 5, format!("{} edges", tr.cfa.edges.len()))?;
    for (edge, (src, dst, ops)) in tr.cfa.edges.iter().zip(expected) {
        let suffix = format!("!{}", edge.clause_id);
        let mut havocs = Vec::new();
        let mut rest = Vec::new();
        for op in &edge.ops {
            match op {
                CfaOp::Havoc(v) => havocs.push(v.name.clone()),
                other => rest.push(other.to_string().replace(&suffix, "")),
            }
        }
        let clause_vars: Vec<String> = tr.clause_vars[edge.clause_id].values().map(|v| v.name.clone()).collect();
        let mut sorted = havocs.clone();
        sorted.sort();
        let mut want = clause_vars.clone();
        want.sort();
        ensure(
            sorted == want && edge.ops[..havocs.len()].iter().all(|o| matches!(o, CfaOp::Havoc(_))),
            format!("edge {} havocs {havocs:?}", edge.id),
        )?;
        ensure(
            (edge.source, edge.target) == (src, dst),
            format!("edge {} runs {}->{}", edge.id, edge.source, edge.target),
        )?;
        ensure(rest.join("; ") == ops, format!("edge {} ops `{}`", edge.id, rest.join("; ")))?;
    }
    Ok("5 locations, parameters a_1 b_1 b_2 c_1 c_2, 5 edges with the expected ops".into())
}

fn degenerate_cases() -> Check {
    let no_query = "(set-logic HORN)
(declare-fun P (Int) Bool)
(declare-fun Q (Int Int) Bool)
(assert (forall ((x Int)) (=> (= x 0) (P x))))
(assert (forall ((x Int) (y Int)) (=> (and (P x) (= y (+ x 1))) (Q x y))))
(check-sat)";
    let no_fact = "(set-logic HORN)
(declare-fun P (Int) Bool)
(declare-fun Q (Int Int) Bool)
(assert (forall ((x Int) (y Int)) (=> (and (P x) (= y (+ x 1))) (Q x y))))
(assert (forall ((x Int) (y Int)) (=> (and (Q x y) (> y 5)) false)))
(check-sat)";
    let mut s = session();
    for (text, value) in [(no_query, true), (no_fact, false)] {
        let sys = parse_script(text).unwrap();
        let out = solve_with(&sys, &options(Direction::Forward), &mut s);
        let Answer::Sat(model) = &out.answer else {
            return Err(format!("answer {} for the {value} case", out.claimed()));
        };
        ensure(model.defs.iter().all(|d| d.body == Term::Bool(value)), format!("model {}", model.to_smtlib()))?;
        ensure(validate_model(&sys, model, &mut s) == Validation::Valid, "model does not validate")?;
    }
    Ok("no queries: all true; no facts: all false; both validate".into())
}

fn directional_experiment() -> Check {
    let tasks = load_manifest(&corpus_dir()).map_err(|e| e.to_string())?;
    ensure(tasks.len() >= 30, format!("only {} tasks", tasks.len()))?;
    let records = run_matrix(&tasks, &default_matrix(), TASK_TIMEOUT, &SolverConfig::from_env(), workers());
    let rows = summarize(&records);
    report(&summary_table(&rows, tasks.len()));
    for r in &records {
        if r.status != Status::Unknown && !r.validated {
            return Err(format!("{} {} counted without validation", r.task, r.config));
        }
    }
    let worse: Vec<&str> = rows.iter().filter(|r| r.forward < r.backward).map(|r| r.label.as_str()).collect();
    let best = rows.iter().max_by_key(|r| (r.forward.max(r.backward), r.forward)).ok_or("empty matrix")?;
    let ratio = if best.backward == 0 { f64::INFINITY } else { best.forward as f64 / best.backward as f64 };
    let report = format!("best {}: fw {} vs bw {} (ratio {ratio:.2})", best.label, best.forward, best.backward);
    ensure(worse.is_empty(), format!("backward ahead in {worse:?}; {report}"))?;
    ensure(best.forward > best.backward, format!("no strict forward gain; {report}"))?;
    Ok(report)
}

fn differential() -> Check {
    let start = Instant::now();
    let options = FuzzOptions { count: FUZZ_COUNT, workers: workers(), ..FuzzOptions::default() };
    let report = run_fuzz(&options, &SolverConfig::from_env());
    let elapsed = start.elapsed();
    let failures: Vec<String> =
        report.failures().map(|c| format!("seed {}: {}", c.seed, c.problems.join("; "))).collect();
    ensure(failures.is_empty(), failures.join(" | "))?;
    let unconfirmed: usize = report.cases.iter().map(|c| c.unconfirmed).sum();
    ensure(unconfirmed == 0, format!("{unconfirmed} answers could not be validated"))?;
    ensure(elapsed < FUZZ_LIMIT, format!("took {elapsed:.0?}"))?;
    Ok(format!("{} in {elapsed:.1?}", report.summary()))
}

fn property_suite() -> Check {
    let tasks = load_manifest(&corpus_dir()).map_err(|e| e.to_string())?;
    let mut total = SelfCheck::default();
    let mut s = session();
    for task in &tasks {
        let sys = parse_script(&fs::read_to_string(task).unwrap()).unwrap();
        for dir in [Direction::Forward, Direction::Backward] {
            let mut o = options(dir);
            o.cegar.self_check = true;
            let out = solve_with(&sys, &o, &mut s);
            let c = &out.cegar.self_check;
            if c.failures() > 0 {
                return Err(format!("{} {dir}: {c:?}", task.display()));
            }
            total.covering_checked += c.covering_checked;
            total.post_checked += c.post_checked;
            total.progress_checked += c.progress_checked;
            total.inconclusive += c.inconclusive;
        }
    }
    Ok(format!(
        "{} coverings, {} abstract posts, {} refinements re-verified ({} checks inconclusive)",
        total.covering_checked, total.post_checked, total.progress_checked, total.inconclusive
    ))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_horncfa");
    let tasks = ["example1.smt2", "example7.smt2", "two_phase_unsat.smt2", "pipeline_stages_sat.smt2"];
    for task in tasks {
        for d in ["fw", "bw"] {
            let mut runs = Vec::new();
            for k in 0..2 {
                let art = |what: &str| dir.path().join(format!("{task}.{d}.{k}.{what}"));
                let (model, refutation, arg, cfa) = (art("model"), art("refutation"), art("arg.dot"), art("cfa.dot"));
                let out = Command::new(bin)
                    .arg("solve")
                    .arg(corpus_dir().join(task))
                    .args(["--direction", d, "--timeout", "60", "--emit-model"])
                    .arg(&model)
                    .arg("--emit-refutation")
                    .arg(&refutation)
                    .arg("--arg-dot")
                    .arg(&arg)
                    .output()
                    .map_err(|e| e.to_string())?;
                Command::new(bin)
                    .arg("transform")
                    .arg(corpus_dir().join(task))
                    .args(["--direction", d, "--dot"])
                    .arg(&cfa)
                    .output()
                    .map_err(|e| e.to_string())?;
                let files: Vec<Option<Vec<u8>>> =
                    [model, refutation, arg, cfa].iter().map(|p| fs::read(p).ok()).collect();
                runs.push((out.stdout, files));
            }
            ensure(runs[0] == runs[1], format!("{task} {d}: runs differ"))?;
            let verdict = String::from_utf8_lossy(&runs[0].0).lines().next().unwrap_or_default().to_string();
            ensure(verdict != "unknown", format!("{task} {d}: unknown"))?;
        }
    }
    Ok(format!("{} tasks x 2 directions: identical verdicts and artifacts", tasks.len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("worked example, sat", worked_example_sat),
        ("worked example, unsat", worked_example_unsat),
        ("forward transformation golden test", golden_transform),
        ("degenerate systems", degenerate_cases),
        ("forward versus backward on the corpus", directional_experiment),
        ("differential fuzzing", differential),
        ("CEGAR property suite", property_suite),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(detail) => report(&format!("PASS {} {name}: {detail} [{:.1?}]\n", i + 1, start.elapsed())),
            Err(why) => {
                report(&format!("FAIL {} {name}: {why} [{:.1?}]\n", i + 1, start.elapsed()));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
