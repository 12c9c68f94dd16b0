use std::collections::BTreeMap;

use horncfa::cegar::{CegarConfig, Domain, Refinement};
use horncfa::chc::parse_script;
use horncfa::pipeline::{solve_with, Answer, SolveOptions, Status};
use horncfa::proof::{validate_model, validate_refutation, Model, PredDef, Refutation, Validation};
use horncfa::smt::{SolverConfig, SolverSession};
use horncfa::term::{Term, Value, Var, TRUE};
use horncfa::transform::{forward_transform, Direction};

const EXAMPLE1: &str = include_str!("../../../corpus/example1.smt2");
const EXAMPLE7: &str = include_str!("../../../corpus/example7.smt2");

fn session() -> SolverSession {
    SolverSession::new(SolverConfig::from_env())
}

fn options(direction: Direction) -> SolveOptions {
    SolveOptions {
        direction,
        cegar: CegarConfig { domain: Domain::PredCart, refinement: Refinement::Wp, ..CegarConfig::default() },
        ..SolveOptions::default()
    }
}

/// `A(n) = n < 100`, `B(n, x) = n <= 100 /\ x > 0` and
/// `C(y, x) = y > 0 /\ y + x <= 100`, optionally with `x > 0` in `C`.
fn hand_model(c_positive_divisor: bool) -> Model {
    let sys = parse_script(EXAMPLE1).unwrap();
    let tr = forward_transform(&sys);
    let v = |p: usize, j: usize| tr.pred_vars[p][j].term();
    let bodies = [
        Term::lt(v(0, 0), Term::Int(100)),
        Term::and([Term::le(v(1, 0), Term::Int(100)), Term::gt(v(1, 1), Term::Int(0))]),
        Term::and([
            Term::gt(v(2, 0), Term::Int(0)),
            Term::le(Term::add(vec![v(2, 0), v(2, 1)]), Term::Int(100)),
            if c_positive_divisor { Term::gt(v(2, 1), Term::Int(0)) } else { TRUE },
        ]),
    ];
    Model {
        defs: sys
            .predicates
            .iter()
            .zip(bodies)
            .map(|(p, body)| PredDef { name: p.name.clone(), params: tr.pred_vars[p.index].clone(), body })
            .collect(),
    }
}

#[test]
fn example1_forward_model_defines_a_as_below_100() {
    let sys = parse_script(EXAMPLE1).unwrap();
    let mut s = session();
    let out = solve_with(&sys, &options(Direction::Forward), &mut s);
    assert_eq!(out.status(), Status::Sat, "{:?}", out.reason());
    let Answer::Sat(model) = &out.answer else { unreachable!() };
    let a = &model.defs[0];
    let n = Var::int("n");
    let expected = Term::lt(n.term(), Term::Int(100));
    let got = a.instantiate(&[n.term()]);
    assert!(s.check_valid(std::slice::from_ref(&n), &Term::implies(got.clone(), expected.clone())).unwrap());
    assert!(s.check_valid(&[n], &Term::implies(expected, got)).unwrap());
    assert!(model.to_smtlib().starts_with("(define-fun A ((a_1 Int)) Bool"));
}

#[test]
fn example1_backward_model_validates() {
    let sys = parse_script(EXAMPLE1).unwrap();
    let out = solve_with(&sys, &options(Direction::Backward), &mut session());
    assert_eq!(out.status(), Status::Sat, "{:?}", out.reason());
}

#[test]
fn example7_refutations_in_both_directions() {
    let sys = parse_script(EXAMPLE7).unwrap();
    for dir in [Direction::Forward, Direction::Backward] {
        let out = solve_with(&sys, &options(dir), &mut session());
        assert_eq!(out.status(), Status::Unsat, "{dir}: {:?}", out.reason());
        let Answer::Unsat(r) = &out.answer else { unreachable!() };
        assert_eq!(r.len(), 2);
        assert_eq!(r.steps[0].clause, 0);
        assert_eq!(r.steps[0].substitution["n"], Value::Int(100));
        assert_eq!(r.steps[1].clause, 4);
        assert!(r.display(&sys).starts_with("1. clause 0 (fact): A(100) with n = 100\n"));
    }
}

#[test]
fn hand_written_model_checks() {
    let sys = parse_script(EXAMPLE1).unwrap();
    let tr = forward_transform(&sys);
    let mut s = session();
    assert_eq!(validate_model(&sys, &hand_model(true), &mut s), Validation::Valid);
    // without x > 0 a negative divisor breaks clause 3: y = 101, x = -1 gives n = 101
    let Validation::Invalid(m) = validate_model(&sys, &hand_model(false), &mut s) else {
        panic!("C must bound the divisor")
    };
    assert!(m.starts_with("clause 3 "), "{m}");
    assert!(matches!(validate_model(&sys, &Model::constant(&tr, true), &mut s), Validation::Invalid(_)));
    assert!(matches!(validate_model(&sys, &Model::constant(&tr, false), &mut s), Validation::Invalid(_)));
}

fn example7_refutation() -> (horncfa::chc::ChcSystem, Refutation) {
    let sys = parse_script(EXAMPLE7).unwrap();
    let n = |x: i128| BTreeMap::from([("n".to_string(), Value::Int(x))]);
    let r = Refutation {
        steps: vec![Refutation::step(&sys.clauses[0], n(100)), Refutation::step(&sys.clauses[4], n(100))],
    };
    (sys, r)
}

#[test]
fn refutation_checks() {
    let (sys, r) = example7_refutation();
    assert_eq!(validate_refutation(&sys, &r), Validation::Valid);

    let mut wrong_value = r.clone();
    wrong_value.steps[0] = Refutation::step(&sys.clauses[0], BTreeMap::from([("n".to_string(), Value::Int(101))]));
    assert!(!validate_refutation(&sys, &wrong_value).is_valid());

    let mut reordered = r.clone();
    reordered.steps.reverse();
    assert!(!validate_refutation(&sys, &reordered).is_valid());

    let mut broken_chain = r;
    broken_chain.steps[1] = Refutation::step(&sys.clauses[4], BTreeMap::from([("n".to_string(), Value::Int(150))]));
    assert!(!validate_refutation(&sys, &broken_chain).is_valid());
}

#[test]
fn degenerate_systems() {
    let no_query = "(set-logic HORN)
(declare-fun P (Int) Bool)
(assert (forall ((x Int)) (=> (= x 0) (P x))))
(assert (forall ((x Int) (y Int)) (=> (and (P x) (= y (+ x 1))) (P y))))
(check-sat)";
    let no_fact = "(set-logic HORN)
(declare-fun P (Int) Bool)
(declare-fun Q (Int) Bool)
(assert (forall ((x Int) (y Int)) (=> (and (P x) (= y (+ x 1))) (Q y))))
(assert (forall ((x Int)) (=> (and (Q x) (> x 5)) false)))
(check-sat)";
    for (text, value) in [(no_query, true), (no_fact, false)] {
        let sys = parse_script(text).unwrap();
        let out = solve_with(&sys, &options(Direction::Forward), &mut session());
        assert_eq!(out.status(), Status::Sat);
        let Answer::Sat(m) = &out.answer else { unreachable!() };
        assert!(m.defs.iter().all(|d| d.body == Term::Bool(value)), "{}", m.to_smtlib());
    }
}

#[test]
fn degenerate_query_gives_one_step() {
    let sys = parse_script("(set-logic HORN)(assert (forall ((x Int)) (=> (> x 3) false)))(check-sat)").unwrap();
    for dir in [Direction::Forward, Direction::Backward] {
        let out = solve_with(&sys, &options(dir), &mut session());
        assert_eq!(out.status(), Status::Unsat);
        let Answer::Unsat(r) = &out.answer else { unreachable!() };
        assert_eq!(r.len(), 1);
    }
}

#[test]
fn cycle_refutation_has_five_steps() {
    // the A -> B -> C -> A cycle is needed once before the query fires
    let text = EXAMPLE1
        .replace("(and (> n 0) (< n 100)) (A n)", "(= n 50) (A n)")
        .replace("(= n (+ y (mod y x)))", "(= n (+ y 200))")
        .replace("(>= n 100)", "(>= n 200)");
    let sys = parse_script(&text).unwrap();
    let out = solve_with(&sys, &options(Direction::Forward), &mut session());
    assert_eq!(out.status(), Status::Unsat, "{:?}", out.reason());
    let Answer::Unsat(r) = &out.answer else { unreachable!() };
    assert_eq!(r.len(), 5);
    let kinds: Vec<String> = r.steps.iter().map(|s| sys.clauses[s.clause].kind().to_string()).collect();
    assert_eq!(kinds, ["fact", "induction", "induction", "induction", "query"]);
}

#[test]
fn timeout_yields_unknown() {
    let sys = parse_script(EXAMPLE1).unwrap();
    let opts = SolveOptions { timeout: Some(std::time::Duration::from_millis(1)), ..options(Direction::Forward) };
    let out = solve_with(&sys, &opts, &mut session());
    assert_eq!(out.status(), Status::Unknown);
}
