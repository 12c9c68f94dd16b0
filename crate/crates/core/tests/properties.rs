use std::collections::BTreeMap;

use proptest::prelude::*;

use horncfa::cfa::{exec_ops, CfaOp, Valuation};
use horncfa::chc::{classify, parse_script, ClauseKind};
use horncfa::oracle::{random_system, SizeParams};
use horncfa::smt::{SatResult, SolverConfig, SolverSession};
use horncfa::term::{Term, Value, Var};
use horncfa::transform::{transform, Direction};

fn system(seed: u64) -> horncfa::chc::ChcSystem {
    random_system(seed, SizeParams::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printing_and_reparsing_is_stable(seed in any::<u64>()) {
        let sys = system(seed);
        let text = sys.to_smtlib();
        let again = parse_script(&text).unwrap();
        prop_assert_eq!(&again, &sys);
        prop_assert_eq!(again.to_smtlib(), text);
    }

    #[test]
    fn clause_variables_cover_everything(seed in any::<u64>()) {
        let sys = system(seed);
        for c in &sys.clauses {
            let mut used = c.constraint.free_vars();
            used.extend(c.head.iter().chain(&c.body).flat_map(|a| a.args.iter().cloned()));
            for v in used {
                prop_assert!(c.vars.contains(&v), "clause {} misses {}", c.id, v);
            }
        }
    }

    #[test]
    fn classification_follows_atoms(seed in any::<u64>()) {
        for c in &system(seed).clauses {
            let expected = match (c.head.is_some(), c.body.is_some()) {
                (true, false) => ClauseKind::Fact,
                (true, true) => ClauseKind::Induction,
                (false, true) => ClauseKind::Query,
                (false, false) => ClauseKind::DegenerateQuery,
            };
            prop_assert_eq!(classify(c), expected);
        }
    }

    #[test]
    fn cfa_shape_matches_the_system(seed in any::<u64>(), backward in any::<bool>()) {
        let sys = system(seed);
        let dir = if backward { Direction::Backward } else { Direction::Forward };
        let tr = transform(&sys, dir);
        prop_assert_eq!(tr.cfa.locations.len(), sys.predicates.len() + 2);
        prop_assert_eq!(tr.cfa.edges.len(), sys.clauses.len());
        for (e, edge) in tr.cfa.edges.iter().enumerate() {
            prop_assert_eq!(tr.clause_edge[tr.edge_clause[e]], e);
            prop_assert_eq!(edge.clause_id, tr.edge_clause[e]);
        }
        prop_assert_eq!(transform(&sys, dir).cfa.to_dot(), tr.cfa.to_dot());
    }

    /// Along any walk from the initial location, the clause kinds read
    /// fact, induction*, query forwards and the reverse backwards.
    #[test]
    fn walks_follow_clause_kinds(seed in any::<u64>(), backward in any::<bool>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..12)) {
        let sys = system(seed);
        let dir = if backward { Direction::Backward } else { Direction::Forward };
        let tr = transform(&sys, dir);
        let (first, last) = match dir {
            Direction::Forward => (ClauseKind::Fact, ClauseKind::Query),
            Direction::Backward => (ClauseKind::Query, ClauseKind::Fact),
        };
        let mut loc = tr.cfa.initial;
        for (t, pick) in picks.iter().enumerate() {
            let out: Vec<_> = tr.cfa.outgoing(loc).collect();
            if out.is_empty() || loc == tr.cfa.error {
                break;
            }
            let edge = out[pick.index(out.len())];
            let kind = sys.clauses[edge.clause_id].kind();
            if kind == ClauseKind::DegenerateQuery {
                prop_assert!(t == 0 && edge.target == tr.cfa.error);
            } else if edge.target == tr.cfa.error {
                prop_assert_eq!(kind, last);
            } else if t == 0 {
                prop_assert_eq!(kind, first);
            } else {
                prop_assert_eq!(kind, ClauseKind::Induction);
            }
            loc = edge.target;
        }
    }

    #[test]
    fn execution_is_deterministic(seed in any::<u64>(), values in prop::collection::vec(-20i128..20, 40)) {
        let sys = system(seed);
        let tr = transform(&sys, Direction::Forward);
        let mut start = Valuation::unconstrained(&tr.cfa);
        for (v, x) in tr.cfa.variables.iter().zip(&values) {
            start.set(v.name.clone(), Value::Int(*x));
        }
        for edge in &tr.cfa.edges {
            let choices: BTreeMap<String, Value> = edge
                .ops
                .iter()
                .filter_map(|op| match op {
                    CfaOp::Havoc(v) => Some(v.name.clone()),
                    _ => None,
                })
                .zip(values.iter().rev())
                .map(|(n, x)| (n, Value::Int(*x)))
                .collect();
            let a = exec_ops(&start, &edge.ops, &choices);
            let b = exec_ops(&start, &edge.ops, &choices);
            prop_assert_eq!(&a, &b);
            let guards: Vec<CfaOp> = edge.ops.iter().filter(|o| matches!(o, CfaOp::Guard(_))).cloned().collect();
            if let Ok(Some(after)) = exec_ops(&start, &guards, &BTreeMap::new()) {
                prop_assert_eq!(after, start.clone());
            }
        }
    }
}

fn linear_atom() -> impl Strategy<Value = Term> {
    let var = prop::sample::select(vec!["x", "y", "z"]).prop_map(|n| Var::int(n).term());
    (var.clone(), -3i128..=3, var, -3i128..=3, -10i128..=10, 0..5u8).prop_map(|(a, ca, b, cb, k, op)| {
        let lhs = Term::add(vec![Term::mul_const(ca, a), Term::mul_const(cb, b)]);
        let rhs = Term::Int(k);
        match op {
            0 => Term::le(lhs, rhs),
            1 => Term::lt(lhs, rhs),
            2 => Term::ge(lhs, rhs),
            3 => Term::eq(lhs, rhs),
            _ => Term::not(Term::eq(lhs, rhs)),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Solver models satisfy the formula under our own evaluator, and
    /// unsatisfiable formulas stay unsatisfiable on a second query.
    #[test]
    fn solver_answers_are_checked_by_evaluation(atoms in prop::collection::vec(linear_atom(), 1..5)) {
        let vars = [Var::int("x"), Var::int("y"), Var::int("z")];
        let formula = Term::and(atoms);
        let mut s = SolverSession::new(SolverConfig::from_env());
        match s.check_sat(&vars, &formula) {
            SatResult::Sat(model) => {
                let env: BTreeMap<String, Value> =
                    vars.iter().map(|v| (v.name.clone(), model.get(&v.name).copied().unwrap_or(Value::Int(0)))).collect();
                prop_assert_eq!(formula.eval_map(&env), Ok(Value::Bool(true)));
            }
            SatResult::Unsat => prop_assert_eq!(s.check_sat(&vars, &formula), SatResult::Unsat),
            SatResult::Unknown(m) => prop_assert!(false, "solver gave up on a linear query: {}", m),
        }
    }
}
