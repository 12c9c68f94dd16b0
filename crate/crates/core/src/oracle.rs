//! Bounded derivation search and random system generation for
//! differential testing.
//!
//! `bounded_refute` looks for a derivation of `false` with at most `depth`
//! clause applications by asking the solver for one satisfying assignment
//! of a disjunctive unrolling per depth. It can confirm unsatisfiability but
//! never satisfiability.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chc::{parse_script, ChcSystem, Clause, ClauseKind};
use crate::proof::{validate_refutation, Refutation, Validation};
use crate::smt::{SatResult, SolverSession};
use crate::term::{Term, Value, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundedResult {
    Refuted(Refutation),
    NoneWithinBound,
    /// The solver could not decide some depth.
    Inconclusive(String),
}

fn step_var(v: &Var, step: usize, clause: usize) -> Var {
    Var::new(format!("{}@{step}@{clause}", v.name), v.sort)
}

fn selector(step: usize) -> Var {
    Var::int(format!("sel@{step}"))
}

/// The clause kinds allowed at position `t` of a `k`-step derivation.
fn allowed(kind: ClauseKind, t: usize, k: usize) -> bool {
    match (t == 0, t + 1 == k) {
        (true, true) => kind == ClauseKind::DegenerateQuery,
        (true, false) => kind == ClauseKind::Fact,
        (false, true) => kind == ClauseKind::Query,
        (false, false) => kind == ClauseKind::Induction,
    }
}

struct Unrolling {
    formula: Term,
    declared: Vec<Var>,
}

fn unroll(system: &ChcSystem, k: usize) -> Option<Unrolling> {
    let rename = |c: &Clause, t: usize| -> BTreeMap<String, Term> {
        c.vars.iter().map(|v| (v.name.clone(), step_var(v, t, c.id).term())).collect()
    };
    let mut declared = Vec::new();
    let mut parts = Vec::new();
    let mut options: Vec<Vec<&Clause>> = Vec::with_capacity(k);
    for t in 0..k {
        let here: Vec<&Clause> = system.clauses.iter().filter(|c| allowed(c.kind(), t, k)).collect();
        if here.is_empty() {
            return None;
        }
        let sel = selector(t);
        declared.push(sel.clone());
        let mut choice = Vec::new();
        for c in &here {
            declared.extend(c.vars.iter().map(|v| step_var(v, t, c.id)));
            let picked = Term::eq(sel.term(), Term::Int(c.id as i128));
            choice.push(picked.clone());
            parts.push(Term::implies(picked, c.constraint.substitute(&rename(c, t))));
        }
        parts.push(Term::or(choice));
        options.push(here);
    }
    for t in 0..k.saturating_sub(1) {
        for c in &options[t] {
            for d in &options[t + 1] {
                let (head, body) = (c.head.as_ref().unwrap(), d.body.as_ref().unwrap());
                let link = if head.pred != body.pred {
                    Term::Bool(false)
                } else {
                    let (mc, md) = (rename(c, t), rename(d, t + 1));
                    Term::and(
                        head.args
                            .iter()
                            .zip(&body.args)
                            .map(|(a, b)| Term::eq(mc[&a.name].clone(), md[&b.name].clone())),
                    )
                };
                let both = Term::and([
                    Term::eq(selector(t).term(), Term::Int(c.id as i128)),
                    Term::eq(selector(t + 1).term(), Term::Int(d.id as i128)),
                ]);
                parts.push(Term::implies(both, link));
            }
        }
    }
    Some(Unrolling { formula: Term::and(parts), declared })
}

fn decode(system: &ChcSystem, k: usize, model: &BTreeMap<String, Value>) -> Result<Refutation, String> {
    let mut steps = Vec::with_capacity(k);
    for t in 0..k {
        let id = model.get(&selector(t).name).and_then(|v| v.as_int()).ok_or("the model has no clause selector")?;
        let c = system
            .clauses
            .get(usize::try_from(id).map_err(|_| "negative clause selector")?)
            .ok_or("clause selector out of range")?;
        let mut subst = BTreeMap::new();
        for v in &c.vars {
            let x = model
                .get(&step_var(v, t, c.id).name)
                .copied()
                .ok_or_else(|| format!("the model has no value for {}", v.name))?;
            subst.insert(v.name.clone(), x);
        }
        steps.push(Refutation::step(c, subst));
    }
    Ok(Refutation { steps })
}

/// A derivation of `false` using at most `depth` clause applications, if
/// one exists.
pub fn bounded_refute(system: &ChcSystem, depth: usize, session: &mut SolverSession) -> BoundedResult {
    assert!(depth >= 1, "the depth bound is at least one");
    let mut inconclusive = None;
    for k in 1..=depth {
        let Some(u) = unroll(system, k) else { continue };
        match session.check_sat(&u.declared, &u.formula) {
            SatResult::Unsat => {}
            SatResult::Unknown(m) => {
                log::debug!("depth {k} undecided: {m}");
                inconclusive.get_or_insert(format!("depth {k}: {m}"));
            }
            SatResult::Sat(model) => {
                let r = match decode(system, k, &model) {
                    Ok(r) => r,
                    Err(m) => return BoundedResult::Inconclusive(m),
                };
                return match validate_refutation(system, &r) {
                    Validation::Valid => BoundedResult::Refuted(r),
                    other => BoundedResult::Inconclusive(format!("decoded derivation is {other}")),
                };
            }
        }
    }
    match inconclusive {
        Some(m) => BoundedResult::Inconclusive(m),
        None => BoundedResult::NoneWithinBound,
    }
}

/// Size limits for `random_system`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeParams {
    pub max_predicates: usize,
    pub max_arity: usize,
    pub max_clauses: usize,
    pub max_coeff: i64,
}

impl Default for SizeParams {
    fn default() -> Self {
        SizeParams { max_predicates: 4, max_arity: 3, max_clauses: 8, max_coeff: 3 }
    }
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    params: SizeParams,
}

impl Gen<'_> {
    fn coeff(&mut self) -> i64 {
        let c = self.params.max_coeff.max(1);
        loop {
            let x = self.rng.gen_range(-c..=c);
            if x != 0 {
                return x;
            }
        }
    }

    fn literal(x: i64) -> String {
        if x < 0 {
            format!("(- {})", -x)
        } else {
            x.to_string()
        }
    }

    /// A linear term over one or two of `vars`.
    fn linear(&mut self, vars: &[String]) -> String {
        let n = self.rng.gen_range(1..=vars.len().min(2));
        let mut terms = Vec::new();
        for _ in 0..n {
            let v = &vars[self.rng.gen_range(0..vars.len())];
            let c = self.coeff();
            terms.push(if c == 1 { v.clone() } else { format!("(* {} {v})", Self::literal(c)) });
        }
        if self.rng.gen_bool(0.5) {
            terms.push(Self::literal(self.rng.gen_range(-4..=4)));
        }
        if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            format!("(+ {})", terms.join(" "))
        }
    }

    fn atom(&mut self, vars: &[String]) -> String {
        if vars.is_empty() {
            return if self.rng.gen_bool(0.5) { "true".into() } else { "(> 1 0)".into() };
        }
        let lhs = self.linear(vars);
        if self.rng.gen_bool(0.1) {
            let m = self.rng.gen_range(2..=3);
            return format!("(= (mod {lhs} {m}) {})", self.rng.gen_range(0..m));
        }
        let op = ["<=", ">=", "=", "<", ">"][self.rng.gen_range(0..5)];
        let rhs = Self::literal(self.rng.gen_range(-6..=6));
        format!("({op} {lhs} {rhs})")
    }
}

impl Gen<'_> {
    /// A counter loop through one or two predicates: start near zero, step
    /// while below a bound, and query a condition on the counters. These
    /// need several unrollings to refute or an inductive invariant to prove.
    fn counter_loop(&mut self, out: &mut String) {
        let two = self.params.max_arity >= 2;
        let via = self.params.max_predicates >= 2 && self.rng.gen_bool(0.4);
        let sig = if two { "Int Int" } else { "Int" };
        let _ = writeln!(out, "(declare-fun P0 ({sig}) Bool)");
        if via {
            let _ = writeln!(out, "(declare-fun P1 ({sig}) Bool)");
        }
        let atom = |p: usize, x: &str, y: &str| if two { format!("(P{p} {x} {y})") } else { format!("(P{p} {x})") };
        let binders = |names: &[&str]| names.iter().map(|v| format!("({v} Int)")).collect::<Vec<_>>().join(" ");
        let start = self.rng.gen_range(0..=2);
        let step = self.rng.gen_range(1..=2);
        let drift = self.rng.gen_range(-1..=2);
        let bound = self.rng.gen_range(2..=8);
        let _ = writeln!(
            out,
            "(assert (forall ({}) (=> (and (= x {start}) (= y 0)) {})))",
            binders(&["x", "y"]),
            atom(0, "x", "y")
        );
        let next = (format!("(+ x {step})"), format!("(+ y {})", Self::literal(drift)));
        let guard = format!("(< x {bound})");
        if via {
            let _ = writeln!(
                out,
                "(assert (forall ({}) (=> (and {} {guard}) {})))",
                binders(&["x", "y"]),
                atom(0, "x", "y"),
                atom(1, "x", "y")
            );
            let _ = writeln!(
                out,
                "(assert (forall ({}) (=> (and {} (= u {}) (= v {})) {})))",
                binders(&["x", "y", "u", "v"]),
                atom(1, "x", "y"),
                next.0,
                next.1,
                atom(0, "u", "v")
            );
        } else {
            let _ = writeln!(
                out,
                "(assert (forall ({}) (=> (and {} {guard} (= u {}) (= v {})) {})))",
                binders(&["x", "y", "u", "v"]),
                atom(0, "x", "y"),
                next.0,
                next.1,
                atom(0, "u", "v")
            );
        }
        let target = self.rng.gen_range(bound - 1..=bound + 2);
        let query = match self.rng.gen_range(0..3) {
            0 => format!("(> x {target})"),
            1 => format!("(and (>= x {target}) (> y {}))", Self::literal(self.rng.gen_range(-2..=4))),
            _ => format!("(< y {})", Self::literal(self.rng.gen_range(-3..=0))),
        };
        let q = if self.rng.gen_bool(0.3) { format!("(= (mod x 2) {})", self.rng.gen_range(0..2)) } else { query };
        let _ =
            writeln!(out, "(assert (forall ({}) (=> (and {} {q}) false)))", binders(&["x", "y"]), atom(0, "x", "y"));
    }
}

/// Deterministic pseudo-random SMT-LIB script of a linear CHC system.
pub fn random_script(seed: u64, params: SizeParams) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("(set-logic HORN)\n");
    if params.max_clauses == 0 || params.max_predicates == 0 {
        out.push_str("(check-sat)\n");
        return out;
    }
    let mut g = Gen { rng: &mut rng, params };
    if g.rng.gen_bool(0.35) {
        g.counter_loop(&mut out);
        out.push_str("(check-sat)\n");
        return out;
    }
    let npred = g.rng.gen_range(1..=params.max_predicates);
    let arities: Vec<usize> = (0..npred).map(|_| g.rng.gen_range(1..=params.max_arity.max(1))).collect();
    for (i, a) in arities.iter().enumerate() {
        let sorts = vec!["Int"; *a].join(" ");
        let _ = writeln!(out, "(declare-fun P{i} ({sorts}) Bool)");
    }
    let nclauses = g.rng.gen_range(1..=params.max_clauses);
    for k in 0..nclauses {
        // one fact first and a query last keep most systems interesting
        let has_body = k > 0 && g.rng.gen_bool(0.8);
        let has_head = if k + 1 == nclauses && nclauses > 1 { g.rng.gen_bool(0.15) } else { g.rng.gen_bool(0.85) };
        let mut vars: Vec<String> = Vec::new();
        let mut body = Vec::new();
        if has_body {
            let p = g.rng.gen_range(0..npred);
            let args: Vec<String> = (0..arities[p]).map(|j| format!("y{j}")).collect();
            vars.extend(args.iter().cloned());
            body.push(format!("(P{p} {})", args.join(" ")));
        }
        let extra = g.rng.gen_range(0..=1);
        for j in 0..extra {
            vars.push(format!("z{j}"));
        }
        let head = if has_head {
            let p = g.rng.gen_range(0..npred);
            let mut args = Vec::new();
            for j in 0..arities[p] {
                let v = format!("x{j}");
                vars.push(v.clone());
                if g.rng.gen_bool(0.25) && vars.len() > 1 {
                    let others: Vec<String> = vars.iter().filter(|w| **w != v).cloned().collect();
                    args.push(g.linear(&others));
                } else {
                    args.push(v);
                }
            }
            format!("(P{p} {})", args.join(" "))
        } else {
            "false".into()
        };
        let natoms = g.rng.gen_range(0..=2);
        for _ in 0..natoms {
            let a = g.atom(&vars);
            body.push(a);
        }
        let body = match body.len() {
            0 => "true".to_string(),
            1 => body.pop().unwrap(),
            _ => format!("(and {})", body.join(" ")),
        };
        let binders: Vec<String> = vars.iter().map(|v| format!("({v} Int)")).collect();
        let text = if head == "false" && has_body && g.rng.gen_bool(0.3) {
            format!("(not (exists ({}) {body}))", binders.join(" "))
        } else if vars.is_empty() {
            format!("(=> {body} {head})")
        } else {
            format!("(forall ({}) (=> {body} {head}))", binders.join(" "))
        };
        let _ = writeln!(out, "(assert {text})");
    }
    out.push_str("(check-sat)\n");
    out
}

/// The system of `random_script(seed, params)`.
pub fn random_system(seed: u64, params: SizeParams) -> ChcSystem {
    parse_script(&random_script(seed, params)).expect("generated scripts are well-formed")
}
