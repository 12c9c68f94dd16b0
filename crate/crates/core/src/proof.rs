//! CHC-level answers built from verification results: predicate
//! definitions from a closed ARG and clause derivations from a concrete
//! counterexample, each with an independent checker.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cegar::Arg;
use crate::cfa::ConcretePath;
use crate::chc::{ChcSystem, Clause, ClauseKind};
use crate::smt::{SolverSession, Unknown};
use crate::term::{fmt_symbol, Sort, Term, Value, Var, FALSE, TRUE};
use crate::transform::{Direction, TransformResult};

/// Definition of one predicate over its parameter variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredDef {
    pub name: String,
    pub params: Vec<Var>,
    pub body: Term,
}

impl PredDef {
    /// The definition applied to `args`.
    pub fn instantiate(&self, args: &[Term]) -> Term {
        let map: BTreeMap<String, Term> =
            self.params.iter().zip(args).map(|(p, a)| (p.name.clone(), a.clone())).collect();
        self.body.substitute(&map)
    }

    pub fn is_quantified(&self) -> bool {
        self.body.has_quantifier()
    }
}

/// Interpretation of every declared predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub defs: Vec<PredDef>,
}

impl Model {
    /// Every predicate defined as the constant `value`.
    pub fn constant(tr: &TransformResult, value: bool) -> Model {
        let defs = tr
            .system
            .predicates
            .iter()
            .map(|p| PredDef { name: p.name.clone(), params: tr.pred_vars[p.index].clone(), body: Term::Bool(value) })
            .collect();
        Model { defs }
    }

    pub fn is_quantified(&self) -> bool {
        self.defs.iter().any(PredDef::is_quantified)
    }

    /// SMT-LIB `define-fun` forms, one per line.
    pub fn to_smtlib(&self) -> String {
        let mut out = String::new();
        for d in &self.defs {
            let params: Vec<String> =
                d.params.iter().map(|p| format!("({} {})", fmt_symbol(&p.name), p.sort)).collect();
            out.push_str(&format!("(define-fun {} ({}) Bool {})\n", fmt_symbol(&d.name), params.join(" "), d.body));
        }
        out
    }
}

/// Outcome of checking an answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Valid,
    Invalid(String),
    /// The solver could not decide a check.
    Inconclusive(String),
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid)
    }
}

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Validation::Valid => f.write_str("valid"),
            Validation::Invalid(m) => write!(f, "invalid: {m}"),
            Validation::Inconclusive(m) => write!(f, "inconclusive: {m}"),
        }
    }
}

fn has_query(system: &ChcSystem) -> bool {
    system.clauses.iter().any(|c| matches!(c.kind(), ClauseKind::Query | ClauseKind::DegenerateQuery))
}

/// Projects a conjunction onto `params`. Conjuncts not linked to a
/// parameter through shared variables are dropped; the remaining foreign
/// variables are existentially bound.
fn project_conjunction(conj: &Term, params: &BTreeSet<String>) -> Term {
    let parts = conj.conjuncts();
    let vars: Vec<BTreeSet<String>> =
        parts.iter().map(|p| p.free_vars().into_iter().map(|v| v.name).collect()).collect();
    let mut reached: BTreeSet<String> = params.clone();
    let mut keep = vec![false; parts.len()];
    loop {
        let mut changed = false;
        for (i, vs) in vars.iter().enumerate() {
            if !keep[i] && (vs.is_empty() || vs.iter().any(|v| reached.contains(v))) {
                keep[i] = true;
                reached.extend(vs.iter().cloned());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let kept: Vec<Term> = parts.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect();
    let body = Term::and(kept);
    let foreign: Vec<Var> = body.free_vars().into_iter().filter(|v| !params.contains(&v.name)).collect();
    Term::exists(foreign, body)
}

fn disjuncts(t: &Term) -> Vec<Term> {
    match t {
        Term::Or(v) => v.clone(),
        Term::Bool(false) => Vec::new(),
        other => vec![other.clone()],
    }
}

/// Disjunction of `parts` without duplicates or disjuncts implied by
/// another one.
fn absorb(session: &mut SolverSession, parts: Vec<Term>) -> Result<Term, Unknown> {
    let mut uniq: Vec<Term> = Vec::new();
    for p in parts {
        if !uniq.contains(&p) {
            uniq.push(p);
        }
    }
    if uniq.iter().any(Term::is_true) {
        return Ok(TRUE);
    }
    let mut alive = vec![true; uniq.len()];
    for i in 0..uniq.len() {
        for j in 0..uniq.len() {
            if i == j || !alive[j] || !alive[i] {
                continue;
            }
            if session.check_valid(&[], &Term::implies(uniq[i].clone(), uniq[j].clone()))? {
                alive[i] = false;
            }
        }
    }
    Ok(Term::or(uniq.into_iter().zip(alive).filter(|(_, a)| *a).map(|(t, _)| t)))
}

/// States of the closed ARG at each predicate location, projected onto the
/// predicate's parameters.
fn location_summaries(
    arg: &Arg,
    tr: &TransformResult,
    session: &mut SolverSession,
    include_covered: bool,
) -> Result<Vec<Term>, Unknown> {
    let mut out = Vec::with_capacity(tr.system.predicates.len());
    for p in &tr.system.predicates {
        let loc = tr.pred_location[p.index];
        let params: BTreeSet<String> = tr.pred_vars[p.index].iter().map(|v| v.name.clone()).collect();
        let mut parts = Vec::new();
        for n in arg.alive() {
            if n.location != loc || (!include_covered && n.covered_by.is_some()) {
                continue;
            }
            for d in disjuncts(&n.label) {
                let projected = project_conjunction(&d, &params);
                let (t, exact) = session.eliminate(&projected)?;
                if !exact {
                    log::warn!("definition of {} keeps a quantifier", p.name);
                }
                parts.push(t);
            }
        }
        out.push(absorb(session, parts)?);
    }
    Ok(out)
}

/// Predicate definitions read off a closed ARG of the direction's CFA.
///
/// Forward: the reachable states at `l_i` are the derivable facts of
/// `B_i`, so their projection is a model. Backward: the reachable states at
/// `l_i` are the arguments from which `false` is derivable, and the
/// complement of their projection is a model.
pub fn build_model(
    arg: &Arg,
    tr: &TransformResult,
    session: &mut SolverSession,
    include_covered: bool,
) -> Result<Model, Unknown> {
    if !has_query(&tr.system) {
        return Ok(Model::constant(tr, true));
    }
    let summaries = location_summaries(arg, tr, session, include_covered)?;
    let mut defs = Vec::with_capacity(summaries.len());
    for (p, s) in tr.system.predicates.iter().zip(summaries) {
        let body = match tr.direction {
            Direction::Forward => s,
            Direction::Backward => negate(session, s)?,
        };
        defs.push(PredDef { name: p.name.clone(), params: tr.pred_vars[p.index].clone(), body });
    }
    Ok(Model { defs })
}

fn negate(session: &mut SolverSession, t: Term) -> Result<Term, Unknown> {
    match t {
        Term::Bool(b) => Ok(Term::Bool(!b)),
        Term::Exists(vs, body) => Ok(Term::forall(vs, Term::not(*body))),
        t => {
            let n = Term::not(t);
            if n.has_quantifier() {
                Ok(n)
            } else {
                session.simplify(&n)
            }
        }
    }
}

/// `body(args) /\ constraint => head(args)` for one clause under `model`.
pub fn clause_condition(clause: &Clause, model: &Model) -> Term {
    let apply = |atom: &crate::chc::Atom| {
        let args: Vec<Term> = atom.args.iter().map(Var::term).collect();
        model.defs[atom.pred].instantiate(&args)
    };
    let body = match &clause.body {
        Some(a) => Term::and([apply(a), clause.constraint.clone()]),
        None => clause.constraint.clone(),
    };
    let head = clause.head.as_ref().map(apply).unwrap_or(FALSE);
    Term::implies(body, head)
}

/// Checks every clause of `system` under `model`.
pub fn validate_model(system: &ChcSystem, model: &Model, session: &mut SolverSession) -> Validation {
    if model.defs.len() != system.predicates.len() {
        return Validation::Invalid(format!(
            "{} definitions for {} predicates",
            model.defs.len(),
            system.predicates.len()
        ));
    }
    for (d, p) in model.defs.iter().zip(&system.predicates) {
        if d.params.len() != p.param_sorts.len() || d.params.iter().zip(&p.param_sorts).any(|(v, s)| v.sort != *s) {
            return Validation::Invalid(format!("definition of {} has the wrong signature", p.name));
        }
        let params: BTreeSet<&str> = d.params.iter().map(|v| v.name.as_str()).collect();
        if let Some(v) = d.body.free_vars().iter().find(|v| !params.contains(v.name.as_str())) {
            return Validation::Invalid(format!("definition of {} mentions {}", p.name, v.name));
        }
    }
    for c in &system.clauses {
        match session.check_valid(&c.vars, &clause_condition(c, model)) {
            Ok(true) => {}
            Ok(false) => {
                return Validation::Invalid(format!("clause {} does not hold: {}", c.id, system.clause_to_string(c)))
            }
            Err(Unknown(m)) => return Validation::Inconclusive(format!("clause {}: {m}", c.id)),
        }
    }
    Validation::Valid
}

/// An instantiated predicate atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAtom {
    pub pred: usize,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefutationStep {
    pub clause: usize,
    /// Clause variable -> value.
    pub substitution: BTreeMap<String, Value>,
    pub head: Option<GroundAtom>,
    pub body: Option<GroundAtom>,
}

/// A derivation of `false`: each step instantiates one clause, the first
/// from a fact and the last from a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refutation {
    pub steps: Vec<RefutationStep>,
}

fn ground(atom: &crate::chc::Atom, subst: &BTreeMap<String, Value>) -> Option<GroundAtom> {
    let values = atom.args.iter().map(|a| subst.get(&a.name).copied()).collect::<Option<Vec<_>>>()?;
    Some(GroundAtom { pred: atom.pred, values })
}

fn default_value(sort: Sort) -> Value {
    match sort {
        Sort::Int => Value::Int(0),
        Sort::Bool => Value::Bool(false),
    }
}

impl Refutation {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Builds the step for `clause` under `subst`.
    pub fn step(clause: &Clause, subst: BTreeMap<String, Value>) -> RefutationStep {
        RefutationStep {
            clause: clause.id,
            head: clause.head.as_ref().and_then(|a| ground(a, &subst)),
            body: clause.body.as_ref().and_then(|a| ground(a, &subst)),
            substitution: subst,
        }
    }

    /// Human-readable numbered steps.
    pub fn display(&self, system: &ChcSystem) -> String {
        let atom = |a: &Option<GroundAtom>| match a {
            None => None,
            Some(g) => {
                let vals: Vec<String> = g.values.iter().map(|v| v.to_string()).collect();
                Some(format!("{}({})", system.predicates[g.pred].name, vals.join(", ")))
            }
        };
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            let c = &system.clauses[s.clause];
            let head = atom(&s.head).unwrap_or_else(|| "false".into());
            let from = match atom(&s.body) {
                Some(b) => format!(" from {b}"),
                None => String::new(),
            };
            let subst: Vec<String> = s.substitution.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            out.push_str(&format!(
                "{}. clause {} ({}): {head}{from} with {}\n",
                i + 1,
                c.id,
                c.kind(),
                if subst.is_empty() { "no variables".to_string() } else { subst.join(", ") }
            ));
        }
        out
    }

    /// Machine-readable S-expression form.
    pub fn to_sexp(&self, system: &ChcSystem) -> String {
        let atom = |a: &GroundAtom| {
            let vals: Vec<String> = a.values.iter().map(|v| v.to_term().to_string()).collect();
            format!("({} {})", fmt_symbol(&system.predicates[a.pred].name), vals.join(" "))
        };
        let mut out = String::from("(refutation\n");
        for s in &self.steps {
            let subst: Vec<String> =
                s.substitution.iter().map(|(k, v)| format!("({} {})", fmt_symbol(k), v.to_term())).collect();
            out.push_str(&format!("  (step :clause {} :subst ({})", s.clause, subst.join(" ")));
            if let Some(b) = &s.body {
                out.push_str(&format!(" :body {}", atom(b)));
            }
            match &s.head {
                Some(h) => out.push_str(&format!(" :head {})\n", atom(h))),
                None => out.push_str(" :head false)\n"),
            }
        }
        out.push_str(")\n");
        out
    }
}

/// Maps a concrete path to clause instances. Forward paths list the
/// derivation in order; backward paths list it from the query down, so
/// their steps are reversed.
pub fn build_refutation(path: &ConcretePath, tr: &TransformResult) -> Result<Refutation, String> {
    if path.final_location() != Some(tr.cfa.error) {
        return Err("the path does not end at the error location".into());
    }
    let mut steps = Vec::with_capacity(path.edges.len());
    for (t, &e) in path.edges.iter().enumerate() {
        let clause = &tr.system.clauses[tr.edge_clause[e]];
        let after = &path.states[t + 1].valuation;
        let mut subst = BTreeMap::new();
        for v in &clause.vars {
            let cfa_var = tr.clause_var(clause.id, &v.name);
            // a variable the constraint does not restrict may be left unset
            let x = after.get(&cfa_var.name).unwrap_or_else(|| default_value(v.sort));
            subst.insert(v.name.clone(), x);
        }
        steps.push(Refutation::step(clause, subst));
    }
    if tr.direction == Direction::Backward {
        steps.reverse();
    }
    Ok(Refutation { steps })
}

/// Checks that `refutation` is a well-formed derivation of `false`.
pub fn validate_refutation(system: &ChcSystem, refutation: &Refutation) -> Validation {
    let steps = &refutation.steps;
    if steps.is_empty() {
        return Validation::Invalid("no steps".into());
    }
    let last = steps.len() - 1;
    for (i, s) in steps.iter().enumerate() {
        let Some(c) = system.clauses.get(s.clause) else {
            return Validation::Invalid(format!("step {}: no clause {}", i + 1, s.clause));
        };
        let kind = c.kind();
        let allowed = match (i == 0, i == last) {
            (true, true) => kind == ClauseKind::DegenerateQuery,
            (true, false) => kind == ClauseKind::Fact,
            (false, true) => kind == ClauseKind::Query,
            (false, false) => kind == ClauseKind::Induction,
        };
        if !allowed {
            return Validation::Invalid(format!("step {}: clause {} is a {kind} here", i + 1, c.id));
        }
        for v in &c.vars {
            match s.substitution.get(&v.name) {
                Some(x) if x.sort() == v.sort => {}
                _ => return Validation::Invalid(format!("step {}: no value for {}", i + 1, v.name)),
            }
        }
        if let Some((k, _)) = s.substitution.iter().find(|(k, _)| !c.vars.iter().any(|v| &v.name == *k)) {
            return Validation::Invalid(format!("step {}: {k} is not a variable of clause {}", i + 1, c.id));
        }
        match c.constraint.eval_map(&s.substitution) {
            Ok(Value::Bool(true)) => {}
            Ok(_) => return Validation::Invalid(format!("step {}: the constraint of clause {} is false", i + 1, c.id)),
            Err(e) => return Validation::Invalid(format!("step {}: {e}", i + 1)),
        }
        let head = c.head.as_ref().and_then(|a| ground(a, &s.substitution));
        let body = c.body.as_ref().and_then(|a| ground(a, &s.substitution));
        if head != s.head || body != s.body {
            return Validation::Invalid(format!("step {}: atoms disagree with the substitution", i + 1));
        }
        if i > 0 && steps[i - 1].head != s.body {
            return Validation::Invalid(format!("step {}: does not consume the previous head", i + 1));
        }
    }
    Validation::Valid
}
