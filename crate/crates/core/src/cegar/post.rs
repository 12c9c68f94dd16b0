//! Abstract successor computation for the three abstract domains.

use crate::cfa::Edge;
use crate::smt::{SolverSession, Unknown};
use crate::ssa::Ssa;
use crate::term::{Term, Value, Var};

use super::precision::LocPrecision;
use super::Domain;

/// Label after taking `edge` from a state labelled `label`, abstracted with
/// the target location's precision. `None` when the edge cannot be taken.
pub fn abstract_post(
    session: &mut SolverSession,
    domain: Domain,
    label: &Term,
    edge: &Edge,
    target: &LocPrecision,
    cube_cap: usize,
) -> Result<Option<Term>, Unknown> {
    let mut ssa = Ssa::new();
    let enc = ssa.encode_ops(&edge.ops);
    let base = Term::and([label.clone(), enc.formula]);
    match domain {
        Domain::PredCart => cartesian(session, &mut ssa, &base, &target.preds),
        Domain::PredBool => {
            let terms: Vec<Term> = target.preds.iter().map(|p| ssa.rename(p)).collect();
            let cubes = match session.all_sat(&base, &terms, cube_cap) {
                Err(u) if session.deadline_passed() => return Err(u),
                Err(u) => {
                    log::debug!("cube enumeration failed ({u})");
                    None
                }
                Ok(c) => c,
            };
            match cubes {
                None => {
                    log::debug!("more than {cube_cap} cubes; using the cartesian abstraction");
                    cartesian(session, &mut ssa, &base, &target.preds)
                }
                Some(cubes) if cubes.is_empty() => Ok(None),
                Some(cubes) => {
                    let disjuncts =
                        cubes.iter().map(|cube| {
                            Term::and(target.preds.iter().zip(cube).map(|(p, &b)| {
                                if b {
                                    p.clone()
                                } else {
                                    Term::not(p.clone())
                                }
                            }))
                        });
                    Ok(Some(Term::or(disjuncts)))
                }
            }
        }
        Domain::Expl => {
            let tracked: Vec<Var> = target.vars.iter().filter_map(|name| edge_var(edge, label, name)).collect();
            let syms: Vec<Term> = tracked.iter().map(|v| ssa.rename(&v.term())).collect();
            let values = match session.model_values(&base, &syms) {
                Ok(Some(v)) => v,
                Ok(None) => return Ok(None),
                Err(u) if session.deadline_passed() => return Err(u),
                Err(u) => {
                    log::debug!("explicit post inconclusive ({u}); tracking nothing");
                    return Ok(Some(crate::term::TRUE));
                }
            };
            let candidates: Vec<Term> =
                syms.iter().zip(&values).map(|(s, v)| Term::eq(s.clone(), v.to_term())).collect();
            let Some(unique) = entails(session, &base, &candidates)? else {
                return Ok(None);
            };
            let parts = tracked.iter().zip(values).zip(unique).filter(|(_, u)| *u).map(|((v, x), _)| value_eq(v, x));
            Ok(Some(Term::and(parts)))
        }
    }
}

fn cartesian(session: &mut SolverSession, ssa: &mut Ssa, base: &Term, preds: &[Term]) -> Result<Option<Term>, Unknown> {
    let mut candidates = Vec::with_capacity(2 * preds.len());
    for p in preds {
        let r = ssa.rename(p);
        candidates.push(r.clone());
        candidates.push(Term::not(r));
    }
    let Some(bits) = entails(session, base, &candidates)? else {
        return Ok(None);
    };
    let mut lits = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        if bits[2 * i] {
            lits.push(p.clone());
        } else if bits[2 * i + 1] {
            lits.push(Term::not(p.clone()));
        }
    }
    Ok(Some(Term::and(lits)))
}

/// Entailment of each candidate by `base`, or `None` when `base` is
/// unsatisfiable. A query the solver cannot decide counts as not entailed
/// and an undecided `base` as satisfiable, which only weakens the result.
fn entails(session: &mut SolverSession, base: &Term, candidates: &[Term]) -> Result<Option<Vec<bool>>, Unknown> {
    match session.entailment_batch(base, candidates) {
        Ok(r) => return Ok(r),
        Err(u) if session.deadline_passed() => return Err(u),
        Err(u) => log::debug!("batched entailment failed ({u}); checking one by one"),
    }
    match session.is_unsat(&[], base) {
        Ok(true) => return Ok(None),
        Ok(false) => {}
        Err(u) if session.deadline_passed() => return Err(u),
        Err(_) => {}
    }
    let mut out = Vec::with_capacity(candidates.len());
    for c in candidates {
        match session.check_valid(&[], &Term::implies(base.clone(), c.clone())) {
            Ok(b) => out.push(b),
            Err(u) if session.deadline_passed() => return Err(u),
            Err(_) => out.push(false),
        }
    }
    Ok(Some(out))
}

/// The sort of a tracked variable, looked up in the edge and label.
fn edge_var(edge: &Edge, label: &Term, name: &str) -> Option<Var> {
    use crate::cfa::CfaOp;
    for op in &edge.ops {
        let found = match op {
            CfaOp::Assign(v, t) => {
                (v.name == name).then(|| v.clone()).or_else(|| t.free_vars().into_iter().find(|v| v.name == name))
            }
            CfaOp::Havoc(v) => (v.name == name).then(|| v.clone()),
            CfaOp::Guard(g) => g.free_vars().into_iter().find(|v| v.name == name),
        };
        if found.is_some() {
            return found;
        }
    }
    label.free_vars().into_iter().find(|v| v.name == name)
}

fn value_eq(v: &Var, x: Value) -> Term {
    match x {
        Value::Bool(true) => v.term(),
        Value::Bool(false) => Term::not(v.term()),
        Value::Int(_) => Term::eq(v.term(), x.to_term()),
    }
}
