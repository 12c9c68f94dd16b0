//! Counterexample feasibility and predicate extraction.

use std::collections::{BTreeMap, BTreeSet};

use crate::cfa::{check_path, Cfa, CfaOp, ConcretePath, Edge};
use crate::smt::{SatResult, SmtError, SolverSession, Unknown};
use crate::ssa::{decode_path, Ssa, StepEncoding};
use crate::term::{Term, Var, FALSE, TRUE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(ConcretePath),
    /// The first `pivot` edges are already infeasible, `pivot - 1` are not.
    Infeasible {
        pivot: usize,
    },
}

struct PathEncoding {
    steps: Vec<StepEncoding>,
    /// Versioned symbol -> CFA name, after each step.
    names_after: Vec<BTreeMap<String, String>>,
    initial_reads: BTreeSet<Var>,
}

fn encode_path(cfa: &Cfa, edges: &[usize]) -> PathEncoding {
    let mut ssa = Ssa::new();
    let mut steps = Vec::new();
    let mut names_after = Vec::new();
    for &e in edges {
        steps.push(ssa.encode_ops(&cfa.edges[e].ops));
        names_after.push(ssa.current_names());
    }
    PathEncoding { steps, names_after, initial_reads: ssa.initial_reads }
}

fn prefix_formula(enc: &PathEncoding, len: usize) -> Term {
    Term::and(enc.steps[..len].iter().map(|s| s.formula.clone()))
}

/// Decides whether the edge sequence `edges` from the initial location can
/// be executed concretely.
pub fn check_feasible(cfa: &Cfa, edges: &[usize], session: &mut SolverSession) -> Result<Feasibility, Unknown> {
    assert!(!edges.is_empty(), "a counterexample has at least one edge");
    let enc = encode_path(cfa, edges);
    let mut declared: Vec<Var> = enc.initial_reads.iter().cloned().collect();
    for s in &enc.steps {
        declared.extend(s.havocs.iter().map(|(_, sym)| sym.clone()));
    }
    let whole = prefix_formula(&enc, edges.len());
    match session.check_sat(&declared, &whole) {
        SatResult::Sat(model) => {
            let path = decode_path(cfa, edges, &enc.steps, &enc.initial_reads, &model)
                .map_err(|e| Unknown(format!("counterexample replay failed: {e}")))?;
            check_path(cfa, &path).map_err(|e| Unknown(format!("counterexample replay failed: {e}")))?;
            Ok(Feasibility::Feasible(path))
        }
        SatResult::Unknown(m) => Err(Unknown(m)),
        SatResult::Unsat => {
            // smallest infeasible prefix
            let (mut lo, mut hi) = (1, edges.len());
            while lo < hi {
                let mid = (lo + hi) / 2;
                if session.is_unsat(&[], &prefix_formula(&enc, mid))? {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            Ok(Feasibility::Infeasible { pivot: lo })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Wp,
    SeqItp,
    BwBinItp,
}

/// Formulas for the locations strictly inside an infeasible edge prefix.
/// Entry `t` belongs to the target of `edges[t]`; together they block the
/// prefix. `exact` is false when a quantifier could not be eliminated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Separators {
    pub formulas: Vec<Term>,
    pub exact: bool,
}

/// Weakest preconditions of `true` at the end of the prefix, i.e. the states
/// from which the remaining edges can still run to completion.
pub fn wp_separators(cfa: &Cfa, edges: &[usize], session: &mut SolverSession) -> Result<Separators, Unknown> {
    let mut q = TRUE;
    let mut exact = true;
    let mut formulas = vec![TRUE; edges.len().saturating_sub(1)];
    let mut fresh = 0usize;
    for t in (0..edges.len()).rev() {
        let (pre, ok) = pre_image(&cfa.edges[edges[t]], &q, &mut fresh, session)?;
        exact &= ok;
        q = pre;
        if t > 0 {
            formulas[t - 1] = q.clone();
        }
    }
    Ok(Separators { formulas, exact })
}

fn pre_image(
    edge: &Edge,
    post: &Term,
    fresh: &mut usize,
    session: &mut SolverSession,
) -> Result<(Term, bool), Unknown> {
    let mut q = post.clone();
    let mut bound = Vec::new();
    for op in edge.ops.iter().rev() {
        match op {
            CfaOp::Guard(g) => q = Term::and([g.definedness(), g.clone(), q]),
            CfaOp::Assign(v, t) => {
                let map = BTreeMap::from([(v.name.clone(), t.clone())]);
                q = Term::and([t.definedness(), q.substitute(&map)]);
            }
            CfaOp::Havoc(v) => {
                if q.mentions(&v.name) {
                    *fresh += 1;
                    let nv = Var::new(format!("{}#{}", v.name, fresh), v.sort);
                    let map = BTreeMap::from([(v.name.clone(), nv.term())]);
                    q = q.substitute(&map);
                    bound.push(nv);
                }
            }
        }
    }
    if q.is_false() {
        return Ok((FALSE, true));
    }
    let undecided = |u: Unknown, session: &SolverSession| {
        if session.deadline_passed() {
            Err(u)
        } else {
            Ok(())
        }
    };
    if bound.is_empty() {
        return match session.simplify(&q) {
            Ok(s) => Ok((s, true)),
            Err(u) => undecided(u, session).map(|_| (q, true)),
        };
    }
    let q = Term::exists(bound, q);
    match session.eliminate(&q) {
        Ok(r) => Ok(r),
        Err(u) => undecided(u, session).map(|_| (q, false)),
    }
}

/// Interpolation-based separators. `Err(Unsupported)` lets the caller fall
/// back to weakest preconditions.
pub fn itp_separators(
    cfa: &Cfa,
    edges: &[usize],
    method: Method,
    session: &mut SolverSession,
) -> Result<Separators, SmtError> {
    let enc = encode_path(cfa, edges);
    let parts: Vec<Term> = enc.steps.iter().map(|s| s.formula.clone()).collect();
    let k = parts.len();
    if k < 2 {
        return Ok(Separators { formulas: Vec::new(), exact: true });
    }
    let raw: Vec<Term> = match method {
        Method::SeqItp => session.interpolant_seq(&parts)?,
        Method::BwBinItp => {
            // J_{k-1} = itp(P_k, P_1..P_{k-1}); J_t = itp(P_{t+1} /\ J_{t+1}, P_1..P_t)
            let mut js = vec![TRUE; k - 1];
            let mut next = TRUE;
            for t in (0..k - 1).rev() {
                let a = Term::and([parts[t + 1].clone(), next.clone()]);
                let b = Term::and(parts[..=t].iter().cloned());
                let j = if a.is_false() { FALSE } else { session.interpolant(&a, &b)? };
                js[t] = j.clone();
                next = j;
            }
            js
        }
        Method::Wp => unreachable!("weakest preconditions are not interpolants"),
    };
    let mut formulas = Vec::with_capacity(raw.len());
    for (t, f) in raw.into_iter().enumerate() {
        let names = &enc.names_after[t];
        let mut map = BTreeMap::new();
        for v in f.free_vars() {
            if let Some(plain) = names.get(&v.name) {
                map.insert(v.name.clone(), Term::var(plain.clone(), v.sort));
            } else if v.name.contains('@') {
                log::debug!("interpolant mentions a stale symbol {}", v.name);
                return Err(SmtError::Unsupported);
            }
        }
        formulas.push(f.substitute(&map));
    }
    Ok(Separators { formulas, exact: true })
}

/// Splits a formula into its atomic comparisons.
pub fn split_atoms(t: &Term) -> Vec<Term> {
    t.atoms().into_iter().filter(|a| !matches!(a, Term::Bool(_))).collect()
}
