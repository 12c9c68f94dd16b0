//! Static single assignment encoding of CFA operation sequences.
//!
//! Version `k` of variable `v` is the symbol `v@k`; version 0 is `v` itself,
//! so a formula over plain CFA variables describes the state before the
//! first encoded operation.

use std::collections::{BTreeMap, BTreeSet};

use crate::cfa::{exec_ops, Cfa, CfaOp, ConcretePath, ConcreteState, Valuation};
use crate::term::{Sort, Term, Value, Var, TRUE};

pub fn versioned_name(name: &str, k: u32) -> String {
    if k == 0 {
        name.to_string()
    } else {
        format!("{name}@{k}")
    }
}

/// Encoding of one operation sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepEncoding {
    pub formula: Term,
    /// CFA variable and the symbol holding its havoc choice.
    pub havocs: Vec<(Var, Var)>,
}

#[derive(Debug, Clone, Default)]
pub struct Ssa {
    versions: BTreeMap<String, u32>,
    /// Variables read at version 0.
    pub initial_reads: BTreeSet<Var>,
}

impl Ssa {
    pub fn new() -> Self {
        Ssa::default()
    }

    pub fn version(&self, name: &str) -> u32 {
        self.versions.get(name).copied().unwrap_or(0)
    }

    /// The symbol currently standing for `v`.
    pub fn current(&mut self, v: &Var) -> Var {
        let k = self.version(&v.name);
        if k == 0 {
            self.initial_reads.insert(v.clone());
        }
        Var::new(versioned_name(&v.name, k), v.sort)
    }

    fn bump(&mut self, v: &Var) -> Var {
        let k = self.versions.entry(v.name.clone()).or_insert(0);
        *k += 1;
        Var::new(versioned_name(&v.name, *k), v.sort)
    }

    /// `t` with every free variable replaced by its current symbol.
    pub fn rename(&mut self, t: &Term) -> Term {
        let map: BTreeMap<String, Term> =
            t.free_vars().into_iter().map(|v| (v.name.clone(), self.current(&v).term())).collect();
        t.substitute(&map)
    }

    /// Symbols of the current versions as a map from CFA names, for moving
    /// formulas over versioned symbols back to plain names.
    pub fn current_names(&self) -> BTreeMap<String, String> {
        self.versions.iter().filter(|(_, k)| **k > 0).map(|(n, k)| (versioned_name(n, *k), n.clone())).collect()
    }

    pub fn encode_ops(&mut self, ops: &[CfaOp]) -> StepEncoding {
        let mut parts = Vec::new();
        let mut havocs = Vec::new();
        for op in ops {
            match op {
                CfaOp::Havoc(v) => {
                    let nv = self.bump(v);
                    havocs.push((v.clone(), nv));
                }
                CfaOp::Assign(v, t) => {
                    let rhs = self.rename(t);
                    parts.push(rhs.definedness());
                    let nv = self.bump(v);
                    parts.push(Term::eq(nv.term(), rhs));
                }
                CfaOp::Guard(g) => {
                    let g = self.rename(g);
                    parts.push(g.definedness());
                    parts.push(g);
                }
            }
        }
        let formula = if parts.is_empty() { TRUE } else { Term::and(parts) };
        StepEncoding { formula, havocs }
    }
}

fn default_value(sort: Sort) -> Value {
    match sort {
        Sort::Int => Value::Int(0),
        Sort::Bool => Value::Bool(false),
    }
}

/// Rebuilds the concrete path of a satisfying assignment by replaying the
/// edges with the havoc choices read from `model`.
pub fn decode_path(
    cfa: &Cfa,
    edges: &[usize],
    steps: &[StepEncoding],
    initial_reads: &BTreeSet<Var>,
    model: &BTreeMap<String, Value>,
) -> Result<ConcretePath, String> {
    let mut val = Valuation::unconstrained(cfa);
    for v in initial_reads {
        let x = model.get(&v.name).copied().unwrap_or_else(|| default_value(v.sort));
        val.set(v.name.clone(), x);
    }
    let mut states = vec![ConcreteState { location: cfa.initial, valuation: val.clone() }];
    let mut havocs = Vec::new();
    for (t, (&eid, step)) in edges.iter().zip(steps).enumerate() {
        let edge = &cfa.edges[eid];
        let choices: BTreeMap<String, Value> = step
            .havocs
            .iter()
            .map(|(v, sym)| {
                let x = model.get(&sym.name).copied().unwrap_or_else(|| default_value(v.sort));
                (v.name.clone(), x)
            })
            .collect();
        val = match exec_ops(&val, &edge.ops, &choices) {
            Ok(Some(v)) => v,
            Ok(None) => return Err(format!("step {t}: a guard fails on replay")),
            Err(e) => return Err(format!("step {t}: {e}")),
        };
        states.push(ConcreteState { location: edge.target, valuation: val.clone() });
        havocs.push(choices);
    }
    Ok(ConcretePath { states, edges: edges.to_vec(), havocs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versions_advance_per_write() {
        let n = Var::int("n");
        let a = Var::int("a_1");
        let ops = vec![
            CfaOp::Havoc(n.clone()),
            CfaOp::Assign(n.clone(), a.term()),
            CfaOp::Guard(Term::ge(n.term(), Term::Int(100))),
        ];
        let mut ssa = Ssa::new();
        let enc = ssa.encode_ops(&ops);
        assert_eq!(enc.formula.to_string(), "(and (= n@2 a_1) (>= n@2 100))");
        assert_eq!(enc.havocs, vec![(n.clone(), Var::int("n@1"))]);
        assert!(ssa.initial_reads.contains(&a));
        assert_eq!(ssa.current_names()["n@2"], "n");
    }

    #[test]
    fn divisions_carry_definedness() {
        let x = Var::int("x");
        let ops = vec![CfaOp::Guard(Term::eq(Term::modulo(Term::int_var("y"), x.term()), Term::Int(0)))];
        let enc = Ssa::new().encode_ops(&ops);
        assert_eq!(enc.formula.to_string(), "(and (distinct x 0) (= (mod y x) 0))");
    }
}
