//! Control flow automata and their concrete execution semantics.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::term::{EvalError, Term, Value, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocationKind {
    Init,
    Error,
    /// Location of the predicate with this index.
    Predicate(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub id: usize,
    pub kind: LocationKind,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CfaOp {
    Assign(Var, Term),
    Havoc(Var),
    Guard(Term),
}

impl fmt::Display for CfaOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfaOp::Assign(v, t) => write!(f, "{v} := {t}"),
            CfaOp::Havoc(v) => write!(f, "havoc {v}"),
            CfaOp::Guard(g) => write!(f, "[{g}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: usize,
    pub source: usize,
    pub target: usize,
    pub ops: Vec<CfaOp>,
    pub clause_id: usize,
}

impl Edge {
    pub fn ops_to_string(&self) -> String {
        let ops: Vec<String> = self.ops.iter().map(|o| o.to_string()).collect();
        ops.join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfa {
    pub variables: Vec<Var>,
    pub locations: Vec<Location>,
    pub initial: usize,
    pub error: usize,
    pub edges: Vec<Edge>,
}

impl Cfa {
    pub fn location(&self, id: usize) -> &Location {
        &self.locations[id]
    }

    pub fn outgoing(&self, loc: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.source == loc)
    }

    pub fn variable(&self, name: &str) -> Option<&Var> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Deterministic Graphviz rendering: locations by id, edges by clause id.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cfa {\n  node [shape=circle];\n");
        for l in &self.locations {
            let shape = match l.kind {
                LocationKind::Init => " shape=doublecircle",
                LocationKind::Error => " shape=octagon",
                LocationKind::Predicate(_) => "",
            };
            out.push_str(&format!("  l{} [label=\"{}\"{}];\n", l.id, dot_escape(&l.name), shape));
        }
        let mut edges: Vec<&Edge> = self.edges.iter().collect();
        edges.sort_by_key(|e| (e.clause_id, e.id));
        for e in edges {
            let ops: Vec<String> = e.ops.iter().map(|o| dot_escape(&o.to_string())).collect();
            out.push_str(&format!(
                "  l{} -> l{} [label=\"C{}\\l{}\\l\"];\n",
                e.source,
                e.target,
                e.clause_id,
                ops.join("\\l")
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Total valuation of the CFA variables. A variable that has not been given
/// a value yet holds `None`, the unconstrained marker.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Valuation {
    values: BTreeMap<String, Option<Value>>,
}

impl Valuation {
    /// Every variable of `cfa` unconstrained.
    pub fn unconstrained(cfa: &Cfa) -> Self {
        Valuation { values: cfa.variables.iter().map(|v| (v.name.clone(), None)).collect() }
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.values.get(name).copied().flatten()
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.values.insert(name.into(), Some(value));
    }

    pub fn covers(&self, cfa: &Cfa) -> bool {
        cfa.variables.iter().all(|v| self.values.contains_key(&v.name))
    }

    /// Assigned variables only.
    pub fn assigned(&self) -> impl Iterator<Item = (&str, Value)> {
        self.values.iter().filter_map(|(k, v)| v.map(|v| (k.as_str(), v)))
    }

    pub fn eval(&self, t: &Term) -> Result<Value, EvalError> {
        t.eval(&|n| self.get(n))
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.assigned().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("no havoc choice for `{0}`")]
    MissingHavocChoice(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Runs `ops` left to right. `Ok(None)` means a guard failed (division by
/// zero included).
pub fn exec_ops(
    valuation: &Valuation,
    ops: &[CfaOp],
    havoc_choices: &BTreeMap<String, Value>,
) -> Result<Option<Valuation>, ExecError> {
    let mut val = valuation.clone();
    for op in ops {
        match op {
            CfaOp::Havoc(v) => {
                let c = havoc_choices.get(&v.name).ok_or_else(|| ExecError::MissingHavocChoice(v.name.clone()))?;
                val.set(v.name.clone(), *c);
            }
            CfaOp::Assign(v, t) => match val.eval(t) {
                Ok(x) => val.set(v.name.clone(), x),
                Err(EvalError::DivisionByZero) => return Ok(None),
                Err(e) => return Err(e.into()),
            },
            CfaOp::Guard(g) => match val.eval(g) {
                Ok(Value::Bool(true)) => {}
                Ok(_) | Err(EvalError::DivisionByZero) => return Ok(None),
                Err(e) => return Err(e.into()),
            },
        }
    }
    Ok(Some(val))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteState {
    pub location: usize,
    pub valuation: Valuation,
}

/// `states[t] --edges[t]--> states[t+1]`, with the havoc values chosen on
/// each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcretePath {
    pub states: Vec<ConcreteState>,
    pub edges: Vec<usize>,
    pub havocs: Vec<BTreeMap<String, Value>>,
}

impl ConcretePath {
    pub fn final_location(&self) -> Option<usize> {
        self.states.last().map(|s| s.location)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("path step {step}: {msg}")]
pub struct PathError {
    pub step: usize,
    pub msg: String,
}

/// Replays every step of `path`; the error names the first bad step.
pub fn check_path(cfa: &Cfa, path: &ConcretePath) -> Result<(), PathError> {
    let err = |step, msg: String| Err(PathError { step, msg });
    let Some(first) = path.states.first() else {
        return err(0, "empty path".into());
    };
    if first.location != cfa.initial {
        return err(0, "path does not start at the initial location".into());
    }
    if path.edges.len() + 1 != path.states.len() || path.havocs.len() != path.edges.len() {
        return err(0, "edge, state and havoc counts disagree".into());
    }
    for (t, &eid) in path.edges.iter().enumerate() {
        let Some(edge) = cfa.edges.get(eid) else {
            return err(t, format!("unknown edge {eid}"));
        };
        let (pre, post) = (&path.states[t], &path.states[t + 1]);
        if edge.source != pre.location || edge.target != post.location {
            return err(t, format!("edge {eid} does not connect the recorded locations"));
        }
        match exec_ops(&pre.valuation, &edge.ops, &path.havocs[t]) {
            Ok(Some(v)) if v == post.valuation => {}
            Ok(Some(v)) => return err(t, format!("replay gives {v}, path records {}", post.valuation)),
            Ok(None) => return err(t, "a guard fails on replay".into()),
            Err(e) => return err(t, e.to_string()),
        }
    }
    Ok(())
}

pub fn validate_path(cfa: &Cfa, path: &ConcretePath) -> bool {
    match check_path(cfa, path) {
        Ok(()) => true,
        Err(e) => {
            log::debug!("path rejected: {e}");
            false
        }
    }
}
