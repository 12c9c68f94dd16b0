//! Translation of a linear CHC system into a CFA whose error location is
//! reachable exactly when the system is unsatisfiable.
//!
//! The forward direction follows deduction from the facts: location `l_i`
//! is reachable with `b^i = v` iff `B_i(v)` is derivable. The backward
//! direction runs deduction in reverse from the queries: `l_i` is reachable
//! with `b^i = v` iff assuming `B_i(v)` lets `false` be derived.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::cfa::{Cfa, CfaOp, Edge, Location, LocationKind};
use crate::chc::{Atom, ChcSystem, Clause, ClauseKind};
use crate::term::{Term, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "fw",
            Direction::Backward => "bw",
        })
    }
}

/// Deliberate defects for checking that the differential harness notices
/// a broken transformation. Never used outside tests.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Backward fact edges lose their guard.
    DropFactGuard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformResult {
    pub system: ChcSystem,
    pub cfa: Cfa,
    pub direction: Direction,
    /// Predicate index -> location id.
    pub pred_location: Vec<usize>,
    /// Predicate index -> parameter variables `b^i_1 .. b^i_m`.
    pub pred_vars: Vec<Vec<Var>>,
    /// Edge id -> clause id.
    pub edge_clause: Vec<usize>,
    /// Clause id -> edge id.
    pub clause_edge: Vec<usize>,
    /// Clause id -> (source variable name -> CFA variable).
    pub clause_vars: Vec<BTreeMap<String, Var>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("edge {0} does not belong to this CFA")]
pub struct UnknownEdge(pub usize);

impl TransformResult {
    pub fn edge_to_clause(&self, edge: &Edge) -> Result<&Clause, UnknownEdge> {
        match self.cfa.edges.get(edge.id) {
            Some(e) if e == edge => Ok(&self.system.clauses[self.edge_clause[edge.id]]),
            _ => Err(UnknownEdge(edge.id)),
        }
    }

    /// Location id -> predicate index.
    pub fn location_pred(&self, loc: usize) -> Option<usize> {
        match self.cfa.locations.get(loc)?.kind {
            LocationKind::Predicate(i) => Some(i),
            _ => None,
        }
    }

    /// The CFA variable standing for a clause variable.
    pub fn clause_var(&self, clause: usize, name: &str) -> &Var {
        &self.clause_vars[clause][name]
    }

    /// Clause-edge listing used by the `transform` command.
    pub fn edge_map_listing(&self) -> String {
        let mut out = String::new();
        for e in &self.cfa.edges {
            let c = &self.system.clauses[self.edge_clause[e.id]];
            out.push_str(&format!(
                "edge {} ({} -> {}) <-> clause {} [{}] {}\n",
                e.id,
                self.cfa.locations[e.source].name,
                self.cfa.locations[e.target].name,
                c.id,
                c.kind(),
                self.system.clause_to_string(c)
            ));
        }
        out
    }
}

fn sanitize(name: &str) -> String {
    let s: String =
        name.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$' {
                    c.to_ascii_lowercase()
                } else {
                    '_'
                }
            })
            .collect();
    if s.is_empty() || s.as_bytes()[0].is_ascii_digit() {
        format!("p{s}")
    } else {
        s
    }
}

struct Skeleton {
    locations: Vec<Location>,
    pred_location: Vec<usize>,
    pred_vars: Vec<Vec<Var>>,
    variables: Vec<Var>,
    clause_vars: Vec<BTreeMap<String, Var>>,
}

/// Locations and variables shared by both directions.
fn skeleton(system: &ChcSystem) -> Skeleton {
    let mut locations = vec![
        Location { id: 0, kind: LocationKind::Init, name: "Init".into() },
        Location { id: 1, kind: LocationKind::Error, name: "Err".into() },
    ];
    let mut pred_location = Vec::new();
    let mut pred_vars = Vec::new();
    let mut variables = Vec::new();
    let mut used_bases = BTreeSet::new();
    for p in &system.predicates {
        let id = locations.len();
        locations.push(Location { id, kind: LocationKind::Predicate(p.index), name: p.name.clone() });
        pred_location.push(id);
        let stem = sanitize(&p.name);
        let mut base = stem.clone();
        let mut k = p.index;
        while !used_bases.insert(base.clone()) {
            base = format!("{stem}{k}");
            k += 1;
        }
        let vars: Vec<Var> =
            p.param_sorts.iter().enumerate().map(|(j, s)| Var::new(format!("{base}_{}", j + 1), *s)).collect();
        variables.extend(vars.iter().cloned());
        pred_vars.push(vars);
    }
    // Parameter names never contain `!`, clause variables always end in `!<id>`.
    let mut clause_vars = Vec::new();
    for c in &system.clauses {
        let map: BTreeMap<String, Var> =
            c.vars.iter().map(|v| (v.name.clone(), Var::new(format!("{}!{}", v.name, c.id), v.sort))).collect();
        for v in &c.vars {
            variables.push(map[&v.name].clone());
        }
        clause_vars.push(map);
    }
    Skeleton { locations, pred_location, pred_vars, variables, clause_vars }
}

struct EdgeBuilder<'a> {
    sk: &'a Skeleton,
    clause: &'a Clause,
}

impl EdgeBuilder<'_> {
    fn var(&self, v: &Var) -> Var {
        self.sk.clause_vars[self.clause.id][&v.name].clone()
    }

    fn havoc(&self) -> Vec<CfaOp> {
        self.clause.vars.iter().map(|v| CfaOp::Havoc(self.var(v))).collect()
    }

    fn guard(&self) -> CfaOp {
        let map: BTreeMap<String, Term> =
            self.sk.clause_vars[self.clause.id].iter().map(|(k, v)| (k.clone(), v.term())).collect();
        CfaOp::Guard(self.clause.constraint.substitute(&map))
    }

    /// `arg_j := b_j` for every argument of `atom`.
    fn copy_in(&self, atom: &Atom) -> Vec<CfaOp> {
        atom.args.iter().zip(&self.sk.pred_vars[atom.pred]).map(|(a, b)| CfaOp::Assign(self.var(a), b.term())).collect()
    }

    /// `b_j := arg_j` for every argument of `atom`.
    fn copy_out(&self, atom: &Atom) -> Vec<CfaOp> {
        atom.args
            .iter()
            .zip(&self.sk.pred_vars[atom.pred])
            .map(|(a, b)| CfaOp::Assign(b.clone(), self.var(a).term()))
            .collect()
    }

    fn loc(&self, atom: &Atom) -> usize {
        self.sk.pred_location[atom.pred]
    }
}

fn assemble(system: &ChcSystem, direction: Direction, sk: Skeleton, edges: Vec<Edge>) -> TransformResult {
    let edge_clause: Vec<usize> = edges.iter().map(|e| e.clause_id).collect();
    let mut clause_edge = vec![0; system.clauses.len()];
    for e in &edges {
        clause_edge[e.clause_id] = e.id;
    }
    TransformResult {
        system: system.clone(),
        cfa: Cfa { variables: sk.variables, locations: sk.locations, initial: 0, error: 1, edges },
        direction,
        pred_location: sk.pred_location,
        pred_vars: sk.pred_vars,
        edge_clause,
        clause_edge,
        clause_vars: sk.clause_vars,
    }
}

/// Bottom-up translation: facts leave `Init`, queries enter `Err`.
pub fn forward_transform(system: &ChcSystem) -> TransformResult {
    let sk = skeleton(system);
    let mut edges = Vec::new();
    for c in &system.clauses {
        let b = EdgeBuilder { sk: &sk, clause: c };
        let mut ops = b.havoc();
        let (source, target) = match c.kind() {
            ClauseKind::Fact => {
                let h = c.head.as_ref().unwrap();
                ops.push(b.guard());
                ops.extend(b.copy_out(h));
                (0, b.loc(h))
            }
            ClauseKind::Induction => {
                let (h, y) = (c.head.as_ref().unwrap(), c.body.as_ref().unwrap());
                ops.extend(b.copy_in(y));
                ops.push(b.guard());
                ops.extend(b.copy_out(h));
                (b.loc(y), b.loc(h))
            }
            ClauseKind::Query => {
                let y = c.body.as_ref().unwrap();
                ops.extend(b.copy_in(y));
                ops.push(b.guard());
                (b.loc(y), 1)
            }
            ClauseKind::DegenerateQuery => {
                ops.push(b.guard());
                (0, 1)
            }
        };
        edges.push(Edge { id: edges.len(), source, target, ops, clause_id: c.id });
    }
    assemble(system, Direction::Forward, sk, edges)
}

/// Top-down dual: queries leave `Init`, facts enter `Err`.
pub fn backward_transform(system: &ChcSystem) -> TransformResult {
    backward_transform_mutated(system, Mutation::None)
}

#[doc(hidden)]
pub fn backward_transform_mutated(system: &ChcSystem, mutation: Mutation) -> TransformResult {
    let sk = skeleton(system);
    let mut edges = Vec::new();
    for c in &system.clauses {
        let b = EdgeBuilder { sk: &sk, clause: c };
        let mut ops = b.havoc();
        let (source, target) = match c.kind() {
            ClauseKind::Query => {
                let y = c.body.as_ref().unwrap();
                ops.push(b.guard());
                ops.extend(b.copy_out(y));
                (0, b.loc(y))
            }
            ClauseKind::Induction => {
                let (h, y) = (c.head.as_ref().unwrap(), c.body.as_ref().unwrap());
                ops.extend(b.copy_in(h));
                ops.push(b.guard());
                ops.extend(b.copy_out(y));
                (b.loc(h), b.loc(y))
            }
            ClauseKind::Fact => {
                let h = c.head.as_ref().unwrap();
                ops.extend(b.copy_in(h));
                if mutation != Mutation::DropFactGuard {
                    ops.push(b.guard());
                }
                (b.loc(h), 1)
            }
            ClauseKind::DegenerateQuery => {
                ops.push(b.guard());
                (0, 1)
            }
        };
        edges.push(Edge { id: edges.len(), source, target, ops, clause_id: c.id });
    }
    assemble(system, Direction::Backward, sk, edges)
}

pub fn transform(system: &ChcSystem, direction: Direction) -> TransformResult {
    match direction {
        Direction::Forward => forward_transform(system),
        Direction::Backward => backward_transform(system),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chc::parse_script;

    const EXAMPLE1: &str = "(set-logic HORN)
(declare-fun A (Int) Bool)
(declare-fun B (Int Int) Bool)
(declare-fun C (Int Int) Bool)
(assert (forall ((n Int)) (=> (and (> n 0) (< n 100)) (A n))))
(assert (forall ((n Int) (x Int)) (=> (and (A n) (> x 0)) (B n x))))
(assert (forall ((n Int) (x Int) (y Int)) (=> (and (B n x) (= y (- n x)) (> y 0)) (C y x))))
(assert (forall ((n Int) (x Int) (y Int)) (=> (and (C y x) (= n (+ y (mod y x)))) (A n))))
(assert (forall ((n Int)) (=> (and (A n) (>= n 100)) false)))
";

    /// Op sequence without havocs and with clause suffixes stripped.
    fn plain_ops(e: &Edge) -> String {
        let ops: Vec<String> =
            e.ops.iter().filter(|o| !matches!(o, CfaOp::Havoc(_))).map(|o| strip_suffixes(&o.to_string())).collect();
        ops.join("; ")
    }

    fn strip_suffixes(s: &str) -> String {
        let mut out = String::new();
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            if c == '!' && chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                while chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    chars.next();
                }
            } else {
                out.push(c);
            }
        }
        out
    }

    #[test]
    fn forward_example1() {
        let sys = parse_script(EXAMPLE1).unwrap();
        let r = forward_transform(&sys);
        let names: Vec<&str> = r.cfa.locations.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, ["Init", "Err", "A", "B", "C"]);
        let params: Vec<String> = r.pred_vars.iter().flatten().map(|v| v.name.clone()).collect();
        assert_eq!(params, ["a_1", "b_1", "b_2", "c_1", "c_2"]);
        let ops: Vec<String> = r.cfa.edges.iter().map(plain_ops).collect();
        assert_eq!(
            ops,
            [
                "[(and (> n 0) (< n 100))]; a_1 := n",
                "n := a_1; [(> x 0)]; b_1 := n; b_2 := x",
                "n := b_1; x := b_2; [(and (= y (- n x)) (> y 0))]; c_1 := y; c_2 := x",
                "y := c_1; x := c_2; [(= n (+ y (mod y x)))]; a_1 := n",
                "n := a_1; [(>= n 100)]",
            ]
            .map(String::from)
        );
        assert_eq!(r.cfa.edges[2].source, 3);
        assert_eq!(r.cfa.edges[2].target, 4);
        assert!(matches!(r.cfa.edges[0].ops[0], CfaOp::Havoc(ref v) if v.name == "n!0"));
    }

    #[test]
    fn backward_example1_reverses_edges() {
        let sys = parse_script(EXAMPLE1).unwrap();
        let r = backward_transform(&sys);
        let ends: Vec<(usize, usize)> = r.cfa.edges.iter().map(|e| (e.source, e.target)).collect();
        // Init=0 Err=1 A=2 B=3 C=4
        assert_eq!(ends, vec![(2, 1), (3, 2), (4, 3), (2, 4), (0, 2)]);
        assert_eq!(plain_ops(&r.cfa.edges[4]), "[(>= n 100)]; a_1 := n");
        assert_eq!(plain_ops(&r.cfa.edges[0]), "n := a_1; [(and (> n 0) (< n 100))]");
    }

    #[test]
    fn edge_clause_bijection() {
        let sys = parse_script(EXAMPLE1).unwrap();
        for r in [forward_transform(&sys), backward_transform(&sys)] {
            for e in &r.cfa.edges {
                assert_eq!(r.edge_to_clause(e).unwrap().id, e.clause_id);
                assert_eq!(r.clause_edge[e.clause_id], e.id);
            }
            let mut fake = r.cfa.edges[0].clone();
            fake.target = 0;
            assert_eq!(r.edge_to_clause(&fake), Err(UnknownEdge(0)));
        }
    }

    #[test]
    fn predicates_without_clauses() {
        let sys = parse_script("(declare-fun P (Int) Bool)(declare-fun Q () Bool)").unwrap();
        let r = forward_transform(&sys);
        assert_eq!(r.cfa.locations.len(), 4);
        assert!(r.cfa.edges.is_empty());
        let empty = forward_transform(&ChcSystem::default());
        assert_eq!(empty.cfa.locations.len(), 2);
    }

    #[test]
    fn clashing_parameter_names() {
        let sys = parse_script("(declare-fun P (Int) Bool)(declare-fun p (Int) Bool)").unwrap();
        let r = forward_transform(&sys);
        assert_ne!(r.pred_vars[0][0].name, r.pred_vars[1][0].name);
    }

    #[test]
    fn mutation_drops_guard() {
        let sys = parse_script(EXAMPLE1).unwrap();
        let r = backward_transform_mutated(&sys, Mutation::DropFactGuard);
        assert_eq!(plain_ops(&r.cfa.edges[0]), "n := a_1");
    }
}
