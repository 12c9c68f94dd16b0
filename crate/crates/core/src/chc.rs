//! Linear CHC systems and the SMT-LIB 2 `HORN` frontend.
//!
//! Every asserted implication becomes one [`Clause`] whose predicate atoms
//! are applied to distinct plain variables. Argument terms that are not
//! fresh variables are replaced by new variables, with the original term
//! conjoined to the constraint as an equality.
//!
//! Both encodings used in CHC-COMP are accepted:
//!
//! ```text
//! (assert (forall ((n Int)) (=> (and (A n) (>= n 100)) false)))
//! (assert (not (exists ((n Int)) (and (A n) (>= n 100)))))
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::read::{read_binders, read_sort, ReadError, TermReader};
use crate::sexp::{self, Sexp, SyntaxError};
use crate::term::{fmt_symbol, Sort, Term, Var, TRUE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub param_sorts: Vec<Sort>,
    pub index: usize,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.param_sorts.len()
    }
}

/// A predicate applied to distinct clause variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub pred: usize,
    pub args: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    /// Assertion ordinal, starting at 0.
    pub id: usize,
    /// `None` when the head is `false`.
    pub head: Option<Atom>,
    pub body: Option<Atom>,
    pub constraint: Term,
    /// The universally quantified variables of the clause.
    pub vars: Vec<Var>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClauseKind {
    Fact,
    Induction,
    Query,
    /// `false <- phi` with no predicate in the body.
    DegenerateQuery,
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClauseKind::Fact => "fact",
            ClauseKind::Induction => "induction",
            ClauseKind::Query => "query",
            ClauseKind::DegenerateQuery => "degenerate-query",
        };
        write!(f, "{s}")
    }
}

pub fn classify(clause: &Clause) -> ClauseKind {
    match (&clause.head, &clause.body) {
        (Some(_), None) => ClauseKind::Fact,
        (Some(_), Some(_)) => ClauseKind::Induction,
        (None, Some(_)) => ClauseKind::Query,
        (None, None) => ClauseKind::DegenerateQuery,
    }
}

impl Clause {
    pub fn kind(&self) -> ClauseKind {
        classify(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChcSystem {
    pub predicates: Vec<PredicateDecl>,
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unsupported theory: {0}")]
    UnsupportedTheory(String),
    #[error("clause {clause} is nonlinear: {atoms} predicate atoms in the body")]
    NonlinearClause { clause: usize, atoms: usize },
    #[error("unsupported clause shape: {0}")]
    UnsupportedShape(String),
    #[error("malformed script: {0}")]
    Malformed(String),
}

impl From<ReadError> for FrontendError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::UnsupportedTheory(s) => FrontendError::UnsupportedTheory(s),
            other => FrontendError::Malformed(other.to_string()),
        }
    }
}

impl ChcSystem {
    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn queries(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| c.head.is_none())
    }

    pub fn facts(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| c.kind() == ClauseKind::Fact)
    }

    /// Prints the system as an SMT-LIB 2 `HORN` script that parses back to
    /// the same system.
    pub fn to_smtlib(&self) -> String {
        let mut out = String::from("(set-logic HORN)\n");
        for p in &self.predicates {
            let sorts: Vec<String> = p.param_sorts.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!("(declare-fun {} ({}) Bool)\n", fmt_symbol(&p.name), sorts.join(" ")));
        }
        for c in &self.clauses {
            out.push_str(&format!("(assert {})\n", self.clause_to_smtlib(c)));
        }
        out.push_str("(check-sat)\n");
        out
    }

    pub fn atom_to_smtlib(&self, atom: &Atom) -> String {
        let name = fmt_symbol(&self.predicates[atom.pred].name);
        if atom.args.is_empty() {
            name
        } else {
            let args: Vec<String> = atom.args.iter().map(|v| v.to_string()).collect();
            format!("({} {})", name, args.join(" "))
        }
    }

    pub fn clause_to_smtlib(&self, c: &Clause) -> String {
        let mut body_parts = Vec::new();
        if let Some(b) = &c.body {
            body_parts.push(self.atom_to_smtlib(b));
        }
        if !c.constraint.is_true() || body_parts.is_empty() {
            body_parts.push(c.constraint.to_string());
        }
        let body =
            if body_parts.len() == 1 { body_parts.pop().unwrap() } else { format!("(and {})", body_parts.join(" ")) };
        let head = match &c.head {
            Some(h) => self.atom_to_smtlib(h),
            None => "false".to_string(),
        };
        let imp = format!("(=> {body} {head})");
        if c.vars.is_empty() {
            imp
        } else {
            let binders: Vec<String> = c.vars.iter().map(|v| format!("({} {})", v, v.sort)).collect();
            format!("(forall ({}) {imp})", binders.join(" "))
        }
    }

    /// Human-readable `H <- B /\ phi` form.
    pub fn clause_to_string(&self, c: &Clause) -> String {
        let atom = |a: &Atom| {
            let args: Vec<&str> = a.args.iter().map(|v| v.name.as_str()).collect();
            format!("{}({})", self.predicates[a.pred].name, args.join(", "))
        };
        let head = c.head.as_ref().map(atom).unwrap_or_else(|| "false".into());
        let mut body = Vec::new();
        if let Some(b) = &c.body {
            body.push(atom(b));
        }
        body.push(c.constraint.to_string());
        format!("{head} <- {}", body.join(" /\\ "))
    }
}

/// Parses an SMT-LIB 2 `HORN` script.
pub fn parse_script(text: &str) -> Result<ChcSystem, FrontendError> {
    let commands = sexp::parse_all(text)?;
    let mut sys = ChcSystem::default();
    for cmd in &commands {
        let items = cmd.as_list().ok_or_else(|| FrontendError::Malformed(format!("not a command: {cmd}")))?;
        let head = cmd.head().ok_or_else(|| FrontendError::Malformed(format!("not a command: {cmd}")))?;
        match head {
            "set-logic" => {
                let logic = items.get(1).and_then(|s| s.as_symbol()).unwrap_or("");
                if logic != "HORN" {
                    log::warn!("logic `{logic}` is not HORN; continuing");
                }
            }
            "set-info" | "set-option" | "check-sat" | "exit" | "get-model" | "get-info" => {}
            "declare-fun" => {
                let [_, name, params, ret] = items else {
                    return Err(FrontendError::Malformed(cmd.to_string()));
                };
                let name = name.as_symbol().ok_or_else(|| FrontendError::Malformed(cmd.to_string()))?;
                if read_sort(ret)? != Sort::Bool {
                    return Err(FrontendError::UnsupportedTheory(format!(
                        "uninterpreted function `{name}` with non-Bool range"
                    )));
                }
                let param_sorts = params
                    .as_list()
                    .ok_or_else(|| FrontendError::Malformed(cmd.to_string()))?
                    .iter()
                    .map(read_sort)
                    .collect::<Result<Vec<_>, _>>()?;
                if sys.predicate_index(name).is_some() {
                    return Err(FrontendError::Malformed(format!("predicate `{name}` declared twice")));
                }
                let index = sys.predicates.len();
                sys.predicates.push(PredicateDecl { name: name.to_string(), param_sorts, index });
            }
            "assert" => {
                let [_, e] = items else {
                    return Err(FrontendError::Malformed(cmd.to_string()));
                };
                let id = sys.clauses.len();
                let clause = normalize_clause(&sys.predicates, id, e)?;
                sys.clauses.push(clause);
            }
            other => return Err(FrontendError::UnsupportedShape(format!("command `{other}`"))),
        }
    }
    Ok(sys)
}

struct RawAtom<'s> {
    pred: usize,
    args: &'s [Sexp],
}

struct ClauseBuilder<'p> {
    preds: &'p [PredicateDecl],
    id: usize,
    vars: Vec<Var>,
    /// Scope visible while reading sub-terms: source name -> clause variable.
    scope: BTreeMap<String, Var>,
    atoms: Vec<RawAtom<'p>>,
    constraints: Vec<Term>,
}

/// Turns one asserted formula into a normalized clause.
pub fn normalize_clause<'a>(
    preds: &'a [PredicateDecl],
    id: usize,
    assertion: &'a Sexp,
) -> Result<Clause, FrontendError> {
    let mut b = ClauseBuilder {
        preds,
        id,
        vars: Vec::new(),
        scope: BTreeMap::new(),
        atoms: Vec::new(),
        constraints: Vec::new(),
    };
    let mut e = assertion;
    loop {
        match e.head() {
            Some("forall") => {
                let l = e.as_list().unwrap();
                let [_, binders, body] = l else {
                    return Err(FrontendError::Malformed(e.to_string()));
                };
                b.bind(&read_binders(binders)?);
                e = body;
            }
            Some("!") => e = &e.as_list().unwrap()[1],
            _ => break,
        }
    }
    let head = b.shape(e)?;
    b.finish(head)
}

enum HeadShape<'s> {
    False,
    Atom(RawAtom<'s>),
}

impl<'p> ClauseBuilder<'p> {
    fn bind(&mut self, vars: &[Var]) {
        for v in vars {
            let mut name = v.name.clone();
            while self.vars.iter().any(|w| w.name == name) {
                name.push('!');
            }
            let var = Var::new(name, v.sort);
            self.vars.push(var.clone());
            self.scope.insert(v.name.clone(), var);
        }
    }

    fn pred_of(&self, s: &Sexp) -> Option<usize> {
        let name = match s {
            Sexp::Symbol(n) => n,
            Sexp::List(l) => l.first()?.as_symbol()?,
            _ => return None,
        };
        if self.scope.contains_key(name) {
            return None;
        }
        self.preds.iter().position(|p| p.name == name)
    }

    fn mentions_pred(&self, s: &Sexp) -> bool {
        match s {
            Sexp::Symbol(_) => self.pred_of(s).is_some(),
            Sexp::List(l) => self.pred_of(s).is_some() || l.iter().any(|c| self.mentions_pred(c)),
            _ => false,
        }
    }

    fn shape(&mut self, e: &'p Sexp) -> Result<HeadShape<'p>, FrontendError> {
        match e.head() {
            Some("=>") => {
                let l = e.as_list().unwrap();
                if l.len() < 3 {
                    return Err(FrontendError::Malformed(e.to_string()));
                }
                for premise in &l[1..l.len() - 1] {
                    self.body(premise)?;
                }
                self.head(&l[l.len() - 1])
            }
            Some("not") => {
                let l = e.as_list().unwrap();
                let [_, inner] = l else {
                    return Err(FrontendError::Malformed(e.to_string()));
                };
                let mut inner = inner;
                while inner.head() == Some("exists") {
                    let l = inner.as_list().unwrap();
                    let [_, binders, body] = l else {
                        return Err(FrontendError::Malformed(inner.to_string()));
                    };
                    self.bind(&read_binders(binders)?);
                    inner = body;
                }
                self.body(inner)?;
                Ok(HeadShape::False)
            }
            _ => self.head(e),
        }
    }

    fn head(&mut self, h: &'p Sexp) -> Result<HeadShape<'p>, FrontendError> {
        if h.is_symbol("false") {
            return Ok(HeadShape::False);
        }
        if let Some(pred) = self.pred_of(h) {
            let args = match h {
                Sexp::List(l) => &l[1..],
                _ => &[],
            };
            return Ok(HeadShape::Atom(RawAtom { pred, args }));
        }
        if self.mentions_pred(h) {
            return Err(FrontendError::UnsupportedShape(format!(
                "clause {}: head is not a single predicate atom",
                self.id
            )));
        }
        // An interpreted head `body => psi` is the query `body /\ not psi => false`.
        let psi = self.read(h)?;
        self.constraints.push(Term::not(psi));
        Ok(HeadShape::False)
    }

    fn body(&mut self, e: &'p Sexp) -> Result<(), FrontendError> {
        match e.head() {
            Some("and") => {
                for c in &e.as_list().unwrap()[1..] {
                    self.body(c)?;
                }
                Ok(())
            }
            Some("exists") => {
                let l = e.as_list().unwrap();
                let [_, binders, body] = l else {
                    return Err(FrontendError::Malformed(e.to_string()));
                };
                self.bind(&read_binders(binders)?);
                self.body(body)
            }
            Some("!") => self.body(&e.as_list().unwrap()[1]),
            _ => {
                if let Some(pred) = self.pred_of(e) {
                    let args = match e {
                        Sexp::List(l) => &l[1..],
                        _ => &[],
                    };
                    self.atoms.push(RawAtom { pred, args });
                    Ok(())
                } else if self.mentions_pred(e) {
                    Err(FrontendError::UnsupportedShape(format!(
                        "clause {}: predicate atom under negation or disjunction",
                        self.id
                    )))
                } else {
                    let t = self.read(e)?;
                    self.constraints.push(t);
                    Ok(())
                }
            }
        }
    }

    fn read(&self, e: &Sexp) -> Result<Term, FrontendError> {
        let scope = &self.scope;
        let globals = |n: &str| scope.get(n).map(|v| v.sort);
        let mut reader = TermReader::new(&globals);
        // Renamed binders are exposed under their source names.
        let renames: Vec<(String, Var)> =
            scope.iter().filter(|(k, v)| **k != v.name).map(|(k, v)| (k.clone(), v.clone())).collect();
        let t = reader.read(e)?;
        if renames.is_empty() {
            return Ok(t);
        }
        let map: BTreeMap<String, Term> = renames.into_iter().map(|(k, v)| (k, Term::Var(v))).collect();
        Ok(t.substitute(&map))
    }

    fn fresh(&mut self, stem: &str, sort: Sort) -> Var {
        let mut k = 1;
        loop {
            let name = format!("{stem}!{k}");
            if !self.vars.iter().any(|v| v.name == name) {
                let v = Var::new(name, sort);
                self.vars.push(v.clone());
                return v;
            }
            k += 1;
        }
    }

    fn normalize_atom(&mut self, raw: &RawAtom, stem: &str) -> Result<Atom, FrontendError> {
        let decl = &self.preds[raw.pred];
        if raw.args.len() != decl.arity() {
            return Err(FrontendError::Malformed(format!(
                "clause {}: `{}` applied to {} arguments, declared with {}",
                self.id,
                decl.name,
                raw.args.len(),
                decl.arity()
            )));
        }
        let sorts = decl.param_sorts.clone();
        let mut args: Vec<Var> = Vec::new();
        for (arg, sort) in raw.args.iter().zip(sorts) {
            let t = self.read(arg)?;
            if t.sort().map_err(|e| FrontendError::Malformed(e.0))? != sort {
                return Err(FrontendError::Malformed(format!(
                    "clause {}: argument `{arg}` of `{}` is not {sort}",
                    self.id, self.preds[raw.pred].name
                )));
            }
            match t {
                Term::Var(v) if !args.contains(&v) => args.push(v),
                other => {
                    let v = self.fresh(stem, sort);
                    self.constraints.push(Term::eq(Term::Var(v.clone()), other));
                    args.push(v);
                }
            }
        }
        Ok(Atom { pred: raw.pred, args })
    }

    fn finish(mut self, head: HeadShape) -> Result<Clause, FrontendError> {
        if self.atoms.len() > 1 {
            return Err(FrontendError::NonlinearClause { clause: self.id, atoms: self.atoms.len() });
        }
        let raw_body = self.atoms.pop();
        let body = match &raw_body {
            Some(raw) => Some(self.normalize_atom(raw, "y")?),
            None => None,
        };
        let head = match head {
            HeadShape::False => None,
            HeadShape::Atom(raw) => Some(self.normalize_atom(&raw, "x")?),
        };
        let constraint =
            if self.constraints.is_empty() { TRUE } else { Term::and(std::mem::take(&mut self.constraints)) };
        Ok(Clause { id: self.id, head, body, constraint, vars: self.vars })
    }
}

/// Free variables of a clause: constraint plus atom arguments.
pub fn clause_free_vars(c: &Clause) -> BTreeSet<Var> {
    let mut fv = c.constraint.free_vars();
    for a in c.head.iter().chain(c.body.iter()) {
        fv.extend(a.args.iter().cloned());
    }
    fv
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const EXAMPLE1: &str = "(set-logic HORN)
(declare-fun A (Int) Bool)
(declare-fun B (Int Int) Bool)
(declare-fun C (Int Int) Bool)
(assert (forall ((n Int)) (=> (and (> n 0) (< n 100)) (A n))))
(assert (forall ((n Int) (x Int)) (=> (and (A n) (> x 0)) (B n x))))
(assert (forall ((n Int) (x Int) (y Int)) (=> (and (B n x) (= y (- n x)) (> y 0)) (C y x))))
(assert (forall ((n Int) (x Int) (y Int)) (=> (and (C y x) (= n (+ y (mod y x)))) (A n))))
(assert (forall ((n Int)) (=> (and (A n) (>= n 100)) false)))
(check-sat)
";

    #[test]
    fn example1_shape() {
        let sys = parse_script(EXAMPLE1).unwrap();
        let arities: Vec<(String, usize)> = sys.predicates.iter().map(|p| (p.name.clone(), p.arity())).collect();
        assert_eq!(arities, vec![("A".into(), 1), ("B".into(), 2), ("C".into(), 2)]);
        let kinds: Vec<ClauseKind> = sys.clauses.iter().map(classify).collect();
        use ClauseKind::*;
        assert_eq!(kinds, vec![Fact, Induction, Induction, Induction, Query]);
        // plain distinct arguments are kept as they are
        let c3 = &sys.clauses[2];
        assert_eq!(c3.head.as_ref().unwrap().args, vec![Var::int("y"), Var::int("x")]);
        assert_eq!(c3.constraint.to_string(), "(and (= y (- n x)) (> y 0))");
    }

    #[test]
    fn empty_script() {
        let sys = parse_script("(set-logic HORN)(check-sat)").unwrap();
        assert!(sys.predicates.is_empty());
        assert!(sys.clauses.is_empty());
    }

    #[test]
    fn non_variable_head_argument_becomes_equality() {
        let sys = parse_script(
            "(declare-fun A (Int) Bool)
             (assert (forall ((n Int)) (=> (> n 0) (A (+ n 1)))))",
        )
        .unwrap();
        let c = &sys.clauses[0];
        assert_eq!(c.kind(), ClauseKind::Fact);
        assert_eq!(c.head.as_ref().unwrap().args, vec![Var::int("x!1")]);
        assert_eq!(c.constraint.to_string(), "(and (> n 0) (= x!1 (+ n 1)))");
        assert_eq!(c.vars, vec![Var::int("n"), Var::int("x!1")]);
    }

    #[test]
    fn repeated_argument_is_split() {
        let sys = parse_script(
            "(declare-fun B (Int Int) Bool)
             (assert (forall ((n Int) (x Int)) (=> (> x 0) (B (- n 1) x))))
             (assert (forall ((n Int)) (=> (B n n) false)))",
        )
        .unwrap();
        let c0 = &sys.clauses[0];
        assert_eq!(c0.head.as_ref().unwrap().args, vec![Var::int("x!1"), Var::int("x")]);
        assert_eq!(c0.constraint.to_string(), "(and (> x 0) (= x!1 (- n 1)))");
        let c1 = &sys.clauses[1];
        assert_eq!(c1.body.as_ref().unwrap().args, vec![Var::int("n"), Var::int("y!1")]);
        assert_eq!(c1.constraint.to_string(), "(= y!1 n)");
    }

    #[test]
    fn not_exists_query_matches_implication_form() {
        let a = parse_script(
            "(declare-fun A (Int) Bool)
             (assert (not (exists ((n Int)) (and (A n) (>= n 100)))))",
        )
        .unwrap();
        let b = parse_script(
            "(declare-fun A (Int) Bool)
             (assert (forall ((n Int)) (=> (and (A n) (>= n 100)) false)))",
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.clauses[0].kind(), ClauseKind::Query);
    }

    #[test]
    fn interpreted_head_becomes_query() {
        let sys = parse_script(
            "(declare-fun A (Int) Bool)
             (assert (forall ((n Int)) (=> (A n) (< n 100))))",
        )
        .unwrap();
        assert_eq!(sys.clauses[0].kind(), ClauseKind::Query);
        assert_eq!(sys.clauses[0].constraint.to_string(), "(not (< n 100))");
    }

    #[test]
    fn degenerate_query() {
        let sys = parse_script("(assert (=> (> 1 0) false))").unwrap();
        assert_eq!(sys.clauses[0].kind(), ClauseKind::DegenerateQuery);
    }

    #[test]
    fn rejections() {
        let nonlinear = "(declare-fun A (Int) Bool)
            (assert (forall ((x Int) (y Int)) (=> (and (A x) (A y)) (A (+ x y)))))";
        assert!(matches!(parse_script(nonlinear), Err(FrontendError::NonlinearClause { atoms: 2, .. })));
        let negated = "(declare-fun A (Int) Bool)
            (assert (forall ((x Int)) (=> (not (A x)) (A (+ x 1)))))";
        assert!(matches!(parse_script(negated), Err(FrontendError::UnsupportedShape(_))));
        let disj = "(declare-fun A (Int) Bool)
            (assert (forall ((x Int)) (=> (or (A x) (> x 0)) false)))";
        assert!(matches!(parse_script(disj), Err(FrontendError::UnsupportedShape(_))));
        let real = "(declare-fun A (Real) Bool)";
        assert!(matches!(parse_script(real), Err(FrontendError::UnsupportedTheory(_))));
        let mul = "(declare-fun A (Int) Bool)
            (assert (forall ((x Int)) (=> (A x) (A (* x x)))))";
        assert!(matches!(parse_script(mul), Err(FrontendError::UnsupportedTheory(_))));
        assert!(matches!(parse_script("(assert (> x"), Err(FrontendError::Syntax(_))));
    }

    #[test]
    fn free_vars_covered_by_clause_vars() {
        let sys = parse_script(EXAMPLE1).unwrap();
        for c in &sys.clauses {
            let vars: BTreeSet<Var> = c.vars.iter().cloned().collect();
            assert!(clause_free_vars(c).is_subset(&vars));
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let sys = parse_script(EXAMPLE1).unwrap();
        let again = parse_script(&sys.to_smtlib()).unwrap();
        assert_eq!(sys, again);
        assert_eq!(again.to_smtlib(), sys.to_smtlib());
    }

    #[test]
    fn bool_parameters() {
        let sys = parse_script(
            "(declare-fun P (Bool Int) Bool)
             (assert (forall ((b Bool) (x Int)) (=> (and b (= x 0)) (P b x))))
             (assert (forall ((b Bool) (x Int)) (=> (and (P b x) (not b)) false)))",
        )
        .unwrap();
        assert_eq!(sys.predicates[0].param_sorts, vec![Sort::Bool, Sort::Int]);
        assert_eq!(sys.clauses[1].kind(), ClauseKind::Query);
    }
}
