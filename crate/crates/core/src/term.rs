//! Quantifier-free LIA + Bool terms.
//!
//! Terms carry clause constraints, CFA guards and assignments, abstraction
//! predicates and model definitions. Quantifiers only appear in model
//! definitions whose projection could not be eliminated, and in the
//! transient formulas handed to the solver for elimination.
//!
//! Integer division and modulo follow SMT-LIB (Euclidean) semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => write!(f, "Int"),
            Sort::Bool => write!(f, "Bool"),
        }
    }
}

/// A sorted variable, identified by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
}

impl Var {
    pub fn new(name: impl Into<String>, sort: Sort) -> Self {
        Var { name: name.into(), sort }
    }

    pub fn int(name: impl Into<String>) -> Self {
        Var::new(name, Sort::Int)
    }

    pub fn boolean(name: impl Into<String>) -> Self {
        Var::new(name, Sort::Bool)
    }

    pub fn term(&self) -> Term {
        Term::Var(self.clone())
    }
}

/// A concrete value of some sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i128),
    Bool(bool),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Bool(_) => Sort::Bool,
        }
    }

    pub fn as_int(&self) -> Option<i128> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Int(_) => None,
        }
    }

    pub fn to_term(self) -> Term {
        match self {
            Value::Int(v) => Term::Int(v),
            Value::Bool(b) => Term::Bool(b),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) if *v < 0 => write!(f, "(- {})", v.unsigned_abs()),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Int(i128),
    Bool(bool),
    Add(Vec<Term>),
    /// `(- a b c)` = a - b - c; always at least two children.
    Sub(Vec<Term>),
    Neg(Box<Term>),
    /// Multiplication by a literal factor; the only product allowed in LIA.
    MulConst(i128, Box<Term>),
    Div(Box<Term>, Box<Term>),
    Mod(Box<Term>, Box<Term>),
    Lt(Box<Term>, Box<Term>),
    Le(Box<Term>, Box<Term>),
    Gt(Box<Term>, Box<Term>),
    Ge(Box<Term>, Box<Term>),
    Eq(Box<Term>, Box<Term>),
    Neq(Box<Term>, Box<Term>),
    And(Vec<Term>),
    Or(Vec<Term>),
    Not(Box<Term>),
    Implies(Box<Term>, Box<Term>),
    Ite(Box<Term>, Box<Term>, Box<Term>),
    Exists(Vec<Var>, Box<Term>),
    Forall(Vec<Var>, Box<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` has no value")]
    Unbound(String),
    #[error("division or modulo by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("sort mismatch in `{0}`")]
    SortMismatch(String),
    #[error("cannot evaluate quantified term")]
    Quantifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ill-sorted term: {0}")]
pub struct SortError(pub String);

pub const TRUE: Term = Term::Bool(true);
pub const FALSE: Term = Term::Bool(false);

fn bx(t: Term) -> Box<Term> {
    Box::new(t)
}

// Smart constructors. They flatten and fold boolean constants but never
// reason about arithmetic, so printed formulas stay close to their source.
#[allow(clippy::should_implement_trait)]
impl Term {
    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term::Var(Var::new(name, sort))
    }

    pub fn int_var(name: impl Into<String>) -> Term {
        Term::Var(Var::int(name))
    }

    pub fn and(parts: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Term::Bool(true) => {}
                Term::Bool(false) => return FALSE,
                Term::And(inner) => {
                    for q in inner {
                        if !out.contains(&q) {
                            out.push(q);
                        }
                    }
                }
                other => {
                    if !out.contains(&other) {
                        out.push(other);
                    }
                }
            }
        }
        match out.len() {
            0 => TRUE,
            1 => out.pop().unwrap(),
            _ => Term::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Term::Bool(false) => {}
                Term::Bool(true) => return TRUE,
                Term::Or(inner) => {
                    for q in inner {
                        if !out.contains(&q) {
                            out.push(q);
                        }
                    }
                }
                other => {
                    if !out.contains(&other) {
                        out.push(other);
                    }
                }
            }
        }
        match out.len() {
            0 => FALSE,
            1 => out.pop().unwrap(),
            _ => Term::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(t: Term) -> Term {
        match t {
            Term::Bool(b) => Term::Bool(!b),
            Term::Not(inner) => *inner,
            other => Term::Not(bx(other)),
        }
    }

    pub fn implies(a: Term, b: Term) -> Term {
        match (&a, &b) {
            (Term::Bool(true), _) => b,
            (Term::Bool(false), _) | (_, Term::Bool(true)) => TRUE,
            _ => Term::Implies(bx(a), bx(b)),
        }
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::Eq(bx(a), bx(b))
    }

    pub fn neq(a: Term, b: Term) -> Term {
        Term::Neq(bx(a), bx(b))
    }

    pub fn lt(a: Term, b: Term) -> Term {
        Term::Lt(bx(a), bx(b))
    }

    pub fn le(a: Term, b: Term) -> Term {
        Term::Le(bx(a), bx(b))
    }

    pub fn gt(a: Term, b: Term) -> Term {
        Term::Gt(bx(a), bx(b))
    }

    pub fn ge(a: Term, b: Term) -> Term {
        Term::Ge(bx(a), bx(b))
    }

    pub fn add(parts: Vec<Term>) -> Term {
        Term::Add(parts)
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(vec![a, b])
    }

    pub fn neg(a: Term) -> Term {
        Term::Neg(bx(a))
    }

    pub fn mul_const(c: i128, a: Term) -> Term {
        Term::MulConst(c, bx(a))
    }

    pub fn div(a: Term, b: Term) -> Term {
        Term::Div(bx(a), bx(b))
    }

    pub fn modulo(a: Term, b: Term) -> Term {
        Term::Mod(bx(a), bx(b))
    }

    pub fn ite(c: Term, t: Term, e: Term) -> Term {
        Term::Ite(bx(c), bx(t), bx(e))
    }

    pub fn exists(vars: Vec<Var>, body: Term) -> Term {
        if vars.is_empty() {
            body
        } else {
            Term::Exists(vars, bx(body))
        }
    }

    pub fn forall(vars: Vec<Var>, body: Term) -> Term {
        if vars.is_empty() {
            body
        } else {
            Term::Forall(vars, bx(body))
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Term::Bool(true))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Term::Bool(false))
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Int(_) | Term::Bool(_) => vec![],
            Term::Add(v) | Term::Sub(v) | Term::And(v) | Term::Or(v) => v.iter().collect(),
            Term::Neg(a) | Term::Not(a) | Term::MulConst(_, a) => vec![a],
            Term::Exists(_, a) | Term::Forall(_, a) => vec![a],
            Term::Div(a, b)
            | Term::Mod(a, b)
            | Term::Lt(a, b)
            | Term::Le(a, b)
            | Term::Gt(a, b)
            | Term::Ge(a, b)
            | Term::Eq(a, b)
            | Term::Neq(a, b)
            | Term::Implies(a, b) => vec![a, b],
            Term::Ite(c, t, e) => vec![c, t, e],
        }
    }

    /// Rebuilds the node with every direct child passed through `f`.
    pub fn map_children(&self, f: &mut dyn FnMut(&Term) -> Term) -> Term {
        match self {
            Term::Var(_) | Term::Int(_) | Term::Bool(_) => self.clone(),
            Term::Add(v) => Term::Add(v.iter().map(&mut *f).collect()),
            Term::Sub(v) => Term::Sub(v.iter().map(&mut *f).collect()),
            Term::And(v) => Term::And(v.iter().map(&mut *f).collect()),
            Term::Or(v) => Term::Or(v.iter().map(&mut *f).collect()),
            Term::Neg(a) => Term::Neg(bx(f(a))),
            Term::Not(a) => Term::Not(bx(f(a))),
            Term::MulConst(c, a) => Term::MulConst(*c, bx(f(a))),
            Term::Div(a, b) => Term::Div(bx(f(a)), bx(f(b))),
            Term::Mod(a, b) => Term::Mod(bx(f(a)), bx(f(b))),
            Term::Lt(a, b) => Term::Lt(bx(f(a)), bx(f(b))),
            Term::Le(a, b) => Term::Le(bx(f(a)), bx(f(b))),
            Term::Gt(a, b) => Term::Gt(bx(f(a)), bx(f(b))),
            Term::Ge(a, b) => Term::Ge(bx(f(a)), bx(f(b))),
            Term::Eq(a, b) => Term::Eq(bx(f(a)), bx(f(b))),
            Term::Neq(a, b) => Term::Neq(bx(f(a)), bx(f(b))),
            Term::Implies(a, b) => Term::Implies(bx(f(a)), bx(f(b))),
            Term::Ite(c, t, e) => Term::Ite(bx(f(c)), bx(f(t)), bx(f(e))),
            Term::Exists(vs, a) => Term::Exists(vs.clone(), bx(f(a))),
            Term::Forall(vs, a) => Term::Forall(vs.clone(), bx(f(a))),
        }
    }

    /// Sort of a term, checking well-sortedness on the way.
    pub fn sort(&self) -> Result<Sort, SortError> {
        let need = |t: &Term, s: Sort| -> Result<(), SortError> {
            let got = t.sort()?;
            if got == s {
                Ok(())
            } else {
                Err(SortError(format!("expected {s}, found {got} in {t}")))
            }
        };
        match self {
            Term::Var(v) => Ok(v.sort),
            Term::Int(_) => Ok(Sort::Int),
            Term::Bool(_) => Ok(Sort::Bool),
            Term::Add(v) | Term::Sub(v) => {
                for c in v {
                    need(c, Sort::Int)?;
                }
                Ok(Sort::Int)
            }
            Term::Neg(a) | Term::MulConst(_, a) => {
                need(a, Sort::Int)?;
                Ok(Sort::Int)
            }
            Term::Div(a, b) | Term::Mod(a, b) => {
                need(a, Sort::Int)?;
                need(b, Sort::Int)?;
                Ok(Sort::Int)
            }
            Term::Lt(a, b) | Term::Le(a, b) | Term::Gt(a, b) | Term::Ge(a, b) => {
                need(a, Sort::Int)?;
                need(b, Sort::Int)?;
                Ok(Sort::Bool)
            }
            Term::Eq(a, b) | Term::Neq(a, b) => {
                let s = a.sort()?;
                need(b, s)?;
                Ok(Sort::Bool)
            }
            Term::And(v) | Term::Or(v) => {
                for c in v {
                    need(c, Sort::Bool)?;
                }
                Ok(Sort::Bool)
            }
            Term::Not(a) => {
                need(a, Sort::Bool)?;
                Ok(Sort::Bool)
            }
            Term::Implies(a, b) => {
                need(a, Sort::Bool)?;
                need(b, Sort::Bool)?;
                Ok(Sort::Bool)
            }
            Term::Ite(c, t, e) => {
                need(c, Sort::Bool)?;
                let s = t.sort()?;
                need(e, s)?;
                Ok(s)
            }
            Term::Exists(_, a) | Term::Forall(_, a) => {
                need(a, Sort::Bool)?;
                Ok(Sort::Bool)
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                if !bound.contains(&v.name) {
                    out.insert(v.clone());
                }
            }
            Term::Exists(vs, body) | Term::Forall(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().map(|v| v.name.clone()));
                body.collect_free(bound, out);
                bound.truncate(n);
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.free_vars().iter().any(|v| v.name == name)
    }

    pub fn has_quantifier(&self) -> bool {
        match self {
            Term::Exists(..) | Term::Forall(..) => true,
            _ => self.children().iter().any(|c| c.has_quantifier()),
        }
    }

    /// Simultaneous substitution of free variables by name.
    pub fn substitute(&self, map: &BTreeMap<String, Term>) -> Term {
        if map.is_empty() {
            return self.clone();
        }
        match self {
            Term::Var(v) => map.get(&v.name).cloned().unwrap_or_else(|| self.clone()),
            Term::Exists(vs, body) | Term::Forall(vs, body) => {
                let inner: BTreeMap<String, Term> = map
                    .iter()
                    .filter(|(k, _)| !vs.iter().any(|v| &v.name == *k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                // rename binders that would capture a free variable of a replacement
                let incoming: BTreeSet<String> =
                    inner.values().flat_map(|t| t.free_vars().into_iter().map(|v| v.name)).collect();
                let mut vs = vs.clone();
                let mut inner = inner;
                if vs.iter().any(|v| incoming.contains(&v.name)) {
                    let mut taken: BTreeSet<String> = incoming.clone();
                    taken.extend(body.free_vars().into_iter().map(|v| v.name));
                    taken.extend(vs.iter().map(|v| v.name.clone()));
                    for v in vs.iter_mut() {
                        if incoming.contains(&v.name) {
                            let mut k = 1;
                            let fresh = loop {
                                let cand = format!("{}'{k}", v.name);
                                if !taken.contains(&cand) {
                                    break cand;
                                }
                                k += 1;
                            };
                            taken.insert(fresh.clone());
                            inner.insert(v.name.clone(), Term::var(fresh.clone(), v.sort));
                            v.name = fresh;
                        }
                    }
                }
                let body = body.substitute(&inner);
                match self {
                    Term::Exists(..) => Term::Exists(vs, bx(body)),
                    _ => Term::Forall(vs, bx(body)),
                }
            }
            _ => self.map_children(&mut |c| c.substitute(map)),
        }
    }

    /// Renames free variables; names absent from `map` are kept.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Term {
        let subst: BTreeMap<String, Term> = self
            .free_vars()
            .into_iter()
            .filter_map(|v| map.get(&v.name).map(|n| (v.name.clone(), Term::Var(Var::new(n.clone(), v.sort)))))
            .collect();
        self.substitute(&subst)
    }

    /// Top-level conjuncts (a non-conjunction is its own single conjunct).
    pub fn conjuncts(&self) -> Vec<Term> {
        match self {
            Term::And(v) => v.iter().flat_map(|c| c.conjuncts()).collect(),
            Term::Bool(true) => vec![],
            other => vec![other.clone()],
        }
    }

    /// Atomic boolean sub-formulas: comparisons, equalities and boolean
    /// variables. Literal constants are skipped.
    pub fn atoms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Term>) {
        match self {
            Term::And(v) | Term::Or(v) => v.iter().for_each(|c| c.collect_atoms(out)),
            Term::Not(a) => a.collect_atoms(out),
            Term::Implies(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Term::Eq(a, b) | Term::Neq(a, b) if a.sort() == Ok(Sort::Bool) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Term::Ite(c, t, e) if t.sort() == Ok(Sort::Bool) => {
                c.collect_atoms(out);
                t.collect_atoms(out);
                e.collect_atoms(out);
            }
            Term::Bool(_) => {}
            Term::Exists(..) | Term::Forall(..) => {
                if !out.contains(self) {
                    out.push(self.clone())
                }
            }
            other => {
                let atom = match other {
                    Term::Neq(a, b) => Term::eq((**a).clone(), (**b).clone()),
                    _ => other.clone(),
                };
                if !out.contains(&atom) {
                    out.push(atom);
                }
            }
        }
    }

    /// Number of nodes; used to bound predicate growth.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Evaluates under `env`. Division or modulo by zero is an error rather
    /// than an arbitrary value.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
        let int = |t: &Term| -> Result<i128, EvalError> {
            t.eval(env)?.as_int().ok_or_else(|| EvalError::SortMismatch(t.to_string()))
        };
        let boolean = |t: &Term| -> Result<bool, EvalError> {
            t.eval(env)?.as_bool().ok_or_else(|| EvalError::SortMismatch(t.to_string()))
        };
        Ok(match self {
            Term::Var(v) => {
                let val = env(&v.name).ok_or_else(|| EvalError::Unbound(v.name.clone()))?;
                if val.sort() != v.sort {
                    return Err(EvalError::SortMismatch(v.name.clone()));
                }
                val
            }
            Term::Int(i) => Value::Int(*i),
            Term::Bool(b) => Value::Bool(*b),
            Term::Add(v) => {
                let mut acc: i128 = 0;
                for c in v {
                    acc = acc.checked_add(int(c)?).ok_or(EvalError::Overflow)?;
                }
                Value::Int(acc)
            }
            Term::Sub(v) => {
                let mut acc = int(&v[0])?;
                for c in &v[1..] {
                    acc = acc.checked_sub(int(c)?).ok_or(EvalError::Overflow)?;
                }
                Value::Int(acc)
            }
            Term::Neg(a) => Value::Int(int(a)?.checked_neg().ok_or(EvalError::Overflow)?),
            Term::MulConst(c, a) => Value::Int(c.checked_mul(int(a)?).ok_or(EvalError::Overflow)?),
            Term::Div(a, b) => {
                let d = int(b)?;
                if d == 0 {
                    return Err(EvalError::DivisionByZero);
                }
                Value::Int(int(a)?.checked_div_euclid(d).ok_or(EvalError::Overflow)?)
            }
            Term::Mod(a, b) => {
                let d = int(b)?;
                if d == 0 {
                    return Err(EvalError::DivisionByZero);
                }
                Value::Int(int(a)?.checked_rem_euclid(d).ok_or(EvalError::Overflow)?)
            }
            Term::Lt(a, b) => Value::Bool(int(a)? < int(b)?),
            Term::Le(a, b) => Value::Bool(int(a)? <= int(b)?),
            Term::Gt(a, b) => Value::Bool(int(a)? > int(b)?),
            Term::Ge(a, b) => Value::Bool(int(a)? >= int(b)?),
            Term::Eq(a, b) => Value::Bool(a.eval(env)? == b.eval(env)?),
            Term::Neq(a, b) => Value::Bool(a.eval(env)? != b.eval(env)?),
            // Strict: every operand is evaluated so that a division by zero
            // anywhere makes the whole term undefined, matching `definedness`.
            Term::And(v) => {
                let vals = v.iter().map(boolean).collect::<Result<Vec<_>, _>>()?;
                Value::Bool(vals.into_iter().all(|b| b))
            }
            Term::Or(v) => {
                let vals = v.iter().map(boolean).collect::<Result<Vec<_>, _>>()?;
                Value::Bool(vals.into_iter().any(|b| b))
            }
            Term::Not(a) => Value::Bool(!boolean(a)?),
            Term::Implies(a, b) => {
                let (a, b) = (boolean(a)?, boolean(b)?);
                Value::Bool(!a || b)
            }
            Term::Ite(c, t, e) => {
                let (c, t, e) = (boolean(c)?, t.eval(env)?, e.eval(env)?);
                if c {
                    t
                } else {
                    e
                }
            }
            Term::Exists(..) | Term::Forall(..) => return Err(EvalError::Quantifier),
        })
    }

    /// Conjunction of `d != 0` over every division and modulo outside
    /// quantifiers whose divisor `d` is not a nonzero literal. A term
    /// evaluates without error exactly when this holds.
    pub fn definedness(&self) -> Term {
        fn walk(t: &Term, out: &mut Vec<Term>) {
            match t {
                Term::Exists(..) | Term::Forall(..) => return,
                Term::Div(_, d) | Term::Mod(_, d) => match &**d {
                    Term::Int(k) if *k != 0 => {}
                    d => out.push(Term::neq((*d).clone(), Term::Int(0))),
                },
                _ => {}
            }
            for c in t.children() {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        if out.is_empty() {
            TRUE
        } else {
            Term::and(out)
        }
    }

    /// Evaluates a closed term.
    pub fn eval_closed(&self) -> Result<Value, EvalError> {
        self.eval(&|_| None)
    }

    pub fn eval_map(&self, env: &BTreeMap<String, Value>) -> Result<Value, EvalError> {
        self.eval(&|n| env.get(n).copied())
    }
}

/// True when `s` can be printed as an SMT-LIB simple symbol.
pub fn is_simple_symbol(s: &str) -> bool {
    const RESERVED: &[&str] = &["_", "!", "as", "let", "exists", "forall", "match", "par", "true", "false"];
    if s.is_empty() || RESERVED.contains(&s) {
        return false;
    }
    let first = s.chars().next().unwrap();
    if first.is_ascii_digit() {
        return false;
    }
    s.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c))
}

/// Prints a symbol, quoting it with `|...|` when necessary.
pub fn fmt_symbol(s: &str) -> String {
    if is_simple_symbol(s) {
        s.to_string()
    } else {
        format!("|{s}|")
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_symbol(&self.name))
    }
}

fn write_nary(f: &mut fmt::Formatter<'_>, op: &str, args: &[Term]) -> fmt::Result {
    write!(f, "({op}")?;
    for a in args {
        write!(f, " {a}")?;
    }
    write!(f, ")")
}

fn write_binders(f: &mut fmt::Formatter<'_>, vs: &[Var]) -> fmt::Result {
    write!(f, "(")?;
    for (i, v) in vs.iter().enumerate() {
        if i > 0 {
            write!(f, " ")?;
        }
        write!(f, "({} {})", v, v.sort)?;
    }
    write!(f, ")")
}

/// SMT-LIB 2 concrete syntax.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Int(i) => write!(f, "{}", Value::Int(*i)),
            Term::Bool(b) => write!(f, "{b}"),
            Term::Add(v) => write_nary(f, "+", v),
            Term::Sub(v) => write_nary(f, "-", v),
            Term::Neg(a) => write!(f, "(- {a})"),
            Term::MulConst(c, a) => write!(f, "(* {} {a})", Value::Int(*c)),
            Term::Div(a, b) => write!(f, "(div {a} {b})"),
            Term::Mod(a, b) => write!(f, "(mod {a} {b})"),
            Term::Lt(a, b) => write!(f, "(< {a} {b})"),
            Term::Le(a, b) => write!(f, "(<= {a} {b})"),
            Term::Gt(a, b) => write!(f, "(> {a} {b})"),
            Term::Ge(a, b) => write!(f, "(>= {a} {b})"),
            Term::Eq(a, b) => write!(f, "(= {a} {b})"),
            Term::Neq(a, b) => write!(f, "(distinct {a} {b})"),
            Term::And(v) => write_nary(f, "and", v),
            Term::Or(v) => write_nary(f, "or", v),
            Term::Not(a) => write!(f, "(not {a})"),
            Term::Implies(a, b) => write!(f, "(=> {a} {b})"),
            Term::Ite(c, t, e) => write!(f, "(ite {c} {t} {e})"),
            Term::Exists(vs, a) => {
                write!(f, "(exists ")?;
                write_binders(f, vs)?;
                write!(f, " {a})")
            }
            Term::Forall(vs, a) => {
                write!(f, "(forall ")?;
                write_binders(f, vs)?;
                write!(f, " {a})")
            }
        }
    }
}

/// Eliminates existentially quantified variables that are pinned by an
/// equality conjunct (`v = t` with `v` not in `t`), substituting them away.
/// Returns the simplified body and the variables that remain quantified.
pub fn one_point_eliminate(body: &Term, vars: &[Var]) -> (Term, Vec<Var>) {
    let mut conj = body.conjuncts();
    let mut remaining: Vec<Var> = vars.to_vec();
    loop {
        let mut progress = false;
        'search: for vi in 0..remaining.len() {
            let v = remaining[vi].clone();
            for ci in 0..conj.len() {
                let def = match &conj[ci] {
                    Term::Eq(a, b) => match (&**a, &**b) {
                        (Term::Var(x), t) if x.name == v.name && !t.mentions(&v.name) => Some(t.clone()),
                        (t, Term::Var(x)) if x.name == v.name && !t.mentions(&v.name) => Some(t.clone()),
                        _ => None,
                    },
                    Term::Var(x) if x.name == v.name && v.sort == Sort::Bool => Some(TRUE),
                    Term::Not(inner) => match &**inner {
                        Term::Var(x) if x.name == v.name && v.sort == Sort::Bool => Some(FALSE),
                        _ => None,
                    },
                    _ => None,
                };
                if let Some(def) = def {
                    conj.remove(ci);
                    let map = BTreeMap::from([(v.name.clone(), def)]);
                    conj = conj.iter().map(|c| c.substitute(&map)).collect();
                    remaining.remove(vi);
                    progress = true;
                    break 'search;
                }
            }
        }
        if !progress {
            break;
        }
    }
    let body = Term::and(conj);
    let fv = body.free_vars();
    remaining.retain(|v| fv.contains(v));
    (body, remaining)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n() -> Term {
        Term::int_var("n")
    }

    #[test]
    fn euclidean_div_mod() {
        let cases = [(7, 3, 2, 1), (-7, 3, -3, 2), (7, -3, -2, 1), (-7, -3, 3, 2)];
        for (a, b, q, r) in cases {
            let d = Term::div(Term::Int(a), Term::Int(b)).eval_closed().unwrap();
            let m = Term::modulo(Term::Int(a), Term::Int(b)).eval_closed().unwrap();
            assert_eq!(d, Value::Int(q), "{a} div {b}");
            assert_eq!(m, Value::Int(r), "{a} mod {b}");
        }
        assert_eq!(Term::modulo(Term::Int(1), Term::Int(0)).eval_closed(), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn substitution_avoids_capture() {
        let x = Var::int("x");
        let t = Term::exists(vec![x.clone()], Term::lt(x.term(), n()));
        let map = BTreeMap::from([("n".to_string(), Term::add(vec![x.term(), Term::Int(1)]))]);
        let r = t.substitute(&map);
        assert_eq!(r.to_string(), "(exists ((|x'1| Int)) (< |x'1| (+ x 1)))");
        assert!(r.free_vars().contains(&x));
    }

    #[test]
    fn printing_negative_literals() {
        let t = Term::lt(Term::mul_const(-2, n()), Term::Int(-5));
        assert_eq!(t.to_string(), "(< (* (- 2) n) (- 5))");
        assert_eq!(fmt_symbol("a b"), "|a b|");
        assert_eq!(fmt_symbol("x!3"), "x!3");
    }

    #[test]
    fn sort_checking_rejects_mixed() {
        let bad = Term::lt(Term::Bool(true), n());
        assert!(bad.sort().is_err());
        assert_eq!(Term::ge(n(), Term::Int(100)).sort(), Ok(Sort::Bool));
    }

    #[test]
    fn and_or_flatten_and_fold() {
        let a = Term::gt(n(), Term::Int(0));
        assert_eq!(Term::and([TRUE, a.clone(), TRUE]), a);
        assert_eq!(Term::and([a.clone(), FALSE]), FALSE);
        assert_eq!(Term::or([a.clone(), a.clone()]), a);
        assert_eq!(Term::not(Term::not(a.clone())), a);
    }

    #[test]
    fn substitution_respects_binders() {
        let x = Var::int("x");
        let body = Term::and([Term::gt(x.term(), n()), Term::lt(n(), Term::Int(3))]);
        let q = Term::exists(vec![x.clone()], body);
        let map = BTreeMap::from([("x".to_string(), Term::Int(9)), ("n".to_string(), Term::Int(1))]);
        let s = q.substitute(&map);
        assert_eq!(s.free_vars().len(), 0);
        assert!(s.to_string().contains("(> x 1)"));
    }

    #[test]
    fn one_point_rule() {
        let v = Var::int("v");
        let body =
            Term::and([Term::eq(v.term(), Term::add(vec![n(), Term::Int(1)])), Term::ge(v.term(), Term::Int(100))]);
        let (b, rest) = one_point_eliminate(&body, &[v]);
        assert!(rest.is_empty());
        assert_eq!(b.to_string(), "(>= (+ n 1) 100)");
    }

    #[test]
    fn atoms_normalize_disequalities() {
        let t = Term::or([Term::neq(n(), Term::Int(1)), Term::not(Term::lt(n(), Term::Int(0)))]);
        let atoms = t.atoms();
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0], Term::eq(n(), Term::Int(1)));
    }
}
