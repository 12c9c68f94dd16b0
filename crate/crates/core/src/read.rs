//! Conversion of SMT-LIB s-expressions into [`Term`]s.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::sexp::Sexp;
use crate::term::{Sort, Term, Value, Var, TRUE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadError {
    #[error("malformed term `{0}`")]
    Malformed(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unsupported theory: {0}")]
    UnsupportedTheory(String),
    #[error("{0}")]
    Sort(String),
}

pub fn read_sort(s: &Sexp) -> Result<Sort, ReadError> {
    match s.as_symbol() {
        Some("Int") => Ok(Sort::Int),
        Some("Bool") => Ok(Sort::Bool),
        _ => Err(ReadError::UnsupportedTheory(format!("sort {s}"))),
    }
}

/// Reads a `((x Int) (y Bool))` binder list.
pub fn read_binders(s: &Sexp) -> Result<Vec<Var>, ReadError> {
    let items = s.as_list().ok_or_else(|| ReadError::Malformed(s.to_string()))?;
    items
        .iter()
        .map(|b| match b.as_list() {
            Some([name, sort]) => {
                let name = name.as_symbol().ok_or_else(|| ReadError::Malformed(b.to_string()))?;
                Ok(Var::new(name, read_sort(sort)?))
            }
            _ => Err(ReadError::Malformed(b.to_string())),
        })
        .collect()
}

/// Term reader with a lexical scope of bound variables on top of a global
/// symbol table supplied by the caller.
pub struct TermReader<'a> {
    globals: &'a dyn Fn(&str) -> Option<Sort>,
    scopes: Vec<BTreeMap<String, Binding>>,
}

#[derive(Clone)]
enum Binding {
    Var(Sort),
    Let(Term),
}

impl<'a> TermReader<'a> {
    pub fn new(globals: &'a dyn Fn(&str) -> Option<Sort>) -> Self {
        TermReader { globals, scopes: Vec::new() }
    }

    pub fn push_vars(&mut self, vars: &[Var]) {
        self.scopes.push(vars.iter().map(|v| (v.name.clone(), Binding::Var(v.sort))).collect());
    }

    pub fn pop(&mut self) {
        self.scopes.pop();
    }

    fn lookup(&self, name: &str) -> Option<Binding> {
        for scope in self.scopes.iter().rev() {
            if let Some(b) = scope.get(name) {
                return Some(b.clone());
            }
        }
        (self.globals)(name).map(Binding::Var)
    }

    pub fn read(&mut self, s: &Sexp) -> Result<Term, ReadError> {
        let t = self.read_inner(s)?;
        t.sort().map_err(|e| ReadError::Sort(e.0))?;
        Ok(t)
    }

    fn read_inner(&mut self, s: &Sexp) -> Result<Term, ReadError> {
        match s {
            Sexp::Numeral(n) => n
                .parse::<i128>()
                .map(Term::Int)
                .map_err(|_| ReadError::UnsupportedTheory(format!("numeral {n} too large"))),
            Sexp::Symbol(name) => match name.as_str() {
                "true" => Ok(Term::Bool(true)),
                "false" => Ok(Term::Bool(false)),
                _ => match self.lookup(name) {
                    Some(Binding::Var(sort)) => Ok(Term::var(name.clone(), sort)),
                    Some(Binding::Let(t)) => Ok(t),
                    None => Err(ReadError::UnknownSymbol(name.clone())),
                },
            },
            Sexp::List(items) => self.read_app(s, items),
            _ => Err(ReadError::Malformed(s.to_string())),
        }
    }

    fn read_app(&mut self, whole: &Sexp, items: &[Sexp]) -> Result<Term, ReadError> {
        let malformed = || ReadError::Malformed(whole.to_string());
        let head = items.first().ok_or_else(malformed)?;
        let op = match head {
            Sexp::Symbol(op) => op.as_str(),
            // ((_ divisible k) t), as printed by some solvers
            Sexp::List(idx) if idx.len() == 3 && idx[0].is_symbol("_") && idx[1].is_symbol("divisible") => {
                let k = match &idx[2] {
                    Sexp::Numeral(n) => n.parse::<i128>().map_err(|_| malformed())?,
                    _ => return Err(malformed()),
                };
                let [arg] = &items[1..] else {
                    return Err(malformed());
                };
                let t = self.read_inner(arg)?;
                return Ok(Term::eq(Term::modulo(t, Term::Int(k)), Term::Int(0)));
            }
            _ => return Err(malformed()),
        };
        let rest = &items[1..];
        match op {
            "let" => {
                let [bindings, body] = rest else {
                    return Err(malformed());
                };
                let mut scope = BTreeMap::new();
                for b in bindings.as_list().ok_or_else(malformed)? {
                    match b.as_list() {
                        Some([name, value]) => {
                            let name = name.as_symbol().ok_or_else(malformed)?;
                            let value = self.read_inner(value)?;
                            scope.insert(name.to_string(), Binding::Let(value));
                        }
                        _ => return Err(malformed()),
                    }
                }
                self.scopes.push(scope);
                let body = self.read_inner(body);
                self.scopes.pop();
                body
            }
            "forall" | "exists" => {
                let [binders, body] = rest else {
                    return Err(malformed());
                };
                let vars = read_binders(binders)?;
                self.push_vars(&vars);
                let body = self.read_inner(body);
                self.pop();
                let body = body?;
                Ok(if op == "forall" { Term::forall(vars, body) } else { Term::exists(vars, body) })
            }
            "!" => {
                let body = rest.first().ok_or_else(malformed)?;
                self.read_inner(body)
            }
            _ => {
                let args = rest.iter().map(|a| self.read_inner(a)).collect::<Result<Vec<_>, _>>()?;
                build_app(op, args).map_err(|e| match e {
                    ReadError::Malformed(_) => malformed(),
                    other => other,
                })
            }
        }
    }
}

fn chain(args: Vec<Term>, f: fn(Term, Term) -> Term) -> Result<Term, ReadError> {
    if args.len() < 2 {
        return Err(ReadError::Malformed(String::new()));
    }
    Ok(Term::and(args.windows(2).map(|w| f(w[0].clone(), w[1].clone()))))
}

fn constant_int(t: &Term) -> Option<i128> {
    if !t.free_vars().is_empty() {
        return None;
    }
    t.eval_closed().ok().and_then(|v| v.as_int())
}

/// Builds an interpreted function application.
pub fn build_app(op: &str, mut args: Vec<Term>) -> Result<Term, ReadError> {
    let bad = || ReadError::Malformed(String::new());
    Ok(match op {
        "and" => Term::and(args),
        "or" => Term::or(args),
        "not" => {
            let [a] = <[Term; 1]>::try_from(args).map_err(|_| bad())?;
            Term::not(a)
        }
        "=>" => {
            if args.len() < 2 {
                return Err(bad());
            }
            let mut acc = args.pop().unwrap();
            while let Some(a) = args.pop() {
                acc = Term::Implies(Box::new(a), Box::new(acc));
            }
            acc
        }
        "xor" => {
            let [a, b] = <[Term; 2]>::try_from(args).map_err(|_| bad())?;
            Term::not(Term::eq(a, b))
        }
        "ite" => {
            let [c, t, e] = <[Term; 3]>::try_from(args).map_err(|_| bad())?;
            Term::ite(c, t, e)
        }
        "=" => chain(args, Term::eq)?,
        "distinct" => {
            if args.len() < 2 {
                return Err(bad());
            }
            let mut parts = Vec::new();
            for i in 0..args.len() {
                for j in i + 1..args.len() {
                    parts.push(Term::neq(args[i].clone(), args[j].clone()));
                }
            }
            Term::and(parts)
        }
        "<" => chain(args, Term::lt)?,
        "<=" => chain(args, Term::le)?,
        ">" => chain(args, Term::gt)?,
        ">=" => chain(args, Term::ge)?,
        "+" => match args.len() {
            0 => return Err(bad()),
            1 => args.pop().unwrap(),
            _ => Term::Add(args),
        },
        "-" => match args.len() {
            0 => return Err(bad()),
            1 => match args.pop().unwrap() {
                Term::Int(v) => Term::Int(-v),
                a => Term::neg(a),
            },
            _ => Term::Sub(args),
        },
        "*" => {
            let mut coeff: i128 = 1;
            let mut rest: Vec<Term> = Vec::new();
            for a in args {
                match constant_int(&a) {
                    Some(c) => {
                        coeff = coeff
                            .checked_mul(c)
                            .ok_or_else(|| ReadError::UnsupportedTheory("constant overflow".into()))?
                    }
                    None => rest.push(a),
                }
            }
            match rest.len() {
                0 => Term::Int(coeff),
                1 => {
                    let t = rest.pop().unwrap();
                    if coeff == 1 {
                        t
                    } else {
                        Term::mul_const(coeff, t)
                    }
                }
                _ => return Err(ReadError::UnsupportedTheory("nonlinear multiplication".into())),
            }
        }
        "div" => {
            let [a, b] = <[Term; 2]>::try_from(args).map_err(|_| bad())?;
            Term::div(a, b)
        }
        "mod" => {
            let [a, b] = <[Term; 2]>::try_from(args).map_err(|_| bad())?;
            Term::modulo(a, b)
        }
        "abs" => {
            let [a] = <[Term; 1]>::try_from(args).map_err(|_| bad())?;
            Term::ite(Term::lt(a.clone(), Term::Int(0)), Term::neg(a.clone()), a)
        }
        other => return Err(ReadError::UnknownSymbol(other.to_string())),
    })
}

/// Reads a term whose free symbols are resolved by `globals`.
pub fn read_term(s: &Sexp, globals: &dyn Fn(&str) -> Option<Sort>) -> Result<Term, ReadError> {
    TermReader::new(globals).read(s)
}

/// Reads a value literal (`5`, `(- 5)`, `true`).
pub fn read_value(s: &Sexp) -> Result<Value, ReadError> {
    let t = read_term(s, &|_| None)?;
    t.eval_closed().map_err(|_| ReadError::Malformed(s.to_string()))
}

/// Conjunction of a list of read formulas; `true` when empty.
pub fn conjoin(parts: Vec<Term>) -> Term {
    if parts.is_empty() {
        TRUE
    } else {
        Term::and(parts)
    }
}
