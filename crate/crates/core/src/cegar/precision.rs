//! Per-location abstraction precision.

use std::collections::BTreeSet;

use crate::term::Term;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocPrecision {
    /// Predicates, in insertion order.
    pub preds: Vec<Term>,
    /// Tracked variable names for the explicit-value domain.
    pub vars: BTreeSet<String>,
    /// Bumped on every change.
    pub version: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Precision {
    pub per_location: Vec<LocPrecision>,
}

impl Precision {
    /// Empty precision for `locations` locations.
    pub fn empty(locations: usize) -> Self {
        Precision { per_location: vec![LocPrecision::default(); locations] }
    }

    pub fn at(&self, loc: usize) -> &LocPrecision {
        &self.per_location[loc]
    }

    /// Adds a predicate; `true` if it was new. Constants and negations of
    /// known predicates are not new.
    pub fn add_pred(&mut self, loc: usize, p: Term) -> bool {
        if matches!(p, Term::Bool(_)) {
            return false;
        }
        let lp = &mut self.per_location[loc];
        let neg = Term::not(p.clone());
        if lp.preds.contains(&p) || lp.preds.contains(&neg) {
            return false;
        }
        lp.preds.push(p);
        lp.version += 1;
        true
    }

    pub fn add_var(&mut self, loc: usize, name: &str) -> bool {
        let lp = &mut self.per_location[loc];
        if lp.vars.insert(name.to_string()) {
            lp.version += 1;
            true
        } else {
            false
        }
    }

    /// Total number of predicates and tracked variables.
    pub fn size(&self) -> usize {
        self.per_location.iter().map(|l| l.preds.len() + l.vars.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::TRUE;

    #[test]
    fn grows_monotonically() {
        let mut p = Precision::empty(3);
        let a = Term::lt(Term::int_var("a_1"), Term::Int(100));
        assert!(p.add_pred(2, a.clone()));
        assert!(!p.add_pred(2, a.clone()));
        assert!(!p.add_pred(2, Term::not(a)));
        assert!(!p.add_pred(2, TRUE));
        assert!(p.add_var(1, "x"));
        assert!(!p.add_var(1, "x"));
        assert_eq!(p.size(), 2);
        assert_eq!(p.at(2).version, 1);
    }
}
