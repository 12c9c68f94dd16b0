//! Satisfiability of linear constrained Horn clauses over integer arithmetic,
//! decided by translating the clause system into a control-flow automaton and
//! model checking it with counterexample-guided abstraction refinement.

pub mod bench;
pub mod cegar;
pub mod cfa;
pub mod chc;
pub mod fuzz;
pub mod oracle;
pub mod pipeline;
pub mod proof;
pub mod read;
pub mod sexp;
pub mod smt;
pub mod ssa;
pub mod term;
pub mod transform;
