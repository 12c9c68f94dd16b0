//! Counterexample-guided abstraction refinement over a CFA.
//!
//! The abstractor grows an abstract reachability graph under a per-location
//! precision until it is closed or reaches the error location. Abstract
//! counterexamples are checked concretely; spurious ones are refined away
//! and the affected subtree is pruned and rebuilt.

pub mod arg;
pub mod post;
pub mod precision;
pub mod refine;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::cfa::{Cfa, ConcretePath};
use crate::smt::{SmtError, SolverSession, Unknown};
use crate::ssa::Ssa;
use crate::term::{Term, Var};

pub use arg::{Arg, ArgNode};
pub use post::abstract_post;
pub use precision::{LocPrecision, Precision};
pub use refine::{check_feasible, Feasibility, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Expl,
    PredCart,
    PredBool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Refinement {
    Wp,
    SeqItp,
    BwBinItp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredSplit {
    Whole,
    Atoms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Search {
    Bfs,
    Dfs,
}

macro_rules! names {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),* })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.to_ascii_lowercase().replace('_', "-").as_str() {
                    $($name => Ok($ty::$variant),)*
                    other => Err(format!("unknown {} `{other}`", stringify!($ty).to_lowercase())),
                }
            }
        }
    };
}

names!(Domain { Expl => "expl", PredCart => "pred-cart", PredBool => "pred-bool" });
names!(Refinement { Wp => "wp", SeqItp => "seq-itp", BwBinItp => "bw-bin-itp" });
names!(PredSplit { Whole => "whole", Atoms => "atoms" });
names!(Search { Bfs => "bfs", Dfs => "dfs" });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CegarConfig {
    pub domain: Domain,
    pub refinement: Refinement,
    pub pred_split: PredSplit,
    pub search: Search,
    pub max_refinements: usize,
    pub max_nodes: usize,
    /// Cube limit for the Boolean predicate abstraction.
    pub cube_cap: usize,
    /// Re-verify covering links, abstract posts and refinement progress.
    pub self_check: bool,
}

impl Default for CegarConfig {
    fn default() -> Self {
        CegarConfig {
            domain: Domain::PredCart,
            refinement: Refinement::Wp,
            pred_split: PredSplit::Whole,
            search: Search::Bfs,
            max_refinements: 500,
            max_nodes: 20_000,
            cube_cap: 64,
            self_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Safe(Arg),
    Unsafe(ConcretePath),
    Unknown(String),
}

/// Outcomes of the optional self-checks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelfCheck {
    pub covering_checked: usize,
    pub covering_failed: usize,
    pub post_checked: usize,
    pub post_failed: usize,
    pub progress_checked: usize,
    pub progress_failed: usize,
    /// Spurious counterexamples seen again after being refined.
    pub recurrences: usize,
    pub inconclusive: usize,
}

impl SelfCheck {
    pub fn failures(&self) -> usize {
        self.covering_failed + self.post_failed + self.progress_failed + self.recurrences
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CegarStats {
    pub iterations: usize,
    pub refinements: usize,
    pub nodes_created: usize,
    pub final_precision: usize,
    /// Refinements that needed a fallback strategy.
    pub fallbacks: usize,
    pub self_check: SelfCheck,
}

#[derive(Debug, Clone)]
pub struct CegarResult {
    pub verdict: Verdict,
    pub precision: Precision,
    pub stats: CegarStats,
}

enum Build {
    Closed,
    FoundCex(usize),
}

struct Engine<'a> {
    cfa: &'a Cfa,
    config: &'a CegarConfig,
    session: &'a mut SolverSession,
    precision: Precision,
    arg: Arg,
    worklist: VecDeque<usize>,
    stats: CegarStats,
}

/// Decides reachability of the error location of `cfa`.
pub fn cegar_loop(cfa: &Cfa, config: &CegarConfig, session: &mut SolverSession) -> CegarResult {
    let mut engine = Engine {
        cfa,
        config,
        session,
        precision: Precision::empty(cfa.locations.len()),
        arg: Arg::new(cfa.initial),
        worklist: VecDeque::from([0]),
        stats: CegarStats::default(),
    };
    let verdict = match engine.run() {
        Ok(v) => v,
        Err(Unknown(m)) => Verdict::Unknown(m),
    };
    engine.stats.final_precision = engine.precision.size();
    CegarResult { verdict, precision: engine.precision, stats: engine.stats }
}

impl Engine<'_> {
    fn run(&mut self) -> Result<Verdict, Unknown> {
        let mut refined: HashSet<Vec<usize>> = HashSet::new();
        loop {
            self.stats.iterations += 1;
            let err_node = match self.build_arg()? {
                Build::Closed => {
                    debug_assert!(self.arg.is_closed(self.cfa));
                    if self.config.self_check {
                        self.check_coverings()?;
                    }
                    return Ok(Verdict::Safe(self.arg.clone()));
                }
                Build::FoundCex(n) => n,
            };
            let (nodes, edges) = self.arg.path_to(err_node);
            // labels computed under an older precision are rebuilt first
            if let Some(&stale) = nodes[1..]
                .iter()
                .find(|&&n| self.arg.node(n).stamp < self.precision.at(self.arg.node(n).location).version)
            {
                self.prune(stale);
                continue;
            }
            match check_feasible(self.cfa, &edges, self.session)? {
                Feasibility::Feasible(path) => return Ok(Verdict::Unsafe(path)),
                Feasibility::Infeasible { pivot } => {
                    let prefix = edges[..pivot].to_vec();
                    if !refined.insert(prefix.clone()) {
                        self.stats.self_check.recurrences += 1;
                        return Err(Unknown("refinement stuck: a spurious counterexample recurred".into()));
                    }
                    if self.stats.refinements >= self.config.max_refinements {
                        return Err(Unknown("refinement budget exhausted".into()));
                    }
                    let before: Vec<u64> = self.precision.per_location.iter().map(|l| l.version).collect();
                    self.refine(&prefix)?;
                    self.stats.refinements += 1;
                    let pivot_node = nodes[1..=pivot]
                        .iter()
                        .copied()
                        .find(|&n| {
                            let loc = self.arg.node(n).location;
                            self.precision.at(loc).version != before[loc]
                        })
                        .expect("refinement changed the precision on the path");
                    self.prune(pivot_node);
                }
            }
        }
    }

    fn prune(&mut self, node: usize) {
        let requeue = self.arg.prune(node);
        for n in requeue {
            self.worklist.push_front(n);
        }
    }

    fn pop(&mut self) -> Option<usize> {
        match self.config.search {
            Search::Bfs => self.worklist.pop_front(),
            Search::Dfs => self.worklist.pop_back(),
        }
    }

    fn build_arg(&mut self) -> Result<Build, Unknown> {
        while let Some(id) = self.pop() {
            if self.session.deadline_passed() {
                return Err(Unknown("timeout".into()));
            }
            let node = self.arg.node(id);
            if !node.alive || node.covered_by.is_some() {
                continue;
            }
            let fresh = node.children.is_empty() && node.expanded_edges.is_empty();
            let loc = node.location;
            if fresh && self.try_cover(id)? {
                continue;
            }
            let cfa = self.cfa;
            let pending: Vec<usize> =
                cfa.outgoing(loc).map(|e| e.id).filter(|e| !self.arg.node(id).expanded_edges.contains(e)).collect();
            for (i, eid) in pending.iter().copied().enumerate() {
                let edge = &cfa.edges[eid];
                let target = self.precision.at(edge.target);
                let label = self.arg.node(id).label.clone();
                let post = abstract_post(self.session, self.config.domain, &label, edge, target, self.config.cube_cap)?;
                self.arg.nodes[id].expanded_edges.insert(eid);
                let Some(child_label) = post else { continue };
                if self.arg.nodes.len() >= self.config.max_nodes {
                    return Err(Unknown("node budget exhausted".into()));
                }
                let stamp = target.version;
                let child = self.arg.add_child(id, eid, edge.target, child_label, stamp);
                self.stats.nodes_created += 1;
                if self.config.self_check {
                    self.check_post(id, eid, child)?;
                }
                if edge.target == self.cfa.error {
                    if i + 1 < pending.len() {
                        self.worklist.push_front(id);
                    }
                    return Ok(Build::FoundCex(child));
                }
                self.worklist.push_back(child);
            }
        }
        Ok(Build::Closed)
    }

    /// Covers `id` by an earlier alive, uncovered node at the same location
    /// whose label it implies.
    fn try_cover(&mut self, id: usize) -> Result<bool, Unknown> {
        let node = self.arg.node(id);
        let (loc, label) = (node.location, node.label.clone());
        let mine: HashSet<Term> = label.conjuncts().into_iter().collect();
        let candidates: Vec<(usize, Term)> = self
            .arg
            .nodes
            .iter()
            .take(id)
            .filter(|m| m.alive && m.covered_by.is_none() && m.location == loc)
            .map(|m| (m.id, m.label.clone()))
            .collect();
        for (m, other) in candidates {
            let syntactic = other.conjuncts().iter().all(|c| mine.contains(c));
            let covers = syntactic
                || match self.session.check_valid(&[], &Term::implies(label.clone(), other.clone())) {
                    Ok(b) => b,
                    Err(u) if self.session.deadline_passed() => return Err(u),
                    Err(_) => false,
                };
            if covers {
                self.arg.nodes[id].covered_by = Some(m);
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn check_post(&mut self, parent: usize, edge: usize, child: usize) -> Result<(), Unknown> {
        let mut ssa = Ssa::new();
        let enc = ssa.encode_ops(&self.cfa.edges[edge].ops);
        let post = ssa.rename(&self.arg.node(child).label);
        let f = Term::implies(Term::and([self.arg.node(parent).label.clone(), enc.formula]), post);
        let sc = &mut self.stats.self_check;
        sc.post_checked += 1;
        match self.session.check_valid(&[], &f) {
            Ok(true) => {}
            Ok(false) => {
                log::error!("abstract post of node {parent} along edge {edge} is not an overapproximation");
                self.stats.self_check.post_failed += 1;
            }
            Err(Unknown(m)) => {
                log::debug!("post check inconclusive: {m}");
                self.stats.self_check.inconclusive += 1;
            }
        }
        Ok(())
    }

    fn check_coverings(&mut self) -> Result<(), Unknown> {
        let links: Vec<(usize, usize)> = self.arg.alive().filter_map(|n| n.covered_by.map(|c| (n.id, c))).collect();
        for (n, c) in links {
            let ok = self.arg.node(c).alive && self.arg.node(c).location == self.arg.node(n).location;
            let f = Term::implies(self.arg.node(n).label.clone(), self.arg.node(c).label.clone());
            self.stats.self_check.covering_checked += 1;
            match self.session.check_valid(&[], &f) {
                Ok(true) if ok => {}
                Ok(_) => {
                    log::error!("covering {n} -> {c} does not hold");
                    self.stats.self_check.covering_failed += 1;
                }
                Err(_) => self.stats.self_check.inconclusive += 1,
            }
        }
        Ok(())
    }

    /// Whether the abstraction still admits the edge sequence.
    fn replays(&mut self, edges: &[usize]) -> Result<bool, Unknown> {
        let mut label = crate::term::TRUE;
        for &e in edges {
            let edge = &self.cfa.edges[e];
            let target = self.precision.at(edge.target);
            match abstract_post(self.session, self.config.domain, &label, edge, target, self.config.cube_cap)? {
                Some(l) => label = l,
                None => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Adds precision along an infeasible prefix until the abstraction
    /// excludes it, escalating through stronger strategies.
    fn refine(&mut self, prefix: &[usize]) -> Result<(), Unknown> {
        let configured = match self.config.refinement {
            Refinement::Wp => Method::Wp,
            Refinement::SeqItp => Method::SeqItp,
            Refinement::BwBinItp => Method::BwBinItp,
        };
        let mut plan = VecDeque::from([(configured, self.config.pred_split, false)]);
        if self.config.pred_split == PredSplit::Atoms {
            plan.push_back((configured, PredSplit::Whole, false));
        }
        let alternate = if configured == Method::Wp { Method::SeqItp } else { Method::Wp };
        plan.push_back((alternate, self.config.pred_split, false));
        if self.config.pred_split == PredSplit::Atoms {
            plan.push_back((alternate, PredSplit::Whole, false));
        }

        let mut memo: HashMap<Method, Option<refine::Separators>> = HashMap::new();
        let size_before = self.precision.size();
        let mut first = true;
        while let Some((method, split, deferred)) = plan.pop_front() {
            if let std::collections::hash_map::Entry::Vacant(e) = memo.entry(method) {
                let seps = self.separators(prefix, method)?;
                e.insert(seps);
            }
            let Some(seps) = memo[&method].clone() else { continue };
            if !seps.exact && !deferred {
                // quantified predicates are expensive; use them last
                plan.push_back((method, split, true));
                continue;
            }
            if !first {
                self.stats.fallbacks += 1;
            }
            first = false;
            log::debug!(
                "refining with {method:?}/{split}: {}",
                seps.formulas.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" | ")
            );
            self.add_separators(prefix, &seps.formulas, split);
            if !self.replays(prefix)? {
                return self.progress_ok(size_before);
            }
        }
        Err(Unknown("refinement stuck".into()))
    }

    fn progress_ok(&mut self, size_before: usize) -> Result<(), Unknown> {
        if self.config.self_check {
            self.stats.self_check.progress_checked += 1;
            if self.precision.size() <= size_before {
                self.stats.self_check.progress_failed += 1;
            }
        }
        Ok(())
    }

    fn separators(&mut self, prefix: &[usize], method: Method) -> Result<Option<refine::Separators>, Unknown> {
        match method {
            Method::Wp => refine::wp_separators(self.cfa, prefix, self.session).map(Some),
            _ => match refine::itp_separators(self.cfa, prefix, method, self.session) {
                Ok(s) => Ok(Some(s)),
                Err(SmtError::Unknown(u)) if self.session.deadline_passed() => Err(u),
                Err(e) => {
                    log::debug!("interpolation unavailable ({e}); using weakest preconditions");
                    Ok(None)
                }
            },
        }
    }

    fn add_separators(&mut self, prefix: &[usize], formulas: &[Term], split: PredSplit) {
        for (t, f) in formulas.iter().enumerate() {
            let loc = self.cfa.edges[prefix[t]].target;
            match self.config.domain {
                Domain::Expl => {
                    let vars: Vec<Var> = f.free_vars().into_iter().collect();
                    for v in vars {
                        if self.cfa.variable(&v.name).is_some() {
                            self.precision.add_var(loc, &v.name);
                        }
                    }
                }
                Domain::PredCart | Domain::PredBool => match split {
                    PredSplit::Whole => {
                        self.precision.add_pred(loc, f.clone());
                    }
                    PredSplit::Atoms => {
                        for a in refine::split_atoms(f) {
                            self.precision.add_pred(loc, a);
                        }
                    }
                },
            }
        }
    }
}

/// Runs `f` with the session's deadline temporarily set to `deadline`.
pub fn with_deadline<T>(
    session: &mut SolverSession,
    deadline: Option<Instant>,
    f: impl FnOnce(&mut SolverSession) -> T,
) -> T {
    let old = session.deadline();
    session.set_deadline(deadline);
    let r = f(session);
    session.set_deadline(old);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chc::parse_script;
    use crate::smt::SolverConfig;
    use crate::transform::{transform, Direction};

    const EXAMPLE1: &str = "(set-logic HORN)
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

    fn run(text: &str, dir: Direction, config: &CegarConfig) -> CegarResult {
        let sys = parse_script(text).unwrap();
        let tr = transform(&sys, dir);
        let mut session = SolverSession::new(SolverConfig::from_env());
        cegar_loop(&tr.cfa, config, &mut session)
    }

    fn config(domain: Domain, refinement: Refinement, pred_split: PredSplit) -> CegarConfig {
        CegarConfig { domain, refinement, pred_split, self_check: true, ..CegarConfig::default() }
    }

    fn sample_configs() -> Vec<CegarConfig> {
        vec![
            config(Domain::PredCart, Refinement::Wp, PredSplit::Whole),
            config(Domain::PredBool, Refinement::SeqItp, PredSplit::Atoms),
            config(Domain::Expl, Refinement::Wp, PredSplit::Whole),
        ]
    }

    #[test]
    fn example1_is_safe() {
        for dir in [Direction::Forward, Direction::Backward] {
            for config in sample_configs() {
                let r = run(EXAMPLE1, dir, &config);
                // explicit values cannot express n < 100 over 99 initial values
                let expected = config.domain != Domain::Expl;
                assert!(
                    matches!(r.verdict, Verdict::Safe(_)) == expected && !matches!(r.verdict, Verdict::Unsafe(_)),
                    "{dir} {} {} {}: {:?}",
                    config.domain,
                    config.refinement,
                    config.pred_split,
                    r.verdict
                );
                assert_eq!(r.stats.self_check.failures(), 0, "{:?}", r.stats);
            }
        }
    }

    #[test]
    fn example7_reaches_the_error() {
        let text = EXAMPLE1.replace("(< n 100)) (A n)", "(<= n 100)) (A n)");
        for dir in [Direction::Forward, Direction::Backward] {
            for config in sample_configs() {
                let r = run(&text, dir, &config);
                let Verdict::Unsafe(path) = &r.verdict else { panic!("{dir} {}: {:?}", config.domain, r.verdict) };
                assert_eq!(path.edges.len(), 2);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for d in [Domain::Expl, Domain::PredCart, Domain::PredBool] {
            assert_eq!(d.to_string().parse::<Domain>().unwrap(), d);
        }
        assert_eq!("BW_BIN_ITP".parse::<Refinement>().unwrap(), Refinement::BwBinItp);
        assert!("nwt".parse::<Refinement>().is_err());
    }
}
