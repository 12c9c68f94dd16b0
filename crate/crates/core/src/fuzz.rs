//! Differential testing of both transformation directions against the
//! bounded refuter on generated systems.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crate::cegar::CegarConfig;
use crate::oracle::{bounded_refute, random_script, random_system, BoundedResult, SizeParams};
use crate::pipeline::{solve_with, Answer, SolveOptions, SolveOutcome, Status};
use crate::proof::Validation;
use crate::smt::{SolverConfig, SolverSession};
use crate::transform::{Direction, Mutation};

#[derive(Debug, Clone)]
pub struct FuzzOptions {
    pub count: usize,
    pub seed_base: u64,
    pub depth: usize,
    pub size: SizeParams,
    pub cegar: CegarConfig,
    pub timeout: Duration,
    pub workers: usize,
    #[doc(hidden)]
    pub mutation: Mutation,
}

impl Default for FuzzOptions {
    fn default() -> Self {
        FuzzOptions {
            count: 100,
            seed_base: 0,
            depth: 8,
            size: SizeParams::default(),
            cegar: CegarConfig::default(),
            timeout: Duration::from_secs(20),
            workers: 1,
            mutation: Mutation::None,
        }
    }
}

/// What the oracle said about one system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVerdict {
    /// A derivation of `false` with this many steps.
    Refuted(usize),
    NoneWithinBound,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub seed: u64,
    pub forward: Status,
    pub backward: Status,
    pub oracle: OracleVerdict,
    /// Sat or unsat claims whose check neither confirmed nor refuted them.
    pub unconfirmed: usize,
    /// Violated agreement conditions; empty when the case passes.
    pub problems: Vec<String>,
}

impl FuzzCase {
    /// All three verdicts are decisive.
    pub fn conclusive(&self) -> bool {
        self.forward != Status::Unknown
            && self.backward != Status::Unknown
            && self.oracle != OracleVerdict::Inconclusive
    }
}

#[derive(Debug, Clone, Default)]
pub struct FuzzReport {
    pub cases: Vec<FuzzCase>,
}

impl FuzzReport {
    pub fn failures(&self) -> impl Iterator<Item = &FuzzCase> {
        self.cases.iter().filter(|c| !c.problems.is_empty())
    }

    pub fn summary(&self) -> String {
        let count = |f: &dyn Fn(&FuzzCase) -> bool| self.cases.iter().filter(|c| f(c)).count();
        format!(
            "{} systems: {} conclusive, {} sat, {} unsat, {} with an unknown verdict, {} unconfirmed answers, {} disagreements",
            self.cases.len(),
            count(&|c| c.conclusive()),
            count(&|c| c.forward == Status::Sat || c.backward == Status::Sat),
            count(&|c| c.forward == Status::Unsat || c.backward == Status::Unsat),
            count(&|c| c.forward == Status::Unknown || c.backward == Status::Unknown),
            self.cases.iter().map(|c| c.unconfirmed).sum::<usize>(),
            self.failures().count()
        )
    }
}

fn refutation_len(out: &SolveOutcome) -> Option<usize> {
    match &out.answer {
        Answer::Unsat(r) => Some(r.len()),
        _ => None,
    }
}

fn check_case(seed: u64, options: &FuzzOptions, session: &mut SolverSession) -> FuzzCase {
    let system = random_system(seed, options.size);
    let run = |direction, session: &mut SolverSession| {
        let o = SolveOptions {
            direction,
            cegar: options.cegar.clone(),
            timeout: Some(options.timeout),
            mutation: options.mutation,
        };
        solve_with(&system, &o, session)
    };
    let fw = run(Direction::Forward, session);
    let bw = run(Direction::Backward, session);
    let mut problems = Vec::new();
    let mut unconfirmed = 0;
    for (name, out) in [("forward", &fw), ("backward", &bw)] {
        match &out.validation {
            Validation::Invalid(m) => problems.push(format!("{name} {} answer is wrong: {m}", out.claimed())),
            Validation::Inconclusive(m) if out.claimed() != Status::Unknown => {
                log::warn!("seed {seed}: {name} {} answer could not be checked: {m}", out.claimed());
                unconfirmed += 1;
            }
            _ => {}
        }
    }
    let (f, b) = (fw.status(), bw.status());
    if f != Status::Unknown && b != Status::Unknown && f != b {
        problems.push(format!("forward says {f}, backward says {b}"));
    }
    // the oracle must reach any refutation the pipeline found
    let depth = [refutation_len(&fw), refutation_len(&bw)].into_iter().flatten().fold(options.depth, usize::max);
    let oracle = match bounded_refute(&system, depth, session) {
        BoundedResult::Refuted(r) => OracleVerdict::Refuted(r.len()),
        BoundedResult::NoneWithinBound => OracleVerdict::NoneWithinBound,
        BoundedResult::Inconclusive(m) => {
            log::debug!("seed {seed}: oracle inconclusive: {m}");
            OracleVerdict::Inconclusive
        }
    };
    for (name, s) in [("forward", f), ("backward", b)] {
        match (oracle, s) {
            (OracleVerdict::Refuted(n), Status::Sat) => {
                problems.push(format!("oracle refutes in {n} steps but {name} says sat"))
            }
            (OracleVerdict::NoneWithinBound, Status::Unsat) => {
                problems.push(format!("{name} says unsat but the oracle finds nothing within {depth} steps"))
            }
            _ => {}
        }
    }
    FuzzCase { seed, forward: f, backward: b, oracle, unconfirmed, problems }
}

/// Runs `options.count` generated systems starting at `options.seed_base`.
pub fn run_fuzz(options: &FuzzOptions, solver: &SolverConfig) -> FuzzReport {
    let next = AtomicUsize::new(0);
    let cases = Mutex::new(Vec::with_capacity(options.count));
    std::thread::scope(|scope| {
        for _ in 0..options.workers.max(1) {
            scope.spawn(|| {
                let mut session = SolverSession::new(solver.clone());
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= options.count {
                        break;
                    }
                    let seed = options.seed_base + i as u64;
                    let case = check_case(seed, options, &mut session);
                    if !case.problems.is_empty() {
                        log::warn!("seed {seed}: {}", case.problems.join("; "));
                    }
                    cases.lock().unwrap().push(case);
                }
            });
        }
    });
    let mut cases = cases.into_inner().unwrap();
    cases.sort_by_key(|c| c.seed);
    FuzzReport { cases }
}

/// The script of a failing case, with its problems as leading comments.
pub fn reproducer(case: &FuzzCase, size: SizeParams) -> String {
    let mut out = format!("; seed {}\n", case.seed);
    for p in &case.problems {
        out.push_str(&format!("; {p}\n"));
    }
    out.push_str(&random_script(case.seed, size));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_batch_agrees() {
        let options = FuzzOptions { count: 12, ..FuzzOptions::default() };
        let report = run_fuzz(&options, &SolverConfig::from_env());
        assert_eq!(report.cases.len(), 12);
        let failures: Vec<String> = report.failures().map(|c| reproducer(c, options.size)).collect();
        assert!(failures.is_empty(), "{}", failures.join("\n"));
    }

    #[test]
    fn dropped_fact_guard_is_caught() {
        let options = FuzzOptions { count: 30, mutation: Mutation::DropFactGuard, ..FuzzOptions::default() };
        let report = run_fuzz(&options, &SolverConfig::from_env());
        assert!(report.failures().count() > 0, "{}", report.summary());
    }
}
