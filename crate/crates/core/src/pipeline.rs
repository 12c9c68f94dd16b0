//! End-to-end solving: transform, verify, build the answer and check it
//! before reporting.

use std::fmt;
use std::time::{Duration, Instant};

use crate::cegar::{cegar_loop, Arg, CegarConfig, CegarStats, Verdict};
use crate::chc::ChcSystem;
use crate::proof::{build_model, build_refutation, validate_model, validate_refutation, Model, Refutation, Validation};
use crate::smt::{SolverSession, SolverStats};
use crate::transform::{backward_transform_mutated, forward_transform, Direction, Mutation, TransformResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOptions {
    pub direction: Direction,
    pub cegar: CegarConfig,
    /// Wall-clock budget for the whole task.
    pub timeout: Option<Duration>,
    #[doc(hidden)]
    pub mutation: Mutation,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            direction: Direction::Forward,
            cegar: CegarConfig::default(),
            timeout: None,
            mutation: Mutation::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Sat(Model),
    Unsat(Refutation),
    Unknown(String),
}

/// The three-valued verdict line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Sat => "sat",
            Status::Unsat => "unsat",
            Status::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// The claimed answer, before validation.
    pub answer: Answer,
    pub validation: Validation,
    pub transform: TransformResult,
    pub arg: Option<Arg>,
    pub cegar: CegarStats,
    pub solver: SolverStats,
    pub elapsed: Duration,
}

impl SolveOutcome {
    /// The verdict to report: a claim counts only once validated.
    pub fn status(&self) -> Status {
        match (&self.answer, &self.validation) {
            (Answer::Sat(_), Validation::Valid) => Status::Sat,
            (Answer::Unsat(_), Validation::Valid) => Status::Unsat,
            _ => Status::Unknown,
        }
    }

    /// The claim before validation.
    pub fn claimed(&self) -> Status {
        match &self.answer {
            Answer::Sat(_) => Status::Sat,
            Answer::Unsat(_) => Status::Unsat,
            Answer::Unknown(_) => Status::Unknown,
        }
    }

    /// Why the status is unknown, if it is.
    pub fn reason(&self) -> Option<String> {
        match (&self.answer, &self.validation) {
            (Answer::Unknown(m), _) => Some(m.clone()),
            (_, Validation::Valid) => None,
            (_, v) => Some(format!("answer failed validation ({v})")),
        }
    }
}

fn transform_for(system: &ChcSystem, options: &SolveOptions) -> TransformResult {
    match options.direction {
        Direction::Forward => forward_transform(system),
        Direction::Backward => backward_transform_mutated(system, options.mutation),
    }
}

/// Solves `system` with a caller-provided session.
pub fn solve_with(system: &ChcSystem, options: &SolveOptions, session: &mut SolverSession) -> SolveOutcome {
    let start = Instant::now();
    let before = session.stats();
    let saved_deadline = session.deadline();
    session.set_deadline(options.timeout.map(|t| start + t));
    let tr = transform_for(system, options);
    let result = cegar_loop(&tr.cfa, &options.cegar, session);
    let mut arg = None;
    let (answer, validation) = match result.verdict {
        Verdict::Unknown(m) => (Answer::Unknown(m), Validation::Inconclusive("no answer".into())),
        Verdict::Unsafe(path) => match build_refutation(&path, &tr) {
            Ok(r) => {
                let v = validate_refutation(system, &r);
                (Answer::Unsat(r), v)
            }
            Err(m) => (Answer::Unknown(m), Validation::Inconclusive("no answer".into())),
        },
        Verdict::Safe(a) => {
            let built = build_model(&a, &tr, session, false);
            arg = Some(a);
            match built {
                Ok(model) => {
                    let v = validate_model(system, &model, session);
                    (Answer::Sat(model), v)
                }
                Err(u) => (Answer::Unknown(format!("model construction: {}", u.0)), Validation::Inconclusive(u.0)),
            }
        }
    };
    if let (Answer::Sat(_) | Answer::Unsat(_), v) = (&answer, &validation) {
        if !v.is_valid() {
            log::error!("{} answer not confirmed: {v}", options.direction);
        }
    }
    session.set_deadline(saved_deadline);
    let after = session.stats();
    SolveOutcome {
        answer,
        validation,
        transform: tr,
        arg,
        cegar: result.stats,
        solver: SolverStats {
            queries: after.queries - before.queries,
            restarts: after.restarts - before.restarts,
            time: after.time.saturating_sub(before.time),
        },
        elapsed: start.elapsed(),
    }
}
