//! SMT-LIB 2 text-protocol driver for an external solver process.
//!
//! One [`SolverSession`] owns one solver process. Every query is wrapped in
//! `push`/`pop` and re-declares its symbols, so a restarted process needs no
//! replayed state. Timeouts are enforced by a watchdog on the response
//! channel: a query that overruns kills the process, which is restarted on
//! the next query.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::read::{read_term, read_value};
use crate::sexp::{self, Sexp};
use crate::term::{one_point_eliminate, Sort, Term, Value, Var, FALSE, TRUE};

pub const SOLVER_ENV: &str = "HORNCFA_SOLVER";
/// Optional file receiving a transcript of every solver exchange.
pub const SOLVER_LOG_ENV: &str = "HORNCFA_SOLVER_LOG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub command: String,
    pub args: Vec<String>,
    pub query_timeout: Duration,
    /// Budget for a single interpolation query, which can stall on inputs
    /// that are easy to decide.
    pub interpolant_timeout: Duration,
    /// Append every command and response to this file.
    pub log_path: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: "z3".into(),
            args: vec!["-in".into()],
            query_timeout: Duration::from_secs(10),
            interpolant_timeout: Duration::from_secs(5),
            log_path: None,
        }
    }
}

impl SolverConfig {
    /// Parses a whitespace-separated command line such as `z3 -in`.
    pub fn from_command_line(line: &str) -> Self {
        let mut parts = line.split_whitespace().map(String::from);
        let command = parts.next().unwrap_or_else(|| "z3".into());
        let mut args: Vec<String> = parts.collect();
        if args.is_empty() && command.ends_with("z3") {
            args.push("-in".into());
        }
        SolverConfig { command, args, ..Default::default() }
    }

    /// The solver named by `HORNCFA_SOLVER`, or `z3 -in`, logging to
    /// `HORNCFA_SOLVER_LOG` when set.
    pub fn from_env() -> Self {
        let mut config = match std::env::var(SOLVER_ENV) {
            Ok(s) if !s.trim().is_empty() => Self::from_command_line(&s),
            _ => Self::default(),
        };
        config.log_path = std::env::var_os(SOLVER_LOG_ENV).map(PathBuf::from);
        config
    }
}

/// Result of a satisfiability query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(BTreeMap<String, Value>),
    Unsat,
    Unknown(String),
}

/// The solver could not answer; the reason is kept for the final verdict.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct Unknown(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("cannot start solver `{0}`: {1}")]
    Spawn(String, String),
    #[error("interpolation is not supported by this solver")]
    Unsupported,
    #[error("interpolation precondition violated: the partition is satisfiable")]
    SatisfiablePartition,
    #[error(transparent)]
    Unknown(#[from] Unknown),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub queries: u64,
    pub restarts: u64,
    pub time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub interpolants: bool,
    pub quantifier_elimination: bool,
}

enum Fail {
    Crash(String),
    Timeout,
    Protocol(String),
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Crash(e.to_string())
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct SolverSession {
    config: SolverConfig,
    proc: Option<Process>,
    caps: Option<Capabilities>,
    stats: SolverStats,
    deadline: Option<Instant>,
    log: Option<File>,
    crashed: bool,
}

impl fmt::Debug for SolverSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverSession").field("config", &self.config).field("stats", &self.stats).finish()
    }
}

/// Declared symbols plus assertions of one `push`/`pop` scope.
pub struct Scope<'s> {
    session: &'s mut SolverSession,
    declared: BTreeSet<String>,
}

fn declare_cmd(v: &Var) -> String {
    format!("(declare-fun {} () {})", v, v.sort)
}

impl SolverSession {
    pub fn new(config: SolverConfig) -> Self {
        let log = config.log_path.as_ref().and_then(|p| {
            File::options()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| log::warn!("cannot open solver log {}: {e}", p.display()))
                .ok()
        });
        SolverSession {
            config,
            proc: None,
            caps: None,
            stats: SolverStats::default(),
            deadline: None,
            log,
            crashed: false,
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// Wall-clock limit for all later queries; `None` removes it.
    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn deadline(&self) -> Option<Instant> {
        self.deadline
    }

    pub fn deadline_passed(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Starts the solver if needed and checks that it answers.
    pub fn probe(&mut self) -> Result<(), SmtError> {
        self.spawn_if_needed()?;
        let r = self.run(|s| {
            s.send("(check-sat)")?;
            s.read_response()
        });
        match r {
            Ok(Sexp::Symbol(ref x)) if x == "sat" => Ok(()),
            Ok(other) => {
                Err(SmtError::Spawn(self.config.command.clone(), format!("unexpected probe response `{other}`")))
            }
            Err(e) => Err(SmtError::Spawn(self.config.command.clone(), e.0)),
        }
    }

    fn spawn_if_needed(&mut self) -> Result<(), SmtError> {
        if self.proc.is_some() {
            return Ok(());
        }
        let mut child = Command::new(&self.config.command)
            .args(&self.config.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SmtError::Spawn(self.config.command.clone(), e.to_string()))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        self.proc = Some(Process { child, stdin, lines: rx });
        let init = "(set-option :print-success false)\n(set-option :produce-models true)";
        if let Err(e) = self.send(init) {
            self.proc = None;
            return Err(SmtError::Spawn(self.config.command.clone(), fail_text(&e)));
        }
        Ok(())
    }

    fn kill(&mut self) {
        if self.proc.take().is_some() {
            self.stats.restarts += 1;
        }
    }

    fn send(&mut self, text: &str) -> Result<(), Fail> {
        if let Some(log) = &mut self.log {
            let _ = writeln!(log, "{text}");
        }
        let p = self.proc.as_mut().ok_or_else(|| Fail::Crash("solver not running".into()))?;
        writeln!(p.stdin, "{text}")?;
        p.stdin.flush()?;
        Ok(())
    }

    fn read_response(&mut self) -> Result<Sexp, Fail> {
        let limit = match self.deadline {
            Some(d) => self.config.query_timeout.min(d.saturating_duration_since(Instant::now())),
            None => self.config.query_timeout,
        };
        let until = Instant::now() + limit;
        let p = self.proc.as_mut().ok_or_else(|| Fail::Crash("solver not running".into()))?;
        let mut buf = String::new();
        loop {
            let left = until.saturating_duration_since(Instant::now());
            match p.lines.recv_timeout(left) {
                Ok(line) => {
                    buf.push_str(&line);
                    buf.push('\n');
                    if sexp::is_complete(&buf) {
                        break;
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    // the solver is still busy; its late answer must not be
                    // read as the response to a later command
                    self.kill();
                    return Err(Fail::Timeout);
                }
                Err(RecvTimeoutError::Disconnected) => return Err(Fail::Crash("solver exited".into())),
            }
        }
        if let Some(log) = &mut self.log {
            let _ = write!(log, "; {}", buf.replace('\n', "\n; "));
            let _ = writeln!(log);
        }
        let resp = sexp::parse_one(buf.trim()).map_err(|e| Fail::Protocol(e.to_string()))?;
        if resp.head() == Some("error") {
            return Err(Fail::Protocol(resp.to_string()));
        }
        Ok(resp)
    }

    /// Runs `body` with crash recovery: a crashed solver is restarted and the
    /// body retried once. Timeouts and protocol errors are not retried.
    fn run<T>(&mut self, mut body: impl FnMut(&mut Self) -> Result<T, Fail>) -> Result<T, Unknown> {
        if self.deadline_passed() {
            return Err(Unknown("timeout".into()));
        }
        let start = Instant::now();
        self.stats.queries += 1;
        let mut attempts = 0;
        let out = loop {
            attempts += 1;
            if let Err(e) = self.spawn_if_needed() {
                break Err(Unknown(e.to_string()));
            }
            match body(self) {
                Ok(v) => break Ok(v),
                Err(Fail::Timeout) => {
                    log::debug!("solver query timed out");
                    self.kill();
                    break Err(Unknown("timeout".into()));
                }
                Err(Fail::Protocol(m)) => {
                    log::warn!("solver protocol error: {m}");
                    self.kill();
                    break Err(Unknown(format!("solver error: {m}")));
                }
                Err(Fail::Crash(m)) => {
                    log::warn!("solver crashed: {m}");
                    self.kill();
                    if attempts >= 2 {
                        break Err(Unknown(format!("solver crashed: {m}")));
                    }
                }
            }
        };
        self.stats.time += start.elapsed();
        out
    }

    /// Runs `body` inside one `push`/`pop` scope.
    pub fn scoped<T>(&mut self, mut body: impl FnMut(&mut Scope) -> Result<T, Unknown>) -> Result<T, Unknown> {
        self.run(|s| {
            s.send("(push 1)")?;
            let mut scope = Scope { session: s, declared: BTreeSet::new() };
            let r = body(&mut scope);
            let out = match r {
                Ok(v) => v,
                Err(u) => {
                    if std::mem::take(&mut s.crashed) {
                        return Err(Fail::Crash(u.0));
                    }
                    // a failed inner query already reset the process
                    if s.proc.is_some() {
                        s.send("(pop 1)")?;
                    }
                    return Ok(Err(u));
                }
            };
            s.send("(pop 1)")?;
            Ok(Ok(out))
        })?
    }

    /// Satisfiability of `assertion`; a `Sat` model covers `declared` and the
    /// free variables of `assertion`.
    pub fn check_sat(&mut self, declared: &[Var], assertion: &Term) -> SatResult {
        let mut vars: BTreeSet<Var> = declared.iter().cloned().collect();
        vars.extend(assertion.free_vars());
        let vars: Vec<Var> = vars.into_iter().collect();
        let r = self.scoped(|q| {
            q.declare(&vars)?;
            q.assert(assertion)?;
            match q.check()? {
                true => {
                    let terms: Vec<Term> = vars.iter().map(|v| v.term()).collect();
                    let vals = q.values(&terms)?;
                    Ok(Some(vars.iter().map(|v| v.name.clone()).zip(vals).collect::<BTreeMap<_, _>>()))
                }
                false => Ok(None),
            }
        });
        match r {
            Ok(None) => SatResult::Unsat,
            Ok(Some(model)) => match assertion.eval_map(&model) {
                Ok(Value::Bool(true)) => SatResult::Sat(model),
                Err(crate::term::EvalError::DivisionByZero) => SatResult::Sat(model),
                other => {
                    log::error!("solver model does not satisfy the query ({other:?})");
                    SatResult::Unknown("model cross-check failed".into())
                }
            },
            Err(Unknown(m)) => SatResult::Unknown(m),
        }
    }

    /// Whether `formula` holds for all values of its free variables.
    pub fn check_valid(&mut self, declared: &[Var], formula: &Term) -> Result<bool, Unknown> {
        if formula.is_true() {
            return Ok(true);
        }
        let neg = Term::not(formula.clone());
        self.is_unsat(declared, &neg)
    }

    pub fn is_unsat(&mut self, declared: &[Var], formula: &Term) -> Result<bool, Unknown> {
        if formula.is_false() {
            return Ok(true);
        }
        let mut vars: BTreeSet<Var> = declared.iter().cloned().collect();
        vars.extend(formula.free_vars());
        let vars: Vec<Var> = vars.into_iter().collect();
        self.scoped(|q| {
            q.declare(&vars)?;
            q.assert(formula)?;
            Ok(!q.check()?)
        })
    }

    /// `base => c` for each candidate `c`, with `base` asserted once.
    /// `None` when `base` itself is unsatisfiable.
    pub fn entailment_batch(&mut self, base: &Term, candidates: &[Term]) -> Result<Option<Vec<bool>>, Unknown> {
        let mut vars: BTreeSet<Var> = base.free_vars();
        for c in candidates {
            vars.extend(c.free_vars());
        }
        let vars: Vec<Var> = vars.into_iter().collect();
        self.scoped(|q| {
            q.declare(&vars)?;
            q.assert(base)?;
            if !q.check()? {
                return Ok(None);
            }
            let mut out = Vec::with_capacity(candidates.len());
            for c in candidates {
                q.push()?;
                q.assert(&Term::not(c.clone()))?;
                out.push(!q.check()?);
                q.pop()?;
            }
            Ok(Some(out))
        })
    }

    /// Every truth assignment to `terms` consistent with `base`. `None` when
    /// there are more than `cap` of them.
    pub fn all_sat(&mut self, base: &Term, terms: &[Term], cap: usize) -> Result<Option<Vec<Vec<bool>>>, Unknown> {
        let mut vars: BTreeSet<Var> = base.free_vars();
        for c in terms {
            vars.extend(c.free_vars());
        }
        let vars: Vec<Var> = vars.into_iter().collect();
        self.scoped(|q| {
            q.declare(&vars)?;
            q.assert(base)?;
            let mut cubes = Vec::new();
            while q.check()? {
                if cubes.len() >= cap {
                    return Ok(None);
                }
                let vals = q.values(terms)?;
                let cube: Vec<bool> = vals.iter().map(|v| v.as_bool() == Some(true)).collect();
                if terms.is_empty() {
                    cubes.push(cube);
                    break;
                }
                let lits: Vec<Term> =
                    terms.iter().zip(&cube).map(|(t, &b)| if b { t.clone() } else { Term::not(t.clone()) }).collect();
                q.assert(&Term::not(Term::and(lits)))?;
                cubes.push(cube);
            }
            Ok(Some(cubes))
        })
    }

    pub fn capabilities(&mut self) -> Capabilities {
        if let Some(c) = self.caps {
            return c;
        }
        let a = Var::int("cap!a");
        let itp = self.run_interpolant(
            std::slice::from_ref(&a),
            &Term::gt(a.term(), Term::Int(0)),
            &Term::lt(a.term(), Term::Int(0)),
        );
        let qe = self.run_qe(&[], &Term::exists(vec![a.clone()], Term::gt(a.term(), Term::Int(0))));
        let caps = Capabilities {
            interpolants: matches!(itp, Ok(Some(_))),
            quantifier_elimination: matches!(qe, Ok(Some(_))),
        };
        log::debug!("solver capabilities: {caps:?}");
        self.caps = Some(caps);
        caps
    }

    fn run_interpolant(&mut self, vars: &[Var], a: &Term, b: &Term) -> Result<Option<Term>, Unknown> {
        let saved = self.config.query_timeout;
        self.config.query_timeout = saved.min(self.config.interpolant_timeout);
        let r = self.run_interpolant_inner(vars, a, b);
        self.config.query_timeout = saved;
        r
    }

    fn run_interpolant_inner(&mut self, vars: &[Var], a: &Term, b: &Term) -> Result<Option<Term>, Unknown> {
        let sorts: BTreeMap<String, Sort> = vars.iter().map(|v| (v.name.clone(), v.sort)).collect();
        let resp = self.scoped(|q| {
            q.declare(vars)?;
            q.session.send(&format!("(get-interpolant {a} {b})")).map_err(|e| Unknown(fail_text(&e)))?;
            match q.session.read_response() {
                Ok(r) => Ok(Some(r)),
                Err(Fail::Protocol(m)) => {
                    log::debug!("interpolation rejected: {m}");
                    Ok(None)
                }
                Err(e) => Err(Unknown(fail_text(&e))),
            }
        });
        let resp = match resp {
            Ok(r) => r,
            // a protocol error kills the process, which `scoped` reports as
            // unknown; for a capability probe that means "unsupported"
            Err(Unknown(m)) if m.starts_with("solver error") => None,
            Err(e) => return Err(e),
        };
        let Some(resp) = resp else { return Ok(None) };
        if resp.is_symbol("sat") || resp.is_symbol("unknown") || resp.is_symbol("unsupported") {
            return Ok(None);
        }
        match read_term(&resp, &|n| sorts.get(n).copied()) {
            Ok(t) => Ok(Some(t)),
            Err(e) => {
                log::warn!("unreadable interpolant `{resp}`: {e}");
                Ok(None)
            }
        }
    }

    /// Binary interpolant of an unsatisfiable pair.
    pub fn interpolant(&mut self, a: &Term, b: &Term) -> Result<Term, SmtError> {
        if !self.capabilities().interpolants {
            return Err(SmtError::Unsupported);
        }
        let mut vars: BTreeSet<Var> = a.free_vars();
        vars.extend(b.free_vars());
        let vars: Vec<Var> = vars.into_iter().collect();
        match self.run_interpolant(&vars, a, b)? {
            Some(t) => Ok(t),
            None => {
                if self.is_unsat(&vars, &Term::and([a.clone(), b.clone()]))? {
                    Err(SmtError::Unsupported)
                } else {
                    Err(SmtError::SatisfiablePartition)
                }
            }
        }
    }

    /// Sequence interpolants `I_1 .. I_{p-1}` of an unsatisfiable partition
    /// `P_1 .. P_p`: `P_1 => I_1`, `I_{t-1} /\ P_t => I_t`, `I_{p-1} /\ P_p`
    /// unsatisfiable, each `I_t` over the symbols shared by both sides.
    pub fn interpolant_seq(&mut self, partition: &[Term]) -> Result<Vec<Term>, SmtError> {
        if !self.capabilities().interpolants {
            return Err(SmtError::Unsupported);
        }
        if partition.len() < 2 {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(partition.len() - 1);
        let mut prev = TRUE;
        for t in 0..partition.len() - 1 {
            let a = Term::and([prev.clone(), partition[t].clone()]);
            let b = Term::and(partition[t + 1..].iter().cloned());
            let i = if a.is_false() { FALSE } else { self.interpolant(&a, &b)? };
            out.push(i.clone());
            prev = i;
        }
        Ok(out)
    }

    fn run_qe(&mut self, vars: &[Var], formula: &Term) -> Result<Option<Term>, Unknown> {
        let sorts: BTreeMap<String, Sort> = vars.iter().map(|v| (v.name.clone(), v.sort)).collect();
        let resp = self.scoped(|q| {
            q.declare(vars)?;
            q.assert_raw(formula)?;
            q.session.send("(apply (then qe simplify))").map_err(|e| Unknown(fail_text(&e)))?;
            q.session.read_response().map_err(|e| Unknown(fail_text(&e)))
        });
        let resp = match resp {
            Ok(r) => r,
            Err(Unknown(m)) if m.starts_with("solver error") => return Ok(None),
            Err(e) => return Err(e),
        };
        // (goals (goal f1 .. fn :precision p :depth d))
        let Some(goal) =
            resp.as_list().filter(|_| resp.head() == Some("goals")).and_then(|l| l.get(1)).and_then(|g| g.as_list())
        else {
            return Ok(None);
        };
        let mut parts = Vec::new();
        for f in &goal[1..] {
            if matches!(f, Sexp::Keyword(_)) {
                break;
            }
            match read_term(f, &|n| sorts.get(n).copied()) {
                Ok(t) => parts.push(t),
                Err(e) => {
                    log::debug!("unreadable elimination result `{f}`: {e}");
                    return Ok(None);
                }
            }
        }
        Ok(Some(if parts.is_empty() { TRUE } else { Term::and(parts) }))
    }

    /// Quantifier-free equivalent of `formula` where possible. The flag is
    /// `false` when a quantifier survives.
    pub fn eliminate(&mut self, formula: &Term) -> Result<(Term, bool), Unknown> {
        if !formula.has_quantifier() {
            return Ok((formula.clone(), true));
        }
        let pre = one_point_top(formula);
        if !pre.has_quantifier() {
            return Ok((pre, true));
        }
        let vars: Vec<Var> = pre.free_vars().into_iter().collect();
        match self.run_qe(&vars, &pre)? {
            Some(t) if !t.has_quantifier() => Ok((t, true)),
            _ => Ok((pre, false)),
        }
    }

    /// Solver-simplified equivalent of a quantifier-free formula.
    pub fn simplify(&mut self, t: &Term) -> Result<Term, Unknown> {
        if matches!(t, Term::Bool(_)) || t.size() < 4 {
            return Ok(t.clone());
        }
        let vars: Vec<Var> = t.free_vars().into_iter().collect();
        Ok(self.run_qe(&vars, t)?.unwrap_or_else(|| t.clone()))
    }

    /// Values of `terms` in one model of `formula`, or `None` if unsatisfiable.
    pub fn model_values(&mut self, formula: &Term, terms: &[Term]) -> Result<Option<Vec<Value>>, Unknown> {
        let mut vars: BTreeSet<Var> = formula.free_vars();
        for t in terms {
            vars.extend(t.free_vars());
        }
        let vars: Vec<Var> = vars.into_iter().collect();
        self.scoped(|q| {
            q.declare(&vars)?;
            q.assert(formula)?;
            if q.check()? {
                Ok(Some(q.values(terms)?))
            } else {
                Ok(None)
            }
        })
    }
}

/// One-point elimination applied to top-level existential blocks.
fn one_point_top(t: &Term) -> Term {
    match t {
        Term::Exists(vs, body) => {
            let body = one_point_top(body);
            let (b, rest) = one_point_eliminate(&body, vs);
            Term::exists(rest, b)
        }
        Term::And(_) | Term::Or(_) | Term::Not(_) => t.map_children(&mut |c| one_point_top(c)),
        _ => t.clone(),
    }
}

fn fail_text(f: &Fail) -> String {
    match f {
        Fail::Crash(m) => format!("solver crashed: {m}"),
        Fail::Timeout => "timeout".into(),
        Fail::Protocol(m) => format!("solver error: {m}"),
    }
}

impl Scope<'_> {
    fn lift<T>(&mut self, r: Result<T, Fail>) -> Result<T, Unknown> {
        r.map_err(|e| {
            let text = fail_text(&e);
            self.session.crashed = matches!(e, Fail::Crash(_));
            // the process state is unknown after any failure
            self.session.kill();
            Unknown(text)
        })
    }

    pub fn declare(&mut self, vars: &[Var]) -> Result<(), Unknown> {
        let mut cmds = Vec::new();
        for v in vars {
            if self.declared.insert(v.name.clone()) {
                cmds.push(declare_cmd(v));
            }
        }
        if cmds.is_empty() {
            return Ok(());
        }
        let r = self.session.send(&cmds.join("\n"));
        self.lift(r)
    }

    /// Asserts `t` together with the definedness of its divisions.
    pub fn assert(&mut self, t: &Term) -> Result<(), Unknown> {
        let def = t.definedness();
        let missing: Vec<Var> = t.free_vars().into_iter().filter(|v| !self.declared.contains(&v.name)).collect();
        self.declare(&missing)?;
        let text = if def.is_true() { format!("(assert {t})") } else { format!("(assert {def})\n(assert {t})") };
        let r = self.session.send(&text);
        self.lift(r)
    }

    /// Asserts `t` under the solver's own total semantics for division.
    pub fn assert_raw(&mut self, t: &Term) -> Result<(), Unknown> {
        let missing: Vec<Var> = t.free_vars().into_iter().filter(|v| !self.declared.contains(&v.name)).collect();
        self.declare(&missing)?;
        let r = self.session.send(&format!("(assert {t})"));
        self.lift(r)
    }

    pub fn push(&mut self) -> Result<(), Unknown> {
        let r = self.session.send("(push 1)");
        self.lift(r)
    }

    pub fn pop(&mut self) -> Result<(), Unknown> {
        let r = self.session.send("(pop 1)");
        self.lift(r)
    }

    /// `true` for sat, `false` for unsat.
    pub fn check(&mut self) -> Result<bool, Unknown> {
        let r = self.session.send("(check-sat)").and_then(|_| self.session.read_response());
        match self.lift(r)? {
            Sexp::Symbol(s) if s == "sat" => Ok(true),
            Sexp::Symbol(s) if s == "unsat" => Ok(false),
            other => {
                // drop the process: a solver that gave up may be in any state
                self.session.kill();
                Err(Unknown(format!("solver answered {other}")))
            }
        }
    }

    pub fn values(&mut self, terms: &[Term]) -> Result<Vec<Value>, Unknown> {
        if terms.is_empty() {
            return Ok(Vec::new());
        }
        let for_solver: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
        let r = self
            .session
            .send(&format!("(get-value ({}))", for_solver.join(" ")))
            .and_then(|_| self.session.read_response());
        let resp = self.lift(r)?;
        let pairs = resp.as_list().unwrap_or(&[]);
        if pairs.len() != terms.len() {
            self.session.kill();
            return Err(Unknown(format!("malformed get-value response `{resp}`")));
        }
        let mut out = Vec::new();
        for p in pairs {
            match p.as_list() {
                Some([_, v]) => match read_value(v) {
                    Ok(v) => out.push(v),
                    Err(e) => {
                        self.session.kill();
                        return Err(Unknown(format!("unreadable value `{v}`: {e}")));
                    }
                },
                _ => {
                    self.session.kill();
                    return Err(Unknown(format!("malformed get-value entry `{p}`")));
                }
            }
        }
        Ok(out)
    }
}
