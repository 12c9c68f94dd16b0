//! Python bindings: solve, transform and bounded refutation on SMT-LIB
//! text, plus the deterministic system generator used for fuzzing.

use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use horncfa::cegar::CegarConfig;
use horncfa::chc::{parse_script, ChcSystem};
use horncfa::oracle::{bounded_refute, random_script, BoundedResult, SizeParams};
use horncfa::pipeline::{solve_with, Answer, SolveOptions, Status};
use horncfa::smt::{SolverConfig, SolverSession};
use horncfa::transform::{transform as to_cfa, Direction};

fn system(text: &str) -> PyResult<ChcSystem> {
    parse_script(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn direction(s: &str) -> PyResult<Direction> {
    match s {
        "fw" | "forward" => Ok(Direction::Forward),
        "bw" | "backward" => Ok(Direction::Backward),
        other => Err(PyValueError::new_err(format!("unknown direction `{other}`"))),
    }
}

fn session(solver: Option<&str>) -> PyResult<SolverSession> {
    let config = solver.map_or_else(SolverConfig::from_env, SolverConfig::from_command_line);
    let mut s = SolverSession::new(config);
    s.probe().map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(s)
}

/// Outcome of `solve`. `model` is set for a validated `sat`, `refutation`
/// for a validated `unsat`.
#[pyclass(frozen, get_all)]
struct SolveResult {
    status: String,
    model: Option<String>,
    refutation: Option<String>,
    reason: Option<String>,
    iterations: usize,
    refinements: usize,
    elapsed: f64,
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!("SolveResult(status={:?}, elapsed={:.3})", self.status, self.elapsed)
    }
}

#[pyfunction]
#[pyo3(signature = (text, direction="fw", domain="pred-cart", refinement="wp", pred_split="whole", timeout=None, solver=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    text: &str,
    direction: &str,
    domain: &str,
    refinement: &str,
    pred_split: &str,
    timeout: Option<f64>,
    solver: Option<&str>,
) -> PyResult<SolveResult> {
    let sys = system(text)?;
    let bad = |m: String| PyValueError::new_err(m);
    let options = SolveOptions {
        direction: self::direction(direction)?,
        cegar: CegarConfig {
            domain: domain.parse().map_err(bad)?,
            refinement: refinement.parse().map_err(bad)?,
            pred_split: pred_split.parse().map_err(bad)?,
            ..CegarConfig::default()
        },
        timeout: timeout
            .map(Duration::try_from_secs_f64)
            .transpose()
            .map_err(|e| PyValueError::new_err(e.to_string()))?,
        ..SolveOptions::default()
    };
    let mut s = session(solver)?;
    let out = py.detach(|| solve_with(&sys, &options, &mut s));
    let status = out.status();
    Ok(SolveResult {
        status: status.to_string(),
        model: match (&out.answer, status) {
            (Answer::Sat(m), Status::Sat) => Some(m.to_smtlib()),
            _ => None,
        },
        refutation: match (&out.answer, status) {
            (Answer::Unsat(r), Status::Unsat) => Some(r.display(&sys)),
            _ => None,
        },
        reason: out.reason(),
        iterations: out.cegar.iterations,
        refinements: out.cegar.refinements,
        elapsed: out.elapsed.as_secs_f64(),
    })
}

/// The CFA of a system as DOT.
#[pyfunction]
#[pyo3(signature = (text, direction="fw"))]
fn transform(text: &str, direction: &str) -> PyResult<String> {
    Ok(to_cfa(&system(text)?, self::direction(direction)?).cfa.to_dot())
}

/// `("unsat", steps)` when a refutation within `depth` clause applications
/// exists, `("unknown", reason)` otherwise.
#[pyfunction]
#[pyo3(signature = (text, depth=8, solver=None))]
fn oracle(py: Python<'_>, text: &str, depth: usize, solver: Option<&str>) -> PyResult<(String, String)> {
    if depth == 0 {
        return Err(PyValueError::new_err("depth must be at least 1"));
    }
    let sys = system(text)?;
    let mut s = session(solver)?;
    Ok(match py.detach(|| bounded_refute(&sys, depth, &mut s)) {
        BoundedResult::Refuted(r) => ("unsat".into(), r.display(&sys)),
        BoundedResult::NoneWithinBound => ("unknown".into(), format!("no refutation within {depth} steps")),
        BoundedResult::Inconclusive(m) => ("unknown".into(), m),
    })
}

/// A generated linear system as SMT-LIB text; the same seed gives the same text.
#[pyfunction]
fn random_system(seed: u64) -> String {
    random_script(seed, SizeParams::default())
}

#[pymodule]
fn horncfa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(transform, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(random_system, m)?)?;
    Ok(())
}
