//! Benchmark harness: runs a configuration matrix over a pinned corpus and
//! records one row per (task, configuration) cell.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cegar::{CegarConfig, Domain, PredSplit, Refinement};
use crate::chc::parse_script;
use crate::pipeline::{solve_with, SolveOptions, Status};
use crate::smt::{SolverConfig, SolverSession};
use crate::transform::Direction;

pub const CSV_HEADER: &str = "# horncfa-bench v1";
pub const MANIFEST: &str = "MANIFEST.sha256";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("{file}: hash mismatch (manifest {expected}, file {actual})")]
    HashMismatch { file: String, expected: String, actual: String },
    #[error("bad configuration `{0}`: {1}")]
    Config(String, String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The tasks listed in `dir/MANIFEST.sha256` (lines `<sha256>  <file>`),
/// after checking every hash.
pub fn load_manifest(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (hash, file) = line
            .split_once(char::is_whitespace)
            .ok_or(BenchError::Manifest { line: i + 1, msg: "expected `<hash> <file>`".into() })?;
        let file = file.trim();
        let task = dir.join(file);
        let bytes = fs::read(&task).map_err(io_err(&task))?;
        let actual = sha256_hex(&bytes);
        if actual != hash {
            return Err(BenchError::HashMismatch { file: file.into(), expected: hash.into(), actual });
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// Writes a manifest for every `.smt2` file in `dir`.
pub fn write_manifest(dir: &Path) -> Result<usize, BenchError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "smt2"))
        .collect();
    files.sort();
    let mut out = String::new();
    for f in &files {
        let bytes = fs::read(f).map_err(io_err(f))?;
        out.push_str(&format!("{}  {}\n", sha256_hex(&bytes), f.file_name().unwrap().to_string_lossy()));
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, out).map_err(io_err(&path))?;
    Ok(files.len())
}

/// One cell configuration of the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunConfig {
    pub direction: Direction,
    pub domain: Domain,
    pub refinement: Refinement,
    pub pred_split: PredSplit,
}

impl RunConfig {
    /// The label shared by both directions of a configuration.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.domain, self.refinement, self.pred_split)
    }

    pub fn cegar(&self) -> CegarConfig {
        CegarConfig {
            domain: self.domain,
            refinement: self.refinement,
            pred_split: self.pred_split,
            ..CegarConfig::default()
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.direction, self.domain, self.refinement, self.pred_split)
    }
}

/// `fw:pred-cart:wp:whole`; a leading `*` expands to both directions.
impl FromStr for RunConfig {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let bad = |m: String| BenchError::Config(s.into(), m);
        let parts: Vec<&str> = s.split(':').collect();
        let [dir, domain, refinement, split] = parts[..] else {
            return Err(bad("expected direction:domain:refinement:split".into()));
        };
        let direction = match dir {
            "fw" => Direction::Forward,
            "bw" => Direction::Backward,
            other => return Err(bad(format!("unknown direction `{other}`"))),
        };
        Ok(RunConfig {
            direction,
            domain: domain.parse().map_err(bad)?,
            refinement: refinement.parse().map_err(bad)?,
            pred_split: split.parse().map_err(bad)?,
        })
    }
}

/// Expands `*:` entries to both directions.
pub fn parse_matrix(entries: &[String]) -> Result<Vec<RunConfig>, BenchError> {
    let mut out = Vec::new();
    for e in entries {
        match e.strip_prefix("*:") {
            Some(rest) => {
                out.push(format!("fw:{rest}").parse()?);
                out.push(format!("bw:{rest}").parse()?);
            }
            None => out.push(e.parse()?),
        }
    }
    Ok(out)
}

/// Both directions of the default configurations: the explicit-value
/// domain with weakest preconditions and with sequence interpolants, and
/// both predicate domains with backward binary interpolants.
pub fn default_matrix() -> Vec<RunConfig> {
    let entries: Vec<String> =
        ["*:expl:wp:whole", "*:expl:seq-itp:whole", "*:pred-bool:bw-bin-itp:whole", "*:pred-cart:bw-bin-itp:whole"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    parse_matrix(&entries).expect("default matrix is well-formed")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub task: String,
    pub config: RunConfig,
    pub status: Status,
    pub validated: bool,
    pub wall_time: Duration,
    pub iterations: usize,
    pub refinements: usize,
    pub solver_queries: u64,
    pub note: String,
}

impl BenchRecord {
    pub fn solved(&self) -> bool {
        self.validated && self.status != Status::Unknown
    }
}

fn run_cell(task: &Path, config: RunConfig, timeout: Duration, session: &mut SolverSession) -> BenchRecord {
    let name = task.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut rec = BenchRecord {
        task: name,
        config,
        status: Status::Unknown,
        validated: false,
        wall_time: Duration::ZERO,
        iterations: 0,
        refinements: 0,
        solver_queries: 0,
        note: String::new(),
    };
    let system = match fs::read_to_string(task)
        .map_err(|e| e.to_string())
        .and_then(|t| parse_script(&t).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(m) => {
            rec.note = m;
            return rec;
        }
    };
    let options = SolveOptions {
        direction: config.direction,
        cegar: config.cegar(),
        timeout: Some(timeout),
        ..SolveOptions::default()
    };
    let out = solve_with(&system, &options, session);
    rec.status = out.status();
    rec.validated = out.validation.is_valid();
    rec.wall_time = out.elapsed;
    rec.iterations = out.cegar.iterations;
    rec.refinements = out.cegar.refinements;
    rec.solver_queries = out.solver.queries;
    rec.note = out.reason().unwrap_or_default();
    rec
}

/// Runs every (task, configuration) cell on `workers` threads, each with
/// its own solver session. Records come back sorted by task and
/// configuration.
pub fn run_matrix(
    tasks: &[PathBuf],
    configs: &[RunConfig],
    timeout: Duration,
    solver: &SolverConfig,
    workers: usize,
) -> Vec<BenchRecord> {
    let cells: Vec<(&PathBuf, RunConfig)> = tasks.iter().flat_map(|t| configs.iter().map(move |c| (t, *c))).collect();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(cells.len()));
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| {
                let mut session = SolverSession::new(solver.clone());
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some((task, config)) = cells.get(i) else { break };
                    let rec = run_cell(task, *config, timeout, &mut session);
                    log::info!("{} {} {} {:.2}s", rec.task, rec.config, rec.status, rec.wall_time.as_secs_f64());
                    results.lock().unwrap().push((i, rec));
                }
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

/// Writes the versioned CSV with one row per record.
pub fn write_csv(records: &[BenchRecord], out: impl io::Write) -> Result<(), BenchError> {
    let mut out = out;
    writeln!(out, "{CSV_HEADER}").map_err(csv::Error::from)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "task",
        "direction",
        "domain",
        "refinement",
        "pred_split",
        "status",
        "validated",
        "wall_ms",
        "iterations",
        "refinements",
        "solver_queries",
        "note",
    ])?;
    for r in records {
        w.write_record([
            r.task.clone(),
            r.config.direction.to_string(),
            r.config.domain.to_string(),
            r.config.refinement.to_string(),
            r.config.pred_split.to_string(),
            r.status.to_string(),
            r.validated.to_string(),
            r.wall_time.as_millis().to_string(),
            r.iterations.to_string(),
            r.refinements.to_string(),
            r.solver_queries.to_string(),
            r.note.clone(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Solved counts per configuration label, forward and backward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryRow {
    pub label: String,
    pub forward: usize,
    pub backward: usize,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut rows: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = rows.entry(r.config.label()).or_default();
        if r.solved() {
            match r.config.direction {
                Direction::Forward => e.0 += 1,
                Direction::Backward => e.1 += 1,
            }
        }
    }
    rows.into_iter().map(|(label, (forward, backward))| SummaryRow { label, forward, backward }).collect()
}

pub fn summary_table(rows: &[SummaryRow], tasks: usize) -> String {
    let mut out = format!("{:<28} {:>6} {:>6} {:>7}\n", "configuration", "fw", "bw", "fw/bw");
    for r in rows {
        let ratio =
            if r.backward == 0 { "inf".to_string() } else { format!("{:.2}", r.forward as f64 / r.backward as f64) };
        out.push_str(&format!("{:<28} {:>6} {:>6} {:>7}\n", r.label, r.forward, r.backward, ratio));
    }
    out.push_str(&format!("({tasks} tasks; only validated answers count)\n"));
    out
}

/// Quantile data: for each configuration and direction, the k-th fastest
/// solved task and the cumulative time up to it.
pub fn write_quantiles(records: &[BenchRecord], out: impl io::Write) -> Result<(), BenchError> {
    let mut out = out;
    writeln!(out, "{CSV_HEADER} quantiles").map_err(csv::Error::from)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["configuration", "direction", "solved", "task_ms", "cumulative_ms"])?;
    let mut groups: BTreeMap<(String, String), Vec<u128>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.solved()) {
        groups.entry((r.config.label(), r.config.direction.to_string())).or_default().push(r.wall_time.as_millis());
    }
    for ((label, dir), mut times) in groups {
        times.sort_unstable();
        let mut total = 0;
        for (k, t) in times.iter().enumerate() {
            total += t;
            w.write_record([label.clone(), dir.clone(), (k + 1).to_string(), t.to_string(), total.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_strings() {
        let c: RunConfig = "bw:pred-bool:bw-bin-itp:atoms".parse().unwrap();
        assert_eq!(c.to_string(), "bw:pred-bool:bw-bin-itp:atoms");
        assert_eq!(c.label(), "pred-bool/bw-bin-itp/atoms");
        assert!("up:expl:wp:whole".parse::<RunConfig>().is_err());
        assert!("fw:expl:wp".parse::<RunConfig>().is_err());
        assert_eq!(parse_matrix(&["*:expl:wp:whole".into()]).unwrap().len(), 2);
    }

    #[test]
    fn manifest_round_trip_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.smt2"), "(check-sat)").unwrap();
        fs::write(dir.path().join("a.smt2"), "(set-logic HORN)").unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        assert_eq!(write_manifest(dir.path()).unwrap(), 2);
        let tasks = load_manifest(dir.path()).unwrap();
        assert_eq!(
            tasks.iter().map(|t| t.file_name().unwrap().to_str().unwrap()).collect::<Vec<_>>(),
            ["a.smt2", "b.smt2"]
        );
        fs::write(dir.path().join("a.smt2"), "(set-logic HORN) ").unwrap();
        assert!(matches!(load_manifest(dir.path()), Err(BenchError::HashMismatch { .. })));
    }

    fn record(task: &str, dir: Direction, status: Status, ms: u64) -> BenchRecord {
        BenchRecord {
            task: task.into(),
            config: RunConfig {
                direction: dir,
                domain: Domain::PredCart,
                refinement: Refinement::Wp,
                pred_split: PredSplit::Whole,
            },
            status,
            validated: status != Status::Unknown,
            wall_time: Duration::from_millis(ms),
            iterations: 1,
            refinements: 0,
            solver_queries: 3,
            note: String::new(),
        }
    }

    #[test]
    fn summary_and_quantiles() {
        let recs = vec![
            record("a", Direction::Forward, Status::Sat, 20),
            record("b", Direction::Forward, Status::Unsat, 10),
            record("a", Direction::Backward, Status::Unknown, 5),
            record("b", Direction::Backward, Status::Unsat, 30),
        ];
        let rows = summarize(&recs);
        assert_eq!(rows, vec![SummaryRow { label: "pred-cart/wp/whole".into(), forward: 2, backward: 1 }]);
        let mut q = Vec::new();
        write_quantiles(&recs, &mut q).unwrap();
        let q = String::from_utf8(q).unwrap();
        assert!(q.contains("pred-cart/wp/whole,fw,2,20,30"), "{q}");
        let mut c = Vec::new();
        write_csv(&recs, &mut c).unwrap();
        let c = String::from_utf8(c).unwrap();
        assert!(c.starts_with("# horncfa-bench v1\ntask,direction,"));
        assert_eq!(c.lines().count(), 6);
    }
}
