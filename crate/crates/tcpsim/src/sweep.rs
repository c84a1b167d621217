//! Runs scenarios, possibly in parallel, and writes their outputs.

use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tcpsim_core::{run, RunOutcome, Scenario, SimError};

use crate::report;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunFailure {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("run panicked: {0}")]
    Panic(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: Scenario,
    pub outcome: Result<RunOutcome, RunFailure>,
}

fn run_one(scenario: &Scenario) -> Result<RunOutcome, RunFailure> {
    match panic::catch_unwind(AssertUnwindSafe(|| run(&scenario.config))) {
        Ok(r) => r.map_err(RunFailure::from),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(RunFailure::Panic(msg))
        }
    }
}

/// Runs every scenario on `jobs` threads. Results come back in input order
/// and a failing scenario does not stop the others.
pub fn run_sweep(scenarios: &[Scenario], jobs: usize) -> Vec<RunResult> {
    let wrap = |s: &Scenario| RunResult { scenario: s.clone(), outcome: run_one(s) };
    if jobs <= 1 {
        return scenarios.iter().map(wrap).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| scenarios.par_iter().map(wrap).collect()),
        Err(_) => scenarios.iter().map(wrap).collect(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} of {total} runs failed; nothing written", failures.len())]
    RunsFailed { failures: Vec<(String, RunFailure)>, total: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Checks that `dir` exists (creating it if needed) and accepts new files.
pub fn prepare_output_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    tempfile::Builder::new().prefix(".tcpsim-probe").tempfile_in(dir).map_err(io_err(dir))?;
    Ok(())
}

/// The files a completed set of runs produces, name → contents.
pub fn render_outputs(results: &[RunResult]) -> Result<Vec<(String, Vec<u8>)>, OutputError> {
    let failures: Vec<_> = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.scenario.id(), e.clone())))
        .collect();
    if !failures.is_empty() {
        return Err(OutputError::RunsFailed { failures, total: results.len() });
    }
    let ok: Vec<(&Scenario, &RunOutcome)> =
        results.iter().map(|r| (&r.scenario, r.outcome.as_ref().expect("checked above"))).collect();
    let mut files = vec![(
        "metrics.csv".to_string(),
        report::to_csv_string(ok.iter().map(|(s, o)| (*s, &o.metrics))).into_bytes(),
    )];
    for (s, o) in &ok {
        if let Some(trace) = &o.trace {
            files.push((format!("trace-{}.txt", s.id()), trace.clone().into_bytes()));
        }
    }
    Ok(files)
}

/// Writes every file to a temporary name in `dir`, then renames them all into
/// place. Nothing is renamed unless every write succeeded.
pub fn write_atomically(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>, OutputError> {
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = tempfile::Builder::new().prefix(".tcpsim-").tempfile_in(dir).map_err(io_err(dir))?;
        tmp.write_all(bytes).and_then(|_| tmp.flush()).map_err(io_err(tmp.path()))?;
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, dest) in staged {
        tmp.persist(&dest).map_err(|e| OutputError::Io { path: dest.clone(), source: e.error })?;
        written.push(dest);
    }
    Ok(written)
}
