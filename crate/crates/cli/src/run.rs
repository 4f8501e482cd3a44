//! Orchestration: task dispatch, result files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::tasks::{run_task, BoundRow, Check, Context, EstimateRow, TaskOutput};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Passed,
    /// A bound evaluated without sampling error was violated.
    DeterministicFailure,
    /// A statistical check missed its 3σ tolerance.
    StatisticalFlag,
    Error,
}

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success,
    /// Unusable configuration or a task that could not run.
    Failure,
    DeterministicFailure,
    StatisticalFlag,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::DeterministicFailure => 2,
            ExitStatus::StatisticalFlag => 3,
        }
    }

    fn from_statuses(statuses: &[TaskStatus]) -> Self {
        if statuses.contains(&TaskStatus::Error) {
            ExitStatus::Failure
        } else if statuses.contains(&TaskStatus::DeterministicFailure) {
            ExitStatus::DeterministicFailure
        } else if statuses.contains(&TaskStatus::StatisticalFlag) {
            ExitStatus::StatisticalFlag
        } else {
            ExitStatus::Success
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub index: usize,
    pub kind: String,
    pub status: TaskStatus,
    pub message: Option<String>,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tasks: usize,
    pub passed: usize,
    pub deterministic_failures: usize,
    pub statistical_flags: usize,
    pub errors: usize,
    pub exit: ExitStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    pub created_unix: u64,
    pub config_file: String,
    pub tasks: Vec<TaskRecord>,
    pub summary: Summary,
}

pub const MANIFEST: &str = "manifest.json";
const CONFIG_COPY: &str = "config.toml";

fn io<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(io(path))?;
    for r in rows {
        w.serialize(r).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

fn status_of(checks: &[Check]) -> TaskStatus {
    if checks.iter().any(|c| c.deterministic && !c.passed) {
        TaskStatus::DeterministicFailure
    } else if checks.iter().any(|c| !c.passed) {
        TaskStatus::StatisticalFlag
    } else {
        TaskStatus::Passed
    }
}

/// Executes every task of a validated config into `output_dir` and writes
/// the manifest. Tasks run in parallel; each one is seeded by its index.
pub fn run(config: &RunConfig, output_dir: &Path) -> Result<RunManifest, CliError> {
    config.validate()?;
    fs::create_dir_all(output_dir).map_err(io(output_dir))?;
    let resolved = RunConfig {
        output_dir: output_dir.to_path_buf(),
        ..config.clone()
    };
    let text = resolved.to_toml();
    let config_path = output_dir.join(CONFIG_COPY);
    fs::write(&config_path, &text).map_err(io(&config_path))?;
    // the hash ignores where results go
    let hashed = RunConfig {
        output_dir: PathBuf::new(),
        ..config.clone()
    };
    let config_hash = lattice_gibbs::digest_hex(hashed.to_toml().as_bytes());

    let ctx = Context::new(config).map_err(|e| CliError::Invalid(vec![format!("model: {e}")]))?;
    let outputs: Vec<lattice_gibbs::Result<TaskOutput>> = config
        .tasks
        .par_iter()
        .enumerate()
        .map(|(i, t)| run_task(&ctx, i, t))
        .collect();

    let mut records = Vec::new();
    for (i, (task, out)) in config.tasks.iter().zip(outputs).enumerate() {
        let stem = format!("task{i:02}_{}", task.kind());
        let record = match out {
            Ok(out) => {
                let mut files = Vec::new();
                if !out.bounds.is_empty() {
                    let name = format!("{stem}_bounds.csv");
                    write_csv::<BoundRow>(&output_dir.join(&name), &out.bounds)?;
                    files.push(name);
                }
                if !out.estimates.is_empty() {
                    let name = format!("{stem}_estimates.csv");
                    write_csv::<EstimateRow>(&output_dir.join(&name), &out.estimates)?;
                    files.push(name);
                }
                TaskRecord {
                    index: i,
                    kind: task.kind().into(),
                    status: status_of(&out.checks),
                    message: None,
                    files,
                    checks: out.checks,
                }
            }
            Err(e) => TaskRecord {
                index: i,
                kind: task.kind().into(),
                status: TaskStatus::Error,
                message: Some(e.to_string()),
                files: Vec::new(),
                checks: Vec::new(),
            },
        };
        records.push(record);
    }
    let statuses: Vec<TaskStatus> = records.iter().map(|r| r.status).collect();
    let count = |s: TaskStatus| statuses.iter().filter(|x| **x == s).count();
    let manifest = RunManifest {
        config_hash,
        code_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: config.disorder.master_seed,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config_file: CONFIG_COPY.into(),
        summary: Summary {
            tasks: records.len(),
            passed: count(TaskStatus::Passed),
            deterministic_failures: count(TaskStatus::DeterministicFailure),
            statistical_flags: count(TaskStatus::StatisticalFlag),
            errors: count(TaskStatus::Error),
            exit: ExitStatus::from_statuses(&statuses),
        },
        tasks: records,
    };
    let path = output_dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(io(&path))?;
    Ok(manifest)
}

/// Reads a manifest back and checks that every listed file exists and parses.
pub fn report(output_dir: &Path) -> Result<RunManifest, CliError> {
    let path = output_dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Manifest(e.to_string()))?;
    for t in &manifest.tasks {
        for f in &t.files {
            let p = output_dir.join(f);
            let mut r = csv::Reader::from_path(&p).map_err(|e| CliError::Manifest(format!("{f}: {e}")))?;
            if f.ends_with("_bounds.csv") {
                for row in r.deserialize::<BoundRow>() {
                    row.map_err(|e| CliError::Manifest(format!("{f}: {e}")))?;
                }
            } else {
                for row in r.deserialize::<EstimateRow>() {
                    row.map_err(|e| CliError::Manifest(format!("{f}: {e}")))?;
                }
            }
        }
    }
    let cfg = output_dir.join(&manifest.config_file);
    RunConfig::load(&cfg).map_err(|e| CliError::Manifest(e.to_string()))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(passed: bool, deterministic: bool) -> Check {
        Check {
            name: "c".into(),
            passed,
            deterministic,
        }
    }

    #[test]
    fn status_precedence() {
        assert_eq!(status_of(&[]), TaskStatus::Passed);
        assert_eq!(status_of(&[check(true, true), check(false, false)]), TaskStatus::StatisticalFlag);
        assert_eq!(status_of(&[check(false, true), check(false, false)]), TaskStatus::DeterministicFailure);
    }

    #[test]
    fn exit_codes() {
        use TaskStatus::*;
        assert_eq!(ExitStatus::from_statuses(&[]).code(), 0);
        assert_eq!(ExitStatus::from_statuses(&[Passed, StatisticalFlag]).code(), 3);
        assert_eq!(ExitStatus::from_statuses(&[StatisticalFlag, DeterministicFailure]).code(), 2);
        assert_eq!(ExitStatus::from_statuses(&[DeterministicFailure, Error]).code(), 1);
    }
}
