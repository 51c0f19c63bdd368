//! Run reports: `results.xml` for tools, `index.html` for people, and a
//! timings matrix for comparing backends across runs.
//!
//! Both files are rewritten whole (via rename) whenever a job starts or
//! finishes, so a reader never sees a partial document.

mod html;
mod timings;
mod xml;

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use html::{to_html, write_results_html};
pub use timings::{timings_csv, timings_table, write_timings_csv};
pub use xml::{parse_results_xml, read_results_xml, to_xml, write_results_xml};

use crate::runner::{JobResult, JobStatus, RunLimits, Seconds, TimeRecord};
use crate::taskfolder::JobKey;
use crate::util::shell_quote;

pub const RESULTS_XML: &str = "results.xml";
pub const RESULTS_HTML: &str = "index.html";
pub const TIMINGS_CSV: &str = "timings.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid results document: {message}")]
    Parse { path: String, message: String },
    #[error("reports belong to different tasks: `{first}` and `{other}`")]
    MixedTasks { first: String, other: String },
    #[error("no reports given")]
    NoReports,
}

/// Outcome of checking a job's output with the problem's verifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    #[default]
    Unchecked,
    Accepted,
    Rejected,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Unchecked => "unchecked",
            Verdict::Accepted => "accepted",
            Verdict::Rejected => "rejected",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Verdict::Unchecked, Verdict::Accepted, Verdict::Rejected]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown verdict `{s}`"))
    }
}

/// External decision procedure for one computation problem.
///
/// `command` runs under `sh -c`; `{instance}` and `{output}` are replaced
/// by the quoted paths, which are also passed as `$1` and `$2`. Exit 0
/// accepts, 1 rejects, anything else leaves the job unchecked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verifier {
    pub problem: String,
    pub command: String,
}

impl Verifier {
    pub fn new(problem: impl Into<String>, command: impl Into<String>) -> Self {
        Verifier {
            problem: problem.into(),
            command: command.into(),
        }
    }
}

pub fn verify_job(verifier: &Verifier, instance: &Path, output: &Path) -> Verdict {
    let command = verifier
        .command
        .replace("{instance}", &shell_quote(&instance.to_string_lossy()))
        .replace("{output}", &shell_quote(&output.to_string_lossy()));
    let run = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .arg("verifier")
        .arg(instance)
        .arg(output)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .output();
    match run {
        Ok(out) => match out.status.code() {
            Some(0) => Verdict::Accepted,
            Some(1) => Verdict::Rejected,
            code => {
                let how = code.map_or_else(|| "was killed by a signal".to_string(), |c| format!("exited {c}"));
                log::warn!(
                    "verifier for {} {how}: {}",
                    verifier.problem,
                    String::from_utf8_lossy(&out.stderr).trim()
                );
                Verdict::Unchecked
            }
        },
        Err(e) => {
            log::warn!("verifier for {} could not start: {e}", verifier.problem);
            Verdict::Unchecked
        }
    }
}

/// One row of a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportJob {
    pub id: JobKey,
    pub status: JobStatus,
    pub exit_code: Option<i32>,
    pub times: Option<TimeRecord>,
    pub wall: Option<Seconds>,
    pub peak_rss_bytes: Option<u64>,
    pub stdout: Option<String>,
    pub stderr: Option<String>,
    pub started: Option<String>,
    pub ended: Option<String>,
    pub diagnostic: Option<String>,
    pub verdict: Verdict,
}

impl ReportJob {
    pub fn pending(id: JobKey, status: JobStatus) -> Self {
        ReportJob {
            id,
            status,
            exit_code: None,
            times: None,
            wall: None,
            peak_rss_bytes: None,
            stdout: None,
            stderr: None,
            started: None,
            ended: None,
            diagnostic: None,
            verdict: Verdict::Unchecked,
        }
    }

    pub fn from_result(r: &JobResult, verdict: Verdict) -> Self {
        ReportJob {
            id: r.job.clone(),
            status: r.status,
            exit_code: r.exit_code,
            times: r.times,
            wall: Some(r.wall),
            peak_rss_bytes: Some(r.peak_rss_bytes),
            stdout: r.stdout.clone(),
            stderr: r.stderr.clone(),
            started: r.started.clone(),
            ended: r.ended.clone(),
            diagnostic: r.diagnostic.clone(),
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub task: String,
    /// Name of the results directory.
    pub timestamp: String,
    pub machine: String,
    pub limits: RunLimits,
    /// Above 1, jobs competed for the machine and timings are indicative only.
    pub workers: usize,
    pub jobs: Vec<ReportJob>,
}

impl RunReport {
    pub fn count(&self, status: JobStatus) -> usize {
        self.jobs.iter().filter(|j| j.status == status).count()
    }

    pub fn is_live(&self) -> bool {
        self.jobs.iter().any(|j| !j.status.is_terminal())
    }
}

/// Write `results.xml` and `index.html` into `dir`.
pub fn write_report_files(report: &RunReport, dir: &Path) -> Result<(), ReportError> {
    write_results_xml(report, &dir.join(RESULTS_XML))?;
    write_results_html(report, &dir.join(RESULTS_HTML))
}

fn write_file(path: &Path, text: &str) -> Result<(), ReportError> {
    crate::util::write_atomic(path, text.as_bytes()).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}


#[cfg(test)]
mod tests {
    use super::*;

    fn verdict_of(cmd: &str) -> Verdict {
        let dir = tempfile::TempDir::new().unwrap();
        let inst = dir.path().join("instance.xml");
        let out = dir.path().join("out put.txt");
        std::fs::write(&inst, "<Instance/>").unwrap();
        std::fs::write(&out, "ok\n").unwrap();
        verify_job(&Verifier::new("P", cmd), &inst, &out)
    }

    #[test]
    fn verifier_exit_contract() {
        assert_eq!(verdict_of("exit 0"), Verdict::Accepted);
        assert_eq!(verdict_of("exit 1"), Verdict::Rejected);
        assert_eq!(verdict_of("exit 42"), Verdict::Unchecked);
        assert_eq!(verdict_of("kill -9 $$"), Verdict::Unchecked);
    }

    #[test]
    fn verifier_sees_paths() {
        assert_eq!(verdict_of("grep -q ok {output} && test -f {instance}"), Verdict::Accepted);
        assert_eq!(verdict_of(r#"grep -q ok "$2" && grep -q Instance "$1""#), Verdict::Accepted);
        assert_eq!(verdict_of("grep -q nope {output}"), Verdict::Rejected);
    }

    #[test]
    fn verdict_tokens() {
        for v in [Verdict::Unchecked, Verdict::Accepted, Verdict::Rejected] {
            assert_eq!(v.as_str().parse::<Verdict>(), Ok(v));
        }
        assert_eq!(Verdict::default(), Verdict::Unchecked);
    }
}
