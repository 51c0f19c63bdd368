//! Supervised execution of a taskfolder.
//!
//! Jobs run in task order (instance-major, then backend), by default one
//! at a time. Each run writes into `<taskfolder>/results/<timestamp>/`:
//!
//! ```text
//! <instance>/<backend>/stdout.txt, stderr.txt
//! manifest        finished jobs with the script checksums they ran against
//! results.xml     see `reporting`
//! index.html
//! control         append `kill <instance>/<backend>` lines to stop a job
//! ```

mod control;
mod manifest;
mod posix_time;
mod supervise;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use control::{
    ControlChannel, ControlError, InterruptAction, KillAck, StopReason, CONTROL_FILE, CONTROL_POLL_INTERVAL,
    DOUBLE_INTERRUPT_WINDOW,
};
pub use manifest::{Manifest, ManifestEntry, ManifestError, MANIFEST_FILE};
pub use posix_time::{parse_posix_time, Seconds, SecondsParseError, TimeParseError, TimeRecord};
pub use supervise::{supervise, JobCommand, SAMPLE_INTERVAL};

use crate::reporting::{verify_job, write_report_files, ReportError, ReportJob, RunReport, Verdict, Verifier};
use crate::taskfolder::{JobKey, TaskFolder, TaskFolderError, DEFAULT_TIME_COMMAND};
use crate::util::shell_quote;

pub const RESULTS_DIR: &str = "results";
pub const STDOUT_FILE: &str = "stdout.txt";
pub const STDERR_FILE: &str = "stderr.txt";
pub const DEFAULT_GRACE: Seconds = Seconds::from_centis(500);
/// `strftime` pattern of results directory names; sorts chronologically.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d_%H-%M-%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobStatus {
    Waiting,
    Running,
    Completed,
    Error,
    Timeout,
    Memout,
    KilledByUser,
}

impl JobStatus {
    pub const ALL: [JobStatus; 7] = [
        JobStatus::Waiting,
        JobStatus::Running,
        JobStatus::Completed,
        JobStatus::Error,
        JobStatus::Timeout,
        JobStatus::Memout,
        JobStatus::KilledByUser,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Waiting => "waiting",
            JobStatus::Running => "running",
            JobStatus::Completed => "completed",
            JobStatus::Error => "error",
            JobStatus::Timeout => "timeout",
            JobStatus::Memout => "memout",
            JobStatus::KilledByUser => "killed-by-user",
        }
    }

    pub fn is_terminal(self) -> bool {
        !matches!(self, JobStatus::Waiting | JobStatus::Running)
    }
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JobStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JobStatus::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown job status `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLimits {
    pub wall: Option<Seconds>,
    pub memory_bytes: Option<u64>,
    /// Time between SIGTERM and SIGKILL.
    pub grace: Seconds,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            wall: None,
            memory_bytes: None,
            grace: DEFAULT_GRACE,
        }
    }
}

impl RunLimits {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.wall == Some(Seconds::ZERO) {
            return Err(RunError::InvalidLimits("time limit must be positive".into()));
        }
        if self.memory_bytes == Some(0) {
            return Err(RunError::InvalidLimits("memory limit must be positive".into()));
        }
        if self.grace == Seconds::ZERO {
            return Err(RunError::InvalidLimits("grace period must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobResult {
    pub job: JobKey,
    pub status: JobStatus,
    /// Absent when the job was killed.
    pub exit_code: Option<i32>,
    pub times: Option<TimeRecord>,
    /// Wall time as seen by the supervisor, independent of `time`.
    pub wall: Seconds,
    pub peak_rss_bytes: u64,
    /// Relative to the results directory.
    pub stdout: Option<String>,
    pub stderr: Option<String>,
    pub started: Option<String>,
    pub ended: Option<String>,
    pub diagnostic: Option<String>,
}

impl JobResult {
    /// A job removed from the queue before it started.
    fn dequeued(job: JobKey) -> Self {
        let now = now_timestamp();
        JobResult {
            job,
            status: JobStatus::KilledByUser,
            exit_code: None,
            times: None,
            wall: Seconds::ZERO,
            peak_rss_bytes: 0,
            stdout: None,
            stderr: None,
            started: Some(now.clone()),
            ended: Some(now),
            diagnostic: Some("removed from the queue on request".into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
    #[error("results directory {path}: {source}")]
    ResultsDir { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Report(#[from] ReportError),
    #[error("{0}")]
    TaskFolder(#[from] TaskFolderError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub limits: RunLimits,
    /// Parallel workers; anything above 1 makes timings unfit for comparison.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            limits: RunLimits::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub results_dir: PathBuf,
    /// Task order; one entry per job that reached a terminal status,
    /// including jobs carried over from a resumed manifest.
    pub results: Vec<JobResult>,
    pub executed: Vec<JobKey>,
    pub skipped: Vec<JobKey>,
    pub aborted: bool,
    pub report: RunReport,
}

impl RunOutcome {
    /// True when every job of the task has a terminal status.
    pub fn is_complete(&self) -> bool {
        !self.aborted && self.report.jobs.iter().all(|j| j.status.is_terminal())
    }
}

/// Run every job of `folder` into a fresh timestamped results directory.
pub fn run_all(folder: &TaskFolder, config: &RunConfig, control: &ControlChannel) -> Result<RunOutcome, RunError> {
    config.limits.validate()?;
    let dir = create_results_dir(&folder.root)?;
    execute(folder, dir, Manifest::new(&folder.task.name), config, control)
}

/// Continue the run in `previous`: jobs whose manifest entry is terminal
/// and whose script is unchanged are kept, everything else runs again.
pub fn resume(
    folder: &TaskFolder,
    previous: &Path,
    config: &RunConfig,
    control: &ControlChannel,
) -> Result<RunOutcome, RunError> {
    config.limits.validate()?;
    if !previous.is_dir() {
        return Err(RunError::ResultsDir {
            path: previous.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "no such results directory"),
        });
    }
    let manifest = match Manifest::load(previous) {
        Ok(m) if m.task == folder.task.name => m,
        Ok(m) => {
            log::warn!("manifest belongs to task `{}`; running all jobs again", m.task);
            Manifest::new(&folder.task.name)
        }
        Err(e) => {
            log::warn!("{e}; running all jobs again");
            Manifest::new(&folder.task.name)
        }
    };
    execute(folder, previous.to_path_buf(), manifest, config, control)
}

/// Create `<root>/results/<timestamp>`, suffixing `_2`, `_3`, ... if a run
/// started within the same second.
pub fn create_results_dir(root: &Path) -> Result<PathBuf, RunError> {
    let base = root.join(RESULTS_DIR);
    let err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::ResultsDir { path, source }
    };
    fs::create_dir_all(&base).map_err(err(&base))?;
    let stamp = chrono::Local::now().format(TIMESTAMP_FORMAT).to_string();
    for n in 1.. {
        let name = if n == 1 { stamp.clone() } else { format!("{stamp}_{n}") };
        let dir = base.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(err(&dir)(e)),
        }
    }
    unreachable!()
}

/// `hostname (os/arch, N cpus)`
pub fn machine_description() -> String {
    let mut buf = [0u8; 256];
    // SAFETY: buffer and length match; the result is NUL-terminated or
    // truncated, handled below.
    let rc = unsafe { libc::gethostname(buf.as_mut_ptr().cast(), buf.len()) };
    let host = if rc == 0 {
        let end = buf.iter().position(|&b| b == 0).unwrap_or(buf.len());
        String::from_utf8_lossy(&buf[..end]).into_owned()
    } else {
        "unknown-host".into()
    };
    let cpus = thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{host} ({}/{}, {cpus} cpus)", std::env::consts::OS, std::env::consts::ARCH)
}

pub(crate) fn now_timestamp() -> String {
    chrono::Local::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, false)
}

/// argv running `command` through the time utility in `-p` mode.
///
/// The default `time` is usually a shell keyword rather than a program;
/// when no `time` executable exists, bash's keyword is used instead.
pub fn timed_argv(time_command: &str, command: &str) -> Vec<String> {
    let parts: Vec<String> = time_command.split_whitespace().map(String::from).collect();
    if parts.len() == 1 && parts[0] == DEFAULT_TIME_COMMAND && find_executable(DEFAULT_TIME_COMMAND).is_none() {
        if let Some(bash) = find_executable("bash") {
            let inner = format!("time -p sh -c {}", shell_quote(command));
            return vec![bash.display().to_string(), "-c".into(), inner];
        }
        log::warn!("no `time` utility found; times will be measured by the supervisor");
        return vec!["sh".into(), "-c".into(), command.into()];
    }
    let mut argv = parts;
    argv.extend(["-p".into(), "sh".into(), "-c".into(), command.into()]);
    argv
}

fn find_executable(name: &str) -> Option<PathBuf> {
    use std::os::unix::fs::PermissionsExt;
    let is_exec = |p: &Path| fs::metadata(p).is_ok_and(|m| m.is_file() && m.permissions().mode() & 0o111 != 0);
    if name.contains('/') {
        let p = PathBuf::from(name);
        return is_exec(&p).then_some(p);
    }
    std::env::split_paths(&std::env::var_os("PATH")?)
        .map(|d| d.join(name))
        .find(|p| is_exec(p))
}

struct Shared {
    manifest: Manifest,
    queue: VecDeque<JobKey>,
    results: BTreeMap<JobKey, (JobResult, Verdict)>,
    executed: Vec<JobKey>,
    error: Option<RunError>,
}

struct Run<'a> {
    folder: &'a TaskFolder,
    dir: PathBuf,
    config: &'a RunConfig,
    control: &'a ControlChannel,
    checksums: BTreeMap<JobKey, String>,
    machine: String,
    verifier: Option<Verifier>,
    shared: Mutex<Shared>,
}

fn execute(
    folder: &TaskFolder,
    dir: PathBuf,
    mut manifest: Manifest,
    config: &RunConfig,
    control: &ControlChannel,
) -> Result<RunOutcome, RunError> {
    let jobs = folder.task.jobs();
    let mut checksums = BTreeMap::new();
    for job in &jobs {
        checksums.insert(job.clone(), folder.script_checksum(job)?);
    }
    manifest.jobs.retain(|k, _| checksums.contains_key(k));

    let mut results = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut skipped = Vec::new();
    for job in &jobs {
        match manifest.reusable(job, &checksums[job]) {
            Some(e) => {
                results.insert(job.clone(), (e.result.clone(), e.verdict));
                skipped.push(job.clone());
            }
            None => queue.push_back(job.clone()),
        }
    }
    // Stale entries would otherwise survive until the job is rerun.
    manifest.jobs.retain(|k, _| results.contains_key(k));
    control.register_jobs(jobs.iter().map(|j| {
        let status = results.get(j).map_or(JobStatus::Waiting, |(r, _)| r.status);
        (j.clone(), status)
    }));

    let control_path = dir.join(CONTROL_FILE);
    if !control_path.exists() {
        fs::write(&control_path, "").map_err(|source| RunError::ResultsDir {
            path: control_path.clone(),
            source,
        })?;
    }
    manifest.save(&dir).map_err(|source| RunError::ResultsDir {
        path: dir.join(MANIFEST_FILE),
        source,
    })?;

    let run = Run {
        folder,
        dir,
        config,
        control,
        checksums,
        machine: machine_description(),
        verifier: folder
            .verifier
            .as_ref()
            .map(|c| Verifier::new(&folder.task.problem, c)),
        shared: Mutex::new(Shared {
            manifest,
            queue,
            results,
            executed: Vec::new(),
            error: None,
        }),
    };
    run.publish()?;
    let watcher = control::ControlFileWatcher::start(control_path, control.clone());
    thread::scope(|s| {
        for _ in 0..config.workers.max(1) {
            s.spawn(|| run.worker());
        }
    });
    drop(watcher);

    let failed = run.lock().error.take();
    if let Some(e) = failed {
        return Err(e);
    }
    let report = run.publish()?;
    let shared = run.shared.into_inner().unwrap_or_else(|p| p.into_inner());
    let results: Vec<JobResult> = jobs
        .iter()
        .filter_map(|j| shared.results.get(j).map(|(r, _)| r.clone()))
        .collect();
    Ok(RunOutcome {
        results_dir: run.dir,
        aborted: control.is_aborted() || results.len() < jobs.len(),
        results,
        executed: shared.executed,
        skipped,
        report,
    })
}

impl Run<'_> {
    fn lock(&self) -> std::sync::MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn worker(&self) {
        while !self.control.is_aborted() {
            let Some(job) = self.lock().queue.pop_front() else {
                return;
            };
            if let Err(e) = self.run_one(job) {
                self.control.abort();
                self.lock().error.get_or_insert(e);
                return;
            }
        }
    }

    fn run_one(&self, job: JobKey) -> Result<(), RunError> {
        if !self.control.try_start(&job) {
            self.record(JobResult::dequeued(job), Verdict::Unchecked, true)?;
            return Ok(());
        }
        self.lock().executed.push(job.clone());
        self.publish()?;

        let job_dir = self.dir.join(&job.instance).join(&job.backend);
        fs::create_dir_all(&job_dir).map_err(|source| RunError::ResultsDir {
            path: job_dir.clone(),
            source,
        })?;
        let mut result = match self.folder.command_for(&job) {
            Some(command) => {
                let mut env: Vec<(String, String)> = self
                    .folder
                    .settings
                    .environment
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                // Keeps `time` output in the C locale's number format.
                env.push(("LC_ALL".into(), "C".into()));
                let cmd = JobCommand {
                    job: job.clone(),
                    argv: timed_argv(&self.folder.settings.time_command, &command),
                    cwd: job_dir.clone(),
                    env,
                    stdout: job_dir.join(STDOUT_FILE),
                    stderr: job_dir.join(STDERR_FILE),
                };
                log::info!("{job}: {command}");
                supervise(&cmd, &self.config.limits, &|| self.control.stop_reason(&job))
            }
            None => {
                let mut r = JobResult::dequeued(job.clone());
                r.status = JobStatus::Error;
                r.diagnostic = Some("no command for this job".into());
                r
            }
        };
        result.stdout = Some(format!("{}/{}/{STDOUT_FILE}", job.instance, job.backend));
        result.stderr = Some(format!("{}/{}/{STDERR_FILE}", job.instance, job.backend));
        log::info!("{job}: {}", result.status);

        let verdict = match (&self.verifier, result.status) {
            (Some(v), JobStatus::Completed) => match self.folder.instance_copy(&job.instance) {
                Some(instance) => verify_job(v, &instance, &job_dir.join(STDOUT_FILE)),
                None => Verdict::Unchecked,
            },
            _ => Verdict::Unchecked,
        };
        // A job cut short by an abort is left for a later resume.
        let keep = !(self.control.is_aborted() && result.status == JobStatus::KilledByUser);
        self.record(result, verdict, keep)
    }

    fn record(&self, result: JobResult, verdict: Verdict, keep: bool) -> Result<(), RunError> {
        let job = result.job.clone();
        self.control.set_status(&job, result.status);
        {
            let mut shared = self.lock();
            if keep {
                shared.manifest.jobs.insert(
                    job.clone(),
                    ManifestEntry {
                        checksum: self.checksums[&job].clone(),
                        result: result.clone(),
                        verdict,
                    },
                );
                shared.manifest.save(&self.dir).map_err(|source| RunError::ResultsDir {
                    path: self.dir.join(MANIFEST_FILE),
                    source,
                })?;
            }
            shared.results.insert(job, (result, verdict));
        }
        self.publish().map(drop)
    }

    /// Rewrite results.xml and index.html from the current state.
    fn publish(&self) -> Result<RunReport, RunError> {
        let shared = self.lock();
        let jobs = self
            .folder
            .task
            .jobs()
            .into_iter()
            .map(|j| match shared.results.get(&j) {
                Some((r, v)) => ReportJob::from_result(r, *v),
                None => {
                    let status = match self.control.status(&j) {
                        Some(JobStatus::Running) => JobStatus::Running,
                        _ => JobStatus::Waiting,
                    };
                    ReportJob::pending(j, status)
                }
            })
            .collect();
        let report = RunReport {
            task: self.folder.task.name.clone(),
            timestamp: self
                .dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            machine: self.machine.clone(),
            limits: self.config.limits,
            workers: self.config.workers.max(1),
            jobs,
        };
        write_report_files(&report, &self.dir)?;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_tokens() {
        for s in JobStatus::ALL {
            assert_eq!(s.as_str().parse::<JobStatus>(), Ok(s));
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
        assert!(!JobStatus::Waiting.is_terminal());
        assert!(JobStatus::KilledByUser.is_terminal());
        assert!("done".parse::<JobStatus>().is_err());
    }

    #[test]
    fn limits_validation() {
        assert!(RunLimits::default().validate().is_ok());
        let bad = RunLimits {
            memory_bytes: Some(0),
            ..RunLimits::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn explicit_time_command() {
        assert_eq!(
            timed_argv("/usr/bin/time", "x 'y'"),
            ["/usr/bin/time", "-p", "sh", "-c", "x 'y'"]
        );
    }

    #[test]
    fn default_time_command_yields_a_record() {
        let argv = timed_argv("time", "echo out; echo err >&2");
        let out = std::process::Command::new(&argv[0])
            .args(&argv[1..])
            .env("LC_ALL", "C")
            .output()
            .unwrap();
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert_eq!(String::from_utf8_lossy(&out.stdout), "out\n");
        assert!(parse_posix_time(&stderr).is_ok(), "{stderr}");
    }

    #[test]
    fn results_dirs_are_unique() {
        let tmp = tempfile::TempDir::new().unwrap();
        let a = create_results_dir(tmp.path()).unwrap();
        let b = create_results_dir(tmp.path()).unwrap();
        assert_ne!(a, b);
        assert!(a.starts_with(tmp.path().join(RESULTS_DIR)));
    }
}
