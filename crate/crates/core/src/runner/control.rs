//! Out-of-band control of a live run: per-job kill requests, the two-stage
//! interrupt, and the `control` file in the results directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::JobStatus;
use crate::taskfolder::JobKey;

/// Two interrupts closer together than this abort the whole run.
pub const DOUBLE_INTERRUPT_WINDOW: Duration = Duration::from_secs(2);
pub const CONTROL_FILE: &str = "control";
pub const CONTROL_POLL_INTERVAL: Duration = Duration::from_secs(1);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControlError {
    #[error("unknown job `{id}`; valid ids: {valid}")]
    UnknownJob { id: String, valid: String },
    #[error("unrecognised control command `{0}` (expected `kill <instance>/<backend>`)")]
    BadCommand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KillAck {
    /// The job was running and is being terminated.
    Terminating,
    /// The job was still queued and will not start.
    Dequeued,
    /// Nothing to do; the job had already finished with this status.
    AlreadyFinished(JobStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterruptAction {
    KillRunning,
    AbortRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    UserKill,
    Abort,
}

#[derive(Default)]
struct State {
    jobs: BTreeMap<JobKey, JobStatus>,
    kill_requests: BTreeSet<JobKey>,
    last_interrupt: Option<Instant>,
}

/// Shared handle between the runner and whoever steers it (signal
/// handler, control-file poller, tests). Cheap to clone.
#[derive(Clone, Default)]
pub struct ControlChannel {
    state: Arc<Mutex<State>>,
    aborted: Arc<AtomicBool>,
}

impl ControlChannel {
    pub fn new() -> Self {
        ControlChannel::default()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub(crate) fn register_jobs(&self, jobs: impl IntoIterator<Item = (JobKey, JobStatus)>) {
        let mut st = self.lock();
        st.jobs = jobs.into_iter().collect();
        st.kill_requests.clear();
    }

    pub(crate) fn set_status(&self, job: &JobKey, status: JobStatus) {
        self.lock().jobs.insert(job.clone(), status);
    }

    pub fn status(&self, job: &JobKey) -> Option<JobStatus> {
        self.lock().jobs.get(job).copied()
    }

    /// Ask for `id` (`<instance>/<backend>`) to be killed.
    pub fn request_kill(&self, id: &str) -> Result<KillAck, ControlError> {
        let mut st = self.lock();
        let unknown = |st: &State| ControlError::UnknownJob {
            id: id.to_string(),
            valid: st.jobs.keys().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        };
        let Some(key) = JobKey::parse(id) else {
            return Err(unknown(&st));
        };
        let Some(&status) = st.jobs.get(&key) else {
            return Err(unknown(&st));
        };
        match status {
            JobStatus::Running => {
                st.kill_requests.insert(key);
                Ok(KillAck::Terminating)
            }
            JobStatus::Waiting => {
                st.kill_requests.insert(key);
                Ok(KillAck::Dequeued)
            }
            done => Ok(KillAck::AlreadyFinished(done)),
        }
    }

    /// Feed one interrupt (Ctrl-C). The first kills whatever is running;
    /// a second within [`DOUBLE_INTERRUPT_WINDOW`] aborts the run.
    pub fn interrupt(&self) -> InterruptAction {
        self.interrupt_at(Instant::now())
    }

    pub(crate) fn interrupt_at(&self, now: Instant) -> InterruptAction {
        let mut st = self.lock();
        let previous = st.last_interrupt.replace(now);
        if previous.is_some_and(|p| now.saturating_duration_since(p) <= DOUBLE_INTERRUPT_WINDOW) {
            drop(st);
            self.abort();
            return InterruptAction::AbortRun;
        }
        let running: Vec<JobKey> = st
            .jobs
            .iter()
            .filter(|(_, s)| **s == JobStatus::Running)
            .map(|(k, _)| k.clone())
            .collect();
        st.kill_requests.extend(running);
        InterruptAction::KillRunning
    }

    pub fn abort(&self) {
        self.aborted.store(true, Ordering::SeqCst);
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted.load(Ordering::SeqCst)
    }

    /// Move `job` from waiting to running unless a kill request already
    /// dequeued it. Returns whether the job may start.
    pub(crate) fn try_start(&self, job: &JobKey) -> bool {
        let mut st = self.lock();
        if st.kill_requests.contains(job) {
            return false;
        }
        st.jobs.insert(job.clone(), JobStatus::Running);
        true
    }

    pub(crate) fn kill_requested(&self, job: &JobKey) -> bool {
        self.lock().kill_requests.contains(job)
    }

    pub(crate) fn stop_reason(&self, job: &JobKey) -> Option<StopReason> {
        if self.is_aborted() {
            Some(StopReason::Abort)
        } else if self.kill_requested(job) {
            Some(StopReason::UserKill)
        } else {
            None
        }
    }

    /// Apply one line of the control file.
    pub fn apply_command(&self, line: &str) -> Result<Option<KillAck>, ControlError> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("kill"), Some(id), None) => self.request_kill(id).map(Some),
            _ => Err(ControlError::BadCommand(line.to_string())),
        }
    }
}

/// Background thread tailing the control file. Stops when dropped.
pub(crate) struct ControlFileWatcher {
    stop: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

impl ControlFileWatcher {
    pub(crate) fn start(path: PathBuf, control: ControlChannel) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = thread::spawn(move || {
            let mut offset = 0u64;
            let mut partial = String::new();
            while !flag.load(Ordering::SeqCst) {
                if let Err(e) = poll_control_file(&path, &mut offset, &mut partial, &control) {
                    log::debug!("control file {}: {e}", path.display());
                }
                let deadline = Instant::now() + CONTROL_POLL_INTERVAL;
                while Instant::now() < deadline && !flag.load(Ordering::SeqCst) {
                    thread::sleep(Duration::from_millis(50));
                }
            }
        });
        ControlFileWatcher {
            stop,
            handle: Some(handle),
        }
    }
}

impl Drop for ControlFileWatcher {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn poll_control_file(
    path: &Path,
    offset: &mut u64,
    partial: &mut String,
    control: &ControlChannel,
) -> std::io::Result<()> {
    let mut f = fs::File::open(path)?;
    let len = f.metadata()?.len();
    if len < *offset {
        // Truncated or replaced: start over.
        *offset = 0;
        partial.clear();
    }
    if len == *offset {
        return Ok(());
    }
    f.seek(SeekFrom::Start(*offset))?;
    let mut buf = String::new();
    f.read_to_string(&mut buf)?;
    *offset += buf.len() as u64;
    partial.push_str(&buf);
    while let Some(nl) = partial.find('\n') {
        let line: String = partial.drain(..=nl).collect();
        match control.apply_command(&line) {
            Ok(Some(ack)) => log::info!("control: `{}` -> {ack:?}", line.trim()),
            Ok(None) => {}
            Err(e) => log::warn!("control: {e}"),
        }
    }
    Ok(())
}
