//! Running one job under wall-clock and memory limits.
//!
//! The job is started as the leader of a fresh process group; limits and
//! kill requests are applied to the whole group, first with SIGTERM and,
//! after the grace period, with SIGKILL. Resident memory is summed over
//! the group from `/proc` every [`SAMPLE_INTERVAL`].

use std::fs::{self, File};
use std::io::{self, Read, Seek, SeekFrom};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use super::control::StopReason;
use super::{now_timestamp, parse_posix_time, JobResult, JobStatus, RunLimits, Seconds, TimeRecord};
use crate::taskfolder::JobKey;

pub const SAMPLE_INTERVAL: Duration = Duration::from_millis(100);
const POLL_INTERVAL: Duration = Duration::from_millis(10);
/// Only the end of stderr is searched for the time record.
const STDERR_TAIL_BYTES: u64 = 64 * 1024;

/// A fully expanded job ready to start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobCommand {
    pub job: JobKey,
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    /// Applied in order on top of the inherited environment.
    pub env: Vec<(String, String)>,
    pub stdout: PathBuf,
    pub stderr: PathBuf,
}

/// Run `cmd` to completion or until a limit or `stop` ends it.
///
/// `stop` is polled while the job runs; returning `Some` terminates the
/// group and yields `killed-by-user`. Never fails: problems starting the
/// process become an `error` result with a diagnostic.
pub fn supervise(cmd: &JobCommand, limits: &RunLimits, stop: &dyn Fn() -> Option<StopReason>) -> JobResult {
    let begin = Instant::now();
    let mut result = JobResult {
        job: cmd.job.clone(),
        status: JobStatus::Error,
        exit_code: None,
        times: None,
        wall: Seconds::ZERO,
        peak_rss_bytes: 0,
        stdout: Some(cmd.stdout.display().to_string()),
        stderr: Some(cmd.stderr.display().to_string()),
        started: Some(now_timestamp()),
        ended: None,
        diagnostic: None,
    };
    let finish = |mut r: JobResult, diagnostic: String| {
        r.diagnostic = Some(diagnostic);
        r.wall = begin.elapsed().into();
        r.ended = Some(now_timestamp());
        r
    };

    let Some((program, args)) = cmd.argv.split_first() else {
        return finish(result, "empty command".into());
    };
    let (out, err) = match (File::create(&cmd.stdout), File::create(&cmd.stderr)) {
        (Ok(o), Ok(e)) => (o, e),
        (Err(e), _) | (_, Err(e)) => return finish(result, format!("cannot create output files: {e}")),
    };
    let spawned = Command::new(program)
        .args(args)
        .current_dir(&cmd.cwd)
        .envs(cmd.env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(out)
        .stderr(err)
        .process_group(0)
        .spawn();
    let child = match spawned {
        Ok(c) => c,
        Err(e) => return finish(result, format!("failed to start `{program}`: {e}")),
    };
    let pid = child.id() as libc::pid_t;
    // Reaped below with wait4 so the rusage is available.
    drop(child);

    let mut sampler = RssSampler::new(pid);
    let mut peak: u64 = 0;
    let mut stopped: Option<JobStatus> = None;
    let mut term_sent: Option<Instant> = None;
    let mut kill_sent = false;
    let mut next_sample = Instant::now();

    let waited = loop {
        let mut status: libc::c_int = 0;
        // SAFETY: rusage is plain old data; wait4 fills it on success.
        let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
        if r == pid {
            break Ok((status, usage));
        }
        if r < 0 {
            let e = io::Error::last_os_error();
            if e.kind() != io::ErrorKind::Interrupted {
                break Err(e);
            }
        }

        let now = Instant::now();
        if now >= next_sample {
            if let Some(rss) = sampler.sample() {
                peak = peak.max(rss);
                if stopped.is_none() && limits.memory_bytes.is_some_and(|m| rss > m) {
                    stopped = Some(JobStatus::Memout);
                }
            }
            next_sample = now + SAMPLE_INTERVAL;
        }
        if stopped.is_none() {
            if limits.wall.is_some_and(|w| now.duration_since(begin) >= w.as_duration()) {
                stopped = Some(JobStatus::Timeout);
            } else if stop().is_some() {
                stopped = Some(JobStatus::KilledByUser);
            }
        }
        if stopped.is_some() {
            match term_sent {
                None => {
                    signal_group(pid, libc::SIGTERM);
                    term_sent = Some(now);
                }
                Some(t) if !kill_sent && now.duration_since(t) >= limits.grace.as_duration() => {
                    signal_group(pid, libc::SIGKILL);
                    kill_sent = true;
                }
                _ => {}
            }
        }
        thread::sleep(POLL_INTERVAL);
    };
    // Whatever the leader left behind goes too.
    signal_group(pid, libc::SIGKILL);
    result.wall = begin.elapsed().into();
    result.ended = Some(now_timestamp());

    let (status, usage) = match waited {
        Ok(w) => w,
        Err(e) => {
            result.peak_rss_bytes = peak;
            result.diagnostic = Some(format!("lost track of process {pid}: {e}"));
            return result;
        }
    };
    // ru_maxrss is in KiB on Linux; it covers the leader and the
    // descendants it waited for.
    peak = peak.max(u64::try_from(usage.ru_maxrss).unwrap_or(0).saturating_mul(1024));
    result.peak_rss_bytes = peak;

    let tail = read_tail(&cmd.stderr).unwrap_or_default();
    let parsed = parse_posix_time(&tail);

    if let Some(kind) = stopped {
        result.status = kind;
        result.times = parsed.ok();
        result.diagnostic = Some(match kind {
            JobStatus::Timeout => format!("wall-clock limit {} s reached", limits.wall.unwrap_or_default()),
            JobStatus::Memout => format!(
                "memory limit {} bytes exceeded (peak {peak})",
                limits.memory_bytes.unwrap_or_default()
            ),
            _ => "terminated on request".into(),
        });
        return result;
    }

    if libc::WIFEXITED(status) {
        let code = libc::WEXITSTATUS(status);
        result.exit_code = Some(code);
        result.status = if code == 0 { JobStatus::Completed } else { JobStatus::Error };
        if code != 0 {
            result.diagnostic = Some(format!("exited with status {code}"));
        }
    } else if libc::WIFSIGNALED(status) {
        result.status = JobStatus::Error;
        result.diagnostic = Some(format!("terminated by signal {}", libc::WTERMSIG(status)));
    }
    // A short-lived hog can finish between two samples; the kernel's
    // high-water mark still catches it.
    if limits.memory_bytes.is_some_and(|m| peak > m) {
        result.status = JobStatus::Memout;
        result.diagnostic = Some(format!(
            "memory limit {} bytes exceeded (peak {peak})",
            limits.memory_bytes.unwrap_or_default()
        ));
    }

    result.times = match parsed {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("{}: no usable time record ({e}); using supervisor measurements", cmd.job);
            let note = "time record missing from stderr; times measured by the supervisor";
            result.diagnostic = Some(match result.diagnostic.take() {
                Some(d) => format!("{d}; {note}"),
                None => note.into(),
            });
            Some(TimeRecord::new(result.wall, timeval(usage.ru_utime), timeval(usage.ru_stime)))
        }
    };
    result
}

fn signal_group(pgid: libc::pid_t, sig: libc::c_int) {
    // SAFETY: plain syscall; ESRCH just means the group is already gone.
    unsafe {
        libc::killpg(pgid, sig);
    }
}

fn timeval(tv: libc::timeval) -> Seconds {
    let micros = u64::try_from(tv.tv_sec).unwrap_or(0) * 1_000_000 + u64::try_from(tv.tv_usec).unwrap_or(0);
    Duration::from_micros(micros).into()
}

fn read_tail(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let len = f.metadata()?.len();
    f.seek(SeekFrom::Start(len.saturating_sub(STDERR_TAIL_BYTES)))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

static SAMPLING_WARNED: AtomicBool = AtomicBool::new(false);

/// Sums resident memory over one process group using `/proc`.
struct RssSampler {
    pgid: libc::pid_t,
    page_size: u64,
    enabled: bool,
}

impl RssSampler {
    fn new(pgid: libc::pid_t) -> Self {
        // SAFETY: sysconf has no preconditions.
        let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
        let enabled = page > 0 && fs::read_to_string("/proc/self/stat").is_ok();
        if !enabled && !SAMPLING_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("cannot sample memory from /proc; memory limits are not enforced");
        }
        RssSampler {
            pgid,
            page_size: u64::try_from(page).unwrap_or(4096),
            enabled,
        }
    }

    fn sample(&mut self) -> Option<u64> {
        if !self.enabled {
            return None;
        }
        let entries = match fs::read_dir("/proc") {
            Ok(e) => e,
            Err(e) => {
                if !SAMPLING_WARNED.swap(true, Ordering::Relaxed) {
                    log::warn!("memory sampling failed ({e}); memory limits are not enforced");
                }
                self.enabled = false;
                return None;
            }
        };
        let mut pages = 0u64;
        for entry in entries.flatten() {
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if !name.bytes().all(|b| b.is_ascii_digit()) {
                continue;
            }
            // Processes vanish between listing and reading; skip them.
            let Ok(stat) = fs::read_to_string(entry.path().join("stat")) else {
                continue;
            };
            if let Some((pgrp, rss)) = parse_stat(&stat) {
                if pgrp == self.pgid {
                    pages += rss;
                }
            }
        }
        Some(pages * self.page_size)
    }
}

/// `(pgrp, rss pages)` from a `/proc/<pid>/stat` line.
fn parse_stat(stat: &str) -> Option<(libc::pid_t, u64)> {
    // The command name may contain spaces and parentheses; fields resume
    // after the last ')'.
    let rest = &stat[stat.rfind(')')? + 1..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    // rest[0] is field 3 (state): pgrp is field 5, rss field 24.
    let pgrp = fields.get(2)?.parse().ok()?;
    let rss = fields.get(21)?.parse().ok()?;
    Some((pgrp, rss))
}
