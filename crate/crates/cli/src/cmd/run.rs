use std::path::{Path, PathBuf};
use std::thread;

use anyhow::Result;
use benchfold_core::runner::{
    self, ControlChannel, InterruptAction, JobStatus, RunConfig, RunError, RunLimits, Seconds, DEFAULT_GRACE,
    RESULTS_DIR,
};
use benchfold_core::taskfolder::load_taskfolder;
use signal_hook::consts::{SIGINT, SIGTERM};
use signal_hook::iterator::Signals;

use super::taskfolder_failure;
use crate::config::CliConfig;
use crate::failure::{Failure, EXIT_FAILURE, EXIT_INTERRUPTED};
use crate::RunArgs;

const MB: u64 = 1024 * 1024;

pub fn run(args: RunArgs, config: &CliConfig) -> Result<u8> {
    let folder = load_taskfolder(&args.folder).map_err(taskfolder_failure)?;
    let limits = limits(&args, config)?;
    let run_config = RunConfig {
        limits,
        workers: usize::from(args.jobs),
    };
    let resume_dir = args.resume.as_ref().map(|r| resolve_results_dir(&args.folder, r)).transpose()?;

    let control = ControlChannel::new();
    let mut signals = Signals::new([SIGINT, SIGTERM])?;
    let handle = signals.handle();
    let listener = {
        let control = control.clone();
        thread::spawn(move || {
            for sig in signals.forever() {
                if sig == SIGTERM {
                    eprintln!("terminated: aborting the run");
                    control.abort();
                    continue;
                }
                match control.interrupt() {
                    InterruptAction::KillRunning => eprintln!(
                        "interrupt: stopping the running job; interrupt again within {} s to abort the run",
                        runner::DOUBLE_INTERRUPT_WINDOW.as_secs()
                    ),
                    InterruptAction::AbortRun => eprintln!("interrupt: aborting the run"),
                }
            }
        })
    };

    let outcome = match &resume_dir {
        Some(dir) => runner::resume(&folder, dir, &run_config, &control),
        None => runner::run_all(&folder, &run_config, &control),
    };
    handle.close();
    let _ = listener.join();
    let outcome = outcome.map_err(run_failure)?;

    let counts: Vec<String> = JobStatus::ALL
        .into_iter()
        .filter_map(|s| {
            let n = outcome.report.count(s);
            (n > 0).then(|| format!("{n} {s}"))
        })
        .collect();
    println!("results: {}", outcome.results_dir.display());
    println!(
        "jobs: {} ({} run, {} kept from the previous run)",
        counts.join(", "),
        outcome.executed.len(),
        outcome.skipped.len()
    );
    if outcome.is_complete() {
        return Ok(0);
    }
    let hint = format!("continue with --resume {}", outcome.results_dir.display());
    if control.is_aborted() {
        let interrupted = Failure::new(EXIT_INTERRUPTED, "interrupted", format!("run aborted; {hint}"));
        return Err(interrupted.into());
    }
    Err(Failure::new(EXIT_FAILURE, "incomplete", format!("not every job finished; {hint}")).into())
}

fn run_failure(e: RunError) -> anyhow::Error {
    match e {
        RunError::InvalidLimits(_) => Failure::input("invalid-argument", e).into(),
        RunError::TaskFolder(t) => taskfolder_failure(t).into(),
        other => Failure::new(EXIT_FAILURE, "aborted", other.to_string()).into(),
    }
}

fn seconds(flag: &str, text: &str) -> Result<Seconds, Failure> {
    text.parse::<Seconds>()
        .map_err(|e| Failure::input("invalid-argument", format!("{flag} `{text}`: {}", e.0)))
}

fn limits(args: &RunArgs, config: &CliConfig) -> Result<RunLimits, Failure> {
    let from_config = |v: Option<f64>, flag: &str| -> Result<Option<Seconds>, Failure> {
        v.map(|s| {
            Seconds::from_secs_f64(s)
                .ok_or_else(|| Failure::input("config", format!("limits.{flag} must be a non-negative number")))
        })
        .transpose()
    };
    let wall = match &args.time_limit {
        Some(t) => Some(seconds("--time-limit", t)?),
        None => from_config(config.limits.time, "time")?,
    };
    let grace = match &args.grace {
        Some(t) => seconds("--grace", t)?,
        None => from_config(config.limits.grace, "grace")?.unwrap_or(DEFAULT_GRACE),
    };
    let memory_bytes = args
        .mem_limit
        .or(config.limits.memory)
        .map(|mb| mb.checked_mul(MB).ok_or_else(|| Failure::input("invalid-argument", "--mem-limit too large")))
        .transpose()?;
    let limits = RunLimits {
        wall,
        memory_bytes,
        grace,
    };
    limits
        .validate()
        .map_err(|e| Failure::input("invalid-argument", e))?;
    Ok(limits)
}

/// A path as given, or the name of a directory under `<folder>/results`.
fn resolve_results_dir(folder: &Path, given: &Path) -> Result<PathBuf, Failure> {
    if given.is_dir() {
        return Ok(given.to_path_buf());
    }
    let under = folder.join(RESULTS_DIR).join(given);
    if under.is_dir() {
        return Ok(under);
    }
    Err(Failure::input("resume", format!("no results directory {}", given.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_from_flags_and_config() {
        let args = RunArgs {
            time_limit: Some("1.5".into()),
            mem_limit: Some(100),
            ..RunArgs::default()
        };
        let l = limits(&args, &CliConfig::default()).unwrap();
        assert_eq!(l.wall, Some(Seconds::from_centis(150)));
        assert_eq!(l.memory_bytes, Some(100 * MB));
        assert_eq!(l.grace, DEFAULT_GRACE);

        let mut config = CliConfig::default();
        config.limits.time = Some(2.0);
        config.limits.grace = Some(1.0);
        let l = limits(&RunArgs::default(), &config).unwrap();
        assert_eq!(l.wall, Some(Seconds::from_centis(200)));
        assert_eq!(l.grace, Seconds::from_centis(100));

        let bad = RunArgs {
            time_limit: Some("0".into()),
            ..RunArgs::default()
        };
        assert_eq!(limits(&bad, &CliConfig::default()).unwrap_err().code, 2);
        let bad = RunArgs {
            time_limit: Some("-1".into()),
            ..RunArgs::default()
        };
        assert_eq!(limits(&bad, &CliConfig::default()).unwrap_err().code, 2);
    }
}
