//! Acceptance suite: one PASS/FAIL line per criterion, each with its own
//! runtime bound. Exits nonzero if any criterion fails.

mod common;
#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use benchfold_core::compproblems::Registry;
use benchfold_core::metastore::{parse_pattern, parse_turtle, query, select_by_property, PropertyFilter, Term};
use benchfold_core::reporting::{parse_results_xml, timings_csv, to_html, to_xml, RunReport};
use benchfold_core::resources::scan_tables;
use benchfold_core::runner::{parse_posix_time, JobStatus, Manifest, Seconds, TimeRecord, CONTROL_FILE};
use benchfold_core::taskfolder::{build_taskfolder, bundle_checksum, load_taskfolder, JobKey};
use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use walkdir::WalkDir;

type Check = Result<(), String>;
type Criterion = (&'static str, Duration, fn() -> Check);

// Runtime bounds per criterion.
const FIDELITY_BOUND: Duration = Duration::from_secs(1);
const TIME_PARSE_BOUND: Duration = Duration::from_secs(1);
const TIMEOUT_BOUND: Duration = Duration::from_secs(15);
const MEMOUT_BOUND: Duration = Duration::from_secs(10);
const ORPHAN_BOUND: Duration = Duration::from_secs(10);
const RESUME_BOUND: Duration = Duration::from_secs(10);
const KILL_BOUND: Duration = Duration::from_secs(10);
const METASTORE_BOUND: Duration = Duration::from_secs(5);
const REPORTING_BOUND: Duration = Duration::from_secs(1);
const DETERMINISM_BOUND: Duration = Duration::from_secs(2);

// Wall-limit window: limit, plus the default 5 s grace, plus 0.5 s slack.
const TIMEOUT_LIMIT: &str = "1";
const TIMEOUT_WALL_MIN: f64 = 1.0;
const TIMEOUT_WALL_MAX: f64 = 6.5;
// A user kill must be visible in results.xml this soon after the command.
const KILL_LATENCY: Duration = Duration::from_secs(2);
const TIME_RECORDS: usize = 200;
const ORACLE_CASES: usize = 100;
const ORACLE_MAX_TRIPLES: usize = 1000;

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("taskfolder fidelity", FIDELITY_BOUND, taskfolder_fidelity),
        ("posix time parsing", TIME_PARSE_BOUND, posix_time_parsing),
        ("wall-limit enforcement", TIMEOUT_BOUND, wall_limit),
        ("memory-limit enforcement", MEMOUT_BOUND, memory_limit),
        ("no orphans", ORPHAN_BOUND, no_orphans),
        ("resume", RESUME_BOUND, resume),
        ("manual kill", KILL_BOUND, manual_kill),
        ("metastore oracle equivalence", METASTORE_BOUND, metastore_oracle),
        ("reporting round-trip", REPORTING_BOUND, reporting_round_trip),
        ("determinism", DETERMINISM_BOUND, determinism),
    ];
    let mut failed = 0;
    for (name, bound, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|()| {
            if took <= bound {
                Ok(())
            } else {
                Err(format!("took {:.2} s, bound {:.2} s", took.as_secs_f64(), bound.as_secs_f64()))
            }
        });
        match result {
            Ok(()) => println!("PASS {name} ({:.2} s)", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({:.2} s): {why}", took.as_secs_f64());
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn create_worked_example(sb: &Sandbox, out: &str) -> Check {
    let out = sb.run(&[
        "create",
        "--resources",
        resources().to_str().unwrap(),
        "--problem",
        "GB_Z_lp",
        "--instances",
        "IntPS/Amrhein,IntPS/Caprasse",
        "--backends",
        "casA,casB",
        "--out",
        out,
        "--name",
        "worked",
    ]);
    ensure(out.status.success(), || format!("create failed: {}", stderr(&out)))
}

fn files_under(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = WalkDir::new(root)
        .into_iter()
        .flatten()
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn taskfolder_fidelity() -> Check {
    let sb = Sandbox::new();
    create_worked_example(&sb, "T1")?;
    let root = sb.path().join("T1");
    let mut want = vec!["machinesettings.xml".to_string(), "taskInfo.xml".to_string()];
    for i in ["Amrhein", "Caprasse"] {
        for b in ["casA", "casB"] {
            want.push(format!("casSources/{i}/{b}/executablefile.sdc"));
        }
    }
    want.sort();
    let original = files_under(&root);
    let got: Vec<String> = original.iter().map(|(p, _)| p.clone()).collect();
    ensure(got == want, || format!("shape {got:?}"))?;

    let loaded = load_taskfolder(&root).map_err(|e| e.to_string())?;
    let tables = scan_tables(&resources()).map_err(|e| e.to_string())?;
    let rebuilt = sb.path().join("T1-rebuilt");
    build_taskfolder(&loaded.task, &loaded.settings, &Registry::builtin(), &tables, &rebuilt).map_err(|e| e.to_string())?;
    ensure(files_under(&rebuilt) == original, || "load→build is not byte-identical".into())
}

fn posix_time_parsing() -> Check {
    let mut rng = StdRng::seed_from_u64(0x7143);
    for _ in 0..TIME_RECORDS {
        let mut secs = || Seconds::from_centis(rng.gen_range(0..10_000_000));
        let record = TimeRecord::new(secs(), secs(), secs());
        let text = record.format();
        let parsed = parse_posix_time(&text).map_err(|e| format!("{text:?}: {e}"))?;
        ensure(parsed == record, || format!("{text:?} parsed to {parsed:?}"))?;
        let lines: Vec<&str> = text.lines().collect();
        for drop in 0..3 {
            let partial: Vec<&str> = lines.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, l)| *l).collect();
            let partial = partial.join("\n");
            ensure(parse_posix_time(&partial).is_err(), || format!("accepted incomplete {partial:?}"))?;
        }
    }
    Ok(())
}

fn job<'a>(r: &'a RunReport, id: &str) -> Result<&'a benchfold_core::reporting::ReportJob, String> {
    r.jobs.iter().find(|j| j.id.to_string() == id).ok_or_else(|| format!("no job {id}"))
}

fn expect_status(r: &RunReport, id: &str, want: JobStatus) -> Check {
    let got = job(r, id)?.status;
    ensure(got == want, || format!("{id} is {got}, expected {want}"))
}

fn wall_limit() -> Check {
    let sb = Sandbox::new();
    let folder = sb.stub_folder("T", &["Caprasse"], &[("a_sleeper", "sleep 10"), ("b_next", "print next")]);
    let out = sb.run(&["run", "T", "--time-limit", TIMEOUT_LIMIT]);
    ensure(out.status.code() == Some(0), || format!("run exited {:?}: {}", out.status.code(), stderr(&out)))?;
    let r = report(&only_results_dir(&folder));
    expect_status(&r, "Caprasse/a_sleeper", JobStatus::Timeout)?;
    let wall = job(&r, "Caprasse/a_sleeper")?.wall.ok_or("no wall time")?.as_secs_f64();
    ensure((TIMEOUT_WALL_MIN..=TIMEOUT_WALL_MAX).contains(&wall), || {
        format!("wall {wall:.2} s outside [{TIMEOUT_WALL_MIN}, {TIMEOUT_WALL_MAX}]")
    })?;
    expect_status(&r, "Caprasse/b_next", JobStatus::Completed)
}

fn memory_limit() -> Check {
    let sb = Sandbox::new();
    let folder = sb.stub_folder(
        "T",
        &["Caprasse"],
        &[("big", "alloc 300\nsleep 2"), ("small", "alloc 30\nsleep 0.3")],
    );
    let out = sb.run(&["run", "T", "--mem-limit", "100", "--grace", "1"]);
    ensure(out.status.code() == Some(0), || format!("run exited {:?}: {}", out.status.code(), stderr(&out)))?;
    let r = report(&only_results_dir(&folder));
    expect_status(&r, "Caprasse/big", JobStatus::Memout)?;
    expect_status(&r, "Caprasse/small", JobStatus::Completed)
}

fn no_orphans() -> Check {
    let sb = Sandbox::new();
    let pidfile = sb.path().join("grandchild.pid");
    let script = format!("spawn-child 60 {}\nsleep 60", pidfile.display());
    sb.stub_folder("T", &["Caprasse"], &[("forker", &script)]);
    let child = sb.spawn(&["run", "T", "--time-limit", "1", "--grace", "1"]);

    let deadline = Instant::now() + Duration::from_secs(5);
    let grandchild = loop {
        if let Some(pid) = fs::read_to_string(&pidfile).ok().and_then(|s| s.trim().parse::<u32>().ok()) {
            break pid;
        }
        if Instant::now() > deadline {
            return Err("grandchild never started".into());
        }
        thread::sleep(Duration::from_millis(20));
    };
    let pgid = pgid_of(grandchild).ok_or("grandchild vanished before the limit")?;
    ensure(pgid != std::process::id(), || "grandchild shares the test's process group".into())?;
    let out = child.finish();
    ensure(out.status.code() == Some(0), || format!("run exited {:?}: {}", out.status.code(), stderr(&out)))?;
    // Zombies reparented to a non-reaping init count as gone.
    let survivors = group_members(pgid);
    ensure(survivors.is_empty() && !is_alive(grandchild), || format!("survivors in group {pgid}: {survivors:?}"))
}

fn resume() -> Check {
    let sb = Sandbox::new();
    let log = sb.path().join("log");
    let step = |name: &str, extra: &str| format!("append {} {name}\n{extra}", log.display());
    let folder = sb.stub_folder(
        "T",
        &["Caprasse"],
        &[("j1", &step("j1", "")), ("j2", &step("j2", "sleep 2")), ("j3", &step("j3", ""))],
    );
    let child = sb.spawn(&["run", "T"]);
    let (dir, _) = wait_for_report(&folder, Duration::from_secs(5), |r| {
        r.jobs.iter().any(|j| j.id.backend == "j2" && j.status == JobStatus::Running)
    });
    // Abort the run while job 2 is in flight.
    send_signal(&child, "TERM");
    let out = child.finish();
    ensure(out.status.code() == Some(130), || format!("interrupted run exited {:?}", out.status.code()))?;
    let before = fs::read_to_string(&log).unwrap_or_default();
    ensure(before == "j1\nj2\n", || format!("before resume the log was {before:?}"))?;

    let manifest = Manifest::load(&dir).map_err(|e| e.to_string())?;
    let tf = load_taskfolder(&folder).map_err(|e| e.to_string())?;
    let j1 = JobKey::new("Caprasse", "j1");
    let kept: Vec<String> = manifest.jobs.keys().map(ToString::to_string).collect();
    ensure(kept == ["Caprasse/j1"], || format!("manifest holds {kept:?}"))?;
    ensure(
        manifest.jobs[&j1].checksum == tf.script_checksum(&j1).map_err(|e| e.to_string())?,
        || "manifest checksum differs from the script".into(),
    )?;

    let out = sb.run(&["run", "T", "--resume", dir.to_str().unwrap()]);
    ensure(out.status.code() == Some(0), || format!("resume exited {:?}: {}", out.status.code(), stderr(&out)))?;
    ensure(stdout(&out).contains("(2 run, 1 kept"), || format!("resume summary: {}", stdout(&out)))?;
    let after = fs::read_to_string(&log).unwrap_or_default();
    ensure(after == "j1\nj2\nj2\nj3\n", || format!("after resume the log was {after:?}"))?;
    let r = report(&dir);
    ensure(r.count(JobStatus::Completed) == 3, || format!("{:?}", r.jobs))
}

fn manual_kill() -> Check {
    let sb = Sandbox::new();
    let folder = sb.stub_folder("T", &["Caprasse"], &[("a_slow", "sleep 30"), ("b_after", "print after")]);
    let child = sb.spawn(&["run", "T"]);
    let (dir, _) = wait_for_report(&folder, Duration::from_secs(5), |r| {
        r.jobs.iter().any(|j| j.id.backend == "a_slow" && j.status == JobStatus::Running)
    });
    fs::OpenOptions::new()
        .append(true)
        .open(dir.join(CONTROL_FILE))
        .and_then(|mut f| std::io::Write::write_all(&mut f, b"kill Caprasse/a_slow\n"))
        .map_err(|e| e.to_string())?;
    let sent = Instant::now();
    let (_, _) = wait_for_report(&folder, KILL_LATENCY + Duration::from_secs(3), |r| {
        r.jobs
            .iter()
            .any(|j| j.id.backend == "a_slow" && j.status == JobStatus::KilledByUser)
    });
    let latency = sent.elapsed();
    ensure(latency <= KILL_LATENCY, || format!("kill took {:.2} s", latency.as_secs_f64()))?;
    let out = child.finish();
    ensure(out.status.code() == Some(0), || format!("run exited {:?}: {}", out.status.code(), stderr(&out)))?;
    let r = report(&dir);
    expect_status(&r, "Caprasse/a_slow", JobStatus::KilledByUser)?;
    expect_status(&r, "Caprasse/b_after", JobStatus::Completed)
}

fn metastore_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(0x0ac1e);
    for case in 0..ORACLE_CASES {
        let store = oracle::random_store(&mut rng, ORACLE_MAX_TRIPLES);
        let (patterns, filters) = oracle::random_query(&mut rng, &store);
        let got = query(&store, &patterns, &filters).map_err(|e| e.to_string())?;
        let want = oracle::brute_force(&store, &patterns, &filters);
        ensure(got.rows == want, || format!("case {case} differs: {patterns:?} {filters:?}"))?;
    }
    let ttl = fs::read_to_string(caprasse_ttl()).map_err(|e| e.to_string())?;
    let store = parse_turtle(&ttl).map_err(|e| e.to_string())?;
    ensure(store.len() == 6, || format!("{} triples", store.len()))?;
    let pattern = parse_pattern("?s sd:hasDegree ?d", store.prefixes()).map_err(|e| e.to_string())?;
    let result = query(&store, &[pattern], &[]).map_err(|e| e.to_string())?;
    ensure(result.column("d") == Some(vec![&Term::literal("56")]), || format!("{result:?}"))?;
    let le36: PropertyFilter = "hasDegree <= 36".parse().map_err(|e| format!("{e}"))?;
    let hits = select_by_property(&store, &le36).map_err(|e| e.to_string())?;
    ensure(hits.is_empty(), || format!("<= 36 matched {hits:?}"))
}

fn reporting_round_trip() -> Check {
    let sb = Sandbox::new();
    let folder = sb.stub_folder("T", &["Amrhein", "Caprasse"], &[("s1", "print a"), ("s2", "exit 1")]);
    let out = sb.run(&["run", "T"]);
    ensure(out.status.code() == Some(0), || format!("run exited {:?}", out.status.code()))?;
    let r = report(&only_results_dir(&folder));
    let xml = to_xml(&r);
    let back = parse_results_xml(&xml)?;
    ensure(back == r, || "results.xml does not re-parse to the same report".into())?;
    let expected = 2 * 2;
    let xml_jobs = xml.matches("<job ").count();
    let html_rows = to_html(&r).matches("<tr class=\"job ").count();
    ensure(xml_jobs == expected && html_rows == expected && r.jobs.len() == expected, || {
        format!("xml {xml_jobs}, html {html_rows}, parsed {}", r.jobs.len())
    })?;
    let csv = timings_csv(&[r]).map_err(|e| e.to_string())?;
    ensure(csv.lines().count() == 3, || format!("timings.csv:\n{csv}"))
}

fn determinism() -> Check {
    let sb = Sandbox::new();
    create_worked_example(&sb, "A")?;
    create_worked_example(&sb, "B")?;
    let a = bundle_checksum(&sb.path().join("A")).map_err(|e| e.to_string())?;
    let b = bundle_checksum(&sb.path().join("B")).map_err(|e| e.to_string())?;
    ensure(a == b, || format!("{a} != {b}"))
}
