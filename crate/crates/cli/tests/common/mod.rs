#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use benchfold_core::reporting::{read_results_xml, RunReport, RESULTS_XML};
use tempfile::TempDir;

pub const BIN: &str = env!("CARGO_BIN_EXE_benchfold");
pub const STUB: &str = env!("CARGO_BIN_EXE_benchfold-stub");
pub const STUB_PROBLEM: &str = "Stub";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn resources() -> PathBuf {
    fixtures().join("resources")
}

pub fn caprasse_ttl() -> PathBuf {
    fixtures().join("caprasse.ttl")
}

/// A scratch working directory; commands run inside it.
pub struct Sandbox {
    pub dir: TempDir,
}

impl Sandbox {
    pub fn new() -> Self {
        Sandbox {
            dir: TempDir::new().unwrap(),
        }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn command(&self, args: &[&str]) -> Command {
        let mut c = Command::new(BIN);
        c.args(args).current_dir(self.path()).env_remove("RUST_LOG");
        c
    }

    pub fn run(&self, args: &[&str]) -> Output {
        self.command(args).output().unwrap()
    }

    pub fn spawn(&self, args: &[&str]) -> Running {
        let child = self
            .command(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        Running(Some(child))
    }

    /// Registry with problem `Stub` on table IntPS and one stub backend
    /// per `(name, script)`; the script is read by `benchfold-stub`.
    pub fn stub_registry(&self, backends: &[(&str, &str)]) -> PathBuf {
        let mut toml = format!("[[problem]]\nname = \"{STUB_PROBLEM}\"\ntables = [\"IntPS\"]\n");
        for (name, script) in backends {
            toml.push_str(&format!(
                "\n[[backend]]\nname = \"{name}\"\ninvocation = \"{STUB} {{script}}\"\nextension = \".stub\"\n\
                 [backend.templates.{STUB_PROBLEM}]\ntext = '''\n{script}\n'''\n"
            ));
        }
        let path = self.path().join("stub-registry.toml");
        fs::write(&path, toml).unwrap();
        path
    }

    /// Build taskfolder `name` running every stub backend on `instances`.
    pub fn stub_folder(&self, name: &str, instances: &[&str], backends: &[(&str, &str)]) -> PathBuf {
        let registry = self.stub_registry(backends);
        let names: Vec<&str> = backends.iter().map(|(n, _)| *n).collect();
        let out = self.run(&[
            "create",
            "--resources",
            resources().to_str().unwrap(),
            "--registry",
            registry.to_str().unwrap(),
            "--problem",
            STUB_PROBLEM,
            "--instances",
            &instances.join(","),
            "--backends",
            &names.join(","),
            "--out",
            name,
        ]);
        assert!(out.status.success(), "create failed: {}", String::from_utf8_lossy(&out.stderr));
        self.path().join(name)
    }
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Results directories of `folder`, oldest first.
pub fn results_dirs(folder: &Path) -> Vec<PathBuf> {
    let Ok(entries) = fs::read_dir(folder.join("results")) else {
        return Vec::new();
    };
    let mut dirs: Vec<PathBuf> = entries.flatten().map(|e| e.path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    dirs
}

pub fn only_results_dir(folder: &Path) -> PathBuf {
    let dirs = results_dirs(folder);
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

pub fn report(results_dir: &Path) -> RunReport {
    read_results_xml(&results_dir.join(RESULTS_XML)).unwrap()
}

/// Poll until `check` holds on the live report, or panic after `limit`.
pub fn wait_for_report(folder: &Path, limit: Duration, check: impl Fn(&RunReport) -> bool) -> (PathBuf, RunReport) {
    let deadline = Instant::now() + limit;
    loop {
        if let Some(dir) = results_dirs(folder).pop() {
            if let Ok(r) = read_results_xml(&dir.join(RESULTS_XML)) {
                if check(&r) {
                    return (dir, r);
                }
            }
        }
        assert!(Instant::now() < deadline, "report condition not reached in {limit:?}");
        thread::sleep(Duration::from_millis(20));
    }
}

/// A background `benchfold` process; aborted and reaped if dropped early.
pub struct Running(Option<Child>);

impl Running {
    pub fn id(&self) -> u32 {
        self.0.as_ref().unwrap().id()
    }

    pub fn finish(mut self) -> Output {
        self.0.take().unwrap().wait_with_output().unwrap()
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        if let Some(mut child) = self.0.take() {
            // TERM lets the runner take its job group down with it.
            let _ = Command::new("kill").args(["-TERM", &child.id().to_string()]).status();
            let _ = child.wait();
        }
    }
}

pub fn send_signal(child: &Running, signal: &str) {
    let ok = Command::new("kill")
        .args([format!("-{signal}"), child.id().to_string()])
        .status()
        .unwrap()
        .success();
    assert!(ok, "kill -{signal} failed");
}

/// True if `pid` exists and is not a zombie.
pub fn is_alive(pid: u32) -> bool {
    match fs::read_to_string(format!("/proc/{pid}/stat")) {
        Ok(stat) => {
            let state = stat.rsplit_once(')').and_then(|(_, rest)| rest.split_whitespace().next());
            state != Some("Z") && state != Some("X")
        }
        Err(_) => false,
    }
}

/// Live processes whose process group is `pgid`.
pub fn group_members(pgid: u32) -> Vec<u32> {
    let mut out = Vec::new();
    for entry in fs::read_dir("/proc").unwrap().flatten() {
        let Ok(pid) = entry.file_name().to_string_lossy().parse::<u32>() else {
            continue;
        };
        let Ok(stat) = fs::read_to_string(entry.path().join("stat")) else {
            continue;
        };
        let Some((_, rest)) = stat.rsplit_once(')') else { continue };
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.get(2).and_then(|g| g.parse::<u32>().ok()) == Some(pgid) && !matches!(fields[0], "Z" | "X") {
            out.push(pid);
        }
    }
    out
}

/// Process group of a live `pid`.
pub fn pgid_of(pid: u32) -> Option<u32> {
    let stat = fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    let (_, rest) = stat.rsplit_once(')')?;
    rest.split_whitespace().nth(2)?.parse().ok()
}
