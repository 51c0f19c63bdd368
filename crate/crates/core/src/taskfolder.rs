//! The portable taskfolder bundle.
//!
//! ```text
//! <root>/
//!   taskInfo.xml           task descriptor
//!   machinesettings.xml    time command, invocation overrides, environment
//!   casSources/<instance>/<backend>/executablefile<ext>
//! ```
//!
//! The bundle holds data only; it is executed by this tool's `run`
//! command. Backend invocations are recorded in the descriptor and can be
//! overridden per machine in `machinesettings.xml`. When the computation
//! problem has a verifier, each instance's resource file is copied next to
//! its scripts as `casSources/<instance>/instance.xml`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::compproblems::{check_invocation, render_script, Registry, RegistryError, SCRIPT_PLACEHOLDER};
use crate::resources::{load_instance, InstanceRef, ResourceError, SdTable};
use crate::util::{escape_xml, is_identifier, sha256_hex, shell_quote};
use crate::TOOL_VERSION;

pub const TASK_INFO_FILE: &str = "taskInfo.xml";
pub const SETTINGS_FILE: &str = "machinesettings.xml";
pub const SOURCES_DIR: &str = "casSources";
pub const SCRIPT_STEM: &str = "executablefile";
pub const INSTANCE_COPY_FILE: &str = "instance.xml";
pub const DEFAULT_TIME_COMMAND: &str = "time";

#[derive(Debug, Error)]
pub enum TaskFolderError {
    #[error("refusing to write into non-empty directory {0}")]
    NotEmpty(PathBuf),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid machine settings: {0}")]
    InvalidSettings(String),
    #[error("cannot resolve {0}")]
    Unresolved(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error("cannot load taskfolder {path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: u32,
        column: u32,
        message: String,
    },
    #[error("taskfolder integrity: script for {job} missing at {path}")]
    MissingScript { job: JobKey, path: PathBuf },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TaskFolderError + '_ {
    move |source| TaskFolderError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A computation problem together with the selected instances and backends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub name: String,
    pub problem: String,
    pub instances: Vec<InstanceRef>,
    pub backends: Vec<String>,
}

impl Task {
    pub fn validate(&self) -> Result<(), TaskFolderError> {
        let invalid = |m: String| TaskFolderError::InvalidTask(m);
        if !is_identifier(&self.name) {
            return Err(invalid(format!("task name `{}` is not an identifier", self.name)));
        }
        if self.instances.is_empty() {
            return Err(invalid("no problem instances selected".into()));
        }
        if self.backends.is_empty() {
            return Err(invalid("no backends selected".into()));
        }
        let mut seen = BTreeSet::new();
        let mut names = BTreeMap::new();
        for i in &self.instances {
            if !seen.insert(i) {
                return Err(invalid(format!("instance {i} selected twice")));
            }
            if let Some(other) = names.insert(i.name.as_str(), i) {
                return Err(invalid(format!(
                    "instances {other} and {i} would share the directory {SOURCES_DIR}/{}",
                    i.name
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for b in &self.backends {
            if !seen.insert(b) {
                return Err(invalid(format!("backend `{b}` selected twice")));
            }
        }
        Ok(())
    }

    /// All jobs, instance-major, in selection order.
    pub fn jobs(&self) -> Vec<JobKey> {
        self.instances
            .iter()
            .flat_map(|i| {
                self.backends.iter().map(move |b| JobKey {
                    instance: i.name.clone(),
                    backend: b.clone(),
                })
            })
            .collect()
    }
}

/// `<instance>/<backend>`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobKey {
    pub instance: String,
    pub backend: String,
}

impl JobKey {
    pub fn new(instance: impl Into<String>, backend: impl Into<String>) -> Self {
        JobKey {
            instance: instance.into(),
            backend: backend.into(),
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        let (i, b) = id.trim().split_once('/')?;
        (is_identifier(i) && is_identifier(b)).then(|| JobKey::new(i, b))
    }
}

impl serde::Serialize for JobKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for JobKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        JobKey::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad job id `{s}`")))
    }
}

impl fmt::Display for JobKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.instance, self.backend)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineSettings {
    pub time_command: String,
    /// backend name -> invocation template replacing the one in the descriptor
    pub invocations: BTreeMap<String, String>,
    pub environment: BTreeMap<String, String>,
}

impl Default for MachineSettings {
    fn default() -> Self {
        MachineSettings {
            time_command: DEFAULT_TIME_COMMAND.into(),
            invocations: BTreeMap::new(),
            environment: BTreeMap::new(),
        }
    }
}

impl MachineSettings {
    pub fn validate(&self) -> Result<(), TaskFolderError> {
        if self.time_command.trim().is_empty() {
            return Err(TaskFolderError::InvalidSettings("empty time command".into()));
        }
        for (backend, inv) in &self.invocations {
            check_invocation(inv).map_err(|m| TaskFolderError::InvalidSettings(format!("{backend}: {m}")))?;
        }
        for k in self.environment.keys() {
            if k.is_empty() || k.contains('=') || k.contains('\0') {
                return Err(TaskFolderError::InvalidSettings(format!("bad environment name `{k}`")));
            }
        }
        Ok(())
    }
}

/// How a backend is called and what its scripts are named, as recorded at
/// build time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendSpec {
    pub invocation: String,
    pub extension: String,
}

/// A taskfolder on disk, loaded and checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskFolder {
    pub root: PathBuf,
    pub task: Task,
    pub settings: MachineSettings,
    pub backends: BTreeMap<String, BackendSpec>,
    pub verifier: Option<String>,
    pub tool_version: String,
    pub scripts: BTreeMap<JobKey, PathBuf>,
}

impl TaskFolder {
    pub fn script(&self, job: &JobKey) -> Option<&Path> {
        self.scripts.get(job).map(PathBuf::as_path)
    }

    /// The invocation for `backend` with the settings override applied.
    pub fn invocation(&self, backend: &str) -> Option<&str> {
        self.settings
            .invocations
            .get(backend)
            .or_else(|| self.backends.get(backend).map(|b| &b.invocation))
            .map(String::as_str)
    }

    /// Invocation with `{script}` replaced by the quoted absolute script path.
    pub fn command_for(&self, job: &JobKey) -> Option<String> {
        let script = self.script(job)?;
        let abs = fs::canonicalize(script).unwrap_or_else(|_| script.to_path_buf());
        let inv = self.invocation(&job.backend)?;
        Some(inv.replacen(SCRIPT_PLACEHOLDER, &shell_quote(&abs.to_string_lossy()), 1))
    }

    pub fn script_checksum(&self, job: &JobKey) -> Result<String, TaskFolderError> {
        let path = self.script(job).ok_or_else(|| TaskFolderError::Unresolved(format!("job {job}")))?;
        let bytes = fs::read(path).map_err(io_err(path))?;
        Ok(sha256_hex(&bytes))
    }

    /// Copied resource file for `instance`, present only with a verifier.
    pub fn instance_copy(&self, instance: &str) -> Option<PathBuf> {
        let p = self.root.join(SOURCES_DIR).join(instance).join(INSTANCE_COPY_FILE);
        p.is_file().then_some(p)
    }
}

pub fn script_path(root: &Path, job: &JobKey, extension: &str) -> PathBuf {
    root.join(SOURCES_DIR)
        .join(&job.instance)
        .join(&job.backend)
        .join(format!("{SCRIPT_STEM}{extension}"))
}

/// Render every (instance, backend) script of `task` into `out`.
pub fn build_taskfolder(
    task: &Task,
    settings: &MachineSettings,
    registry: &Registry,
    tables: &[SdTable],
    out: &Path,
) -> Result<TaskFolder, TaskFolderError> {
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(io_err(out))?;
        if entries.next().is_some() {
            return Err(TaskFolderError::NotEmpty(out.to_path_buf()));
        }
    }
    task.validate()?;
    settings.validate()?;
    for b in settings.invocations.keys() {
        if !task.backends.contains(b) {
            return Err(TaskFolderError::InvalidSettings(format!(
                "invocation override for backend `{b}` which is not part of the task"
            )));
        }
    }

    let problem = registry.problem(&task.problem)?;
    let mut backends = Vec::with_capacity(task.backends.len());
    for name in &task.backends {
        backends.push(registry.backend(name)?);
    }
    let verifier = registry.verifier(&problem.name).map(|v| v.command.clone());

    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut scripts = BTreeMap::new();
    for iref in &task.instances {
        let table = tables
            .iter()
            .find(|t| t.name == iref.table)
            .ok_or_else(|| TaskFolderError::Unresolved(format!("SD-Table `{}` (for {iref})", iref.table)))?;
        if !table.entries.contains_key(&iref.name) {
            return Err(TaskFolderError::Unresolved(format!("instance {iref}")));
        }
        let instance = load_instance(table, &iref.name)?;
        for backend in &backends {
            let job = JobKey::new(&iref.name, &backend.name);
            let text = render_script(problem, &instance, backend)?;
            let path = script_path(out, &job, &backend.script_extension);
            files.push((path.clone(), text.into_bytes()));
            scripts.insert(job, path);
        }
        if verifier.is_some() {
            let src = &table.entries[&iref.name];
            let bytes = fs::read(src).map_err(io_err(src))?;
            files.push((out.join(SOURCES_DIR).join(&iref.name).join(INSTANCE_COPY_FILE), bytes));
        }
    }

    let backend_specs: BTreeMap<String, BackendSpec> = backends
        .iter()
        .map(|b| {
            (
                b.name.clone(),
                BackendSpec {
                    invocation: b.invocation.clone(),
                    extension: b.script_extension.clone(),
                },
            )
        })
        .collect();

    let folder = TaskFolder {
        root: out.to_path_buf(),
        task: task.clone(),
        settings: settings.clone(),
        backends: backend_specs,
        verifier,
        tool_version: TOOL_VERSION.to_string(),
        scripts,
    };
    files.push((out.join(TASK_INFO_FILE), task_info_xml(&folder).into_bytes()));
    files.push((out.join(SETTINGS_FILE), settings_xml(settings).into_bytes()));

    for (path, bytes) in files {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        if path.file_stem().and_then(|s| s.to_str()) == Some(SCRIPT_STEM) {
            set_executable(&path)?;
        }
    }
    Ok(folder)
}

#[cfg(unix)]
fn set_executable(path: &Path) -> Result<(), TaskFolderError> {
    use std::os::unix::fs::PermissionsExt;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).map_err(io_err(path))
}

#[cfg(not(unix))]
fn set_executable(_path: &Path) -> Result<(), TaskFolderError> {
    Ok(())
}

fn task_info_xml(folder: &TaskFolder) -> String {
    let task = &folder.task;
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!("<Task toolVersion=\"{}\">\n", escape_xml(&folder.tool_version)));
    out.push_str(&format!("  <name>{}</name>\n", escape_xml(&task.name)));
    out.push_str(&format!(
        "  <computationProblem>{}</computationProblem>\n",
        escape_xml(&task.problem)
    ));
    out.push_str("  <problemInstances>\n");
    for i in &task.instances {
        out.push_str(&format!(
            "    <instance table=\"{}\">{}</instance>\n",
            escape_xml(&i.table),
            escape_xml(&i.name)
        ));
    }
    out.push_str("  </problemInstances>\n  <computerAlgebraSystems>\n");
    for b in &task.backends {
        let spec = &folder.backends[b];
        out.push_str(&format!(
            "    <cas invocation=\"{}\" extension=\"{}\">{}</cas>\n",
            escape_xml(&spec.invocation),
            escape_xml(&spec.extension),
            escape_xml(b)
        ));
    }
    out.push_str("  </computerAlgebraSystems>\n");
    if let Some(v) = &folder.verifier {
        out.push_str(&format!("  <verifier>{}</verifier>\n", escape_xml(v)));
    }
    out.push_str("</Task>\n");
    out
}

fn settings_xml(settings: &MachineSettings) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<MachineSettings>\n");
    out.push_str(&format!(
        "  <timeCommand>{}</timeCommand>\n",
        escape_xml(&settings.time_command)
    ));
    out.push_str("  <invocations>\n");
    for (b, inv) in &settings.invocations {
        out.push_str(&format!(
            "    <invocation backend=\"{}\">{}</invocation>\n",
            escape_xml(b),
            escape_xml(inv)
        ));
    }
    out.push_str("  </invocations>\n  <environment>\n");
    for (k, v) in &settings.environment {
        out.push_str(&format!(
            "    <variable name=\"{}\">{}</variable>\n",
            escape_xml(k),
            escape_xml(v)
        ));
    }
    out.push_str("  </environment>\n</MachineSettings>\n");
    out
}

struct XmlDoc<'a> {
    path: &'a Path,
    doc: roxmltree::Document<'a>,
}

impl<'a> XmlDoc<'a> {
    fn parse(path: &'a Path, text: &'a str) -> Result<Self, TaskFolderError> {
        let doc = roxmltree::Document::parse(text).map_err(|e| TaskFolderError::Parse {
            path: path.to_path_buf(),
            line: e.pos().row,
            column: e.pos().col,
            message: e.to_string(),
        })?;
        Ok(XmlDoc { path, doc })
    }

    fn err(&self, node: roxmltree::Node, message: impl Into<String>) -> TaskFolderError {
        let pos = self.doc.text_pos_at(node.range().start);
        TaskFolderError::Parse {
            path: self.path.to_path_buf(),
            line: pos.row,
            column: pos.col,
            message: message.into(),
        }
    }

    fn child<'d>(&self, node: roxmltree::Node<'d, 'd>, name: &str) -> Result<roxmltree::Node<'d, 'd>, TaskFolderError> {
        node.children()
            .find(|n| n.has_tag_name(name))
            .ok_or_else(|| self.err(node, format!("missing `{name}` element")))
    }

    fn attr<'d>(&self, node: roxmltree::Node<'d, 'd>, name: &str) -> Result<&'d str, TaskFolderError> {
        node.attribute(name)
            .ok_or_else(|| self.err(node, format!("`{}` lacks attribute `{name}`", node.tag_name().name())))
    }
}

fn text_of(node: roxmltree::Node) -> String {
    node.text().unwrap_or("").to_string()
}

fn read_required(path: &Path) -> Result<String, TaskFolderError> {
    fs::read_to_string(path).map_err(|e| TaskFolderError::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Load the bundle at `root` and check that every script it lists exists.
pub fn load_taskfolder(root: &Path) -> Result<TaskFolder, TaskFolderError> {
    if !root.is_dir() {
        return Err(TaskFolderError::Load {
            path: root.to_path_buf(),
            message: "not a directory".into(),
        });
    }
    let info_path = root.join(TASK_INFO_FILE);
    let info_text = read_required(&info_path)?;
    let info = XmlDoc::parse(&info_path, &info_text)?;
    let troot = info.doc.root_element();
    if !troot.has_tag_name("Task") {
        return Err(info.err(troot, "expected root element `Task`"));
    }
    let tool_version = troot.attribute("toolVersion").unwrap_or("").to_string();
    if tool_version != TOOL_VERSION {
        log::warn!(
            "taskfolder {} was built by version `{tool_version}`, this is {TOOL_VERSION}",
            root.display()
        );
    }
    let name = text_of(info.child(troot, "name")?);
    let problem = text_of(info.child(troot, "computationProblem")?);
    let mut instances = Vec::new();
    for n in info.child(troot, "problemInstances")?.children().filter(|n| n.has_tag_name("instance")) {
        instances.push(InstanceRef::new(info.attr(n, "table")?, text_of(n).trim()));
    }
    let mut backend_names = Vec::new();
    let mut backends = BTreeMap::new();
    for n in info.child(troot, "computerAlgebraSystems")?.children().filter(|n| n.has_tag_name("cas")) {
        let bname = text_of(n).trim().to_string();
        let spec = BackendSpec {
            invocation: info.attr(n, "invocation")?.to_string(),
            extension: n.attribute("extension").unwrap_or(crate::compproblems::DEFAULT_SCRIPT_EXTENSION).to_string(),
        };
        check_invocation(&spec.invocation).map_err(|m| info.err(n, m))?;
        backend_names.push(bname.clone());
        backends.insert(bname, spec);
    }
    let verifier = troot
        .children()
        .find(|n| n.has_tag_name("verifier"))
        .map(text_of)
        .filter(|v| !v.trim().is_empty());
    let task = Task {
        name,
        problem,
        instances,
        backends: backend_names,
    };
    task.validate()?;

    let settings_path = root.join(SETTINGS_FILE);
    let settings_text = read_required(&settings_path)?;
    let settings = parse_settings(&settings_path, &settings_text)?;

    let mut scripts = BTreeMap::new();
    for job in task.jobs() {
        let path = script_path(root, &job, &backends[&job.backend].extension);
        if !path.is_file() {
            return Err(TaskFolderError::MissingScript { job, path });
        }
        scripts.insert(job, path);
    }

    Ok(TaskFolder {
        root: root.to_path_buf(),
        task,
        settings,
        backends,
        verifier,
        tool_version,
        scripts,
    })
}

fn parse_settings(path: &Path, text: &str) -> Result<MachineSettings, TaskFolderError> {
    let doc = XmlDoc::parse(path, text)?;
    let root = doc.doc.root_element();
    if !root.has_tag_name("MachineSettings") {
        return Err(doc.err(root, "expected root element `MachineSettings`"));
    }
    let time_command = root
        .children()
        .find(|n| n.has_tag_name("timeCommand"))
        .map(text_of)
        .unwrap_or_else(|| DEFAULT_TIME_COMMAND.to_string());
    let mut invocations = BTreeMap::new();
    if let Some(inv) = root.children().find(|n| n.has_tag_name("invocations")) {
        for n in inv.children().filter(|n| n.has_tag_name("invocation")) {
            invocations.insert(doc.attr(n, "backend")?.to_string(), text_of(n));
        }
    }
    let mut environment = BTreeMap::new();
    if let Some(env) = root.children().find(|n| n.has_tag_name("environment")) {
        for n in env.children().filter(|n| n.has_tag_name("variable")) {
            environment.insert(doc.attr(n, "name")?.to_string(), text_of(n));
        }
    }
    let settings = MachineSettings {
        time_command,
        invocations,
        environment,
    };
    settings.validate()?;
    Ok(settings)
}

/// SHA-256 over every file of the bundle (relative path and contents),
/// excluding `results/`.
pub fn bundle_checksum(root: &Path) -> Result<String, TaskFolderError> {
    fn walk(dir: &Path, rel: &str, out: &mut Vec<(String, PathBuf)>) -> Result<(), TaskFolderError> {
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let entry = entry.map_err(io_err(dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let rel_path = if rel.is_empty() { name.clone() } else { format!("{rel}/{name}") };
            if rel.is_empty() && name == "results" {
                continue;
            }
            let path = entry.path();
            if path.is_dir() {
                walk(&path, &rel_path, out)?;
            } else {
                out.push((rel_path, path));
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, "", &mut files)?;
    files.sort();
    let mut manifest = String::new();
    for (rel, path) in files {
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        manifest.push_str(&format!("{}  {rel}\n", sha256_hex(&bytes)));
    }
    Ok(sha256_hex(manifest.as_bytes()))
}
