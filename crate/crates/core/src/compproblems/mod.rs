//! Computation problems, solver backends and the registry that ties them
//! together.
//!
//! Registries are plain TOML so new problems and backend templates can be
//! added without touching any code:
//!
//! ```toml
//! [[problem]]
//! name = "GB_Z_lp"
//! tables = ["IntPS"]
//! parameters = { ordering = "lp" }
//!
//! [[backend]]
//! name = "singular"
//! invocation = "Singular -q {script}"
//! extension = ".sdc"
//! templates.GB_Z_lp = { file = "templates/singular_gb.sdc" }
//!
//! [[verifier]]
//! problem = "GB_Z_lp"
//! command = "check-gb {instance} {output}"
//! ```
//!
//! Template `file` paths are relative to the registry file.

mod template;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::reporting::Verifier;
use crate::resources::{InstanceRef, ProblemInstance, SdTable};
use crate::util::is_identifier;

pub use template::{residual_placeholder, Template, TemplateError};

pub const DEFAULT_SCRIPT_EXTENSION: &str = ".sdc";
pub const SCRIPT_PLACEHOLDER: &str = "{script}";

const BUILTIN_REGISTRY: &str = include_str!("../../registry/default.toml");

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown computation problem `{name}` (registered: {known})")]
    UnknownProblem { name: String, known: String },
    #[error("unknown backend `{name}` (registered: {known})")]
    UnknownBackend { name: String, known: String },
    #[error("{kind} `{name}` is already registered")]
    Conflict { kind: &'static str, name: String },
    #[error("invalid {kind} `{name}`: {reason}")]
    Invalid {
        kind: &'static str,
        name: String,
        reason: String,
    },
    #[error("backend `{backend}` has no template for problem `{problem}`")]
    Unsupported { problem: String, backend: String },
    #[error("instance {instance} is not compatible with problem `{problem}`")]
    Incompatible { problem: String, instance: String },
    #[error("rendering `{problem}` for backend `{backend}`: {source}")]
    Render {
        problem: String,
        backend: String,
        #[source]
        source: TemplateError,
    },
    #[error("registry file {path}: {message}")]
    File { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationProblem {
    pub name: String,
    pub compatible_tables: Vec<String>,
    pub parameters: BTreeMap<String, String>,
}

impl ComputationProblem {
    pub fn new(name: impl Into<String>, tables: &[&str]) -> Self {
        ComputationProblem {
            name: name.into(),
            compatible_tables: tables.iter().map(|t| t.to_string()).collect(),
            parameters: BTreeMap::new(),
        }
    }

    pub fn with_parameter(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.parameters.insert(key.into(), value.into());
        self
    }

    fn validate(&self) -> Result<(), RegistryError> {
        let invalid = |reason: &str| RegistryError::Invalid {
            kind: "problem",
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if !is_identifier(&self.name) {
            return Err(invalid("name is not an identifier"));
        }
        if self.compatible_tables.is_empty() {
            return Err(invalid("no compatible tables"));
        }
        if let Some(t) = self.compatible_tables.iter().find(|t| !is_identifier(t)) {
            return Err(invalid(&format!("table name `{t}` is not an identifier")));
        }
        Ok(())
    }
}

/// An external solver: how to call it, and one script template per
/// computation problem it supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Backend {
    pub name: String,
    pub invocation: String,
    pub script_extension: String,
    pub templates: BTreeMap<String, Template>,
}

impl Backend {
    pub fn new(name: impl Into<String>, invocation: impl Into<String>) -> Self {
        Backend {
            name: name.into(),
            invocation: invocation.into(),
            script_extension: DEFAULT_SCRIPT_EXTENSION.into(),
            templates: BTreeMap::new(),
        }
    }

    pub fn with_template(mut self, problem: impl Into<String>, body: &str) -> Result<Self, TemplateError> {
        self.templates.insert(problem.into(), Template::parse(body)?);
        Ok(self)
    }

    fn validate(&self) -> Result<(), RegistryError> {
        let invalid = |reason: String| RegistryError::Invalid {
            kind: "backend",
            name: self.name.clone(),
            reason,
        };
        if !is_identifier(&self.name) {
            return Err(invalid("name is not an identifier".into()));
        }
        check_invocation(&self.invocation).map_err(invalid)?;
        if self.script_extension.contains('/') {
            return Err(invalid("script extension may not contain `/`".into()));
        }
        Ok(())
    }
}

/// An invocation must mention `{script}` exactly once.
pub fn check_invocation(invocation: &str) -> Result<(), String> {
    match invocation.matches(SCRIPT_PLACEHOLDER).count() {
        1 => Ok(()),
        n => Err(format!("invocation `{invocation}` must contain {SCRIPT_PLACEHOLDER} exactly once (found {n})")),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    problems: BTreeMap<String, ComputationProblem>,
    backends: BTreeMap<String, Backend>,
    verifiers: BTreeMap<String, Verifier>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default, rename = "problem")]
    problems: Vec<ProblemEntry>,
    #[serde(default, rename = "backend")]
    backends: Vec<BackendEntry>,
    #[serde(default, rename = "verifier")]
    verifiers: Vec<VerifierEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemEntry {
    name: String,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    tables: Vec<String>,
    #[serde(default)]
    parameters: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BackendEntry {
    name: String,
    invocation: Option<String>,
    extension: Option<String>,
    #[serde(default)]
    templates: BTreeMap<String, TemplateSource>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateSource {
    file: Option<PathBuf>,
    text: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifierEntry {
    problem: String,
    command: String,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// The shipped registry: `GB_Z_lp` plus the `casA`/`casB` stub backends.
    pub fn builtin() -> Self {
        let mut r = Registry::new();
        r.merge_toml(BUILTIN_REGISTRY, Path::new("."), Path::new("<builtin>"))
            .expect("built-in registry is valid");
        r
    }

    /// Merge a registry file. Problems must be new; a backend that already
    /// exists gains the file's templates, and its invocation and extension
    /// are replaced when the file sets them.
    pub fn merge_file(&mut self, path: &Path) -> Result<(), RegistryError> {
        let text = fs::read_to_string(path).map_err(|e| RegistryError::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        self.merge_toml(&text, base, path)
    }

    pub fn merge_toml(&mut self, text: &str, base_dir: &Path, origin: &Path) -> Result<(), RegistryError> {
        let file_err = |message: String| RegistryError::File {
            path: origin.to_path_buf(),
            message,
        };
        let parsed: RegistryFile = toml::from_str(text).map_err(|e| file_err(e.to_string()))?;

        for p in parsed.problems {
            self.register_problem(ComputationProblem {
                name: p.name,
                compatible_tables: p.tables,
                parameters: p.parameters,
            })?;
        }

        for b in parsed.backends {
            let mut templates = BTreeMap::new();
            for (problem, src) in b.templates {
                let body = match (src.file, src.text) {
                    (Some(file), None) => {
                        let path = base_dir.join(&file);
                        fs::read_to_string(&path)
                            .map_err(|e| file_err(format!("template {}: {e}", path.display())))?
                    }
                    (None, Some(text)) => text.strip_prefix('\n').unwrap_or(&text).to_string(),
                    _ => {
                        return Err(file_err(format!(
                            "template {}/{problem} needs exactly one of `file` or `text`",
                            b.name
                        )))
                    }
                };
                let template = Template::parse(&body).map_err(|source| RegistryError::Render {
                    problem: problem.clone(),
                    backend: b.name.clone(),
                    source,
                })?;
                templates.insert(problem, template);
            }

            match self.backends.get_mut(&b.name) {
                Some(existing) => {
                    let mut updated = existing.clone();
                    if let Some(inv) = b.invocation {
                        updated.invocation = inv;
                    }
                    if let Some(ext) = b.extension {
                        updated.script_extension = ext;
                    }
                    for (problem, t) in templates {
                        if updated.templates.insert(problem.clone(), t).is_some() {
                            return Err(RegistryError::Conflict {
                                kind: "template",
                                name: format!("{}/{problem}", b.name),
                            });
                        }
                    }
                    updated.validate()?;
                    *existing = updated;
                }
                None => {
                    let invocation = b
                        .invocation
                        .ok_or_else(|| file_err(format!("backend `{}` needs an invocation", b.name)))?;
                    self.register_backend(Backend {
                        name: b.name,
                        invocation,
                        script_extension: b.extension.unwrap_or_else(|| DEFAULT_SCRIPT_EXTENSION.into()),
                        templates,
                    })?;
                }
            }
        }

        for v in parsed.verifiers {
            self.register_verifier(Verifier::new(v.problem, v.command))?;
        }
        Ok(())
    }

    pub fn register_problem(&mut self, problem: ComputationProblem) -> Result<(), RegistryError> {
        problem.validate()?;
        if self.problems.contains_key(&problem.name) {
            return Err(RegistryError::Conflict {
                kind: "computation problem",
                name: problem.name,
            });
        }
        self.problems.insert(problem.name.clone(), problem);
        Ok(())
    }

    pub fn register_backend(&mut self, backend: Backend) -> Result<(), RegistryError> {
        backend.validate()?;
        if self.backends.contains_key(&backend.name) {
            return Err(RegistryError::Conflict {
                kind: "backend",
                name: backend.name,
            });
        }
        self.backends.insert(backend.name.clone(), backend);
        Ok(())
    }

    /// At most one verifier per computation problem.
    pub fn register_verifier(&mut self, verifier: Verifier) -> Result<(), RegistryError> {
        if self.verifiers.contains_key(&verifier.problem) {
            return Err(RegistryError::Conflict {
                kind: "verifier for problem",
                name: verifier.problem,
            });
        }
        self.verifiers.insert(verifier.problem.clone(), verifier);
        Ok(())
    }

    pub fn problem(&self, name: &str) -> Result<&ComputationProblem, RegistryError> {
        self.problems.get(name).ok_or_else(|| RegistryError::UnknownProblem {
            name: name.to_string(),
            known: join_keys(&self.problems),
        })
    }

    pub fn backend(&self, name: &str) -> Result<&Backend, RegistryError> {
        self.backends.get(name).ok_or_else(|| RegistryError::UnknownBackend {
            name: name.to_string(),
            known: join_keys(&self.backends),
        })
    }

    pub fn verifier(&self, problem: &str) -> Option<&Verifier> {
        self.verifiers.get(problem)
    }

    pub fn problems(&self) -> impl Iterator<Item = &ComputationProblem> {
        self.problems.values()
    }

    pub fn backends(&self) -> impl Iterator<Item = &Backend> {
        self.backends.values()
    }

    /// Backends that carry a template for `problem`.
    pub fn backends_for<'a>(&'a self, problem: &'a str) -> impl Iterator<Item = &'a Backend> + 'a {
        self.backends.values().filter(move |b| b.templates.contains_key(problem))
    }

    /// Entries of every table listed as compatible with `problem`, sorted by
    /// (table, name).
    pub fn list_suitable_instances(
        &self,
        problem: &str,
        tables: &[SdTable],
    ) -> Result<Vec<InstanceRef>, RegistryError> {
        let problem = self.problem(problem)?;
        let mut out: Vec<InstanceRef> = tables
            .iter()
            .filter(|t| problem.compatible_tables.contains(&t.name))
            .flat_map(SdTable::instance_refs)
            .collect();
        out.sort();
        Ok(out)
    }
}

fn join_keys<V>(map: &BTreeMap<String, V>) -> String {
    if map.is_empty() {
        return "none".into();
    }
    map.keys().cloned().collect::<Vec<_>>().join(", ")
}

/// Render the script `backend` runs for `instance` under `problem`.
pub fn render_script(
    problem: &ComputationProblem,
    instance: &ProblemInstance,
    backend: &Backend,
) -> Result<String, RegistryError> {
    let template = backend
        .templates
        .get(&problem.name)
        .ok_or_else(|| RegistryError::Unsupported {
            problem: problem.name.clone(),
            backend: backend.name.clone(),
        })?;
    if !problem.compatible_tables.contains(&instance.table) {
        return Err(RegistryError::Incompatible {
            problem: problem.name.clone(),
            instance: instance.instance_ref().to_string(),
        });
    }
    template
        .render(instance, &problem.parameters)
        .map_err(|source| RegistryError::Render {
            problem: problem.name.clone(),
            backend: backend.name.clone(),
            source,
        })
}
