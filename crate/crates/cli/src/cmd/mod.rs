pub mod create;
mod dialog;
pub mod query;
pub mod report;
pub mod run;

use std::fs;
use std::path::Path;

use benchfold_core::compproblems::{Registry, RegistryError};
use benchfold_core::metastore::{parse_turtle, TripleStore};
use benchfold_core::resources::ResourceError;
use benchfold_core::taskfolder::TaskFolderError;

use crate::failure::{Failure, EXIT_CLOBBER, EXIT_FAILURE};

pub(crate) fn registry_failure(e: RegistryError) -> Failure {
    let kind = match &e {
        RegistryError::UnknownProblem { .. } => "unknown-problem",
        RegistryError::UnknownBackend { .. } => "unknown-backend",
        RegistryError::Unsupported { .. } => "unsupported-backend",
        RegistryError::Incompatible { .. } => "incompatible-instance",
        RegistryError::File { .. } => "registry",
        _ => "registry",
    };
    Failure::input(kind, e)
}

pub(crate) fn resource_failure(e: ResourceError) -> Failure {
    let kind = match &e {
        ResourceError::NotFound { .. } => "unknown-instance",
        ResourceError::Config { .. } => "resources",
        _ => "resource",
    };
    Failure::input(kind, e)
}

pub(crate) fn taskfolder_failure(e: TaskFolderError) -> Failure {
    match e {
        TaskFolderError::NotEmpty(_) => Failure::new(EXIT_CLOBBER, "exists", e.to_string()),
        TaskFolderError::Registry(r) => registry_failure(r),
        TaskFolderError::Resource(r) => resource_failure(r),
        TaskFolderError::InvalidTask(_) | TaskFolderError::InvalidSettings(_) => Failure::input("invalid-task", e),
        TaskFolderError::Io { .. } => Failure::new(EXIT_FAILURE, "io", e.to_string()),
        _ => Failure::input("taskfolder", e),
    }
}

pub(crate) fn load_registry(extra: &[impl AsRef<Path>]) -> Result<Registry, Failure> {
    let mut registry = Registry::builtin();
    for path in extra {
        registry.merge_file(path.as_ref()).map_err(registry_failure)?;
    }
    Ok(registry)
}

pub(crate) fn load_metadata(path: &Path) -> Result<TripleStore, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input("metadata", format!("{}: {e}", path.display())))?;
    parse_turtle(&text).map_err(|e| Failure::input("parse", format!("{}: {e}", path.display())))
}
