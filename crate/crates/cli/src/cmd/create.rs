use std::collections::BTreeMap;
use std::io::{self, IsTerminal};
use std::path::{Path, PathBuf};

use anyhow::Result;
use benchfold_core::compproblems::Registry;
use benchfold_core::metastore::{describes_instance, select_by_property, PropertyFilter};
use benchfold_core::resources::{scan_tables, InstanceRef, SdTable};
use benchfold_core::taskfolder::{build_taskfolder, MachineSettings, Task, DEFAULT_TIME_COMMAND};
use benchfold_core::is_identifier;

use super::dialog::Dialog;
use super::{load_metadata, load_registry, registry_failure, resource_failure, taskfolder_failure};
use crate::config::CliConfig;
use crate::failure::Failure;
use crate::CreateArgs;

pub fn run(args: CreateArgs, config: &CliConfig) -> Result<u8> {
    let resources = args
        .resources
        .clone()
        .or_else(|| config.resources.clone())
        .ok_or_else(|| Failure::input("missing-argument", "--resources (or `resources` in the config file) is required"))?;
    let tables = scan_tables(&resources).map_err(resource_failure)?;
    let registry = load_registry(&[config.registries.as_slice(), args.registries.as_slice()].concat())?;

    let interactive = args.interactive || (args.problem.is_none() && io::stdin().is_terminal());
    let plan = if interactive {
        let stdin = io::stdin();
        let mut dialog = Dialog::new(stdin.lock(), io::stderr());
        dialog.plan(&args, config, &registry, &tables)?
    } else {
        non_interactive(&args, config, &registry, &tables)?
    };

    let folder = build_taskfolder(&plan.task, &plan.settings, &registry, &tables, &plan.out).map_err(taskfolder_failure)?;
    println!(
        "created {} ({} instances x {} backends = {} scripts)",
        plan.out.display(),
        plan.task.instances.len(),
        plan.task.backends.len(),
        folder.scripts.len()
    );
    Ok(0)
}

pub(crate) struct Plan {
    pub task: Task,
    pub settings: MachineSettings,
    pub out: PathBuf,
}

fn non_interactive(args: &CreateArgs, config: &CliConfig, registry: &Registry, tables: &[SdTable]) -> Result<Plan, Failure> {
    let missing = |flag: &str| Failure::input("missing-argument", format!("{flag} is required (or use --interactive)"));
    let problem = args.problem.as_deref().ok_or_else(|| missing("--problem"))?;
    registry.problem(problem).map_err(registry_failure)?;
    let candidates = candidates(args, config, registry, tables, problem)?;
    let instances = if args.instances.is_empty() {
        candidates
    } else {
        args.instances
            .iter()
            .map(|s| resolve_instance(s, tables, &candidates, problem))
            .collect::<Result<_, _>>()?
    };
    if args.backends.is_empty() {
        return Err(missing("--backends"));
    }
    for b in &args.backends {
        registry.backend(b).map_err(registry_failure)?;
    }
    let out = args.out.clone().ok_or_else(|| missing("--out"))?;
    Ok(Plan {
        task: Task {
            name: task_name(args.name.as_deref(), &out, problem)?,
            problem: problem.to_string(),
            instances,
            backends: args.backends.clone(),
        },
        settings: settings(args)?,
        out,
    })
}

/// Suitable instances for `problem`, narrowed by `--query` if given.
pub(crate) fn candidates(
    args: &CreateArgs,
    config: &CliConfig,
    registry: &Registry,
    tables: &[SdTable],
    problem: &str,
) -> Result<Vec<InstanceRef>, Failure> {
    let mut list = registry.list_suitable_instances(problem, tables).map_err(registry_failure)?;
    if let Some(q) = &args.query {
        let filter: PropertyFilter = q.parse().map_err(|e| Failure::input("query", e))?;
        let path = args
            .metadata
            .as_ref()
            .or(config.metadata.as_ref())
            .ok_or_else(|| Failure::input("missing-argument", "--query needs --metadata"))?;
        let store = load_metadata(path)?;
        let subjects = select_by_property(&store, &filter).map_err(|e| Failure::input("query", e))?;
        list.retain(|i| subjects.iter().any(|s| describes_instance(&store, s, &i.table, &i.name)));
        if list.is_empty() {
            return Err(Failure::input("no-match", format!("no instances matched `{q}`")));
        }
    }
    if list.is_empty() {
        return Err(Failure::input(
            "no-match",
            format!("no instances suitable for `{problem}` under the resource root"),
        ));
    }
    Ok(list)
}

/// `Table/Name` or a bare name unique across the tables.
pub(crate) fn resolve_instance(
    text: &str,
    tables: &[SdTable],
    candidates: &[InstanceRef],
    problem: &str,
) -> Result<InstanceRef, Failure> {
    let text = text.trim();
    let found: Vec<InstanceRef> = if text.contains('/') {
        let r: InstanceRef = text.parse().map_err(|e: String| Failure::input("unknown-instance", e))?;
        tables
            .iter()
            .any(|t| t.name == r.table && t.entries.contains_key(&r.name))
            .then_some(r)
            .into_iter()
            .collect()
    } else {
        tables
            .iter()
            .filter(|t| t.entries.contains_key(text))
            .map(|t| InstanceRef::new(&t.name, text))
            .collect()
    };
    match found.as_slice() {
        [] => Err(Failure::input("unknown-instance", format!("no instance `{text}` under the resource root"))),
        [one] if candidates.contains(one) => Ok(one.clone()),
        [one] => Err(Failure::input(
            "incompatible-instance",
            format!("{one} is not selectable for `{problem}` (not suitable, or excluded by --query)"),
        )),
        many => Err(Failure::input(
            "ambiguous-instance",
            format!(
                "`{text}` exists in several tables: {}",
                many.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
            ),
        )),
    }
}

pub(crate) fn task_name(explicit: Option<&str>, out: &Path, problem: &str) -> Result<String, Failure> {
    if let Some(n) = explicit {
        if !is_identifier(n) {
            return Err(Failure::input("invalid-task", format!("task name `{n}` is not an identifier")));
        }
        return Ok(n.to_string());
    }
    let from_dir = out.file_name().and_then(|n| n.to_str()).filter(|n| is_identifier(n));
    Ok(from_dir.unwrap_or(problem).to_string())
}

pub(crate) fn settings(args: &CreateArgs) -> Result<MachineSettings, Failure> {
    let pairs = |items: &[String], flag: &str| -> Result<BTreeMap<String, String>, Failure> {
        items
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.to_string()))
                    .ok_or_else(|| Failure::input("invalid-argument", format!("{flag} `{s}`: expected KEY=VALUE")))
            })
            .collect()
    };
    Ok(MachineSettings {
        time_command: args.time_command.clone().unwrap_or_else(|| DEFAULT_TIME_COMMAND.into()),
        invocations: pairs(&args.invocations, "--invocation")?,
        environment: pairs(&args.env, "--env")?,
    })
}
