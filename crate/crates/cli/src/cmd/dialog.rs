//! The three-step terminal dialog of `create --interactive`: problem,
//! instances, backends and settings. Flags already given on the command
//! line skip their question.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use benchfold_core::compproblems::Registry;
use benchfold_core::resources::SdTable;
use benchfold_core::taskfolder::{MachineSettings, Task, DEFAULT_TIME_COMMAND};

use super::create::{candidates, resolve_instance, settings, task_name, Plan};
use super::registry_failure;
use crate::config::CliConfig;
use crate::failure::Failure;
use crate::CreateArgs;

pub(crate) struct Dialog<R, W> {
    input: R,
    out: W,
}

impl<R: BufRead, W: Write> Dialog<R, W> {
    pub fn new(input: R, out: W) -> Self {
        Dialog { input, out }
    }

    pub fn plan(
        &mut self,
        args: &CreateArgs,
        config: &CliConfig,
        registry: &Registry,
        tables: &[SdTable],
    ) -> Result<Plan, Failure> {
        // Step 1: computation problem.
        let problem = match &args.problem {
            Some(p) => registry.problem(p).map_err(registry_failure)?.name.clone(),
            None => {
                let names: Vec<String> = registry.problems().map(|p| p.name.clone()).collect();
                let labels: Vec<String> = registry
                    .problems()
                    .map(|p| format!("{} (tables: {})", p.name, p.compatible_tables.join(", ")))
                    .collect();
                self.say("Step 1/3: computation problem")?;
                let picked = self.choose("problem", &names, &labels, false)?;
                names[picked[0]].clone()
            }
        };

        // Step 2: instances.
        let suitable = candidates(args, config, registry, tables, &problem)?;
        let instances = if args.instances.is_empty() {
            let names: Vec<String> = suitable.iter().map(ToString::to_string).collect();
            self.say(&format!("Step 2/3: instances suitable for {problem}"))?;
            self.choose("instances", &names, &names, true)?
                .into_iter()
                .map(|i| suitable[i].clone())
                .collect()
        } else {
            args.instances
                .iter()
                .map(|s| resolve_instance(s, tables, &suitable, &problem))
                .collect::<Result<_, _>>()?
        };

        // Step 3: backends and settings.
        let backends = if args.backends.is_empty() {
            let names: Vec<String> = registry.backends_for(&problem).map(|b| b.name.clone()).collect();
            if names.is_empty() {
                return Err(Failure::input("unsupported-backend", format!("no backend has a template for `{problem}`")));
            }
            self.say(&format!("Step 3/3: backends supporting {problem}"))?;
            self.choose("backends", &names, &names, true)?
                .into_iter()
                .map(|i| names[i].clone())
                .collect()
        } else {
            for b in &args.backends {
                registry.backend(b).map_err(registry_failure)?;
            }
            args.backends.clone()
        };
        let out = match &args.out {
            Some(o) => o.clone(),
            None => PathBuf::from(self.ask_default("output directory", &problem)?),
        };
        let mut settings: MachineSettings = settings(args)?;
        if args.time_command.is_none() {
            settings.time_command = self.ask_default("time command", DEFAULT_TIME_COMMAND)?;
        }
        let name = task_name(args.name.as_deref(), &out, &problem)?;
        Ok(Plan {
            task: Task {
                name,
                problem,
                instances,
                backends,
            },
            settings,
            out,
        })
    }

    fn say(&mut self, line: &str) -> Result<(), Failure> {
        writeln!(self.out, "{line}").map_err(io_failure)
    }

    fn read_line(&mut self) -> Result<String, Failure> {
        self.out.flush().map_err(io_failure)?;
        let mut line = String::new();
        let n = self.input.read_line(&mut line).map_err(io_failure)?;
        if n == 0 {
            return Err(Failure::input("aborted", "input ended before the dialog was complete"));
        }
        Ok(line.trim().to_string())
    }

    fn ask_default(&mut self, what: &str, default: &str) -> Result<String, Failure> {
        write!(self.out, "{what} [{default}]: ").map_err(io_failure)?;
        let answer = self.read_line()?;
        Ok(if answer.is_empty() { default.to_string() } else { answer })
    }

    /// Numbered menu; returns the chosen indices in menu order.
    fn choose(&mut self, what: &str, names: &[String], labels: &[String], many: bool) -> Result<Vec<usize>, Failure> {
        for (i, label) in labels.iter().enumerate() {
            writeln!(self.out, "  {:>3}) {label}", i + 1).map_err(io_failure)?;
        }
        loop {
            if many {
                write!(self.out, "{what} [all, or e.g. 1,3-4 or names]: ").map_err(io_failure)?;
            } else {
                write!(self.out, "{what} [number or name]: ").map_err(io_failure)?;
            }
            let answer = self.read_line()?;
            match parse_selection(&answer, names, many) {
                Ok(sel) => return Ok(sel),
                Err(msg) => writeln!(self.out, "  {msg}").map_err(io_failure)?,
            }
        }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::new(crate::failure::EXIT_FAILURE, "io", e.to_string())
}

/// `all` (or empty when `many`), numbers, ranges `a-b`, and names,
/// separated by commas or spaces.
pub(crate) fn parse_selection(answer: &str, names: &[String], many: bool) -> Result<Vec<usize>, String> {
    let answer = answer.trim();
    if many && (answer.is_empty() || answer.eq_ignore_ascii_case("all")) {
        return Ok((0..names.len()).collect());
    }
    let mut picked = Vec::new();
    let number = |s: &str| -> Result<usize, String> {
        match s.parse::<usize>() {
            Ok(n) if (1..=names.len()).contains(&n) => Ok(n - 1),
            _ => Err(format!("`{s}` is not between 1 and {}", names.len())),
        }
    };
    for token in answer.split([',', ' ']).map(str::trim).filter(|t| !t.is_empty()) {
        if let Some(i) = names.iter().position(|n| n == token || n.rsplit('/').next() == Some(token)) {
            picked.push(i);
        } else if let Some((a, b)) = token.split_once('-') {
            let (a, b) = (number(a)?, number(b)?);
            if a > b {
                return Err(format!("empty range `{token}`"));
            }
            picked.extend(a..=b);
        } else if token.bytes().all(|b| b.is_ascii_digit()) {
            picked.push(number(token)?);
        } else {
            return Err(format!("unknown choice `{token}`"));
        }
    }
    picked.sort_unstable();
    picked.dedup();
    match (picked.len(), many) {
        (0, _) => Err("nothing selected".into()),
        (1, false) | (_, true) => Ok(picked),
        _ => Err("choose exactly one".into()),
    }
}
