#![allow(dead_code)]

pub mod oracle;

use std::fs;
use std::path::{Path, PathBuf};

use benchfold_core::compproblems::Registry;
use benchfold_core::resources::{scan_tables, InstanceRef, SdTable};
use benchfold_core::taskfolder::{build_taskfolder, MachineSettings, Task, TaskFolder};
use tempfile::TempDir;

pub const PROBLEM: &str = "P";

pub struct Fixture {
    pub tmp: TempDir,
    pub tables: Vec<SdTable>,
    pub registry: Registry,
}

impl Fixture {
    /// Instances `A`, `B`, `C` in table `IntPS`, and one `sh` backend per
    /// `(name, script body)`.
    pub fn new(backends: &[(&str, &str)], verifier: Option<&str>) -> Self {
        let tmp = TempDir::new().unwrap();
        let res = tmp.path().join("res/IntPS");
        fs::create_dir_all(&res).unwrap();
        for (name, poly) in [("A", "x-1"), ("B", "x^2-y"), ("C", "x*y-1")] {
            let xml = format!("<Instance><vars>x,y</vars><basis><poly>{poly}</poly></basis></Instance>");
            fs::write(res.join(format!("{name}.xml")), xml).unwrap();
        }
        let tables = scan_tables(&tmp.path().join("res")).unwrap();

        let mut toml = format!("[[problem]]\nname = \"{PROBLEM}\"\ntables = [\"IntPS\"]\n");
        for (name, body) in backends {
            toml.push_str(&format!(
                "\n[[backend]]\nname = \"{name}\"\ninvocation = \"sh {{script}}\"\nextension = \".sh\"\n\
                 [backend.templates.{PROBLEM}]\ntext = '''\n{body}\n'''\n"
            ));
        }
        if let Some(cmd) = verifier {
            toml.push_str(&format!("\n[[verifier]]\nproblem = \"{PROBLEM}\"\ncommand = '''{cmd}'''\n"));
        }
        let mut registry = Registry::builtin();
        registry.merge_toml(&toml, tmp.path(), Path::new("test.toml")).unwrap();
        Fixture { tmp, tables, registry }
    }

    pub fn build(&self, name: &str, instances: &[&str], backends: &[&str]) -> TaskFolder {
        let task = Task {
            name: name.into(),
            problem: PROBLEM.into(),
            instances: instances.iter().map(|i| InstanceRef::new("IntPS", *i)).collect(),
            backends: backends.iter().map(|b| b.to_string()).collect(),
        };
        let out = self.tmp.path().join(name);
        build_taskfolder(&task, &MachineSettings::default(), &self.registry, &self.tables, &out).unwrap()
    }

    pub fn path(&self) -> PathBuf {
        self.tmp.path().to_path_buf()
    }
}
