//! Problem instances stored as XML resource files, grouped into SD-Tables.
//!
//! Layout on disk is `<root>/<Table>/<Instance>.xml`. The resource schema is
//! deliberately small and is not meant as a normative exchange format:
//!
//! ```xml
//! <Instance>
//!   <vars>x,y,z,t</vars>
//!   <basis>
//!     <poly>x^2*y^2-2*x^2-2*y^2+x*y*z*t</poly>
//!   </basis>
//!   <degree>56</degree>          <!-- any other leaf: kept as an attribute -->
//! </Instance>
//! ```

mod polynomial;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::str::FromStr;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use thiserror::Error;

use crate::util::{escape_xml, is_identifier};

pub use polynomial::{parse_polynomial, Expr, PolyError, Sign, SumTerm};

pub const RESOURCE_EXTENSION: &str = "xml";

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("cannot read resource root {path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no instance `{name}` in table `{table}`")]
    NotFound { table: String, name: String },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: u32,
        column: u32,
        message: String,
    },
    #[error("instance `{instance}`: {message}")]
    Validation { instance: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One directory of resource files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdTable {
    pub name: String,
    pub root: PathBuf,
    /// instance name -> resource file
    pub entries: BTreeMap<String, PathBuf>,
}

impl SdTable {
    pub fn instance_names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn instance_refs(&self) -> impl Iterator<Item = InstanceRef> + '_ {
        self.entries.keys().map(|n| InstanceRef::new(&self.name, n))
    }
}

/// `(table, instance)` pair, written `Table/Instance`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceRef {
    pub table: String,
    pub name: String,
}

impl InstanceRef {
    pub fn new(table: impl Into<String>, name: impl Into<String>) -> Self {
        InstanceRef {
            table: table.into(),
            name: name.into(),
        }
    }
}

impl fmt::Display for InstanceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.table, self.name)
    }
}

impl FromStr for InstanceRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().split_once('/') {
            Some((t, n)) if is_identifier(t) && is_identifier(n) => Ok(InstanceRef::new(t, n)),
            _ => Err(format!("`{s}` is not of the form Table/Instance")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemInstance {
    pub name: String,
    pub table: String,
    pub variables: Vec<String>,
    pub basis: Vec<String>,
    pub attributes: IndexMap<String, String>,
}

/// List every table under `root`, sorted by name.
///
/// Subdirectories without any `.xml` file are omitted, as are directory and
/// file names that are not identifiers.
pub fn scan_tables(root: &Path) -> Result<Vec<SdTable>, ResourceError> {
    let config_err = |source| ResourceError::Config {
        path: root.to_path_buf(),
        source,
    };
    let mut tables = Vec::new();
    for entry in fs::read_dir(root).map_err(config_err)? {
        let entry = entry.map_err(config_err)?;
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        if !is_identifier(&name) {
            log::debug!("skipping non-table directory {}", path.display());
            continue;
        }
        let mut entries = BTreeMap::new();
        for file in fs::read_dir(&path).map_err(|source| ResourceError::Io {
            path: path.clone(),
            source,
        })? {
            let file = file.map_err(|source| ResourceError::Io {
                path: path.clone(),
                source,
            })?;
            let fpath = file.path();
            if !fpath.is_file() || fpath.extension().and_then(|e| e.to_str()) != Some(RESOURCE_EXTENSION) {
                continue;
            }
            match fpath.file_stem().and_then(|s| s.to_str()) {
                Some(stem) if is_identifier(stem) => {
                    entries.insert(stem.to_string(), fpath);
                }
                _ => log::warn!("ignoring resource with non-identifier name: {}", fpath.display()),
            }
        }
        if !entries.is_empty() {
            tables.push(SdTable {
                name,
                root: path,
                entries,
            });
        }
    }
    tables.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(tables)
}

pub fn load_instance(table: &SdTable, name: &str) -> Result<ProblemInstance, ResourceError> {
    let path = table.entries.get(name).ok_or_else(|| ResourceError::NotFound {
        table: table.name.clone(),
        name: name.to_string(),
    })?;
    let text = fs::read_to_string(path).map_err(|source| ResourceError::Io {
        path: path.clone(),
        source,
    })?;
    parse_instance_xml(&table.name, name, &text, &path.display().to_string())
}

/// Parse a resource document. `origin` only labels error messages.
pub fn parse_instance_xml(
    table: &str,
    name: &str,
    xml: &str,
    origin: &str,
) -> Result<ProblemInstance, ResourceError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| {
        let pos = e.pos();
        ResourceError::Parse {
            path: origin.to_string(),
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let schema_err = |node: roxmltree::Node, message: String| {
        let pos = doc.text_pos_at(node.range().start);
        ResourceError::Parse {
            path: origin.to_string(),
            line: pos.row,
            column: pos.col,
            message,
        }
    };

    let root = doc.root_element();
    if root.tag_name().name() != "Instance" {
        return Err(schema_err(
            root,
            format!("expected root element `Instance`, found `{}`", root.tag_name().name()),
        ));
    }

    let mut vars: Option<Vec<String>> = None;
    let mut basis: Option<Vec<String>> = None;
    let mut attributes = IndexMap::new();
    for child in root.children().filter(|n| n.is_element()) {
        let tag = child.tag_name().name();
        match tag {
            "vars" => {
                if vars.is_some() {
                    return Err(schema_err(child, "duplicate `vars` element".into()));
                }
                let text = child.text().unwrap_or("");
                vars = Some(
                    text.split(',')
                        .map(str::trim)
                        .filter(|v| !v.is_empty())
                        .map(String::from)
                        .collect(),
                );
            }
            "basis" => {
                if basis.is_some() {
                    return Err(schema_err(child, "duplicate `basis` element".into()));
                }
                let mut polys = Vec::new();
                for p in child.children().filter(|n| n.is_element()) {
                    if p.tag_name().name() != "poly" {
                        return Err(schema_err(
                            p,
                            format!("unexpected `{}` inside `basis`", p.tag_name().name()),
                        ));
                    }
                    polys.push(p.text().unwrap_or("").trim().to_string());
                }
                basis = Some(polys);
            }
            _ => {
                if child.children().any(|n| n.is_element()) {
                    return Err(schema_err(child, format!("attribute element `{tag}` must be a leaf")));
                }
                if attributes.contains_key(tag) {
                    return Err(schema_err(child, format!("duplicate attribute element `{tag}`")));
                }
                let text: String = child.children().filter(|n| n.is_text()).filter_map(|n| n.text()).collect();
                attributes.insert(tag.to_string(), text);
            }
        }
    }

    let instance = ProblemInstance {
        name: name.to_string(),
        table: table.to_string(),
        variables: vars.ok_or_else(|| schema_err(root, "missing `vars` element".into()))?,
        basis: basis.unwrap_or_default(),
        attributes,
    };
    instance.validate()?;
    Ok(instance)
}

/// Tables holding polynomial systems (`IntPS`, `ModPS`, ...) must carry a basis.
pub fn is_polynomial_system_table(table: &str) -> bool {
    table.ends_with("PS")
}

impl ProblemInstance {
    pub fn instance_ref(&self) -> InstanceRef {
        InstanceRef::new(&self.table, &self.name)
    }

    pub fn validate(&self) -> Result<(), ResourceError> {
        let fail = |message: String| ResourceError::Validation {
            instance: format!("{}/{}", self.table, self.name),
            message,
        };
        if self.variables.is_empty() {
            return Err(fail("no variables declared".into()));
        }
        for (i, v) in self.variables.iter().enumerate() {
            let mut cs = v.chars();
            let ok = cs.next().is_some_and(|c| c.is_ascii_alphabetic()) && cs.all(|c| c.is_ascii_alphanumeric());
            if !ok {
                return Err(fail(format!("invalid variable name `{v}`")));
            }
            if self.variables[..i].contains(v) {
                return Err(fail(format!("variable `{v}` declared twice")));
            }
        }
        if self.basis.is_empty() && is_polynomial_system_table(&self.table) {
            return Err(fail("empty basis".into()));
        }
        for (i, poly) in self.basis.iter().enumerate() {
            parse_polynomial(poly, &self.variables).map_err(|e| match e {
                PolyError::UnknownVariable { name, .. } => {
                    fail(format!("basis polynomial {} uses undeclared variable `{name}`", i + 1))
                }
                other => fail(format!("basis polynomial {}: {other}", i + 1)),
            })?;
        }
        Ok(())
    }

    /// Parsed basis, in file order.
    pub fn parsed_basis(&self) -> Result<Vec<Expr>, PolyError> {
        self.basis.iter().map(|p| parse_polynomial(p, &self.variables)).collect()
    }

    /// Serialize back into the resource schema.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<Instance>\n");
        out.push_str(&format!("  <vars>{}</vars>\n", escape_xml(&self.variables.join(","))));
        out.push_str("  <basis>\n");
        for p in &self.basis {
            out.push_str(&format!("    <poly>{}</poly>\n", escape_xml(p)));
        }
        out.push_str("  </basis>\n");
        for (k, v) in &self.attributes {
            out.push_str(&format!("  <{k}>{}</{k}>\n", escape_xml(v)));
        }
        out.push_str("</Instance>\n");
        out
    }
}
