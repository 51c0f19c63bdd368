use anyhow::Result;
use benchfold_core::metastore::{parse_filter, parse_pattern, query, Term};

use super::load_metadata;
use crate::config::CliConfig;
use crate::failure::Failure;
use crate::QueryArgs;

/// Prints one solution per line, values tab-separated in order of first
/// variable appearance; IRIs as `<iri>`, literals as their bare text.
pub fn run(args: QueryArgs, config: &CliConfig) -> Result<u8> {
    let path = args
        .metadata
        .as_ref()
        .or(config.metadata.as_ref())
        .ok_or_else(|| Failure::input("missing-argument", "--metadata is required"))?;
    let store = load_metadata(path)?;
    let patterns = args
        .patterns
        .iter()
        .map(|p| parse_pattern(p, store.prefixes()).map_err(|e| Failure::input("parse", format!("pattern `{p}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let filters = args
        .filters
        .iter()
        .map(|f| parse_filter(f).map_err(|e| Failure::input("parse", e)))
        .collect::<Result<Vec<_>, _>>()?;
    let result = query(&store, &patterns, &filters).map_err(|e| Failure::input("query", e))?;
    let mut out = String::new();
    for row in &result.rows {
        let cells: Vec<String> = row.iter().map(cell).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    print!("{out}");
    Ok(0)
}

fn cell(t: &Term) -> String {
    match t {
        Term::Iri(i) => format!("<{i}>"),
        other => other.value().to_string(),
    }
}
