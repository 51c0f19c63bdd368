//! `$placeholder$` templates for backend scripts.
//!
//! Recognised placeholders are `$vars$`, `$basis$`, `$name$` and
//! `$param:<key>$`. `$$` emits a literal dollar sign. A `$` that does not
//! open something shaped like a placeholder (`$1`, `$ x`) is copied through
//! unchanged, so shell-heavy templates stay readable.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::resources::ProblemInstance;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown placeholder `${name}$` at byte {offset}")]
    UnknownPlaceholder { name: String, offset: usize },
    #[error("template parameter `{0}` is not defined")]
    MissingParameter(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Vars,
    Basis,
    Name,
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    body: String,
    segments: Vec<Segment>,
}

/// If `s[at..]` starts with a placeholder-shaped token `$ident[:key]$`,
/// return (inner text, length including both dollars).
fn placeholder_at(s: &str, at: usize) -> Option<(&str, usize)> {
    let rest = &s[at + 1..];
    let mut chars = rest.char_indices();
    match chars.next() {
        Some((_, c)) if c.is_ascii_alphabetic() => {}
        _ => return None,
    }
    let mut in_key = false;
    for (i, c) in chars {
        if c == '$' {
            return Some((&rest[..i], i + 2));
        }
        let ok = if in_key {
            !c.is_whitespace()
        } else if c == ':' {
            in_key = true;
            true
        } else {
            c.is_ascii_alphanumeric() || c == '_'
        };
        if !ok {
            return None;
        }
    }
    None
}

impl Template {
    pub fn parse(body: &str) -> Result<Self, TemplateError> {
        let mut segments = Vec::new();
        let mut text = String::new();
        let mut i = 0;
        while i < body.len() {
            let rest = &body[i..];
            let Some(off) = rest.find('$') else {
                text.push_str(rest);
                break;
            };
            text.push_str(&rest[..off]);
            let at = i + off;
            if body[at + 1..].starts_with('$') {
                text.push('$');
                i = at + 2;
                continue;
            }
            match placeholder_at(body, at) {
                Some((inner, len)) => {
                    let seg = match inner {
                        "vars" => Segment::Vars,
                        "basis" => Segment::Basis,
                        "name" => Segment::Name,
                        _ => match inner.strip_prefix("param:") {
                            Some(key) if !key.is_empty() => Segment::Param(key.to_string()),
                            _ => {
                                return Err(TemplateError::UnknownPlaceholder {
                                    name: inner.to_string(),
                                    offset: at,
                                })
                            }
                        },
                    };
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    segments.push(seg);
                    i = at + len;
                }
                None => {
                    text.push('$');
                    i = at + 1;
                }
            }
        }
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(Template {
            body: body.to_string(),
            segments,
        })
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Keys referenced through `$param:<key>$`.
    pub fn parameter_keys(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Param(k) => Some(k.as_str()),
            _ => None,
        })
    }

    pub fn render(
        &self,
        instance: &ProblemInstance,
        parameters: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len() + 64);
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Vars => out.push_str(&instance.variables.join(",")),
                Segment::Basis => out.push_str(&instance.basis.join(",")),
                Segment::Name => out.push_str(&instance.name),
                Segment::Param(k) => out.push_str(
                    parameters
                        .get(k)
                        .ok_or_else(|| TemplateError::MissingParameter(k.clone()))?,
                ),
            }
        }
        Ok(out)
    }
}

/// First placeholder-shaped `$...$` token in rendered text, if any.
pub fn residual_placeholder(text: &str) -> Option<&str> {
    let mut from = 0;
    while let Some(off) = text[from..].find('$') {
        let at = from + off;
        if let Some((inner, _)) = placeholder_at(text, at) {
            return Some(inner);
        }
        from = at + 1;
    }
    None
}
