//! Conjunctive triple-pattern queries with integer comparison filters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use thiserror::Error;

use super::turtle::{describe, term_from_token, Tok, TokenStream, TurtleError};
use super::{Term, Triple, TripleStore, RDF_TYPE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("query has no patterns")]
    NoPatterns,
    #[error("filter uses unknown variable `?{name}` (pattern variables: {known})")]
    UnknownVariable { name: String, known: String },
    #[error("invalid pattern: {0}")]
    Pattern(#[from] TurtleError),
    #[error("invalid filter `{text}`: {reason}")]
    Filter { text: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternTerm {
    Var(String),
    Const(Term),
}

impl PatternTerm {
    pub fn var(name: impl Into<String>) -> Self {
        PatternTerm::Var(name.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn new(subject: PatternTerm, predicate: PatternTerm, object: PatternTerm) -> Self {
        TriplePattern {
            subject,
            predicate,
            object,
        }
    }

    fn slots(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn holds<T: Ord>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    /// Split `text` at the first comparison operator.
    fn split(text: &str) -> Option<(&str, CmpOp, &str)> {
        let idx = text.find(['<', '>', '='])?;
        let rest = &text[idx..];
        let (op, len) = if rest.starts_with("<=") {
            (CmpOp::Le, 2)
        } else if rest.starts_with(">=") {
            (CmpOp::Ge, 2)
        } else if rest.starts_with("==") {
            (CmpOp::Eq, 2)
        } else if rest.starts_with('<') {
            (CmpOp::Lt, 1)
        } else if rest.starts_with('>') {
            (CmpOp::Gt, 1)
        } else {
            (CmpOp::Eq, 1)
        };
        Some((text[..idx].trim(), op, rest[len..].trim()))
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        })
    }
}

/// `?var OP integer`. Bindings whose value is not an integer literal are
/// dropped rather than reported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumericFilter {
    pub variable: String,
    pub op: CmpOp,
    pub value: BigInt,
}

impl NumericFilter {
    pub fn new(variable: impl Into<String>, op: CmpOp, value: impl Into<BigInt>) -> Self {
        NumericFilter {
            variable: variable.into(),
            op,
            value: value.into(),
        }
    }

    fn accepts(&self, term: &Term) -> bool {
        match term {
            Term::Iri(_) => false,
            _ => integer_value(term).is_some_and(|v| self.op.holds(&v, &self.value)),
        }
    }
}

fn integer_value(term: &Term) -> Option<BigInt> {
    BigInt::from_str(term.value().trim()).ok()
}

/// Rows of bound terms; `variables` gives column order (first appearance in
/// the patterns). Rows are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryResult {
    pub variables: Vec<String>,
    pub rows: Vec<Vec<Term>>,
}

impl QueryResult {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn bindings(&self) -> impl Iterator<Item = BTreeMap<&str, &Term>> + '_ {
        self.rows
            .iter()
            .map(|row| self.variables.iter().map(String::as_str).zip(row).collect())
    }

    /// Distinct values bound to `var`, sorted.
    pub fn column(&self, var: &str) -> Option<Vec<&Term>> {
        let idx = self.variables.iter().position(|v| v == var)?;
        let set: BTreeSet<&Term> = self.rows.iter().map(|r| &r[idx]).collect();
        Some(set.into_iter().collect())
    }
}

pub fn query(
    store: &TripleStore,
    patterns: &[TriplePattern],
    filters: &[NumericFilter],
) -> Result<QueryResult, QueryError> {
    if patterns.is_empty() {
        return Err(QueryError::NoPatterns);
    }
    let mut variables: Vec<String> = Vec::new();
    for p in patterns {
        for slot in p.slots() {
            if let PatternTerm::Var(v) = slot {
                if !variables.contains(v) {
                    variables.push(v.clone());
                }
            }
        }
    }
    let mut filter_cols = Vec::with_capacity(filters.len());
    for f in filters {
        let idx = variables
            .iter()
            .position(|v| *v == f.variable)
            .ok_or_else(|| QueryError::UnknownVariable {
                name: f.variable.clone(),
                known: variables.iter().map(|v| format!("?{v}")).collect::<Vec<_>>().join(", "),
            })?;
        filter_cols.push((idx, f));
    }

    let var_index = |name: &str| variables.iter().position(|v| v == name).unwrap();
    let mut bound = vec![false; variables.len()];
    let mut remaining: Vec<&TriplePattern> = patterns.iter().collect();
    let mut partial: Vec<Vec<Option<&Term>>> = vec![vec![None; variables.len()]];

    while !remaining.is_empty() {
        // Most constrained pattern first.
        let (pick, _) = remaining
            .iter()
            .enumerate()
            .max_by_key(|(i, p)| {
                let score = p
                    .slots()
                    .iter()
                    .filter(|s| match s {
                        PatternTerm::Const(_) => true,
                        PatternTerm::Var(v) => bound[var_index(v)],
                    })
                    .count();
                (score, std::cmp::Reverse(*i))
            })
            .unwrap();
        let pattern = remaining.remove(pick);
        let slot_vars: Vec<Option<usize>> = pattern
            .slots()
            .iter()
            .map(|s| match s {
                PatternTerm::Var(v) => Some(var_index(v)),
                PatternTerm::Const(_) => None,
            })
            .collect();

        let mut next = Vec::new();
        for binding in &partial {
            let resolved: Vec<Option<&Term>> = pattern
                .slots()
                .iter()
                .zip(&slot_vars)
                .map(|(s, vi)| match (s, vi) {
                    (PatternTerm::Const(t), _) => Some(t),
                    (_, Some(i)) => binding[*i],
                    _ => None,
                })
                .collect();
            for idx in candidates(store, &resolved) {
                let triple = &store.triples()[idx];
                if let Some(extended) = extend(binding, triple, &resolved, &slot_vars) {
                    next.push(extended);
                }
            }
        }
        for vi in slot_vars.iter().flatten() {
            bound[*vi] = true;
        }
        partial = next;
        if partial.is_empty() {
            break;
        }
    }

    let mut rows: Vec<Vec<Term>> = partial
        .into_iter()
        .filter(|b| b.iter().all(Option::is_some))
        .filter(|b| filter_cols.iter().all(|(i, f)| f.accepts(b[*i].unwrap())))
        .map(|b| b.into_iter().map(|t| t.unwrap().clone()).collect())
        .collect();
    rows.sort();
    rows.dedup();
    Ok(QueryResult { variables, rows })
}

fn candidates(store: &TripleStore, resolved: &[Option<&Term>]) -> Vec<usize> {
    let lists = [
        resolved[0].map(|t| store.with_subject(t)),
        resolved[1].map(|t| store.with_predicate(t)),
        resolved[2].map(|t| store.with_object(t)),
    ];
    match lists.into_iter().flatten().min_by_key(|l| l.len()) {
        Some(list) => list.to_vec(),
        None => (0..store.len()).collect(),
    }
}

fn extend<'s>(
    binding: &[Option<&'s Term>],
    triple: &'s Triple,
    resolved: &[Option<&Term>],
    slot_vars: &[Option<usize>],
) -> Option<Vec<Option<&'s Term>>> {
    let parts = [&triple.subject, &triple.predicate, &triple.object];
    let mut out = binding.to_vec();
    for k in 0..3 {
        if let Some(want) = resolved[k] {
            if want != parts[k] {
                return None;
            }
        }
        if let Some(vi) = slot_vars[k] {
            match out[vi] {
                Some(have) if have != parts[k] => return None,
                _ => out[vi] = Some(parts[k]),
            }
        }
    }
    Some(out)
}

/// Parse `?s sd:hasDegree ?d` (optionally terminated by `.`) using the
/// store's prefixes.
pub fn parse_pattern(text: &str, prefixes: &BTreeMap<String, String>) -> Result<TriplePattern, QueryError> {
    let mut tokens = TokenStream::new(text, true);
    let mut slots = Vec::with_capacity(3);
    for what in ["subject", "predicate", "object"] {
        let (tok, pos) = tokens.expect(what)?;
        slots.push(match tok {
            Tok::Var(v) => PatternTerm::Var(v),
            other => PatternTerm::Const(term_from_token(&mut tokens, prefixes, other, pos)?),
        });
    }
    if let Some((Tok::Dot, _)) = tokens.peek()? {
        tokens.next()?;
    }
    if let Some((tok, pos)) = tokens.next()? {
        return Err(QueryError::Pattern(TurtleError::Syntax {
            line: pos.line,
            column: pos.column,
            message: format!("unexpected {} after pattern", describe(&tok)),
        }));
    }
    let object = slots.pop().unwrap();
    let predicate = slots.pop().unwrap();
    let subject = slots.pop().unwrap();
    Ok(TriplePattern {
        subject,
        predicate,
        object,
    })
}

/// Parse `?d <= 36` (the leading `?` is optional).
pub fn parse_filter(text: &str) -> Result<NumericFilter, QueryError> {
    let fail = |reason: &str| QueryError::Filter {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let (lhs, op, rhs) = CmpOp::split(text).ok_or_else(|| fail("missing comparison operator"))?;
    let variable = lhs.strip_prefix('?').unwrap_or(lhs);
    if variable.is_empty() || !variable.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(fail("left side must be a variable"));
    }
    let value = BigInt::from_str(rhs).map_err(|_| fail("right side must be an integer"))?;
    Ok(NumericFilter {
        variable: variable.to_string(),
        op,
        value,
    })
}

/// Property selector `hasDegree <= 36`: the predicate is a bare local name
/// (matched against every predicate IRI's trailing segment), a prefixed
/// name, or an `<iri>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyFilter {
    pub predicate: String,
    pub op: CmpOp,
    pub value: BigInt,
}

impl FromStr for PropertyFilter {
    type Err = QueryError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| QueryError::Filter {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        // Skip a leading `<iri>` before looking for the operator.
        let search_from = if text.trim_start().starts_with('<') {
            text.find('>').map_or(0, |i| i + 1)
        } else {
            0
        };
        let (lhs, op, rhs) = CmpOp::split(&text[search_from..])
            .map(|(l, op, r)| (format!("{}{}", &text[..search_from], l), op, r))
            .ok_or_else(|| fail("missing comparison operator"))?;
        let predicate = lhs.trim().to_string();
        if predicate.is_empty() {
            return Err(fail("missing predicate"));
        }
        let value = BigInt::from_str(rhs).map_err(|_| fail("right side must be an integer"))?;
        Ok(PropertyFilter { predicate, op, value })
    }
}

/// Subjects having a predicate matching `filter.predicate` whose value
/// satisfies the comparison. Sorted, distinct.
pub fn select_by_property(store: &TripleStore, filter: &PropertyFilter) -> Result<Vec<Term>, QueryError> {
    let name = filter.predicate.as_str();
    let predicates: Vec<Term> = if name.starts_with('<') || name.contains(':') {
        let pattern = parse_pattern(&format!("?s {name} ?v"), store.prefixes())?;
        match pattern.predicate {
            PatternTerm::Const(t) => vec![t],
            PatternTerm::Var(_) => unreachable!(),
        }
    } else {
        let set: BTreeSet<&Term> = store
            .triples()
            .iter()
            .map(|t| &t.predicate)
            .filter(|p| p.local_name() == name)
            .collect();
        set.into_iter().cloned().collect()
    };
    let numeric = NumericFilter {
        variable: "v".into(),
        op: filter.op,
        value: filter.value.clone(),
    };
    let mut out = BTreeSet::new();
    for p in predicates {
        let pattern = TriplePattern::new(PatternTerm::var("s"), PatternTerm::Const(p), PatternTerm::var("v"));
        let result = query(store, &[pattern], std::slice::from_ref(&numeric))?;
        out.extend(result.rows.into_iter().map(|mut r| r.swap_remove(0)));
    }
    Ok(out.into_iter().collect())
}

fn typed_subjects<'s>(store: &'s TripleStore, class: &Term) -> BTreeSet<&'s Term> {
    let rdf_type = Term::iri(RDF_TYPE);
    store
        .with_object(class)
        .iter()
        .map(|&i| &store.triples()[i])
        .filter(|t| t.predicate == rdf_type)
        .map(|t| &t.subject)
        .collect()
}

/// Subjects typed `class` that have no triple with `predicate`.
pub fn missing_predicate(store: &TripleStore, class: &Term, predicate: &Term) -> Vec<Term> {
    typed_subjects(store, class)
        .into_iter()
        .filter(|s| {
            !store
                .with_subject(s)
                .iter()
                .any(|&i| &store.triples()[i].predicate == predicate)
        })
        .cloned()
        .collect()
}

/// Subjects typed `c1` but not `c2`, sorted.
pub fn class_difference(store: &TripleStore, c1: &Term, c2: &Term) -> Vec<Term> {
    let second = typed_subjects(store, c2);
    typed_subjects(store, c1)
        .into_iter()
        .filter(|s| !second.contains(s))
        .cloned()
        .collect()
}

/// Whether `subject` describes instance `name` of SD-Table `table`: either
/// one of its IRI objects ends in `/<table>/<name>.xml`, or its local name
/// is `name` and it is untyped or typed with a class whose local name is
/// `table`.
pub fn describes_instance(store: &TripleStore, subject: &Term, table: &str, name: &str) -> bool {
    let rdf_type = Term::iri(RDF_TYPE);
    let suffix = format!("/{table}/{name}.xml");
    let mut types = Vec::new();
    for &i in store.with_subject(subject) {
        let t = &store.triples()[i];
        if let Term::Iri(o) = &t.object {
            if o.ends_with(&suffix) {
                return true;
            }
        }
        if t.predicate == rdf_type {
            types.push(&t.object);
        }
    }
    subject.local_name() == name && (types.is_empty() || types.iter().any(|c| c.local_name() == table))
}
