//! In-memory triplestore over a Turtle subset, with conjunctive
//! triple-pattern queries used to pick problem instances.
//!
//! No RDFS/OWL inference is performed: `rdfs:subClassOf` and friends are
//! stored like any other triple.

mod query;
mod turtle;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub use query::{
    class_difference, describes_instance, missing_predicate, parse_filter, parse_pattern, query, select_by_property, CmpOp,
    NumericFilter, PatternTerm, PropertyFilter, QueryError, QueryResult, TriplePattern,
};
pub use turtle::{parse_turtle, serialize_turtle, TurtleError};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
pub const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(String),
    Literal(String),
    Typed { value: String, datatype: String },
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Self {
        Term::Iri(s.into())
    }

    pub fn literal(s: impl Into<String>) -> Self {
        Term::Literal(s.into())
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    /// IRI text or literal lexical form.
    pub fn value(&self) -> &str {
        match self {
            Term::Iri(v) | Term::Literal(v) => v,
            Term::Typed { value, .. } => value,
        }
    }

    /// Trailing IRI segment after the last `/` or `#`; the whole value for literals.
    pub fn local_name(&self) -> &str {
        match self {
            Term::Iri(v) => v.rsplit(['/', '#']).next().unwrap_or(v),
            _ => self.value(),
        }
    }
}

/// Turtle-ish rendering: `<iri>`, `"lit"`, `"lit"^^<dt>`.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(v) => write!(f, "<{v}>"),
            Term::Literal(v) => write!(f, "\"{}\"", turtle::escape_literal(v)),
            Term::Typed { value, datatype } => {
                write!(f, "\"{}\"^^<{datatype}>", turtle::escape_literal(value))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    /// Subject and predicate must be IRIs.
    pub fn new(subject: Term, predicate: Term, object: Term) -> Option<Self> {
        (subject.is_iri() && predicate.is_iri()).then_some(Triple {
            subject,
            predicate,
            object,
        })
    }
}

/// Immutable, indexed set of triples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleStore {
    triples: Vec<Triple>,
    prefixes: BTreeMap<String, String>,
    by_subject: HashMap<Term, Vec<usize>>,
    by_predicate: HashMap<Term, Vec<usize>>,
    by_object: HashMap<Term, Vec<usize>>,
}

impl TripleStore {
    pub fn new(prefixes: BTreeMap<String, String>, triples: impl IntoIterator<Item = Triple>) -> Self {
        let set: BTreeSet<Triple> = triples.into_iter().collect();
        let triples: Vec<Triple> = set.into_iter().collect();
        let mut by_subject: HashMap<Term, Vec<usize>> = HashMap::new();
        let mut by_predicate: HashMap<Term, Vec<usize>> = HashMap::new();
        let mut by_object: HashMap<Term, Vec<usize>> = HashMap::new();
        for (i, t) in triples.iter().enumerate() {
            by_subject.entry(t.subject.clone()).or_default().push(i);
            by_predicate.entry(t.predicate.clone()).or_default().push(i);
            by_object.entry(t.object.clone()).or_default().push(i);
        }
        TripleStore {
            triples,
            prefixes,
            by_subject,
            by_predicate,
            by_object,
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// All triples in sorted order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn prefixes(&self) -> &BTreeMap<String, String> {
        &self.prefixes
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.binary_search(triple).is_ok()
    }

    pub(crate) fn with_subject(&self, t: &Term) -> &[usize] {
        self.by_subject.get(t).map_or(&[], Vec::as_slice)
    }

    pub(crate) fn with_predicate(&self, t: &Term) -> &[usize] {
        self.by_predicate.get(t).map_or(&[], Vec::as_slice)
    }

    pub(crate) fn with_object(&self, t: &Term) -> &[usize] {
        self.by_object.get(t).map_or(&[], Vec::as_slice)
    }

    /// Expand `prefix:local` using the declared prefixes.
    pub fn expand(&self, prefix: &str, local: &str) -> Option<String> {
        self.prefixes.get(prefix).map(|base| format!("{base}{local}"))
    }
}
