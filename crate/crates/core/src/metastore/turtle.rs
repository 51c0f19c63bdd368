//! Turtle subset: `@prefix`, `<iri>`, `prefix:local`, `a`, plain and typed
//! literals, bare integer/decimal/boolean literals, and the `.` `;` `,`
//! punctuation. Blank nodes, collections, language tags and long
//! (triple-quoted) literals are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Term, Triple, TripleStore, RDF_TYPE, XSD_BOOLEAN, XSD_DECIMAL, XSD_INTEGER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TurtleError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: undeclared prefix `{prefix}:`")]
    UndeclaredPrefix {
        prefix: String,
        line: usize,
        column: usize,
    },
}

impl TurtleError {
    pub fn line(&self) -> usize {
        match self {
            TurtleError::Syntax { line, .. } | TurtleError::UndeclaredPrefix { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Iri(String),
    PName(String, String),
    Literal(String),
    Number(String),
    Bool(String),
    Var(String),
    A,
    Prefix,
    Caret2,
    Dot,
    Semi,
    Comma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

pub(crate) struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
    allow_vars: bool,
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(text: &'a str, allow_vars: bool) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            pos: Pos { line: 1, column: 1 },
            allow_vars,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.column = 1;
        } else {
            self.pos.column += 1;
        }
        Some(c)
    }

    fn err(pos: Pos, message: impl Into<String>) -> TurtleError {
        TurtleError::Syntax {
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn take_while(&mut self, mut f: impl FnMut(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if !f(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    pub(crate) fn next_token(&mut self) -> Result<Option<(Tok, Pos)>, TurtleError> {
        self.skip_trivia();
        let start = self.pos;
        let Some(&c) = self.chars.peek() else {
            return Ok(None);
        };
        let tok = match c {
            '<' => {
                self.bump();
                let iri = self.take_while(|c| c != '>' && c != '\n' && c != ' ');
                if self.bump() != Some('>') {
                    return Err(Self::err(start, "unterminated IRI"));
                }
                if !is_absolute_iri(&iri) {
                    return Err(Self::err(start, format!("relative IRI <{iri}> is not supported")));
                }
                Tok::Iri(iri)
            }
            '"' | '\'' => self.literal(start, c)?,
            '.' => {
                self.bump();
                Tok::Dot
            }
            ';' => {
                self.bump();
                Tok::Semi
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            '^' => {
                self.bump();
                if self.bump() != Some('^') {
                    return Err(Self::err(start, "expected `^^`"));
                }
                Tok::Caret2
            }
            '@' => {
                self.bump();
                let word = self.take_while(|c| c.is_ascii_alphabetic());
                if word == "prefix" {
                    Tok::Prefix
                } else {
                    return Err(Self::err(start, format!("unsupported directive `@{word}`")));
                }
            }
            '_' if self.lookahead_is(':') => return Err(Self::err(start, "blank nodes are not supported")),
            '[' => return Err(Self::err(start, "blank nodes are not supported")),
            '(' => return Err(Self::err(start, "collections are not supported")),
            '?' if self.allow_vars => {
                self.bump();
                let name = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
                if name.is_empty() {
                    return Err(Self::err(start, "empty variable name"));
                }
                Tok::Var(name)
            }
            c if c.is_ascii_digit() || c == '+' || c == '-' => {
                let mut s = self.take_while(|c| c.is_ascii_digit() || c == '+' || c == '-');
                if self.chars.peek() == Some(&'.') {
                    let mut ahead = self.chars.clone();
                    ahead.next();
                    if ahead.peek().is_some_and(char::is_ascii_digit) {
                        self.bump();
                        s.push('.');
                        s.push_str(&self.take_while(|c| c.is_ascii_digit()));
                    }
                }
                let body = s.strip_prefix(['+', '-']).unwrap_or(&s);
                if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit() || c == '.') {
                    return Err(Self::err(start, format!("malformed number `{s}`")));
                }
                Tok::Number(s)
            }
            c if c.is_alphabetic() || c == ':' || c == '_' => {
                let word = self.name();
                match word.split_once(':') {
                    Some((prefix, local)) => Tok::PName(prefix.to_string(), local.to_string()),
                    None if word == "a" => Tok::A,
                    None if word == "true" || word == "false" => Tok::Bool(word),
                    None => return Err(Self::err(start, format!("unexpected word `{word}`"))),
                }
            }
            other => return Err(Self::err(start, format!("unexpected character `{other}`"))),
        };
        Ok(Some((tok, start)))
    }

    /// Prefixed name or keyword. A '.' is only part of the name when another
    /// name character follows it.
    fn name(&mut self) -> String {
        let is_name = |c: char| c.is_alphanumeric() || "_-:%".contains(c);
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if c == '.' {
                let mut ahead = self.chars.clone();
                ahead.next();
                if !ahead.peek().is_some_and(|&n| is_name(n)) {
                    break;
                }
            } else if !is_name(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn lookahead_is(&self, want: char) -> bool {
        let mut ahead = self.chars.clone();
        ahead.next();
        ahead.peek() == Some(&want)
    }

    fn literal(&mut self, start: Pos, quote: char) -> Result<Tok, TurtleError> {
        self.bump();
        if self.chars.peek() == Some(&quote) && self.lookahead_is(quote) {
            return Err(Self::err(start, "long (triple-quoted) literals are not supported"));
        }
        let mut value = String::new();
        loop {
            match self.bump() {
                None | Some('\n') | Some('\r') => return Err(Self::err(start, "unterminated literal")),
                Some(c) if c == quote => break,
                Some('\\') => {
                    let esc_pos = self.pos;
                    match self.bump() {
                        Some('t') => value.push('\t'),
                        Some('n') => value.push('\n'),
                        Some('r') => value.push('\r'),
                        Some('b') => value.push('\u{8}'),
                        Some('f') => value.push('\u{c}'),
                        Some('"') => value.push('"'),
                        Some('\'') => value.push('\''),
                        Some('\\') => value.push('\\'),
                        Some(u @ ('u' | 'U')) => {
                            let n = if u == 'u' { 4 } else { 8 };
                            let hex: String = (0..n).filter_map(|_| self.bump()).collect();
                            let ch = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32);
                            match ch {
                                Some(ch) if hex.len() == n => value.push(ch),
                                _ => return Err(Self::err(esc_pos, "invalid unicode escape")),
                            }
                        }
                        _ => return Err(Self::err(esc_pos, "invalid escape sequence")),
                    }
                }
                Some(c) => value.push(c),
            }
        }
        if self.chars.peek() == Some(&'@') {
            return Err(Self::err(self.pos, "language-tagged literals are not supported"));
        }
        Ok(Tok::Literal(value))
    }
}

fn is_absolute_iri(iri: &str) -> bool {
    match iri.split_once(':') {
        Some((scheme, _)) => {
            let mut cs = scheme.chars();
            cs.next().is_some_and(|c| c.is_ascii_alphabetic())
                && cs.all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c))
        }
        None => false,
    }
}

pub(crate) fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) struct TokenStream<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Option<(Tok, Pos)>>,
}

impl<'a> TokenStream<'a> {
    pub(crate) fn new(text: &'a str, allow_vars: bool) -> Self {
        TokenStream {
            lexer: Lexer::new(text, allow_vars),
            peeked: None,
        }
    }

    pub(crate) fn peek(&mut self) -> Result<Option<&(Tok, Pos)>, TurtleError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_token()?);
        }
        Ok(self.peeked.as_ref().unwrap().as_ref())
    }

    pub(crate) fn next(&mut self) -> Result<Option<(Tok, Pos)>, TurtleError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next_token(),
        }
    }

    /// Next token, failing with `what` at end of input.
    pub(crate) fn expect(&mut self, what: &str) -> Result<(Tok, Pos), TurtleError> {
        let end = self.lexer.pos;
        self.next()?
            .ok_or_else(|| Lexer::err(end, format!("unexpected end of input, expected {what}")))
    }
}

pub(crate) fn resolve_pname(
    prefixes: &BTreeMap<String, String>,
    prefix: &str,
    local: &str,
    pos: Pos,
) -> Result<Term, TurtleError> {
    match prefixes.get(prefix) {
        Some(base) => Ok(Term::Iri(format!("{base}{local}"))),
        None => Err(TurtleError::UndeclaredPrefix {
            prefix: prefix.to_string(),
            line: pos.line,
            column: pos.column,
        }),
    }
}

/// Convert a term-position token (IRI, prefixed name, literal, number,
/// boolean) into a `Term`, consuming a `^^datatype` suffix when present.
pub(crate) fn term_from_token(
    tokens: &mut TokenStream,
    prefixes: &BTreeMap<String, String>,
    tok: Tok,
    pos: Pos,
) -> Result<Term, TurtleError> {
    Ok(match tok {
        Tok::Iri(iri) => Term::Iri(iri),
        Tok::PName(p, l) => resolve_pname(prefixes, &p, &l, pos)?,
        Tok::A => Term::Iri(RDF_TYPE.to_string()),
        Tok::Literal(value) => {
            if matches!(tokens.peek()?, Some((Tok::Caret2, _))) {
                tokens.next()?;
                let (dt, dpos) = tokens.expect("datatype IRI")?;
                let datatype = match dt {
                    Tok::Iri(iri) => iri,
                    Tok::PName(p, l) => match resolve_pname(prefixes, &p, &l, dpos)? {
                        Term::Iri(iri) => iri,
                        _ => unreachable!(),
                    },
                    _ => return Err(Lexer::err(dpos, "expected datatype IRI after `^^`")),
                };
                Term::Typed { value, datatype }
            } else {
                Term::Literal(value)
            }
        }
        Tok::Number(n) => Term::Typed {
            datatype: if n.contains('.') { XSD_DECIMAL } else { XSD_INTEGER }.to_string(),
            value: n,
        },
        Tok::Bool(b) => Term::Typed {
            value: b,
            datatype: XSD_BOOLEAN.to_string(),
        },
        other => return Err(Lexer::err(pos, format!("expected a term, found {}", describe(&other)))),
    })
}

pub(crate) fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Iri(i) => format!("<{i}>"),
        Tok::PName(p, l) => format!("`{p}:{l}`"),
        Tok::Literal(_) => "a literal".into(),
        Tok::Number(n) => format!("`{n}`"),
        Tok::Bool(b) => format!("`{b}`"),
        Tok::Var(v) => format!("`?{v}`"),
        Tok::A => "`a`".into(),
        Tok::Prefix => "`@prefix`".into(),
        Tok::Caret2 => "`^^`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Semi => "`;`".into(),
        Tok::Comma => "`,`".into(),
    }
}

pub fn parse_turtle(text: &str) -> Result<TripleStore, TurtleError> {
    let mut tokens = TokenStream::new(text, false);
    let mut prefixes = BTreeMap::new();
    let mut triples = Vec::new();

    while let Some((tok, pos)) = tokens.next()? {
        if tok == Tok::Prefix {
            let (name, npos) = tokens.expect("prefix name")?;
            let prefix = match name {
                Tok::PName(p, l) if l.is_empty() => p,
                other => return Err(Lexer::err(npos, format!("expected `name:`, found {}", describe(&other)))),
            };
            let (iri, ipos) = tokens.expect("prefix IRI")?;
            let Tok::Iri(iri) = iri else {
                return Err(Lexer::err(ipos, "expected `<iri>` in prefix declaration"));
            };
            let (dot, dpos) = tokens.expect("`.`")?;
            if dot != Tok::Dot {
                return Err(Lexer::err(dpos, format!("expected `.`, found {}", describe(&dot))));
            }
            prefixes.insert(prefix, iri);
            continue;
        }

        let subject = match tok {
            Tok::Iri(_) | Tok::PName(..) => term_from_token(&mut tokens, &prefixes, tok, pos)?,
            other => {
                return Err(Lexer::err(pos, format!("expected a subject IRI, found {}", describe(&other))))
            }
        };

        loop {
            let (verb, vpos) = tokens.expect("predicate")?;
            let predicate = match verb {
                Tok::Iri(_) | Tok::PName(..) | Tok::A => term_from_token(&mut tokens, &prefixes, verb, vpos)?,
                other => {
                    return Err(Lexer::err(vpos, format!("expected a predicate IRI, found {}", describe(&other))))
                }
            };
            loop {
                let (otok, opos) = tokens.expect("object")?;
                let object = term_from_token(&mut tokens, &prefixes, otok, opos)?;
                triples.push(Triple {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                });
                if matches!(tokens.peek()?, Some((Tok::Comma, _))) {
                    tokens.next()?;
                } else {
                    break;
                }
            }
            let (sep, spos) = tokens.expect("`.` or `;`")?;
            match sep {
                Tok::Dot => break,
                Tok::Semi => {
                    while matches!(tokens.peek()?, Some((Tok::Semi, _))) {
                        tokens.next()?;
                    }
                    if matches!(tokens.peek()?, Some((Tok::Dot, _))) {
                        tokens.next()?;
                        break;
                    }
                }
                other => return Err(Lexer::err(spos, format!("expected `.` or `;`, found {}", describe(&other)))),
            }
        }
    }
    Ok(TripleStore::new(prefixes, triples))
}

/// Write the store with full IRIs, grouping triples by subject.
pub fn serialize_turtle(store: &TripleStore) -> String {
    let mut out = String::new();
    for (prefix, iri) in store.prefixes() {
        let _ = writeln!(out, "@prefix {prefix}: <{iri}> .");
    }
    if !store.prefixes().is_empty() && !store.is_empty() {
        out.push('\n');
    }
    let mut current: Option<&Term> = None;
    for t in store.triples() {
        if current == Some(&t.subject) {
            let _ = write!(out, " ;\n    {} {}", t.predicate, t.object);
        } else {
            if current.is_some() {
                out.push_str(" .\n");
            }
            let _ = write!(out, "{}\n    {} {}", t.subject, t.predicate, t.object);
            current = Some(&t.subject);
        }
    }
    if current.is_some() {
        out.push_str(" .\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const CAPRASSE_TTL: &str = r#"@prefix sd: <http://symbolicdata.org/Data/Model/> .

<http://symbolicdata.org/Data/PolynomialSystems/Caprasse>
    a sd:IntPS ;
    sd:hasDegree "56" ;
    sd:hasDegreeList "3,3,4,4" ;
    sd:hasLengthsList "4,4,9,9" ;
    sd:hasVariables "x,y,z,t" ;
    sd:relatedXMLResource
      <http://symbolicdata.org/XMLResources/IntPS/Caprasse.xml> .
"#;

    #[test]
    fn caprasse_block_has_six_triples_one_subject() {
        let store = parse_turtle(CAPRASSE_TTL).unwrap();
        assert_eq!(store.len(), 6);
        let subject = &store.triples()[0].subject;
        assert!(store.triples().iter().all(|t| &t.subject == subject));
        assert_eq!(
            subject,
            &Term::iri("http://symbolicdata.org/Data/PolynomialSystems/Caprasse")
        );
        assert!(store.contains(&Triple {
            subject: subject.clone(),
            predicate: Term::iri(RDF_TYPE),
            object: Term::iri("http://symbolicdata.org/Data/Model/IntPS"),
        }));
    }

    #[test]
    fn empty_and_comment_only_documents() {
        assert!(parse_turtle("").unwrap().is_empty());
        assert!(parse_turtle("# nothing here\n\n").unwrap().is_empty());
    }

    #[test]
    fn undeclared_prefix_is_named() {
        let err = parse_turtle("x:a x:b x:c .").unwrap_err();
        assert_eq!(
            err,
            TurtleError::UndeclaredPrefix {
                prefix: "x".into(),
                line: 1,
                column: 1
            }
        );
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_turtle("@prefix s: <http://e.org/> .\ns:a s:b \"c\"\ns:d s:e s:f .").unwrap_err();
        assert_eq!(err.line(), 3, "{err}");
        for bad in [
            "<http://e.org/a> <http://e.org/b> _:x .",
            "<http://e.org/a> <http://e.org/b> [ ] .",
            "<http://e.org/a> <http://e.org/b> ( 1 2 ) .",
            "<http://e.org/a> <http://e.org/b> \"\"\"long\"\"\" .",
            "<http://e.org/a> <http://e.org/b> \"x\"@en .",
            "<http://e.org/a> <http://e.org/b> \"unterminated .",
            "<rel> <http://e.org/b> <http://e.org/c> .",
            "\"lit\" <http://e.org/b> <http://e.org/c> .",
            "<http://e.org/a> \"p\" <http://e.org/c> .",
            "<http://e.org/a> <http://e.org/b> <http://e.org/c>",
            "@base <http://e.org/> .",
        ] {
            assert!(parse_turtle(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn commas_numbers_typed_literals_and_dangling_dots() {
        let store = parse_turtle(
            "@prefix e: <http://e.org/> .\n\
             @prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n\
             e:s e:p 1, -2.5, true ;\n    e:q \"7\"^^xsd:integer ;\n    e:r e:o.\n",
        )
        .unwrap();
        assert_eq!(store.len(), 5);
        let objects: Vec<_> = store.triples().iter().map(|t| t.object.clone()).collect();
        assert!(objects.contains(&Term::Typed {
            value: "-2.5".into(),
            datatype: XSD_DECIMAL.into()
        }));
        assert!(objects.contains(&Term::Typed {
            value: "7".into(),
            datatype: XSD_INTEGER.into()
        }));
        assert!(objects.contains(&Term::iri("http://e.org/o")));
    }

    #[test]
    fn escapes_round_trip() {
        let store = parse_turtle(r#"<http://e.org/a> <http://e.org/b> "q\"\\\n\tzé" ."#).unwrap();
        assert_eq!(store.triples()[0].object, Term::literal("q\"\\\n\tzé"));
        assert_eq!(parse_turtle(&serialize_turtle(&store)).unwrap(), store);
    }

    fn arb_term(iri_only: bool) -> BoxedStrategy<Term> {
        let iri = "[a-z]{1,3}".prop_map(|s| Term::iri(format!("http://ex.org/{s}")));
        if iri_only {
            return iri.boxed();
        }
        prop_oneof![
            iri,
            "[ -~éü\t\n]{0,8}".prop_map(Term::literal),
            ("[a-z0-9 ]{0,5}", "[a-z]{1,4}").prop_map(|(v, d)| Term::Typed {
                value: v,
                datatype: format!("http://ex.org/dt#{d}")
            }),
        ]
        .boxed()
    }

    fn arb_store() -> impl Strategy<Value = TripleStore> {
        (
            prop::collection::btree_map("[a-z]{1,4}", "[a-z]{1,5}", 0..3),
            prop::collection::vec((arb_term(true), arb_term(true), arb_term(false)), 0..30),
        )
            .prop_map(|(prefixes, ts)| {
                let prefixes = prefixes
                    .into_iter()
                    .map(|(p, base)| (p, format!("http://{base}.org/")))
                    .collect();
                TripleStore::new(
                    prefixes,
                    ts.into_iter().map(|(s, p, o)| Triple { subject: s, predicate: p, object: o }),
                )
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(store in arb_store()) {
            let text = serialize_turtle(&store);
            let back = parse_turtle(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, store);
        }

        #[test]
        fn triple_order_does_not_matter(store in arb_store(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut ts = store.triples().to_vec();
            ts.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            let again = TripleStore::new(store.prefixes().clone(), ts);
            prop_assert_eq!(again, store);
        }
    }
}
