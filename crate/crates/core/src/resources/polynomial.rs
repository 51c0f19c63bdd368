//! Integer polynomial text: a small recursive-descent parser and a canonical
//! printer.
//!
//! ```text
//! expr   := ['-'] term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' uint)?
//! base   := int | var | '(' expr ')'
//! ```

use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SumTerm {
    pub sign: Sign,
    pub expr: Expr,
}

/// Parsed polynomial expression.
///
/// `Sum` holds at least two terms, or a single term carrying a leading
/// minus. `Product` holds at least two factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Sum(Vec<SumTerm>),
    Product(Vec<Expr>),
    Power(Box<Expr>, u32),
    Variable(String),
    Integer(BigUint),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared variable `{name}` at offset {offset}")]
    UnknownVariable { name: String, offset: usize },
}

impl PolyError {
    pub fn offset(&self) -> usize {
        match self {
            PolyError::Syntax { offset, .. } | PolyError::UnknownVariable { offset, .. } => *offset,
        }
    }
}

/// Parse `text` and check that every identifier is one of `variables`.
pub fn parse_polynomial<S: AsRef<str>>(text: &str, variables: &[S]) -> Result<Expr, PolyError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        variables: &|name: &str| variables.iter().any(|v| v.as_ref() == name),
    };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(p.syntax("empty polynomial"));
    }
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    variables: &'a dyn Fn(&str) -> bool,
}

impl Parser<'_> {
    fn syntax(&self, message: impl Into<String>) -> PolyError {
        PolyError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, PolyError> {
        let mut terms = Vec::new();
        let leading_minus = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        terms.push(SumTerm {
            sign: if leading_minus { Sign::Minus } else { Sign::Plus },
            expr: self.term()?,
        });
        loop {
            let sign = match self.peek() {
                Some(b'+') => Sign::Plus,
                Some(b'-') => Sign::Minus,
                _ => break,
            };
            self.pos += 1;
            terms.push(SumTerm {
                sign,
                expr: self.term()?,
            });
        }
        if terms.len() == 1 && !leading_minus {
            Ok(terms.pop().unwrap().expr)
        } else {
            Ok(Expr::Sum(terms))
        }
    }

    fn term(&mut self) -> Result<Expr, PolyError> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(b'*') {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        if factors.len() == 1 {
            Ok(factors.pop().unwrap())
        } else {
            Ok(Expr::Product(factors))
        }
    }

    fn factor(&mut self) -> Result<Expr, PolyError> {
        let base = self.base()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("expected exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let exp = digits.parse::<u32>().map_err(|_| PolyError::Syntax {
            offset: start,
            message: format!("exponent `{digits}` out of range"),
        })?;
        Ok(Expr::Power(Box::new(base), exp))
    }

    fn base(&mut self) -> Result<Expr, PolyError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let n = BigUint::parse_bytes(&self.src[start..self.pos], 10).unwrap();
                Ok(Expr::Integer(n))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if !(self.variables)(name) {
                    return Err(PolyError::UnknownVariable {
                        name: name.to_string(),
                        offset: start,
                    });
                }
                Ok(Expr::Variable(name.to_string()))
            }
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }
}

impl Expr {
    /// Identifiers in order of first occurrence.
    pub fn variables(&self) -> Vec<&str> {
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a str>) {
            match e {
                Expr::Sum(ts) => ts.iter().for_each(|t| walk(&t.expr, out)),
                Expr::Product(fs) => fs.iter().for_each(|f| walk(f, out)),
                Expr::Power(b, _) => walk(b, out),
                Expr::Variable(v) => {
                    if !out.contains(&v.as_str()) {
                        out.push(v)
                    }
                }
                Expr::Integer(_) => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

/// Canonical form: ` + ` / ` - ` between terms, no spaces around `*` and `^`,
/// parentheses only where re-parsing would otherwise change the tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Sum(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    match (i, t.sign) {
                        (0, Sign::Plus) => {}
                        (0, Sign::Minus) => f.write_str("-")?,
                        (_, Sign::Plus) => f.write_str(" + ")?,
                        (_, Sign::Minus) => f.write_str(" - ")?,
                    }
                    if matches!(t.expr, Expr::Sum(_)) {
                        write!(f, "({})", t.expr)?;
                    } else {
                        write!(f, "{}", t.expr)?;
                    }
                }
                Ok(())
            }
            Expr::Product(factors) => {
                for (i, x) in factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    if matches!(x, Expr::Sum(_) | Expr::Product(_)) {
                        write!(f, "({x})")?;
                    } else {
                        write!(f, "{x}")?;
                    }
                }
                Ok(())
            }
            Expr::Power(base, exp) => match **base {
                Expr::Variable(_) | Expr::Integer(_) => write!(f, "{base}^{exp}"),
                _ => write!(f, "({base})^{exp}"),
            },
            Expr::Variable(v) => f.write_str(v),
            Expr::Integer(n) => write!(f, "{n}"),
        }
    }
}
