//! Exit-code contract.
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success; for `run`, every job reached a terminal status |
//! | 1    | run aborted or other runtime failure |
//! | 2    | bad input: unknown name, unloadable file, parse error |
//! | 3    | refusing to overwrite an existing output |
//! | 130  | run aborted by a second interrupt |
//!
//! Errors print as one line, `error: <kind>: <message>`, so scripts can grep
//! for the kind.

use std::fmt;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CLOBBER: i32 = 3;
pub const EXIT_INTERRUPTED: i32 = 130;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code,
            kind,
            message: message.into(),
        }
    }

    pub fn input(kind: &'static str, message: impl fmt::Display) -> Self {
        Failure::new(EXIT_INPUT, kind, message.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for Failure {}

/// Collapse an error into the single line printed on stderr and its code.
pub fn report(err: &anyhow::Error) -> (i32, String) {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return (f.code, format!("error: {}", one_line(&f.to_string())));
    }
    let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
    (EXIT_FAILURE, format!("error: failed: {}", one_line(&chain.join(": "))))
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
