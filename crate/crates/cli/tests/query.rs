mod common;

use std::fs;

use common::*;

fn query(sb: &Sandbox, metadata: &str, args: &[&str]) -> std::process::Output {
    let mut all = vec!["query", "--metadata", metadata];
    all.extend_from_slice(args);
    sb.run(&all)
}

#[test]
fn degree_of_caprasse() {
    let sb = Sandbox::new();
    let out = query(&sb, caprasse_ttl().to_str().unwrap(), &["--pattern", "?s sd:hasDegree ?d"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    assert!(lines[0].ends_with("56"), "{text}");
    assert!(lines[0].contains("Caprasse"));
}

#[test]
fn filter_and_unmatched_patterns_print_nothing() {
    let sb = Sandbox::new();
    let ttl = caprasse_ttl();
    let out = query(&sb, ttl.to_str().unwrap(), &["--pattern", "?s sd:hasDegree ?d", "--filter", "?d <= 36"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "");
    let out = query(&sb, ttl.to_str().unwrap(), &["--pattern", "?s sd:hasDimension ?d"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "");
}

#[test]
fn conjunctive_patterns() {
    let sb = Sandbox::new();
    let out = query(
        &sb,
        caprasse_ttl().to_str().unwrap(),
        &["--pattern", "?s a sd:IntPS", "--pattern", "?s sd:hasVariables ?v"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 1);
    assert!(stdout(&out).contains("x,y,z,t"));
}

#[test]
fn malformed_turtle_reports_line() {
    let sb = Sandbox::new();
    let bad = sb.path().join("bad.ttl");
    fs::write(&bad, "@prefix sd: <http://example.org/> .\n<http://example.org/a> sd:p \"1\" .\n<http://example.org/b> sd:p \"2 .\n").unwrap();
    let out = query(&sb, bad.to_str().unwrap(), &["--pattern", "?s ?p ?o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.starts_with("error: parse:"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn bad_pattern_exits_2() {
    let sb = Sandbox::new();
    let out = query(&sb, caprasse_ttl().to_str().unwrap(), &["--pattern", "?s sd:hasDegree"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = query(&sb, caprasse_ttl().to_str().unwrap(), &["--pattern", "?s ex:p ?o"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
