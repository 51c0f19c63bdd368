mod common;

use std::fs;

use common::*;

fn two_by_two(sb: &Sandbox) -> std::path::PathBuf {
    let folder = sb.stub_folder("T", &["Amrhein", "Caprasse"], &[("s1", "print a"), ("s2", "print b")]);
    assert_eq!(sb.run(&["run", "T"]).status.code(), Some(0));
    only_results_dir(&folder)
}

#[test]
fn timings_for_two_by_two() {
    let sb = Sandbox::new();
    let dir = two_by_two(&sb);
    let out = sb.run(&["report", "--timings", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("timings.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "{csv}");
    assert_eq!(lines[0], "instance,s1,s2");
    assert!(lines[1].starts_with("Amrhein,") && lines[2].starts_with("Caprasse,"));
}

#[test]
fn html_has_one_row_per_job() {
    let sb = Sandbox::new();
    let dir = two_by_two(&sb);
    fs::remove_file(dir.join("index.html")).unwrap();
    let out = sb.run(&["report", "--html", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let html = fs::read_to_string(dir.join("index.html")).unwrap();
    assert_eq!(html.matches("<tr class=\"job ").count(), 4);
    assert!(!dir.join("timings.csv").exists());
}

#[test]
fn several_runs_into_one_table() {
    let sb = Sandbox::new();
    let folder = sb.stub_folder("T", &["Caprasse"], &[("s1", "print a")]);
    assert_eq!(sb.run(&["run", "T"]).status.code(), Some(0));
    assert_eq!(sb.run(&["run", "T"]).status.code(), Some(0));
    let dirs = results_dirs(&folder);
    assert_eq!(dirs.len(), 2);
    let out = sb.run(&["report", "--timings", dirs[0].to_str().unwrap(), dirs[1].to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(sb.path().join("timings.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().next().unwrap().matches("/s1").count(), 2, "{csv}");
}

#[test]
fn corrupt_or_missing_xml_exits_2() {
    let sb = Sandbox::new();
    let dir = two_by_two(&sb);
    fs::write(dir.join("results.xml"), "<Run><job id=").unwrap();
    let out = sb.run(&["report", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: results:"), "{}", stderr(&out));
    let out = sb.run(&["report", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
}
