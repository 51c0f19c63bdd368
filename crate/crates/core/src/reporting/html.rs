//! `index.html`: a single static page, no external assets. While jobs are
//! still pending it asks the browser to reload every few seconds.

use std::fmt::Write as _;
use std::path::Path;

use super::{write_file, ReportError, ReportJob, RunReport};
use crate::runner::JobStatus;
use crate::util::escape_xml;

const REFRESH_SECONDS: u32 = 5;

const STYLE: &str = "\
body{font-family:sans-serif;margin:2em;color:#222}
table{border-collapse:collapse}
th,td{border:1px solid #bbb;padding:.25em .6em;text-align:left}
td.num{text-align:right;font-family:monospace}
tr.waiting td.status{background:#eee}
tr.running td.status{background:#cde4ff}
tr.completed td.status{background:#c8f0c8}
tr.error td.status{background:#ffc8c8}
tr.timeout td.status{background:#ffe0a0}
tr.memout td.status{background:#f0c8f0}
tr.killed-by-user td.status{background:#d8d8d8}
td.accepted{color:#060}
td.rejected{color:#a00;font-weight:bold}
p.warn{color:#a00}";

pub fn to_html(report: &RunReport) -> String {
    let e = escape_xml;
    let mut out = String::from("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    if report.is_live() {
        let _ = writeln!(out, "<meta http-equiv=\"refresh\" content=\"{REFRESH_SECONDS}\">");
    }
    let _ = writeln!(out, "<title>{} – {}</title>", e(&report.task), e(&report.timestamp));
    let _ = writeln!(out, "<style>\n{STYLE}\n</style>\n</head>\n<body>");
    let _ = writeln!(out, "<h1>{}</h1>", e(&report.task));
    let _ = writeln!(
        out,
        "<p>Run <code>{}</code> on {}.<br>Limits: {}.</p>",
        e(&report.timestamp),
        e(&report.machine),
        e(&describe_limits(report))
    );
    if report.workers > 1 {
        let _ = writeln!(
            out,
            "<p class=\"warn\">{} jobs ran in parallel; timings are not comparable with sequential runs.</p>",
            report.workers
        );
    }
    let summary: Vec<String> = JobStatus::ALL
        .into_iter()
        .filter_map(|s| {
            let n = report.count(s);
            (n > 0).then(|| format!("{n} {s}"))
        })
        .collect();
    let _ = writeln!(out, "<p>{} jobs: {}.</p>", report.jobs.len(), summary.join(", "));

    out.push_str("<table>\n<thead><tr><th>Job</th><th>Status</th><th>Exit</th><th>real</th><th>user</th><th>sys</th><th>Wall</th><th>Peak RSS</th><th>Verdict</th><th>Output</th></tr></thead>\n<tbody>\n");
    for job in &report.jobs {
        write_row(&mut out, report, job);
    }
    out.push_str("</tbody>\n</table>\n</body>\n</html>\n");
    out
}

fn describe_limits(report: &RunReport) -> String {
    let l = &report.limits;
    let wall = l.wall.map_or("no time limit".to_string(), |w| format!("time {w} s"));
    let mem = l
        .memory_bytes
        .map_or("no memory limit".to_string(), |m| format!("memory {}", format_bytes(m)));
    format!("{wall}, {mem}, grace {} s", l.grace)
}

fn format_bytes(b: u64) -> String {
    format!("{:.1} MiB", b as f64 / (1024.0 * 1024.0))
}

fn write_row(out: &mut String, report: &RunReport, job: &ReportJob) {
    let e = escape_xml;
    let dash = || "–".to_string();
    let status = match (job.status, report.limits.wall, report.limits.memory_bytes) {
        (JobStatus::Timeout, Some(w), _) => format!("timeout (limit {w} s)"),
        (JobStatus::Memout, _, Some(m)) => format!("memout (limit {})", format_bytes(m)),
        (s, _, _) => s.to_string(),
    };
    let title = job
        .diagnostic
        .as_deref()
        .map(|d| format!(" title=\"{}\"", e(d)))
        .unwrap_or_default();
    let time = |f: fn(&crate::runner::TimeRecord) -> crate::runner::Seconds| {
        job.times.as_ref().map_or_else(dash, |t| f(t).to_string())
    };
    let mut links = Vec::new();
    for (label, path) in [("stdout", &job.stdout), ("stderr", &job.stderr)] {
        if let Some(p) = path {
            links.push(format!("<a href=\"{}\">{label}</a>", e(p)));
        }
    }
    let _ = writeln!(
        out,
        "<tr class=\"job {}\"><td>{}</td><td class=\"status\"{title}>{}</td><td class=\"num\">{}</td>\
         <td class=\"num\">{}</td><td class=\"num\">{}</td><td class=\"num\">{}</td><td class=\"num\">{}</td>\
         <td class=\"num\">{}</td><td class=\"{}\">{}</td><td>{}</td></tr>",
        job.status,
        e(&job.id.to_string()),
        e(&status),
        job.exit_code.map_or_else(dash, |c| c.to_string()),
        time(|t| t.real),
        time(|t| t.user),
        time(|t| t.sys),
        job.wall.map_or_else(dash, |w| w.to_string()),
        job.peak_rss_bytes.map_or_else(dash, format_bytes),
        job.verdict,
        job.verdict,
        links.join(" ")
    );
}

pub fn write_results_html(report: &RunReport, path: &Path) -> Result<(), ReportError> {
    write_file(path, &to_html(report))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::report;
    use super::*;

    #[test]
    fn one_row_per_job() {
        let r = report(
            "t",
            &[
                ("A", "x", JobStatus::Completed),
                ("A", "y", JobStatus::Timeout),
                ("B", "x", JobStatus::Memout),
            ],
        );
        let html = to_html(&r);
        assert_eq!(html.matches("<tr class=\"job ").count(), 3);
        assert!(html.contains("timeout (limit 1.00 s)"));
        assert!(html.contains("<td class=\"unchecked\">unchecked</td>"));
        assert!(html.contains("<a href=\"A/x/stdout.txt\">stdout</a>"));
        assert!(!html.contains("http-equiv"));
        assert!(!html.contains("<link") && !html.contains("<script"));
    }

    #[test]
    fn live_page_refreshes() {
        let r = report("t", &[("A", "x", JobStatus::Running), ("A", "y", JobStatus::Waiting)]);
        let html = to_html(&r);
        assert!(html.contains("http-equiv=\"refresh\""));
        assert!(html.contains("<tr class=\"job running\">"));
    }

    #[test]
    fn parallel_warning() {
        let mut r = report("t", &[("A", "x", JobStatus::Completed)]);
        assert!(!to_html(&r).contains("class=\"warn\""));
        r.workers = 2;
        assert!(to_html(&r).contains("class=\"warn\""));
    }
}
