//! `results.xml`
//!
//! ```xml
//! <Run toolVersion="0.1.0">
//!   <task>T1</task>
//!   <timestamp>2024-05-01_10-00-00</timestamp>
//!   <machine>host (linux/x86_64, 4 cpus)</machine>
//!   <limits wall="1.00" memory="104857600" grace="5.00"/>
//!   <workers>1</workers>
//!   <job id="Amrhein/casA" status="completed" real="1.00" user="0.90" sys="0.03"
//!        peakRSS="1048576" verdict="unchecked" exitCode="0" wall="1.01"
//!        stdout="Amrhein/casA/stdout.txt" stderr="Amrhein/casA/stderr.txt"
//!        started="..." ended="..."/>
//! </Run>
//! ```
//!
//! `real`, `user`, `sys`, `peakRSS` and `verdict` are always present and
//! empty while unknown; the other job attributes are omitted when unknown.
//! Absent limits are omitted as well.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{write_file, ReportError, ReportJob, RunReport, Verdict};
use crate::runner::{JobStatus, RunLimits, Seconds, TimeRecord};
use crate::taskfolder::JobKey;
use crate::util::escape_xml;
use crate::TOOL_VERSION;

pub fn to_xml(report: &RunReport) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<Run toolVersion=\"{}\">", escape_xml(TOOL_VERSION));
    let _ = writeln!(out, "  <task>{}</task>", escape_xml(&report.task));
    let _ = writeln!(out, "  <timestamp>{}</timestamp>", escape_xml(&report.timestamp));
    let _ = writeln!(out, "  <machine>{}</machine>", escape_xml(&report.machine));
    out.push_str("  <limits");
    if let Some(w) = report.limits.wall {
        let _ = write!(out, " wall=\"{w}\"");
    }
    if let Some(m) = report.limits.memory_bytes {
        let _ = write!(out, " memory=\"{m}\"");
    }
    let _ = writeln!(out, " grace=\"{}\"/>", report.limits.grace);
    let _ = writeln!(out, "  <workers>{}</workers>", report.workers);
    for job in &report.jobs {
        write_job(&mut out, job);
    }
    out.push_str("</Run>\n");
    out
}

fn write_job(out: &mut String, job: &ReportJob) {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut attrs: Vec<(&str, String)> = vec![
        ("id", job.id.to_string()),
        ("status", job.status.to_string()),
        ("real", opt(job.times.map(|t| t.real.to_string()))),
        ("user", opt(job.times.map(|t| t.user.to_string()))),
        ("sys", opt(job.times.map(|t| t.sys.to_string()))),
        ("peakRSS", opt(job.peak_rss_bytes.map(|p| p.to_string()))),
        ("verdict", job.verdict.to_string()),
    ];
    let optional = [
        ("exitCode", job.exit_code.map(|c| c.to_string())),
        ("wall", job.wall.map(|w| w.to_string())),
        ("stdout", job.stdout.clone()),
        ("stderr", job.stderr.clone()),
        ("started", job.started.clone()),
        ("ended", job.ended.clone()),
    ];
    attrs.extend(optional.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
    out.push_str("  <job");
    for (k, v) in attrs {
        let _ = write!(out, " {k}=\"{}\"", escape_xml(&v));
    }
    match &job.diagnostic {
        Some(d) => {
            let _ = writeln!(out, ">\n    <diagnostic>{}</diagnostic>\n  </job>", escape_xml(d));
        }
        None => out.push_str("/>\n"),
    }
}

pub fn write_results_xml(report: &RunReport, path: &Path) -> Result<(), ReportError> {
    write_file(path, &to_xml(report))
}

pub fn read_results_xml(path: &Path) -> Result<RunReport, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_results_xml(&text).map_err(|message| ReportError::Parse {
        path: path.display().to_string(),
        message,
    })
}

pub fn parse_results_xml(text: &str) -> Result<RunReport, String> {
    let doc = roxmltree::Document::parse(text).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    if root.tag_name().name() != "Run" {
        return Err(format!("root element is <{}>, expected <Run>", root.tag_name().name()));
    }
    let mut task = None;
    let mut timestamp = None;
    let mut machine = None;
    let mut limits = None;
    let mut workers = None;
    let mut jobs = Vec::new();
    for node in root.children().filter(roxmltree::Node::is_element) {
        let at = |msg: String| {
            let pos = doc.text_pos_at(node.range().start);
            format!("line {}: {msg}", pos.row)
        };
        match node.tag_name().name() {
            "task" => task = Some(text_of(node)),
            "timestamp" => timestamp = Some(text_of(node)),
            "machine" => machine = Some(text_of(node)),
            "limits" => limits = Some(parse_limits(node).map_err(at)?),
            "workers" => {
                workers = Some(
                    text_of(node)
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| at(format!("workers: {e}")))?,
                )
            }
            "job" => jobs.push(parse_job(node).map_err(at)?),
            other => return Err(at(format!("unexpected element <{other}>"))),
        }
    }
    let need = |v: Option<String>, what: &str| v.ok_or_else(|| format!("missing <{what}>"));
    Ok(RunReport {
        task: need(task, "task")?,
        timestamp: need(timestamp, "timestamp")?,
        machine: need(machine, "machine")?,
        limits: limits.ok_or("missing <limits>")?,
        workers: workers.unwrap_or(1),
        jobs,
    })
}

fn text_of(node: roxmltree::Node) -> String {
    node.children().filter(|n| n.is_text()).filter_map(|n| n.text()).collect()
}

fn parse_attr<T: FromStr>(node: roxmltree::Node, name: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    match node.attribute(name) {
        None | Some("") => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| format!("attribute {name}=\"{v}\": {e}")),
    }
}

fn parse_limits(node: roxmltree::Node) -> Result<RunLimits, String> {
    Ok(RunLimits {
        wall: parse_attr(node, "wall")?,
        memory_bytes: parse_attr(node, "memory")?,
        grace: parse_attr::<Seconds>(node, "grace")?.ok_or("limits without grace")?,
    })
}

fn parse_job(node: roxmltree::Node) -> Result<ReportJob, String> {
    let id = node.attribute("id").ok_or("job without id")?;
    let id = JobKey::parse(id).ok_or_else(|| format!("bad job id `{id}`"))?;
    let status: JobStatus = parse_attr(node, "status")?.ok_or("job without status")?;
    let real: Option<Seconds> = parse_attr(node, "real")?;
    let user: Option<Seconds> = parse_attr(node, "user")?;
    let sys: Option<Seconds> = parse_attr(node, "sys")?;
    let times = match (real, user, sys) {
        (Some(r), Some(u), Some(s)) => Some(TimeRecord::new(r, u, s)),
        (None, None, None) => None,
        _ => return Err(format!("job {id}: incomplete real/user/sys")),
    };
    let text = |name: &str| node.attribute(name).map(String::from);
    let diagnostic = node
        .children()
        .find(|n| n.has_tag_name("diagnostic"))
        .map(text_of);
    Ok(ReportJob {
        status,
        exit_code: parse_attr(node, "exitCode")?,
        times,
        wall: parse_attr(node, "wall")?,
        peak_rss_bytes: parse_attr(node, "peakRSS")?,
        stdout: text("stdout"),
        stderr: text("stderr"),
        started: text("started"),
        ended: text("ended"),
        diagnostic,
        verdict: parse_attr::<Verdict>(node, "verdict")?.unwrap_or_default(),
        id,
    })
}
