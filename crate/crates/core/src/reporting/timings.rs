//! Instance × backend matrix of real times, for one or more runs of the
//! same task.

use std::path::Path;

use super::{write_file, ReportError, RunReport};
use crate::runner::JobStatus;

/// Rows are instances, columns backends; with several reports the columns
/// become `<timestamp>/<backend>`, grouped by report. A cell holds the real
/// time of a completed job and the status token otherwise.
pub fn timings_table(reports: &[RunReport]) -> Result<Vec<Vec<String>>, ReportError> {
    let first = reports.first().ok_or(ReportError::NoReports)?;
    if let Some(other) = reports.iter().find(|r| r.task != first.task) {
        return Err(ReportError::MixedTasks {
            first: first.task.clone(),
            other: other.task.clone(),
        });
    }
    let mut instances: Vec<&str> = Vec::new();
    let mut backends: Vec<&str> = Vec::new();
    for job in reports.iter().flat_map(|r| &r.jobs) {
        if !instances.contains(&job.id.instance.as_str()) {
            instances.push(&job.id.instance);
        }
        if !backends.contains(&job.id.backend.as_str()) {
            backends.push(&job.id.backend);
        }
    }
    let multi = reports.len() > 1;
    let mut header = vec!["instance".to_string()];
    for r in reports {
        for b in &backends {
            header.push(if multi { format!("{}/{b}", r.timestamp) } else { b.to_string() });
        }
    }
    let mut table = vec![header];
    for inst in &instances {
        let mut row = vec![inst.to_string()];
        for r in reports {
            for b in &backends {
                let job = r.jobs.iter().find(|j| j.id.instance == *inst && j.id.backend == *b);
                row.push(match job {
                    Some(j) => match (j.status, j.times) {
                        (JobStatus::Completed, Some(t)) => t.real.to_string(),
                        (s, _) => s.to_string(),
                    },
                    None => String::new(),
                });
            }
        }
        table.push(row);
    }
    Ok(table)
}

/// The table as comma-separated text with a header row.
pub fn timings_csv(reports: &[RunReport]) -> Result<String, ReportError> {
    let table = timings_table(reports)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in &table {
        w.write_record(row).map_err(|e| ReportError::Io {
            path: "timings".into(),
            source: e.into(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io {
        path: "timings".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields is UTF-8"))
}

pub fn write_timings_csv(reports: &[RunReport], path: &Path) -> Result<(), ReportError> {
    write_file(path, &timings_csv(reports)?)
}
