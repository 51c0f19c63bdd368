use std::path::PathBuf;

use anyhow::Result;
use benchfold_core::reporting::{
    read_results_xml, write_results_html, write_timings_csv, ReportError, RunReport, RESULTS_HTML, RESULTS_XML,
    TIMINGS_CSV,
};

use crate::failure::{Failure, EXIT_FAILURE};
use crate::ReportArgs;

pub fn run(args: ReportArgs) -> Result<u8> {
    let (html, timings) = match (args.html, args.timings) {
        (false, false) => (true, true),
        flags => flags,
    };
    let mut reports: Vec<(PathBuf, RunReport)> = Vec::new();
    for dir in &args.dirs {
        let report = read_results_xml(&dir.join(RESULTS_XML)).map_err(failure)?;
        reports.push((dir.clone(), report));
    }
    if html {
        for (dir, report) in &reports {
            let path = dir.join(RESULTS_HTML);
            write_results_html(report, &path).map_err(failure)?;
            println!("wrote {}", path.display());
        }
    }
    if timings {
        let path = match (&args.output, reports.as_slice()) {
            (Some(p), _) => p.clone(),
            (None, [(dir, _)]) => dir.join(TIMINGS_CSV),
            (None, _) => PathBuf::from(TIMINGS_CSV),
        };
        let only: Vec<RunReport> = reports.into_iter().map(|(_, r)| r).collect();
        write_timings_csv(&only, &path).map_err(failure)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn failure(e: ReportError) -> Failure {
    match e {
        ReportError::Io { ref path, .. } if path.ends_with(RESULTS_XML) => Failure::input("results", e),
        ReportError::Io { .. } => Failure::new(EXIT_FAILURE, "io", e.to_string()),
        ReportError::Parse { .. } => Failure::input("results", e),
        ReportError::MixedTasks { .. } | ReportError::NoReports => Failure::input("mixed-tasks", e),
    }
}
