//! Benchmark taskfolder compiler and supervised runner.
//!
//! Problem instances live as XML resource files grouped into SD-Tables
//! (one directory per table). A [`compproblems::Registry`] pairs
//! computation problems with solver backends and their script templates;
//! [`taskfolder::build_taskfolder`] renders a selection into a portable,
//! data-only bundle, and [`runner::run_all`] executes that bundle under
//! wall-clock and memory supervision, writing XML and HTML reports as it
//! goes. [`metastore`] answers triple-pattern queries over Turtle metadata
//! to help pick instances.

pub mod compproblems;
pub mod metastore;
pub mod reporting;
pub mod resources;
pub mod runner;
pub mod taskfolder;
mod util;

pub use util::is_identifier;

/// Version string stamped into every taskfolder descriptor.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
