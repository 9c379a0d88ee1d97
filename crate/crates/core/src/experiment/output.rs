//! CSV emission. Column order is fixed; floats are written with Rust's
//! shortest round-trip formatting.

use std::fs;
use std::path::{Path, PathBuf};

use super::report::FederationReport;
use super::ExperimentError;

pub const PER_RESOURCE_HEADER: [&str; 11] = [
    "phi",
    "resource",
    "earnings",
    "earnings_per_proc",
    "mi_executed",
    "avg_response",
    "avg_budget",
    "jobs_accepted",
    "jobs_dropped",
    "local_msgs",
    "remote_msgs",
];

pub const FEDERATION_HEADER: [&str; 5] = [
    "phi",
    "total_earnings",
    "avg_response",
    "avg_budget",
    "avg_msgs_per_job",
];

fn sorted(reports: &[FederationReport]) -> Vec<&FederationReport> {
    let mut v: Vec<&FederationReport> = reports.iter().collect();
    v.sort_by(|a, b| a.phi.total_cmp(&b.phi));
    v
}

pub fn per_resource_csv(reports: &[FederationReport]) -> Result<Vec<u8>, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PER_RESOURCE_HEADER)?;
    for rep in sorted(reports) {
        for r in &rep.resources {
            w.write_record([
                rep.phi.to_string(),
                r.resource.clone(),
                r.earnings.to_string(),
                r.earnings_per_processor.to_string(),
                r.mi_executed.to_string(),
                r.avg_response_time.to_string(),
                r.avg_budget_spent.to_string(),
                r.jobs_accepted.to_string(),
                r.jobs_dropped.to_string(),
                r.local_messages.to_string(),
                r.remote_messages.to_string(),
            ])?;
        }
    }
    w.into_inner()
        .map_err(|e| ExperimentError::Csv(e.into_error().into()))
}

pub fn federation_csv(reports: &[FederationReport]) -> Result<Vec<u8>, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FEDERATION_HEADER)?;
    for rep in sorted(reports) {
        let t = &rep.totals;
        w.write_record([
            rep.phi.to_string(),
            t.total_earnings.to_string(),
            t.avg_response_time.to_string(),
            t.avg_budget_spent.to_string(),
            t.avg_messages_per_job.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| ExperimentError::Csv(e.into_error().into()))
}

/// Writes `per_resource.csv` and `federation.csv` into `out_dir`.
pub fn emit_csv(
    reports: &[FederationReport],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let per_resource = out_dir.join("per_resource.csv");
    let federation = out_dir.join("federation.csv");
    fs::write(&per_resource, per_resource_csv(reports)?).map_err(io_err(&per_resource))?;
    fs::write(&federation, federation_csv(reports)?).map_err(io_err(&federation))?;
    Ok(vec![per_resource, federation])
}
