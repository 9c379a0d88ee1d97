//! Workload ingestion: Standard Workload Format traces, a seeded synthetic
//! generator, and conversion of trace rows into federation jobs.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economy::{self, EconomyParams, ResourceId, ResourceSpec};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("cannot read trace {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid synthetic workload: {0}")]
    InvalidSpec(String),
}

/// One usable row of an SWF trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceJob {
    pub job_index: u64,
    pub submit_time: f64,
    pub run_time: f64,
    pub allocated_processors: u32,
}

/// Job identity `(i, j, k)`: job index, user, origin resource. Ordered
/// lexicographically in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct JobId {
    pub index: u64,
    pub user: u32,
    pub origin: ResourceId,
}

impl JobId {
    pub fn new(index: u64, user: u32, origin: ResourceId) -> Self {
        Self {
            index,
            user,
            origin,
        }
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J({},{},{})", self.index, self.user, self.origin.0)
    }
}

/// A parallel job with its fabricated SLA parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub id: JobId,
    pub origin: ResourceId,
    pub processors: u32,
    /// Length in million instructions.
    pub length_mi: f64,
    /// Communication overhead as a fraction of execution time.
    pub comm_overhead: f64,
    /// Grid dollars.
    pub budget: f64,
    /// Relative to submission, in sim units.
    pub deadline: f64,
    pub submit_time: f64,
}

impl Job {
    pub fn check(&self) -> Result<(), String> {
        // false for NaN too
        let positive = |v: f64| v > 0.0;
        if !positive(self.length_mi) {
            return Err(format!("{}: length must be > 0", self.id));
        }
        if !(0.0..1.0).contains(&self.comm_overhead) {
            return Err(format!("{}: comm overhead must lie in [0, 1)", self.id));
        }
        if !positive(self.budget) || !positive(self.deadline) {
            return Err(format!("{}: budget and deadline must be > 0", self.id));
        }
        if self.processors == 0 {
            return Err(format!("{}: processors must be >= 1", self.id));
        }
        Ok(())
    }
}

/// Row accounting for one trace load.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub comment_lines: usize,
    pub data_rows: usize,
    pub valid_rows: usize,
    /// Rows that could not be parsed (too few columns, non-numeric fields).
    pub malformed_rows: usize,
    /// Rows with missing (negative) or zero run time or processors.
    pub skipped_rows: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SwfTrace {
    pub jobs: Vec<TraceJob>,
    pub report: LoadReport,
}

pub fn parse_swf(path: &Path) -> Result<SwfTrace, WorkloadError> {
    let text = fs::read_to_string(path).map_err(|source| WorkloadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_swf_str(&text))
}

enum Row {
    Valid(TraceJob),
    Skipped,
    Malformed,
}

fn parse_row(line: &str) -> Row {
    let cols: Vec<&str> = line.split_whitespace().collect();
    if cols.len() < 5 {
        return Row::Malformed;
    }
    // SWF columns are 1-based: 1 job number, 2 submit, 4 run time, 5 processors
    let (Ok(index), Ok(submit), Ok(run), Ok(procs)) = (
        cols[0].parse::<i64>(),
        cols[1].parse::<f64>(),
        cols[3].parse::<f64>(),
        cols[4].parse::<i64>(),
    ) else {
        return Row::Malformed;
    };
    if index < 1 || !submit.is_finite() || !run.is_finite() {
        return Row::Malformed;
    }
    if run <= 0.0 || procs <= 0 || submit < 0.0 {
        return Row::Skipped;
    }
    let Ok(procs) = u32::try_from(procs) else {
        return Row::Malformed;
    };
    Row::Valid(TraceJob {
        job_index: index as u64,
        submit_time: submit,
        run_time: run,
        allocated_processors: procs,
    })
}

pub fn parse_swf_str(text: &str) -> SwfTrace {
    let mut trace = SwfTrace::default();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with(';') {
            trace.report.comment_lines += 1;
            continue;
        }
        trace.report.data_rows += 1;
        match parse_row(line) {
            Row::Valid(job) => {
                trace.report.valid_rows += 1;
                trace.jobs.push(job);
            }
            Row::Skipped => trace.report.skipped_rows += 1,
            Row::Malformed => trace.report.malformed_rows += 1,
        }
    }
    trace
}

/// Writes jobs as 18-column SWF rows; unused columns are `-1`.
pub fn write_swf<W: Write>(jobs: &[TraceJob], mut out: W) -> io::Result<()> {
    writeln!(out, "; Version: 2.2")?;
    writeln!(out, "; MaxJobs: {}", jobs.len())?;
    for j in jobs {
        write!(
            out,
            "{} {} -1 {} {}",
            j.job_index, j.submit_time, j.run_time, j.allocated_processors
        )?;
        for _ in 5..18 {
            write!(out, " -1")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticWorkload {
    pub jobs: usize,
    pub mean_interarrival: f64,
    pub mean_runtime: f64,
    /// Discrete width distribution as `[processors, weight]` pairs.
    pub processors: Vec<(u32, f64)>,
}

impl SyntheticWorkload {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: String| Err(WorkloadError::InvalidSpec(m));
        if !(self.mean_interarrival.is_finite() && self.mean_interarrival > 0.0) {
            return bad(format!(
                "mean_interarrival must be > 0, got {}",
                self.mean_interarrival
            ));
        }
        if !(self.mean_runtime.is_finite() && self.mean_runtime > 0.0) {
            return bad(format!(
                "mean_runtime must be > 0, got {}",
                self.mean_runtime
            ));
        }
        if self.processors.is_empty() {
            return bad("processor distribution is empty".into());
        }
        for &(width, weight) in &self.processors {
            if width == 0 || !(weight.is_finite() && weight > 0.0) {
                return bad(format!("bad processor entry [{width}, {weight}]"));
            }
        }
        Ok(())
    }
}

/// Generates a deterministic synthetic trace: exponential inter-arrival and
/// run times (run time floored at one sim unit), widths drawn from the
/// configured discrete distribution.
pub fn synth_generate(spec: &SyntheticWorkload, seed: u64) -> Result<Vec<TraceJob>, WorkloadError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrivals = Exp::new(1.0 / spec.mean_interarrival)
        .map_err(|e| WorkloadError::InvalidSpec(e.to_string()))?;
    let runtimes =
        Exp::new(1.0 / spec.mean_runtime).map_err(|e| WorkloadError::InvalidSpec(e.to_string()))?;
    let widths = WeightedIndex::new(spec.processors.iter().map(|&(_, w)| w))
        .map_err(|e| WorkloadError::InvalidSpec(e.to_string()))?;

    let mut t = 0.0;
    let mut jobs = Vec::with_capacity(spec.jobs);
    for i in 0..spec.jobs {
        t += arrivals.sample(&mut rng);
        let run_time = runtimes.sample(&mut rng).max(1.0);
        let width = spec.processors[widths.sample(&mut rng)].0;
        jobs.push(TraceJob {
            job_index: i as u64 + 1,
            submit_time: t,
            run_time,
            allocated_processors: width,
        });
    }
    Ok(jobs)
}

/// Converts a trace row into a job submitted at `origin`. Length is the
/// trace run time times the origin's MIPS rating, so with zero overhead the
/// job runs for exactly its trace run time at home.
pub fn to_job(trace: &TraceJob, origin: &ResourceSpec, user: u32, params: &EconomyParams) -> Job {
    let mut job = Job {
        id: JobId::new(trace.job_index, user, origin.id),
        origin: origin.id,
        processors: trace.allocated_processors,
        length_mi: trace.run_time * origin.mips,
        comm_overhead: params.comm_fraction,
        budget: 0.0,
        deadline: 0.0,
        submit_time: trace.submit_time,
    };
    job.budget = economy::assign_budget(&job, origin, params);
    job.deadline = economy::assign_deadline(&job, origin, params);
    job
}

/// Jobs derived from one resource's trace, plus the rows that were flagged.
#[derive(Debug, Clone, Default)]
pub struct PreparedJobs {
    pub jobs: Vec<Job>,
    /// Rows wider than every federation resource.
    pub unschedulable: usize,
    /// Rows submitted outside the simulated window.
    pub outside_window: usize,
}

/// Shifts rows in `[window_start, window_start + horizon]` to start at zero
/// and converts them, flagging rows no federation resource can host.
pub fn prepare_jobs(
    trace: &[TraceJob],
    origin: &ResourceSpec,
    federation: &[ResourceSpec],
    params: &EconomyParams,
    window_start: f64,
    horizon: f64,
) -> Result<PreparedJobs, String> {
    let widest = federation.iter().map(|r| r.processors).max().unwrap_or(0);
    let mut out = PreparedJobs::default();
    for row in trace {
        let submit = row.submit_time - window_start;
        if submit < 0.0 || submit > horizon {
            out.outside_window += 1;
            continue;
        }
        if row.allocated_processors > widest {
            out.unschedulable += 1;
            continue;
        }
        let shifted = TraceJob {
            submit_time: submit,
            ..*row
        };
        let job = to_job(&shifted, origin, 0, params);
        job.check()?;
        out.jobs.push(job);
    }
    Ok(out)
}
