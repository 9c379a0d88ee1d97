use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use gridfed::experiment::{
    emit_csv, load_config, run_experiment, sweep_phi, FederationReport, REFERENCE_PHIS,
};
use gridfed::workload::{self, SyntheticWorkload};

#[derive(Parser)]
#[command(
    name = "gridfed",
    version,
    about = "SLA-based federated superscheduling simulator"
)]
struct Cli {
    /// Overrides the seed in the config or workload spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment per bid-delay fraction.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated fractions of the deadline given to bidding.
        #[arg(long, value_delimiter = ',', default_values_t = REFERENCE_PHIS.to_vec())]
        phi: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Run sweep points one after another.
        #[arg(long)]
        serial: bool,
    },
    /// Generate a synthetic SWF trace.
    GenWorkload {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse an SWF trace and print its load report.
    ValidateTrace {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenSpec {
    seed: u64,
    jobs: usize,
    mean_interarrival: f64,
    mean_runtime: f64,
    processors: Vec<(u32, f64)>,
}

fn print_summary(reports: &[FederationReport]) {
    println!(
        "{:>5} {:>16} {:>12} {:>14} {:>10} {:>9} {:>8}",
        "phi", "earnings", "avg_resp", "avg_budget", "msgs/job", "accepted", "dropped"
    );
    for r in reports {
        let t = &r.totals;
        println!(
            "{:>5} {:>16.2} {:>12.2} {:>14.2} {:>10.3} {:>9} {:>8}",
            r.phi,
            t.total_earnings,
            t.avg_response_time,
            t.avg_budget_spent,
            t.avg_messages_per_job,
            t.jobs_accepted,
            t.jobs_dropped
        );
    }
}

fn write_outputs(reports: &[FederationReport], out: &Path) -> Result<()> {
    for path in emit_csv(reports, out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let report = run_experiment(&cfg)?;
            print_summary(std::slice::from_ref(&report));
            write_outputs(&[report], &out)?;
        }
        Command::Sweep {
            config,
            phi,
            out,
            serial,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if phi.is_empty() {
                bail!("--phi needs at least one value");
            }
            let reports = sweep_phi(&cfg, &phi, !serial)?;
            print_summary(&reports);
            write_outputs(&reports, &out)?;
        }
        Command::GenWorkload { spec, out } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let gen: GenSpec =
                toml::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            let params = SyntheticWorkload {
                jobs: gen.jobs,
                mean_interarrival: gen.mean_interarrival,
                mean_runtime: gen.mean_runtime,
                processors: gen.processors,
            };
            let jobs = workload::synth_generate(&params, cli.seed.unwrap_or(gen.seed))?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(file);
            workload::write_swf(&jobs, &mut w)?;
            w.flush()?;
            eprintln!("wrote {} jobs to {}", jobs.len(), out.display());
        }
        Command::ValidateTrace { file } => {
            let trace = workload::parse_swf(&file)?;
            let r = &trace.report;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "file:           {}", file.display())?;
            writeln!(stdout, "comment lines:  {}", r.comment_lines)?;
            writeln!(stdout, "data rows:      {}", r.data_rows)?;
            writeln!(stdout, "valid rows:     {}", r.valid_rows)?;
            writeln!(stdout, "skipped rows:   {}", r.skipped_rows)?;
            writeln!(stdout, "malformed rows: {}", r.malformed_rows)?;
            if let Some(widest) = trace.jobs.iter().map(|j| j.allocated_processors).max() {
                writeln!(stdout, "widest job:     {widest} processors")?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
