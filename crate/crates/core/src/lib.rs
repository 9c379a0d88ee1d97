//! Discrete-event simulation of SLA-based coordinated superscheduling in a
//! federation of clusters.
//!
//! Each cluster runs a federation agent with two roles. As a manager it
//! negotiates its users' jobs with other clusters through contract-net
//! bidding with geometrically shrinking bid windows. As a contractor its
//! local resource manager admits bids greedily by owner revenue.

pub mod directory;
pub mod economy;
pub mod engine;
pub mod events;
pub mod experiment;
pub mod federation;
pub mod lrms;
pub mod superscheduler;
pub mod workload;

pub use directory::{Directory, QueryStrategy, Quote};
pub use economy::{EconomyParams, ResourceId, ResourceSpec};
pub use engine::{Engine, EventHandle, SimTime};
pub use experiment::{
    emit_csv, load_config, run_experiment, sweep_phi, ExperimentError, FederationReport, SimConfig,
};
pub use lrms::AdmissionPolicy;
pub use workload::{Job, JobId, TraceJob};
