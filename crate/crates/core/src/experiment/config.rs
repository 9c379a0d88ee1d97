//! Experiment configuration file (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::economy::{quote_price, EconomyParams, ResourceId, ResourceSpec};
use crate::lrms::AdmissionPolicy;
use crate::workload::SyntheticWorkload;

use super::ExperimentError;

/// Where a resource's jobs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WorkloadSource {
    /// An SWF trace; rows in `[window_start, window_start + horizon]` are used.
    Trace {
        path: PathBuf,
        #[serde(default)]
        window_start: f64,
    },
    Synthetic(SyntheticWorkload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceConfig {
    pub name: String,
    pub processors: u32,
    pub mips: f64,
    /// Overrides the linear MIPS-based quote when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default)]
    pub bandwidth: f64,
    pub workload: WorkloadSource,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_policy() -> AdmissionPolicy {
    AdmissionPolicy::GreedyBackfilling
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    /// Share of each job's deadline given to SLA bidding.
    pub phi: f64,
    /// Fraction of users optimizing for time; the rest optimize for cost.
    #[serde(default = "one")]
    pub user_mix: f64,
    #[serde(default = "one")]
    pub min_bid_interval: f64,
    /// Keep cycling through the ranking while bidding budget remains;
    /// `false` stops after one pass.
    #[serde(default = "yes")]
    pub rank_wraparound: bool,
    /// Transfer time of a job to its contractor.
    #[serde(default)]
    pub submission_delay: f64,
    /// Transfer time of a job's output back to its origin.
    #[serde(default)]
    pub return_delay: f64,
    /// Submissions stop here.
    pub horizon: f64,
    /// Stop the clock at the horizon instead of draining in-flight work.
    #[serde(default)]
    pub hard_stop: bool,
    #[serde(default = "default_policy")]
    pub policy: AdmissionPolicy,
    #[serde(default)]
    pub directory_latency: f64,
    #[serde(default)]
    pub economy: EconomyParams,
    pub resources: Vec<ResourceConfig>,
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ExperimentError> {
    if cond {
        Ok(())
    } else {
        Err(ExperimentError::Config(msg()))
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let config: SimConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        check((0.0..=1.0).contains(&self.phi), || {
            format!("phi must lie in [0, 1], got {}", self.phi)
        })?;
        check((0.0..=1.0).contains(&self.user_mix), || {
            format!("user_mix must lie in [0, 1], got {}", self.user_mix)
        })?;
        check(self.horizon.is_finite() && self.horizon > 0.0, || {
            format!("horizon must be > 0, got {}", self.horizon)
        })?;
        check(
            self.min_bid_interval.is_finite() && self.min_bid_interval > 0.0,
            || {
                format!(
                    "min_bid_interval must be > 0, got {}",
                    self.min_bid_interval
                )
            },
        )?;
        for (name, v) in [
            ("submission_delay", self.submission_delay),
            ("return_delay", self.return_delay),
            ("directory_latency", self.directory_latency),
        ] {
            check(v.is_finite() && v >= 0.0, || {
                format!("{name} must be >= 0, got {v}")
            })?;
        }
        check(!self.resources.is_empty(), || {
            "at least one resource is required".into()
        })?;
        self.economy
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        for spec in self.resource_specs() {
            spec.validate()
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        for r in &self.resources {
            if let WorkloadSource::Synthetic(s) = &r.workload {
                s.validate()
                    .map_err(|e| ExperimentError::Config(format!("{}: {e}", r.name)))?;
            }
        }
        Ok(())
    }

    /// Resources with ids assigned in file order and prices filled in.
    pub fn resource_specs(&self) -> Vec<ResourceSpec> {
        self.resources
            .iter()
            .enumerate()
            .map(|(i, r)| ResourceSpec {
                id: ResourceId(i),
                name: r.name.clone(),
                processors: r.processors,
                mips: r.mips,
                price: r
                    .price
                    .unwrap_or_else(|| quote_price(r.mips, &self.economy)),
                bandwidth: r.bandwidth,
            })
            .collect()
    }

    /// Bids are decided on arrival when there is no bidding budget.
    pub fn effective_policy(&self) -> AdmissionPolicy {
        if self.phi == 0.0 {
            AdmissionPolicy::Fcfs
        } else {
            self.policy
        }
    }

    /// Makes relative trace paths relative to `base`.
    fn resolve_paths(&mut self, base: &Path) {
        for r in &mut self.resources {
            if let WorkloadSource::Trace { path, .. } = &mut r.workload {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }
}

/// Reads, validates and path-resolves an experiment config.
pub fn load_config(path: &Path) -> Result<SimConfig, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = SimConfig::from_toml(&text)
        .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
    config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(config)
}
