//! Static resource pricing, the expected response time and cost functions,
//! and the fabricated per-job budget and deadline.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::Job;

/// Index of a cluster in the federation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(pub usize);

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceSpec {
    pub id: ResourceId,
    pub name: String,
    pub processors: u32,
    /// Per-processor MIPS rating.
    pub mips: f64,
    /// Grid dollars per processor per sim unit.
    pub price: f64,
    /// NIC bandwidth in Gb/s. Carried for configuration fidelity only.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconomyParams {
    /// Access price of the fastest resource.
    pub access_price: f64,
    /// MIPS rating of the fastest resource.
    pub fastest_mips: f64,
    pub budget_multiplier: f64,
    pub deadline_multiplier: f64,
    /// Communication overhead as a fraction of execution time.
    pub comm_fraction: f64,
}

impl Default for EconomyParams {
    fn default() -> Self {
        Self {
            access_price: 5.3,
            fastest_mips: 930.0,
            budget_multiplier: 2.0,
            deadline_multiplier: 3.0,
            comm_fraction: 0.10,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconomyError {
    #[error("job {job} needs {needed} processors but {resource} has only {available}")]
    TooWide {
        job: String,
        resource: String,
        needed: u32,
        available: u32,
    },
    #[error("invalid economy parameter: {0}")]
    InvalidParams(String),
    #[error("invalid resource {name}: {reason}")]
    InvalidResource { name: String, reason: String },
}

impl EconomyParams {
    pub fn validate(&self) -> Result<(), EconomyError> {
        let positive = [
            ("access_price", self.access_price),
            ("fastest_mips", self.fastest_mips),
            ("budget_multiplier", self.budget_multiplier),
            ("deadline_multiplier", self.deadline_multiplier),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(EconomyError::InvalidParams(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if self.budget_multiplier < 1.0 || self.deadline_multiplier < 1.0 {
            return Err(EconomyError::InvalidParams(
                "budget and deadline multipliers must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.comm_fraction) {
            return Err(EconomyError::InvalidParams(format!(
                "comm_fraction must lie in [0, 1), got {}",
                self.comm_fraction
            )));
        }
        Ok(())
    }
}

impl ResourceSpec {
    pub fn validate(&self) -> Result<(), EconomyError> {
        let fail = |reason: String| EconomyError::InvalidResource {
            name: self.name.clone(),
            reason,
        };
        if self.processors == 0 {
            return Err(fail("processors must be >= 1".into()));
        }
        if !(self.mips.is_finite() && self.mips > 0.0) {
            return Err(fail(format!("mips must be > 0, got {}", self.mips)));
        }
        if !(self.price.is_finite() && self.price > 0.0) {
            return Err(fail(format!("price must be > 0, got {}", self.price)));
        }
        Ok(())
    }
}

/// Static price of a resource rated at `mips`: linear in speed, anchored so
/// that the fastest resource charges the access price.
pub fn quote_price(mips: f64, params: &EconomyParams) -> f64 {
    params.access_price * mips / params.fastest_mips
}

/// Truncates (not rounds) to two decimals, as quotes are reported.
///
/// A tolerance of 1e-9 absorbs representation error so that an exact value
/// such as 5.3 is not reported as 5.29.
pub fn truncate_2dp(value: f64) -> f64 {
    (value * 100.0 + 1e-9).floor() / 100.0
}

/// Compute time plus communication overhead of `job` on processors rated at
/// `mips`, with no width check.
pub fn response_time_at(job: &Job, mips: f64) -> f64 {
    job.length_mi / mips * (1.0 + job.comm_overhead)
}

fn check_width(job: &Job, resource: &ResourceSpec) -> Result<(), EconomyError> {
    if job.processors > resource.processors {
        return Err(EconomyError::TooWide {
            job: job.id.to_string(),
            resource: resource.name.clone(),
            needed: job.processors,
            available: resource.processors,
        });
    }
    Ok(())
}

/// Expected response time of `job` on `resource`. Queue wait is zero because
/// contractors only accept bids they can start immediately.
pub fn exec_time(job: &Job, resource: &ResourceSpec) -> Result<f64, EconomyError> {
    check_width(job, resource)?;
    Ok(response_time_at(job, resource.mips))
}

/// Grid dollars charged for `job` on `resource`: price × width × response time.
pub fn cost(job: &Job, resource: &ResourceSpec) -> Result<f64, EconomyError> {
    let time = exec_time(job, resource)?;
    Ok(resource.price * f64::from(job.processors) * time)
}

fn cost_unchecked(job: &Job, resource: &ResourceSpec) -> f64 {
    resource.price * f64::from(job.processors) * response_time_at(job, resource.mips)
}

pub fn assign_budget(job: &Job, origin: &ResourceSpec, params: &EconomyParams) -> f64 {
    params.budget_multiplier * cost_unchecked(job, origin)
}

pub fn assign_deadline(job: &Job, origin: &ResourceSpec, params: &EconomyParams) -> f64 {
    params.deadline_multiplier * response_time_at(job, origin.mips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::JobId;

    fn job(processors: u32, length_mi: f64, comm_overhead: f64) -> Job {
        Job {
            id: JobId::new(1, 0, ResourceId(0)),
            origin: ResourceId(0),
            processors,
            length_mi,
            comm_overhead,
            budget: 1.0,
            deadline: 1.0,
            submit_time: 0.0,
        }
    }

    fn resource(processors: u32, mips: f64, price: f64) -> ResourceSpec {
        ResourceSpec {
            id: ResourceId(0),
            name: "r".into(),
            processors,
            mips,
            price,
            bandwidth: 1.0,
        }
    }

    #[test]
    fn fastest_resource_prices_at_access_price() {
        let p = EconomyParams::default();
        assert_eq!(truncate_2dp(quote_price(930.0, &p)), 5.3);
        assert_eq!(truncate_2dp(quote_price(850.0, &p)), 4.84);
        assert_eq!(truncate_2dp(quote_price(700.0, &p)), 3.98);
    }

    #[test]
    fn truncation_not_rounding() {
        // 5.3 * 710 / 930 = 4.0462..., 5.3 * 700 / 930 = 3.9892...
        assert_eq!(truncate_2dp(4.0462), 4.04);
        assert_eq!(truncate_2dp(3.9892), 3.98);
        assert_eq!(truncate_2dp(3.999), 3.99);
    }

    #[test]
    fn exec_time_examples() {
        let r = resource(512, 850.0, 4.84);
        assert!((exec_time(&job(4, 85_000.0, 0.10), &r).unwrap() - 110.0).abs() < 1e-9);
        assert_eq!(
            exec_time(&job(1, 1.0, 0.0), &resource(1, 1.0, 1.0)).unwrap(),
            1.0
        );
        // zero overhead on the origin recovers the trace run time
        assert_eq!(exec_time(&job(4, 100.0 * 850.0, 0.0), &r).unwrap(), 100.0);
    }

    #[test]
    fn too_wide_is_an_error() {
        let err = exec_time(&job(9, 1.0, 0.0), &resource(8, 1.0, 1.0)).unwrap_err();
        assert!(matches!(
            err,
            EconomyError::TooWide {
                needed: 9,
                available: 8,
                ..
            }
        ));
        assert!(cost(&job(9, 1.0, 0.0), &resource(8, 1.0, 1.0)).is_err());
    }

    #[test]
    fn cost_examples() {
        let r = resource(512, 850.0, 4.84);
        let c = cost(&job(4, 85_000.0, 0.10), &r).unwrap();
        assert!((c - 2129.6).abs() < 1e-9, "{c}");
        assert_eq!(
            cost(&job(1, 1.0, 0.0), &resource(1, 1.0, 1.0)).unwrap(),
            1.0
        );
    }

    #[test]
    fn budget_and_deadline() {
        let p = EconomyParams::default();
        let origin = resource(512, 850.0, 4.84);
        let j = job(4, 85_000.0, 0.10);
        assert!((assign_budget(&j, &origin, &p) - 4259.2).abs() < 1e-9);
        assert!((assign_deadline(&j, &origin, &p) - 330.0).abs() < 1e-9);

        let unit = EconomyParams {
            budget_multiplier: 1.0,
            deadline_multiplier: 1.0,
            ..p
        };
        assert_eq!(
            assign_budget(&j, &origin, &unit),
            cost(&j, &origin).unwrap()
        );
        assert_eq!(
            assign_deadline(&j, &origin, &unit),
            exec_time(&j, &origin).unwrap()
        );
    }

    #[test]
    fn params_validation() {
        assert!(EconomyParams::default().validate().is_ok());
        let bad = EconomyParams {
            budget_multiplier: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EconomyParams {
            comm_fraction: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn cost_invariant_under_linear_pricing() {
        let p = EconomyParams::default();
        let j = job(16, 1.0e6, 0.1);
        let costs: Vec<f64> = [630.0, 700.0, 850.0, 930.0]
            .iter()
            .map(|&m| cost(&j, &resource(64, m, quote_price(m, &p))).unwrap())
            .collect();
        // closed form: (c / mu) * p * l * (1 + alpha)
        let expected = 5.3 / 930.0 * 16.0 * 1.0e6 * 1.1;
        for c in costs {
            assert!(((c - expected) / expected).abs() < 1e-12);
        }
    }
}
