//! Event payloads exchanged on the simulation timeline.

use crate::economy::ResourceId;
use crate::superscheduler::SlaBid;

/// Index of a job in the federation's job table.
pub type JobRef = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    /// A user submits a job to its origin manager.
    JobSubmit {
        job: JobRef,
    },
    /// A manager's bid reaches the contractor's LRMS.
    BidArrive {
        bid: SlaBid,
    },
    /// Contractor-side expiry of a pending bid.
    BidExpiry {
        resource: ResourceId,
        job: JobRef,
    },
    /// Manager-side guard timer for an outstanding bid.
    BidTimeout {
        job: JobRef,
        iteration: u32,
    },
    /// The job's executable reaches the contractor that accepted it.
    JobDispatchArrive {
        resource: ResourceId,
        job: JobRef,
    },
    JobFinish {
        resource: ResourceId,
        job: JobRef,
    },
    /// Output of a finished job reaches its origin manager.
    ResultReturn {
        job: JobRef,
    },
}

impl SimEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SimEvent::JobSubmit { .. } => "JobSubmit",
            SimEvent::BidArrive { .. } => "BidArrive",
            SimEvent::BidExpiry { .. } => "BidExpiry",
            SimEvent::BidTimeout { .. } => "BidTimeout",
            SimEvent::JobDispatchArrive { .. } => "JobDispatchArrive",
            SimEvent::JobFinish { .. } => "JobFinish",
            SimEvent::ResultReturn { .. } => "ResultReturn",
        }
    }
}
