//! Per-resource and federation-wide metrics of one run.

use serde::Serialize;

use crate::federation::{AuditSummary, Federation};
use crate::superscheduler::NegotiationStatus;
use crate::workload::LoadReport;

use super::config::SimConfig;

/// Owner-side figures are attributed to the contractor that ran the job;
/// user-side figures and local messages to the job's origin resource.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub resource: String,
    pub processors: u32,
    pub earnings: f64,
    pub earnings_per_processor: f64,
    pub mi_executed: f64,
    /// Busy processor time over processors × elapsed time.
    pub utilization: f64,
    /// Mean over accepted jobs originating here.
    pub avg_response_time: f64,
    pub avg_budget_spent: f64,
    pub jobs_submitted: u64,
    pub jobs_accepted: u64,
    pub jobs_dropped: u64,
    pub jobs_in_flight: u64,
    pub jobs_unschedulable: u64,
    pub local_messages: u64,
    pub remote_messages: u64,
    /// Observed bid arrivals per sim unit.
    pub bid_arrival_rate: f64,
    /// Observed bid acceptances per sim unit.
    pub bid_acceptance_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FederationTotals {
    pub total_earnings: f64,
    pub avg_response_time: f64,
    pub avg_budget_spent: f64,
    pub avg_messages_per_job: f64,
    pub total_messages: u64,
    pub jobs_submitted: u64,
    pub jobs_accepted: u64,
    pub jobs_dropped: u64,
    pub jobs_in_flight: u64,
    pub jobs_unschedulable: u64,
    /// Σ over accepted jobs of what the accepting contractor charged.
    pub accepted_incentives: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FederationReport {
    pub phi: f64,
    pub seed: u64,
    pub version: String,
    pub elapsed: f64,
    pub resources: Vec<MetricsRecord>,
    pub totals: FederationTotals,
    pub audit: AuditSummary,
    pub loads: Vec<LoadReport>,
    pub config: SimConfig,
}

fn mean(sum: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl FederationReport {
    pub(crate) fn build(
        fed: &Federation,
        config: &SimConfig,
        unschedulable: &[u64],
        loads: Vec<LoadReport>,
        elapsed: f64,
    ) -> Self {
        let n = fed.lrms().len();
        let mut records: Vec<MetricsRecord> = fed
            .lrms()
            .iter()
            .map(|l| {
                let p = f64::from(l.resource.processors);
                let rate = |count: u64| {
                    if elapsed > 0.0 {
                        count as f64 / elapsed
                    } else {
                        0.0
                    }
                };
                MetricsRecord {
                    resource: l.resource.name.clone(),
                    processors: l.resource.processors,
                    earnings: l.earnings,
                    earnings_per_processor: l.earnings / p,
                    mi_executed: l.mi_executed,
                    utilization: if elapsed > 0.0 {
                        l.stats.busy_processor_time / (p * elapsed)
                    } else {
                        0.0
                    },
                    remote_messages: l.stats.remote_bids,
                    bid_arrival_rate: rate(l.stats.bids_received),
                    bid_acceptance_rate: rate(l.stats.accepted),
                    jobs_unschedulable: unschedulable.get(l.resource.id.0).copied().unwrap_or(0),
                    ..Default::default()
                }
            })
            .collect();

        let mut response_sum = vec![0.0; n];
        let mut budget_sum = vec![0.0; n];
        let mut totals = FederationTotals::default();
        let mut all_response = 0.0;
        for (job_ref, job) in fed.jobs().iter().enumerate() {
            let origin = job.origin.0;
            let rec = &mut records[origin];
            rec.jobs_submitted += 1;
            let Some(state) = fed.negotiation(job_ref) else {
                rec.jobs_in_flight += 1;
                continue;
            };
            rec.local_messages += state.messages.total();
            totals.total_messages += state.messages.total();
            match state.status {
                NegotiationStatus::Accepted(contractor) => {
                    let Some(returned) = fed.returned_at(job_ref) else {
                        rec.jobs_in_flight += 1;
                        continue;
                    };
                    let res = fed.lrms()[contractor.0].resource.clone();
                    let spent = crate::economy::cost(job, &res).unwrap_or(0.0);
                    let response = returned - job.submit_time;
                    rec.jobs_accepted += 1;
                    response_sum[origin] += response;
                    budget_sum[origin] += spent;
                    all_response += response;
                    totals.accepted_incentives += spent;
                }
                NegotiationStatus::Dropped(_) => rec.jobs_dropped += 1,
                NegotiationStatus::Bidding => rec.jobs_in_flight += 1,
            }
        }
        for (i, rec) in records.iter_mut().enumerate() {
            rec.avg_response_time = mean(response_sum[i], rec.jobs_accepted);
            rec.avg_budget_spent = mean(budget_sum[i], rec.jobs_accepted);
        }

        totals.total_earnings = records.iter().map(|r| r.earnings).sum();
        totals.jobs_submitted = records.iter().map(|r| r.jobs_submitted).sum();
        totals.jobs_accepted = records.iter().map(|r| r.jobs_accepted).sum();
        totals.jobs_dropped = records.iter().map(|r| r.jobs_dropped).sum();
        totals.jobs_in_flight = records.iter().map(|r| r.jobs_in_flight).sum();
        totals.jobs_unschedulable = unschedulable.iter().sum();
        totals.avg_response_time = mean(all_response, totals.jobs_accepted);
        totals.avg_budget_spent = mean(totals.accepted_incentives, totals.jobs_accepted);
        totals.avg_messages_per_job = mean(totals.total_messages as f64, totals.jobs_submitted);

        FederationReport {
            phi: config.phi,
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            elapsed,
            resources: records,
            totals,
            audit: fed.audit().clone(),
            loads,
            config: config.clone(),
        }
    }
}
