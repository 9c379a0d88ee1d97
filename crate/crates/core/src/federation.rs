//! Wiring of one simulated federation: the engine, the directory, a manager
//! negotiation per job and an LRMS per resource.
//!
//! Negotiation messages travel with zero latency: a contractor's reply is
//! delivered to the manager inside the event that produced it. Bids reach
//! the contractor after the directory's query latency (zero by default).

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::directory::{Directory, QueryStrategy};
use crate::economy::{ResourceId, ResourceSpec};
use crate::engine::{Engine, EngineError, Event, SimTime};
use crate::events::{JobRef, SimEvent};
use crate::lrms::{AdmissionPolicy, LrmsError, LrmsState, Reply};
use crate::superscheduler::{
    init_negotiation, NegotiationParams, NegotiationState, NegotiationStatus, ReplyOutcome,
};
use crate::workload::Job;

const TRACE_LEN: usize = 64;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Lrms(#[from] LrmsError),
    #[error("invariant violated: {message}\nrecent events:\n{}", trace.join("\n"))]
    Invariant { message: String, trace: Vec<String> },
}

/// Counters filled in by the per-event and end-of-run audits.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditSummary {
    pub events: u64,
    /// Per-resource capacity checks performed (one per resource per event).
    pub capacity_checks: u64,
    pub capacity_violations: u64,
    pub stale_replies: u64,
    pub manager_timeouts: u64,
    pub max_negotiation_overrun: f64,
    pub drained: bool,
}

pub struct Federation {
    engine: Engine<SimEvent>,
    directory: Directory,
    lrms: Vec<LrmsState>,
    jobs: Vec<Job>,
    strategies: Vec<QueryStrategy>,
    negotiations: Vec<Option<NegotiationState>>,
    accept_replies: Vec<u32>,
    returned_at: Vec<Option<SimTime>>,
    params: NegotiationParams,
    audit: AuditSummary,
    recent: VecDeque<String>,
}

impl Federation {
    pub fn new(
        resources: &[ResourceSpec],
        policy: AdmissionPolicy,
        params: NegotiationParams,
        directory_latency: f64,
    ) -> Self {
        let mut directory = Directory::with_resources(resources);
        directory.query_latency = directory_latency;
        let lrms = resources
            .iter()
            .map(|r| {
                LrmsState::new(
                    r.clone(),
                    policy,
                    params.submission_delay,
                    params.return_delay,
                )
            })
            .collect();
        Self {
            engine: Engine::new(),
            directory,
            lrms,
            jobs: Vec::new(),
            strategies: Vec::new(),
            negotiations: Vec::new(),
            accept_replies: Vec::new(),
            returned_at: Vec::new(),
            params,
            audit: AuditSummary::default(),
            recent: VecDeque::with_capacity(TRACE_LEN),
        }
    }

    /// Queues a job for submission at its submit time.
    pub fn submit(&mut self, job: Job, strategy: QueryStrategy) -> Result<JobRef, SimulationError> {
        let job_ref = self.jobs.len();
        self.engine
            .schedule(job.submit_time, SimEvent::JobSubmit { job: job_ref })?;
        self.jobs.push(job);
        self.strategies.push(strategy);
        self.negotiations.push(None);
        self.accept_replies.push(0);
        self.returned_at.push(None);
        Ok(job_ref)
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn strategy(&self, job: JobRef) -> QueryStrategy {
        self.strategies[job]
    }

    pub fn negotiation(&self, job: JobRef) -> Option<&NegotiationState> {
        self.negotiations[job].as_ref()
    }

    pub fn returned_at(&self, job: JobRef) -> Option<SimTime> {
        self.returned_at[job]
    }

    pub fn lrms(&self) -> &[LrmsState] {
        &self.lrms
    }

    pub fn params(&self) -> &NegotiationParams {
        &self.params
    }

    pub fn audit(&self) -> &AuditSummary {
        &self.audit
    }

    /// Processes events up to `limit`, then (unless `hard_stop`) keeps going
    /// until every negotiation and job has completed.
    pub fn run(&mut self, limit: SimTime, hard_stop: bool) -> Result<SimTime, SimulationError> {
        let limit = if hard_stop { limit } else { f64::INFINITY };
        while let Some(ev) = self.engine.pop_until(limit) {
            self.remember(&ev);
            self.handle(ev)?;
            self.check_capacity()?;
            self.audit.events += 1;
        }
        if !hard_stop {
            self.final_audit()?;
        }
        Ok(self.engine.now())
    }

    fn remember(&mut self, ev: &Event<SimEvent>) {
        if self.recent.len() == TRACE_LEN {
            self.recent.pop_front();
        }
        self.recent
            .push_back(format!("t={} #{} {:?}", ev.time, ev.seq, ev.payload));
    }

    fn violation(&self, message: String) -> SimulationError {
        SimulationError::Invariant {
            message,
            trace: self.recent.iter().cloned().collect(),
        }
    }

    fn handle(&mut self, ev: Event<SimEvent>) -> Result<(), SimulationError> {
        let now = ev.time;
        match ev.payload {
            SimEvent::JobSubmit { job } => {
                let state =
                    init_negotiation(&self.jobs[job], job, self.strategies[job], &self.params);
                let bidding = state.is_bidding();
                self.negotiations[job] = Some(state);
                if bidding {
                    self.send_bid(job)?;
                }
            }
            SimEvent::BidArrive { bid } => {
                let job = bid.job;
                let contractor = bid.contractor;
                let iteration = bid.iteration;
                let window = bid.window;
                let replies = self.lrms[contractor.0].on_bid_arrival(
                    bid,
                    &self.jobs[job],
                    &mut self.engine,
                )?;
                let resolved = replies.iter().any(|r| r.job == job);
                if !resolved {
                    // guard timer, ordered after the contractor's own expiry
                    let timer = self
                        .engine
                        .schedule(now + window, SimEvent::BidTimeout { job, iteration })?;
                    if let Some(out) = self.neg_mut(job).outstanding.as_mut() {
                        out.timer = Some(timer);
                    }
                }
                self.deliver(replies)?;
            }
            SimEvent::BidExpiry { resource, job } => {
                match self.lrms[resource.0].on_bid_expiry(job, &mut self.engine)? {
                    Some(reply) if reply.lapsed => self.lapse(reply)?,
                    Some(reply) => self.deliver(vec![reply])?,
                    None => {}
                }
            }
            SimEvent::BidTimeout { job, iteration } => {
                if let Some(contractor) = self.neg_mut(job).on_bid_timeout(iteration) {
                    self.audit.manager_timeouts += 1;
                    self.lrms[contractor.0].withdraw(job, &mut self.engine);
                    self.send_bid(job)?;
                }
            }
            SimEvent::JobDispatchArrive { resource, job } => {
                self.lrms[resource.0].on_job_dispatch(job, now)?;
            }
            SimEvent::JobFinish { resource, job } => {
                let (_, replies) = self.lrms[resource.0].on_job_finish(job, &mut self.engine)?;
                self.deliver(replies)?;
            }
            SimEvent::ResultReturn { job } => {
                self.neg_mut(job).record_result();
                self.returned_at[job] = Some(now);
            }
        }
        Ok(())
    }

    fn neg_mut(&mut self, job: JobRef) -> &mut NegotiationState {
        self.negotiations[job]
            .as_mut()
            .expect("negotiation exists once the job is submitted")
    }

    fn send_bid(&mut self, job: JobRef) -> Result<(), SimulationError> {
        let now = self.engine.now();
        let latency = self.directory.query_latency;
        let state = self.negotiations[job]
            .as_mut()
            .expect("negotiation exists once the job is submitted");
        match state.send_bid(&self.directory, now) {
            Ok(bid) => {
                self.engine
                    .schedule(now + latency, SimEvent::BidArrive { bid })?;
                Ok(())
            }
            Err(_) => self.check_decision(job),
        }
    }

    /// A bid ran out its window at the contractor. The manager learns this
    /// from its own clock, so it is handled like a timeout and costs no reply.
    fn lapse(&mut self, reply: Reply) -> Result<(), SimulationError> {
        let state = self.neg_mut(reply.job);
        let timer = state.outstanding.as_ref().and_then(|o| o.timer);
        if state.on_bid_timeout(reply.iteration).is_some() {
            if let Some(t) = timer {
                self.engine.cancel(t);
            }
            self.send_bid(reply.job)?;
        }
        Ok(())
    }

    fn deliver(&mut self, replies: Vec<Reply>) -> Result<(), SimulationError> {
        let now = self.engine.now();
        for reply in replies {
            if reply.accepted {
                self.accept_replies[reply.job] += 1;
            }
            let outcome = self.neg_mut(reply.job).on_bid_reply(
                reply.contractor,
                reply.iteration,
                reply.accepted,
                now,
            );
            match outcome {
                ReplyOutcome::Accepted { contractor, timer } => {
                    if let Some(t) = timer {
                        self.engine.cancel(t);
                    }
                    self.engine.schedule(
                        now + self.params.submission_delay,
                        SimEvent::JobDispatchArrive {
                            resource: contractor,
                            job: reply.job,
                        },
                    )?;
                    self.check_decision(reply.job)?;
                }
                ReplyOutcome::Rejected { timer, .. } => {
                    if let Some(t) = timer {
                        self.engine.cancel(t);
                    }
                    self.send_bid(reply.job)?;
                }
                ReplyOutcome::Stale => {
                    self.audit.stale_replies += 1;
                    if reply.accepted {
                        return Err(self.violation(format!(
                            "job #{} accepted by {} after its negotiation closed",
                            reply.job, reply.contractor
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// A decision must come within the negotiation budget (plus one query
    /// latency per bid).
    fn check_decision(&mut self, job: JobRef) -> Result<(), SimulationError> {
        let state = self.negotiations[job].as_ref().expect("submitted");
        let Some(decided) = state.decided_at else {
            return Ok(());
        };
        let allowed = state.t_neg + f64::from(state.iteration) * self.directory.query_latency;
        let overrun = (decided - state.submitted_at) - allowed;
        let tolerance = 1e-9 * allowed.max(1.0);
        if overrun > self.audit.max_negotiation_overrun {
            self.audit.max_negotiation_overrun = overrun;
        }
        if overrun > tolerance {
            return Err(self.violation(format!(
                "job {} decided {} after submission, budget {}",
                state.job_id,
                decided - state.submitted_at,
                allowed
            )));
        }
        if state.consumed > state.t_neg * (1.0 + 1e-12) {
            return Err(self.violation(format!(
                "job {} consumed {} of a {} bidding budget",
                state.job_id, state.consumed, state.t_neg
            )));
        }
        Ok(())
    }

    fn check_capacity(&mut self) -> Result<(), SimulationError> {
        for l in &self.lrms {
            self.audit.capacity_checks += 1;
            if !l.capacity_ok() {
                self.audit.capacity_violations += 1;
                let msg = format!(
                    "{}: free {} + reserved {} != {}",
                    l.resource.name,
                    l.free,
                    l.reserved_processors(),
                    l.resource.processors
                );
                return Err(self.violation(msg));
            }
        }
        Ok(())
    }

    fn final_audit(&mut self) -> Result<(), SimulationError> {
        for l in &self.lrms {
            if !l.is_drained() {
                return Err(self.violation(format!(
                    "{} not drained: {} pending, {} running",
                    l.resource.name,
                    l.pending().len(),
                    l.reservations().count()
                )));
            }
        }
        for (job, state) in self.negotiations.iter().enumerate() {
            let Some(state) = state else {
                return Err(self.violation(format!("job #{job} never submitted")));
            };
            let holders = self.accept_replies[job];
            let ok = match state.status {
                NegotiationStatus::Bidding => false,
                NegotiationStatus::Accepted(_) => holders == 1 && self.returned_at[job].is_some(),
                NegotiationStatus::Dropped(_) => holders == 0,
            };
            if !ok {
                return Err(self.violation(format!(
                    "job {} ended as {:?} with {} accepting contractors",
                    state.job_id, state.status, holders
                )));
            }
        }
        self.audit.drained = true;
        Ok(())
    }

    /// Contractor that accepted `job`, if any.
    pub fn contractor(&self, job: JobRef) -> Option<ResourceId> {
        match self.negotiations[job].as_ref()?.status {
            NegotiationStatus::Accepted(r) => Some(r),
            _ => None,
        }
    }
}
