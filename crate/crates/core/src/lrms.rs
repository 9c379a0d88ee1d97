//! Contractor side: admission control over the queue of pending SLA bids.
//!
//! Under greedy backfilling every pending bid waits up to its window. Each
//! time a bid arrives or a job finishes, the queue is sorted by the revenue
//! (incentive) each bid would bring the owner and scanned once; every bid
//! that fits the free processors and whose expected response time can be met
//! is reserved. At its expiry a bid gets one last feasibility check before
//! being rejected. Bids with a zero window are decided on arrival (FCFS).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economy::{self, EconomyError, ResourceId, ResourceSpec};
use crate::engine::{Engine, EngineError, EventHandle, SimTime};
use crate::events::{JobRef, SimEvent};
use crate::superscheduler::SlaBid;
use crate::workload::{Job, JobId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmissionPolicy {
    GreedyBackfilling,
    Fcfs,
}

#[derive(Debug, Error)]
pub enum LrmsError {
    #[error("LRMS audit failure at {resource}: {message}")]
    Audit { resource: String, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Economy(#[from] EconomyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidEntry {
    pub bid: SlaBid,
    pub processors: u32,
    pub length_mi: f64,
    /// Expected response time of the job on this resource.
    pub runtime: f64,
    pub arrival: SimTime,
    pub expiry_at: SimTime,
    /// Owner revenue if accepted.
    pub incentive: f64,
    pub expiry_handle: Option<EventHandle>,
}

impl BidEntry {
    fn fits(&self, free: u32) -> bool {
        free >= self.processors && self.bid.expected_response >= self.runtime
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reservation {
    pub job: JobRef,
    pub job_id: JobId,
    pub manager: ResourceId,
    pub processors: u32,
    pub accepted_at: SimTime,
    /// Arrival time of the dispatched job.
    pub start: SimTime,
    pub expected_finish: SimTime,
    pub runtime: f64,
    pub incentive: f64,
    pub length_mi: f64,
    pub dispatched_at: Option<SimTime>,
}

/// A contractor's answer to a bid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reply {
    pub job: JobRef,
    pub manager: ResourceId,
    pub contractor: ResourceId,
    pub iteration: u32,
    pub accepted: bool,
    /// The window closed without an acceptance. No message is sent; the
    /// manager's own timer covers it.
    pub lapsed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LrmsStats {
    pub bids_received: u64,
    /// Bids received from managers other than this resource's own.
    pub remote_bids: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub duplicates: u64,
    pub withdrawn: u64,
    pub completed: u64,
    /// Σ processors × runtime over completed jobs.
    pub busy_processor_time: f64,
}

#[derive(Debug, Clone)]
pub struct LrmsState {
    pub resource: ResourceSpec,
    pub free: u32,
    pending: Vec<BidEntry>,
    accepted: BTreeMap<JobRef, Reservation>,
    pub earnings: f64,
    pub mi_executed: f64,
    pub policy: AdmissionPolicy,
    pub submission_delay: f64,
    pub return_delay: f64,
    pub stats: LrmsStats,
}

fn greedy_order(a: &BidEntry, b: &BidEntry) -> Ordering {
    b.incentive
        .total_cmp(&a.incentive)
        .then(a.arrival.total_cmp(&b.arrival))
        .then(a.bid.job_id.cmp(&b.bid.job_id))
}

impl LrmsState {
    pub fn new(
        resource: ResourceSpec,
        policy: AdmissionPolicy,
        submission_delay: f64,
        return_delay: f64,
    ) -> Self {
        Self {
            free: resource.processors,
            resource,
            pending: Vec::new(),
            accepted: BTreeMap::new(),
            earnings: 0.0,
            mi_executed: 0.0,
            policy,
            submission_delay,
            return_delay,
            stats: LrmsStats::default(),
        }
    }

    pub fn id(&self) -> ResourceId {
        self.resource.id
    }

    pub fn pending(&self) -> &[BidEntry] {
        &self.pending
    }

    pub fn reservations(&self) -> impl Iterator<Item = &Reservation> {
        self.accepted.values()
    }

    pub fn reservation(&self, job: JobRef) -> Option<&Reservation> {
        self.accepted.get(&job)
    }

    pub fn reserved_processors(&self) -> u32 {
        self.accepted.values().map(|r| r.processors).sum()
    }

    /// Free plus committed processors equals the resource's total.
    pub fn capacity_ok(&self) -> bool {
        u64::from(self.free) + u64::from(self.reserved_processors())
            == u64::from(self.resource.processors)
    }

    pub fn is_drained(&self) -> bool {
        self.pending.is_empty() && self.accepted.is_empty()
    }

    fn audit(&self, message: String) -> LrmsError {
        LrmsError::Audit {
            resource: self.resource.name.clone(),
            message,
        }
    }

    fn reply(&self, bid: &SlaBid, accepted: bool) -> Reply {
        Reply {
            job: bid.job,
            manager: bid.manager,
            contractor: self.resource.id,
            iteration: bid.iteration,
            accepted,
            lapsed: false,
        }
    }

    fn entry_for(&self, bid: SlaBid, job: &Job, now: SimTime) -> Result<BidEntry, LrmsError> {
        let runtime = economy::exec_time(job, &self.resource)?;
        let incentive = economy::cost(job, &self.resource)?;
        Ok(BidEntry {
            processors: job.processors,
            length_mi: job.length_mi,
            runtime,
            arrival: now,
            expiry_at: now + bid.window,
            incentive,
            expiry_handle: None,
            bid,
        })
    }

    /// Registers an incoming bid. Zero-window bids (and every bid under the
    /// FCFS policy) are decided immediately; others join the pending queue
    /// with an expiry timer and trigger a greedy pass.
    pub fn on_bid_arrival(
        &mut self,
        bid: SlaBid,
        job: &Job,
        engine: &mut Engine<SimEvent>,
    ) -> Result<Vec<Reply>, LrmsError> {
        self.stats.bids_received += 1;
        if bid.manager != self.resource.id {
            self.stats.remote_bids += 1;
        }
        if self.pending.iter().any(|e| e.bid.job == bid.job) || self.accepted.contains_key(&bid.job)
        {
            self.stats.duplicates += 1;
            return Ok(Vec::new());
        }
        if bid.window == 0.0 || self.policy == AdmissionPolicy::Fcfs {
            let reply_to = bid.clone();
            let accepted = self.fcfs_decide(bid, job, engine)?;
            return Ok(vec![self.reply(&reply_to, accepted)]);
        }
        let mut entry = self.entry_for(bid, job, engine.now())?;
        entry.expiry_handle = Some(engine.schedule(
            entry.expiry_at,
            SimEvent::BidExpiry {
                resource: self.resource.id,
                job: entry.bid.job,
            },
        )?);
        self.pending.push(entry);
        self.strict_greedy(engine)
    }

    /// Decides a bid on the spot: reserve iff it fits now.
    pub fn fcfs_decide(
        &mut self,
        bid: SlaBid,
        job: &Job,
        engine: &mut Engine<SimEvent>,
    ) -> Result<bool, LrmsError> {
        let entry = self.entry_for(bid, job, engine.now())?;
        if entry.fits(self.free) {
            self.reserve(entry, engine)?;
            Ok(true)
        } else {
            self.stats.rejected += 1;
            Ok(false)
        }
    }

    /// One pass over the pending queue in decreasing incentive order,
    /// reserving every bid that fits. Returns the accept replies.
    pub fn strict_greedy(
        &mut self,
        engine: &mut Engine<SimEvent>,
    ) -> Result<Vec<Reply>, LrmsError> {
        if self.pending.is_empty() {
            return Ok(Vec::new());
        }
        let mut sorted: Vec<BidEntry> = std::mem::take(&mut self.pending);
        sorted.sort_by(greedy_order);
        let mut replies = Vec::new();
        for entry in sorted {
            if entry.fits(self.free) {
                replies.push(self.reply(&entry.bid, true));
                self.reserve(entry, engine)?;
            } else {
                self.pending.push(entry);
            }
        }
        Ok(replies)
    }

    /// Commits processors to a bid that has been taken off the pending queue
    /// and schedules its completion.
    pub fn reserve(
        &mut self,
        entry: BidEntry,
        engine: &mut Engine<SimEvent>,
    ) -> Result<Reservation, LrmsError> {
        if !entry.fits(self.free) {
            return Err(self.audit(format!(
                "reserve {} with p={} d_e={} D={} but only {} free",
                entry.bid.job_id,
                entry.processors,
                entry.bid.expected_response,
                entry.runtime,
                self.free
            )));
        }
        if let Some(handle) = entry.expiry_handle {
            engine.cancel(handle);
        }
        let now = engine.now();
        let start = now + self.submission_delay;
        let expected_finish = start + entry.runtime;
        engine.schedule(
            expected_finish,
            SimEvent::JobFinish {
                resource: self.resource.id,
                job: entry.bid.job,
            },
        )?;
        self.free -= entry.processors;
        self.earnings += entry.incentive;
        self.stats.accepted += 1;
        let res = Reservation {
            job: entry.bid.job,
            job_id: entry.bid.job_id,
            manager: entry.bid.manager,
            processors: entry.processors,
            accepted_at: now,
            start,
            expected_finish,
            runtime: entry.runtime,
            incentive: entry.incentive,
            length_mi: entry.length_mi,
            dispatched_at: None,
        };
        self.accepted.insert(res.job, res.clone());
        Ok(res)
    }

    /// Last-chance check when a pending bid's window closes.
    pub fn on_bid_expiry(
        &mut self,
        job: JobRef,
        engine: &mut Engine<SimEvent>,
    ) -> Result<Option<Reply>, LrmsError> {
        let Some(idx) = self.pending.iter().position(|e| e.bid.job == job) else {
            return Ok(None);
        };
        let entry = self.pending.remove(idx);
        if entry.fits(self.free) {
            let reply = self.reply(&entry.bid, true);
            self.reserve(entry, engine)?;
            Ok(Some(reply))
        } else {
            self.stats.rejected += 1;
            Ok(Some(Reply {
                lapsed: true,
                ..self.reply(&entry.bid, false)
            }))
        }
    }

    /// Drops a pending bid the manager gave up on.
    pub fn withdraw(&mut self, job: JobRef, engine: &mut Engine<SimEvent>) -> bool {
        let Some(idx) = self.pending.iter().position(|e| e.bid.job == job) else {
            return false;
        };
        let entry = self.pending.remove(idx);
        if let Some(handle) = entry.expiry_handle {
            engine.cancel(handle);
        }
        self.stats.withdrawn += 1;
        true
    }

    pub fn on_job_dispatch(&mut self, job: JobRef, now: SimTime) -> Result<(), LrmsError> {
        let Some(res) = self.accepted.get_mut(&job) else {
            return Err(self.audit(format!("dispatch of job #{job} without a reservation")));
        };
        if res.start != now {
            let msg = format!(
                "job #{job} arrived at {now}, reservation starts at {}",
                res.start
            );
            return Err(self.audit(msg));
        }
        res.dispatched_at = Some(now);
        Ok(())
    }

    /// Releases the job's processors, schedules its result return and runs a
    /// greedy pass over the pending queue.
    pub fn on_job_finish(
        &mut self,
        job: JobRef,
        engine: &mut Engine<SimEvent>,
    ) -> Result<(Reservation, Vec<Reply>), LrmsError> {
        let now = engine.now();
        let Some(res) = self.accepted.remove(&job) else {
            return Err(self.audit(format!("finish of job #{job} without a reservation")));
        };
        if res.expected_finish != now || res.dispatched_at != Some(res.start) {
            return Err(self.audit(format!(
                "job {} finished at {now}, expected {} (dispatched {:?})",
                res.job_id, res.expected_finish, res.dispatched_at
            )));
        }
        self.free += res.processors;
        self.mi_executed += res.length_mi;
        self.stats.completed += 1;
        self.stats.busy_processor_time += f64::from(res.processors) * res.runtime;
        engine.schedule(now + self.return_delay, SimEvent::ResultReturn { job })?;
        let replies = self.strict_greedy(engine)?;
        Ok((res, replies))
    }
}
