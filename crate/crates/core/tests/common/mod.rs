//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::path::PathBuf;

use gridfed::economy::{ResourceId, ResourceSpec};
use gridfed::engine::Engine;
use gridfed::events::SimEvent;
use gridfed::lrms::{AdmissionPolicy, LrmsState};
use gridfed::superscheduler::SlaBid;
use gridfed::workload::{Job, JobId};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

/// One pending bid of a greedy instance. On the unit-speed test resource
/// its runtime is `runtime` and its incentive `processors * runtime`.
#[derive(Debug, Clone, Copy)]
pub struct PendingBid {
    pub processors: u32,
    pub runtime: f64,
    pub d_e: f64,
}

impl PendingBid {
    pub fn incentive(&self) -> f64 {
        f64::from(self.processors) * self.runtime
    }

    fn feasible(&self) -> bool {
        self.d_e >= self.runtime
    }
}

fn unit_resource(processors: u32) -> ResourceSpec {
    ResourceSpec {
        id: ResourceId(0),
        name: "unit".into(),
        processors,
        mips: 1.0,
        price: 1.0,
        bandwidth: 0.0,
    }
}

fn unit_job(index: u64, processors: u32, runtime: f64) -> Job {
    Job {
        id: JobId::new(index, 0, ResourceId(1)),
        origin: ResourceId(1),
        processors,
        length_mi: runtime,
        comm_overhead: 0.0,
        budget: f64::MAX,
        deadline: f64::MAX,
        submit_time: 0.0,
    }
}

fn sla_bid(job: &Job, job_ref: usize, window: f64, d_e: f64) -> SlaBid {
    SlaBid {
        job: job_ref,
        job_id: job.id,
        manager: job.origin,
        contractor: ResourceId(0),
        expected_response: d_e,
        window,
        iteration: 1,
        sent_at: 0.0,
    }
}

/// Queues `bids` behind a job that holds every processor, then releases it
/// so the LRMS runs a single greedy pass over the whole queue. Returns the
/// accepted bid indices (ascending) and the earnings from them.
pub fn run_greedy(capacity: u32, bids: &[PendingBid]) -> (Vec<usize>, f64) {
    let mut engine = Engine::new();
    let mut lrms = LrmsState::new(
        unit_resource(capacity),
        AdmissionPolicy::GreedyBackfilling,
        0.0,
        0.0,
    );
    let blocker_ref = bids.len();
    let blocker = unit_job(u64::MAX, capacity, 1.0);
    lrms.on_bid_arrival(
        sla_bid(&blocker, blocker_ref, 1.0, 10.0),
        &blocker,
        &mut engine,
    )
    .unwrap();
    assert_eq!(lrms.free, 0);
    let before = lrms.earnings;
    for (i, b) in bids.iter().enumerate() {
        let job = unit_job(i as u64, b.processors, b.runtime);
        let replies = lrms
            .on_bid_arrival(sla_bid(&job, i, 100.0, b.d_e), &job, &mut engine)
            .unwrap();
        assert!(replies.is_empty());
    }
    let ev = engine.pop_until(f64::INFINITY).unwrap();
    assert!(matches!(ev.payload, SimEvent::JobFinish { job, .. } if job == blocker_ref));
    lrms.on_job_dispatch(blocker_ref, 0.0).unwrap();
    let (_, replies) = lrms.on_job_finish(blocker_ref, &mut engine).unwrap();
    let mut accepted: Vec<usize> = replies
        .iter()
        .filter(|r| r.accepted)
        .map(|r| r.job)
        .collect();
    accepted.sort_unstable();
    assert!(lrms.capacity_ok());
    (accepted, lrms.earnings - before)
}

/// Independent reference: stable sort by incentive (descending) and take
/// every bid that still fits, in order.
pub fn sorted_prefix_oracle(capacity: u32, bids: &[PendingBid]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by(|&a, &b| {
        bids[b]
            .incentive()
            .total_cmp(&bids[a].incentive())
            .then(a.cmp(&b))
    });
    let mut free = capacity;
    let mut taken = Vec::new();
    for i in order {
        let b = &bids[i];
        if b.feasible() && b.processors <= free {
            free -= b.processors;
            taken.push(i);
        }
    }
    taken.sort_unstable();
    taken
}

/// Best total incentive of any deadline-feasible subset that fits.
pub fn exhaustive_optimum(capacity: u32, bids: &[PendingBid]) -> f64 {
    let n = bids.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let mut used = 0u32;
        let mut value = 0.0;
        let mut ok = true;
        for (i, b) in bids.iter().enumerate() {
            if mask & (1 << i) != 0 {
                used += b.processors;
                value += b.incentive();
                if used > capacity || !b.feasible() {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            best = best.max(value);
        }
    }
    best
}
