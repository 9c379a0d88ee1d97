//! Manager side of the contract-net negotiation.
//!
//! A job's negotiation budget is a fraction `phi` of its deadline. Each bid
//! offers the contractor half of the budget not yet spent, so successive
//! windows shrink geometrically. The manager walks the directory ranking,
//! wrapping back to rank 1 after the last eligible contractor (or stopping
//! there, without `rank_wraparound`), until a contractor accepts, the next
//! window falls below `min_bid_interval`, or a whole pass of the ranking
//! rejected without any time elapsing.

use serde::Serialize;

use crate::directory::{Directory, QueryStrategy};
use crate::economy::ResourceId;
use crate::engine::{EventHandle, SimTime};
use crate::events::JobRef;
use crate::workload::{Job, JobId};

/// One manager to contractor negotiation message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlaBid {
    pub job: JobRef,
    pub job_id: JobId,
    pub manager: ResourceId,
    pub contractor: ResourceId,
    /// Response time the contractor must be able to deliver.
    pub expected_response: f64,
    /// How long the contractor may hold the bid before answering.
    pub window: f64,
    pub iteration: u32,
    pub sent_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegotiationParams {
    /// Fraction of the deadline available for bidding.
    pub phi: f64,
    pub submission_delay: f64,
    pub return_delay: f64,
    pub min_bid_interval: f64,
    /// Restart from rank 1 after the last eligible contractor while budget
    /// remains.
    pub rank_wraparound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DropReason {
    /// `phi * d + t_s + t_r` leaves no positive response time.
    InfeasibleSplit,
    NoEligibleResource,
    /// The next window would fall below `min_bid_interval`.
    BudgetExhausted,
    /// Every eligible contractor rejected without time elapsing.
    PassExhausted,
    /// Every eligible contractor was tried once.
    RankingExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NegotiationStatus {
    Bidding,
    Accepted(ResourceId),
    Dropped(DropReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutstandingBid {
    pub contractor: ResourceId,
    pub iteration: u32,
    pub sent_at: SimTime,
    pub window: f64,
    pub timer: Option<EventHandle>,
}

/// Window offered at one iteration and the budget spent before it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalRecord {
    pub window: f64,
    pub consumed_before: f64,
}

/// Messages attributed to one job.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MessageCount {
    pub bids: u64,
    pub replies: u64,
    pub dispatches: u64,
    pub results: u64,
}

impl MessageCount {
    pub fn total(&self) -> u64 {
        self.bids + self.replies + self.dispatches + self.results
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationState {
    pub job: JobRef,
    pub job_id: JobId,
    pub manager: ResourceId,
    pub processors: u32,
    pub strategy: QueryStrategy,
    pub submitted_at: SimTime,
    /// Total bidding budget.
    pub t_neg: f64,
    /// Expected response time carried by every bid.
    pub d_e: f64,
    /// Budget already spent bidding.
    pub consumed: f64,
    /// Number of bids sent so far.
    pub iteration: u32,
    /// Next directory rank to try (1-based, unbounded; wrapped on use).
    pub rank_cursor: usize,
    pub status: NegotiationStatus,
    pub outstanding: Option<OutstandingBid>,
    pub decided_at: Option<SimTime>,
    pub intervals: Vec<IntervalRecord>,
    pub contractors: Vec<ResourceId>,
    pub messages: MessageCount,
    pub stale_replies: u64,
    min_bid_interval: f64,
    rank_wraparound: bool,
    early_rejects: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplyOutcome {
    Accepted {
        contractor: ResourceId,
        timer: Option<EventHandle>,
    },
    Rejected {
        contractor: ResourceId,
        timer: Option<EventHandle>,
    },
    Stale,
}

pub fn init_negotiation(
    job: &Job,
    job_ref: JobRef,
    strategy: QueryStrategy,
    params: &NegotiationParams,
) -> NegotiationState {
    let t_neg = params.phi * job.deadline;
    let d_e = job.deadline - params.submission_delay - t_neg - params.return_delay;
    let status = if d_e > 0.0 && (0.0..=1.0).contains(&params.phi) {
        NegotiationStatus::Bidding
    } else {
        NegotiationStatus::Dropped(DropReason::InfeasibleSplit)
    };
    NegotiationState {
        job: job_ref,
        job_id: job.id,
        manager: job.origin,
        processors: job.processors,
        strategy,
        submitted_at: job.submit_time,
        t_neg,
        d_e,
        consumed: 0.0,
        iteration: 0,
        rank_cursor: 1,
        status,
        outstanding: None,
        decided_at: match status {
            NegotiationStatus::Bidding => None,
            _ => Some(job.submit_time),
        },
        intervals: Vec::new(),
        contractors: Vec::new(),
        messages: MessageCount::default(),
        stale_replies: 0,
        min_bid_interval: params.min_bid_interval,
        rank_wraparound: params.rank_wraparound,
        early_rejects: 0,
    }
}

impl NegotiationState {
    pub fn is_bidding(&self) -> bool {
        self.status == NegotiationStatus::Bidding
    }

    /// Window for the next bid: half of the unspent budget.
    pub fn tau_next_interval(&self) -> f64 {
        (self.t_neg - self.consumed) / 2.0
    }

    fn drop(&mut self, reason: DropReason, now: SimTime) -> DropReason {
        self.status = NegotiationStatus::Dropped(reason);
        self.outstanding = None;
        self.decided_at = Some(now);
        reason
    }

    /// Picks the next contractor and emits a bid, or drops the job.
    ///
    /// The first bid is always sent; later bids need a window of at least
    /// `min_bid_interval` unless the budget is zero, in which case every bid
    /// is decided on arrival and the walk is limited to one pass.
    pub fn send_bid(&mut self, directory: &Directory, now: SimTime) -> Result<SlaBid, DropReason> {
        debug_assert!(self.is_bidding() && self.outstanding.is_none());
        let eligible = directory.eligible(self.processors);
        if eligible == 0 {
            return Err(self.drop(DropReason::NoEligibleResource, now));
        }
        if self.early_rejects >= eligible {
            return Err(self.drop(DropReason::PassExhausted, now));
        }
        let window = self.tau_next_interval();
        if self.iteration > 0 && self.t_neg > 0.0 && window < self.min_bid_interval {
            return Err(self.drop(DropReason::BudgetExhausted, now));
        }
        if !self.rank_wraparound && self.rank_cursor > eligible {
            return Err(self.drop(DropReason::RankingExhausted, now));
        }
        let rank = (self.rank_cursor - 1) % eligible + 1;
        let Some(quote) = directory.query_kth(self.strategy, rank, self.processors) else {
            return Err(self.drop(DropReason::NoEligibleResource, now));
        };
        self.rank_cursor += 1;
        self.iteration += 1;
        self.intervals.push(IntervalRecord {
            window,
            consumed_before: self.consumed,
        });
        self.contractors.push(quote.resource_id);
        self.messages.bids += 1;
        self.outstanding = Some(OutstandingBid {
            contractor: quote.resource_id,
            iteration: self.iteration,
            sent_at: now,
            window,
            timer: None,
        });
        Ok(SlaBid {
            job: self.job,
            job_id: self.job_id,
            manager: self.manager,
            contractor: quote.resource_id,
            expected_response: self.d_e,
            window,
            iteration: self.iteration,
            sent_at: now,
        })
    }

    fn matches(&self, contractor: ResourceId, iteration: u32) -> bool {
        self.is_bidding()
            && self
                .outstanding
                .as_ref()
                .is_some_and(|o| o.contractor == contractor && o.iteration == iteration)
    }

    /// Handles a contractor's answer. A rejection charges only the time that
    /// actually elapsed since the bid was sent.
    pub fn on_bid_reply(
        &mut self,
        contractor: ResourceId,
        iteration: u32,
        accepted: bool,
        now: SimTime,
    ) -> ReplyOutcome {
        if !self.matches(contractor, iteration) {
            self.stale_replies += 1;
            return ReplyOutcome::Stale;
        }
        let bid = self.outstanding.take().expect("matched outstanding bid");
        self.messages.replies += 1;
        if accepted {
            self.status = NegotiationStatus::Accepted(contractor);
            self.decided_at = Some(now);
            self.messages.dispatches += 1;
            return ReplyOutcome::Accepted {
                contractor,
                timer: bid.timer,
            };
        }
        let elapsed = (now - bid.sent_at).clamp(0.0, bid.window);
        self.consumed += elapsed;
        if bid.window == 0.0 || elapsed < bid.window {
            self.early_rejects += 1;
        } else {
            self.early_rejects = 0;
        }
        ReplyOutcome::Rejected {
            contractor,
            timer: bid.timer,
        }
    }

    /// The manager's own timer for the outstanding bid fired with no reply.
    /// Charges the full window and returns the contractor whose bid lapsed.
    pub fn on_bid_timeout(&mut self, iteration: u32) -> Option<ResourceId> {
        let contractor = self.outstanding.as_ref()?.contractor;
        if !self.matches(contractor, iteration) {
            return None;
        }
        let bid = self.outstanding.take()?;
        self.consumed += bid.window;
        self.early_rejects = 0;
        Some(contractor)
    }

    pub fn record_result(&mut self) {
        self.messages.results += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directory::Quote;

    fn job(deadline: f64) -> Job {
        Job {
            id: JobId::new(1, 0, ResourceId(0)),
            origin: ResourceId(0),
            processors: 1,
            length_mi: 1.0,
            comm_overhead: 0.1,
            budget: 1.0,
            deadline,
            submit_time: 0.0,
        }
    }

    fn params(phi: f64, t_s: f64, t_r: f64) -> NegotiationParams {
        NegotiationParams {
            phi,
            submission_delay: t_s,
            return_delay: t_r,
            min_bid_interval: 1.0,
            rank_wraparound: false,
        }
    }

    fn wrapping(phi: f64) -> NegotiationParams {
        NegotiationParams {
            rank_wraparound: true,
            ..params(phi, 0.0, 0.0)
        }
    }

    fn archive_directory() -> Directory {
        let rows = [
            (850.0, 512),
            (900.0, 100),
            (700.0, 1024),
            (630.0, 2048),
            (930.0, 128),
            (710.0, 416),
            (730.0, 1152),
            (920.0, 128),
        ];
        let mut d = Directory::new();
        for (i, (mips, procs)) in rows.into_iter().enumerate() {
            d.subscribe(Quote {
                resource_id: ResourceId(i),
                price: 5.3 * mips / 930.0,
                mips,
                processors: procs,
            });
        }
        d
    }

    #[test]
    fn init_splits_deadline() {
        let s = init_negotiation(&job(300.0), 0, QueryStrategy::Oft, &params(0.5, 0.0, 0.0));
        assert_eq!((s.t_neg, s.d_e), (150.0, 150.0));
        assert_eq!((s.consumed, s.iteration, s.rank_cursor), (0.0, 0, 1));
        assert!(s.is_bidding());

        let s = init_negotiation(&job(300.0), 0, QueryStrategy::Oft, &params(0.0, 2.0, 3.0));
        assert_eq!((s.t_neg, s.d_e), (0.0, 295.0));

        let s = init_negotiation(&job(300.0), 0, QueryStrategy::Oft, &params(0.3, 5.0, 5.0));
        assert!((s.t_neg - 90.0).abs() < 1e-12);
        assert!((s.d_e - 200.0).abs() < 1e-12);
        assert!((s.t_neg - (300.0 - 5.0 - s.d_e - 5.0)).abs() < 1e-12);
    }

    #[test]
    fn infeasible_split_drops_immediately() {
        let s = init_negotiation(&job(10.0), 0, QueryStrategy::Oft, &params(0.5, 3.0, 2.0));
        assert_eq!(
            s.status,
            NegotiationStatus::Dropped(DropReason::InfeasibleSplit)
        );
    }

    #[test]
    fn halving_intervals() {
        let mut s = init_negotiation(&job(240.0), 0, QueryStrategy::Oft, &params(0.5, 0.0, 0.0));
        assert_eq!(s.t_neg, 120.0);
        let mut seen = Vec::new();
        for _ in 0..3 {
            let dt = s.tau_next_interval();
            seen.push(dt);
            s.consumed += dt;
        }
        assert_eq!(seen, [60.0, 30.0, 15.0]);

        let zero = init_negotiation(&job(240.0), 0, QueryStrategy::Oft, &params(0.0, 0.0, 0.0));
        assert_eq!(zero.tau_next_interval(), 0.0);
    }

    #[test]
    fn oft_walk_follows_ranking_and_wraps() {
        let dir = archive_directory();
        let mut s = init_negotiation(&job(3000.0), 0, QueryStrategy::Oft, &wrapping(0.5));
        let mut now = 0.0;
        for _ in 0..10 {
            let bid = s.send_bid(&dir, now).unwrap();
            now += bid.window;
            assert!(matches!(
                s.on_bid_reply(bid.contractor, bid.iteration, false, now),
                ReplyOutcome::Rejected { .. }
            ));
        }
        let ids: Vec<usize> = s.contractors.iter().map(|r| r.0).collect();
        // NASA iPSC, SDSC SP2, KTH SP2, CTC SP2, SDSC Blue, SDSC Par96, LANL CM5, LANL Origin
        assert_eq!(ids, [4, 7, 1, 0, 6, 5, 2, 3, 4, 7]);
        assert!(s.intervals[9].window < s.intervals[1].window);
        assert!(s.consumed < s.t_neg);
    }

    #[test]
    fn single_pass_by_default() {
        let dir = archive_directory();
        let mut s = init_negotiation(&job(3000.0), 0, QueryStrategy::Ofc, &params(0.5, 0.0, 0.0));
        let mut now = 0.0;
        while let Ok(bid) = s.send_bid(&dir, now) {
            now += bid.window;
            s.on_bid_reply(bid.contractor, bid.iteration, false, now);
        }
        let ids: Vec<usize> = s.contractors.iter().map(|r| r.0).collect();
        // cheapest first: LANL Origin, LANL CM5, SDSC Par96, SDSC Blue, CTC SP2, ...
        assert_eq!(ids, [3, 2, 5, 6, 0, 1, 7, 4]);
        assert_eq!(
            s.status,
            NegotiationStatus::Dropped(DropReason::RankingExhausted)
        );
        assert!(s.tau_next_interval() >= 1.0);
    }

    #[test]
    fn floor_limits_bids() {
        let dir = archive_directory();
        // t_neg = 100 -> windows 50, 25, 12.5, 6.25, 3.125, 1.5625, then 0.78 < 1
        let mut s = init_negotiation(&job(200.0), 0, QueryStrategy::Oft, &params(0.5, 0.0, 0.0));
        let mut now = 0.0;
        let mut bids = 0;
        loop {
            match s.send_bid(&dir, now) {
                Ok(bid) => {
                    bids += 1;
                    now += bid.window;
                    assert!(s.on_bid_timeout(bid.iteration).is_some());
                }
                Err(reason) => {
                    assert_eq!(reason, DropReason::BudgetExhausted);
                    break;
                }
            }
        }
        assert_eq!(bids, 6);
        assert_eq!(
            s.status,
            NegotiationStatus::Dropped(DropReason::BudgetExhausted)
        );
        assert_eq!(s.messages.total(), 6);
    }

    #[test]
    fn zero_budget_walk_is_one_pass() {
        let dir = archive_directory();
        let mut s = init_negotiation(&job(200.0), 0, QueryStrategy::Ofc, &params(0.0, 0.0, 0.0));
        let mut bids = 0;
        while let Ok(bid) = s.send_bid(&dir, 5.0) {
            assert_eq!(bid.window, 0.0);
            bids += 1;
            s.on_bid_reply(bid.contractor, bid.iteration, false, 5.0);
        }
        assert_eq!(bids, 8);
        assert_eq!(
            s.status,
            NegotiationStatus::Dropped(DropReason::PassExhausted)
        );
        assert_eq!(s.messages.total(), 16);
        assert_eq!(s.decided_at, Some(5.0));
    }

    #[test]
    fn accept_and_stale_replies() {
        let dir = archive_directory();
        let mut s = init_negotiation(&job(200.0), 0, QueryStrategy::Oft, &params(0.0, 0.0, 0.0));
        let bid = s.send_bid(&dir, 0.0).unwrap();
        assert_eq!(bid.contractor, ResourceId(4));
        // wrong iteration
        assert_eq!(
            s.on_bid_reply(bid.contractor, 9, true, 0.0),
            ReplyOutcome::Stale
        );
        assert!(matches!(
            s.on_bid_reply(bid.contractor, bid.iteration, true, 0.0),
            ReplyOutcome::Accepted { .. }
        ));
        assert_eq!(s.status, NegotiationStatus::Accepted(ResourceId(4)));
        assert_eq!(
            s.on_bid_reply(bid.contractor, bid.iteration, true, 1.0),
            ReplyOutcome::Stale
        );
        s.record_result();
        assert_eq!(s.messages.total(), 4);
        assert_eq!(s.stale_replies, 2);
    }

    #[test]
    fn early_reject_charges_elapsed_time() {
        let dir = archive_directory();
        let mut s = init_negotiation(&job(200.0), 0, QueryStrategy::Oft, &params(0.5, 0.0, 0.0));
        let bid = s.send_bid(&dir, 10.0).unwrap();
        assert_eq!(bid.window, 50.0);
        s.on_bid_reply(bid.contractor, bid.iteration, false, 30.0);
        assert_eq!(s.consumed, 20.0);
        assert_eq!(s.tau_next_interval(), 40.0);
    }

    #[test]
    fn no_eligible_resource() {
        let dir = archive_directory();
        let mut wide = job(200.0);
        wide.processors = 4096;
        let mut s = init_negotiation(&wide, 0, QueryStrategy::Oft, &params(0.2, 0.0, 0.0));
        assert_eq!(s.send_bid(&dir, 0.0), Err(DropReason::NoEligibleResource));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn windows_halve_the_unspent_budget(t_neg in 1e-3f64..1e7, floor in 1e-6f64..10.0) {
                let dir = archive_directory();
                let p = NegotiationParams {
                    min_bid_interval: floor,
                    ..wrapping(0.5)
                };
                let mut s = init_negotiation(&job(2.0 * t_neg), 0, QueryStrategy::Oft, &p);
                let mut now = 0.0;
                let mut spent = 0.0;
                while let Ok(bid) = s.send_bid(&dir, now) {
                    let l = s.iteration as i32;
                    prop_assert_eq!(bid.window, (t_neg - spent) / 2.0);
                    spent += bid.window;
                    let closed = t_neg * (1.0 - 2f64.powi(-l));
                    prop_assert!((spent - closed).abs() <= 1e-12 * closed);
                    now += bid.window;
                    s.on_bid_timeout(bid.iteration);
                }
                prop_assert_eq!(s.status, NegotiationStatus::Dropped(DropReason::BudgetExhausted));
                prop_assert!(s.consumed < t_neg);
                prop_assert!(s.tau_next_interval() < floor);
            }
        }
    }
}
