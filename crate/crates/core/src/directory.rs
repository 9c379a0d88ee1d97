//! In-memory federation directory: one published quote per resource and
//! ranked k-th fastest / k-th cheapest queries.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::economy::{ResourceId, ResourceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quote {
    pub resource_id: ResourceId,
    pub price: f64,
    pub mips: f64,
    pub processors: u32,
}

impl From<&ResourceSpec> for Quote {
    fn from(r: &ResourceSpec) -> Self {
        Self {
            resource_id: r.id,
            price: r.price,
            mips: r.mips,
            processors: r.processors,
        }
    }
}

/// User preference when ranking contractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryStrategy {
    /// Optimize for time: fastest (highest per-processor MIPS) first.
    #[serde(rename = "oft")]
    Oft,
    /// Optimize for cost: cheapest first.
    #[serde(rename = "ofc")]
    Ofc,
}

#[derive(Debug, Clone, Default)]
pub struct Directory {
    quotes: BTreeMap<ResourceId, Quote>,
    /// Delay between a manager's query and its bid reaching the contractor.
    pub query_latency: f64,
}

fn rank_order(strategy: QueryStrategy, a: &Quote, b: &Quote) -> Ordering {
    let primary = match strategy {
        QueryStrategy::Oft => b.mips.total_cmp(&a.mips),
        QueryStrategy::Ofc => a.price.total_cmp(&b.price),
    };
    primary.then(a.resource_id.cmp(&b.resource_id))
}

impl Directory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_resources<'a>(resources: impl IntoIterator<Item = &'a ResourceSpec>) -> Self {
        let mut dir = Self::new();
        for r in resources {
            dir.subscribe(Quote::from(r));
        }
        dir
    }

    /// Registers a quote, replacing any earlier one for the same resource.
    pub fn subscribe(&mut self, quote: Quote) {
        self.quotes.insert(quote.resource_id, quote);
    }

    pub fn unsubscribe(&mut self, id: ResourceId) -> bool {
        self.quotes.remove(&id).is_some()
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn get(&self, id: ResourceId) -> Option<&Quote> {
        self.quotes.get(&id)
    }

    /// All quotes with at least `min_processors`, in rank order.
    pub fn ranking(&self, strategy: QueryStrategy, min_processors: u32) -> Vec<Quote> {
        let mut eligible: Vec<Quote> = self
            .quotes
            .values()
            .filter(|q| q.processors >= min_processors)
            .copied()
            .collect();
        eligible.sort_by(|a, b| rank_order(strategy, a, b));
        eligible
    }

    /// The `k`-th ranked quote (1-based) among resources with at least
    /// `min_processors`, or `None` when `k` is zero or out of range.
    pub fn query_kth(
        &self,
        strategy: QueryStrategy,
        k: usize,
        min_processors: u32,
    ) -> Option<Quote> {
        if k == 0 {
            return None;
        }
        self.ranking(strategy, min_processors).get(k - 1).copied()
    }

    /// Number of resources wide enough for `min_processors`.
    pub fn eligible(&self, min_processors: u32) -> usize {
        self.quotes
            .values()
            .filter(|q| q.processors >= min_processors)
            .count()
    }
}
