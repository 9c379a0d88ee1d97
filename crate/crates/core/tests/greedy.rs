mod common;

use common::{exhaustive_optimum, run_greedy, sorted_prefix_oracle, PendingBid};
use proptest::prelude::*;

// Contractors only ever see bids no wider than themselves.
fn instance() -> impl Strategy<Value = (u32, Vec<PendingBid>)> {
    (1u32..24).prop_flat_map(|capacity| {
        let bid =
            (1..=capacity, 1u8..20, 0u8..25).prop_map(|(processors, runtime, d_e)| PendingBid {
                processors,
                runtime: f64::from(runtime),
                d_e: f64::from(d_e),
            });
        (Just(capacity), prop::collection::vec(bid, 0..=12))
    })
}

proptest! {
    #[test]
    fn greedy_pass_is_the_sorted_prefix((capacity, bids) in instance()) {
        let (accepted, earnings) = run_greedy(capacity, &bids);
        prop_assert_eq!(&accepted, &sorted_prefix_oracle(capacity, &bids));
        let expected: f64 = accepted.iter().map(|&i| bids[i].incentive()).sum();
        prop_assert_eq!(earnings, expected);
        prop_assert!(exhaustive_optimum(capacity, &bids) >= earnings);
        let used: u32 = accepted.iter().map(|&i| bids[i].processors).sum();
        prop_assert!(used <= capacity);
    }
}

#[test]
fn greedy_can_miss_the_optimum() {
    // capacity 4: A(2p, 10), B(3p, 12), C(2p, 9); greedy takes {B}, best is {A, C}
    let bids = [
        PendingBid {
            processors: 2,
            runtime: 5.0,
            d_e: 10.0,
        },
        PendingBid {
            processors: 3,
            runtime: 4.0,
            d_e: 10.0,
        },
        PendingBid {
            processors: 2,
            runtime: 4.5,
            d_e: 10.0,
        },
    ];
    let (accepted, earnings) = run_greedy(4, &bids);
    assert_eq!(accepted, [1]);
    assert_eq!(earnings, 12.0);
    assert_eq!(exhaustive_optimum(4, &bids), 19.0);
}

#[test]
fn infeasible_deadline_is_skipped() {
    let bids = [
        PendingBid {
            processors: 2,
            runtime: 9.0,
            d_e: 5.0,
        },
        PendingBid {
            processors: 2,
            runtime: 1.0,
            d_e: 5.0,
        },
    ];
    assert_eq!(run_greedy(2, &bids).0, [1]);
}
