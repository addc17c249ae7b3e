// SPDX-License-Identifier: MIT OR Apache-2.0

use gapscope_core::metrics::{self, PairLogProbs, RunLogProbs};
use proptest::prelude::*;

fn lp() -> impl Strategy<Value = f64> {
    -30.0f64..-1e-9
}

fn run() -> impl Strategy<Value = RunLogProbs> {
    (lp(), lp()).prop_map(|(y_base, y_source)| RunLogProbs { y_base, y_source })
}

fn pair() -> impl Strategy<Value = PairLogProbs> {
    (run(), run(), run(), run()).prop_map(|(clean_base, clean_source, interv_base, interv_source)| PairLogProbs {
        clean_base,
        clean_source,
        interv_base,
        interv_source,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn symmetric_sum_equivalence(p in pair()) {
        let set = [p, p.flipped()];
        let a = metrics::odds(&set).unwrap();
        let b = metrics::odds_star(&set).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn null_intervention_is_zero(b in run(), s in run()) {
        let p = PairLogProbs { clean_base: b, clean_source: s, interv_base: b, interv_source: s };
        prop_assert!(metrics::odds_term(&p).unwrap().abs() < 1e-12);
        prop_assert!(metrics::odds_star_term(&p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn total_swap_doubles_the_clean_gap(b in run(), s in run()) {
        let p = PairLogProbs { clean_base: b, clean_source: s, interv_base: s, interv_source: b };
        let want = 2.0 * (b.y_base - s.y_base);
        prop_assert!((metrics::odds_term(&p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn odds_is_permutation_invariant(mut set in prop::collection::vec(pair(), 1..12), rot in 0usize..12) {
        let a = metrics::odds(&set).unwrap();
        let k = rot % set.len();
        set.rotate_left(k);
        set.reverse();
        let b = metrics::odds(&set).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn flipping_twice_is_identity(p in pair()) {
        prop_assert_eq!(p.flipped().flipped(), p);
    }
}

#[test]
fn empty_set_is_an_error() {
    assert!(metrics::odds(&[]).is_err());
    assert!(metrics::odds_star(&[]).is_err());
}
