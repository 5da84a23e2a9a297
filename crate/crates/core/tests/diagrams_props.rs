use esig_core::diagrams::{enumerate_pairings, maximal_consecutive_sequences, Diagram, PairKind};
use proptest::prelude::*;
use std::collections::BTreeSet;

/// Number of perfect matchings of `k` points, `(k − 1)!!`.
fn matchings(k: usize) -> usize {
    (1..k).rev().step_by(2).product()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |c, i| c * (n - i) / (i + 1))
}

#[test]
fn counts_are_binomial_times_double_factorial() {
    for n in 0..=8 {
        for m in 0..=n + 1 {
            let count = enumerate_pairings(n, m).unwrap().len();
            let expected = if m > n || (n - m) % 2 == 1 {
                0
            } else {
                binomial(n, m) * matchings(n - m)
            };
            assert_eq!(count, expected, "n = {n}, m = {m}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn enumeration_is_duplicate_free_and_valid(n in 0usize..=8, m in 0usize..=8) {
        let all = enumerate_pairings(n, m).unwrap();
        prop_assert_eq!(all.is_empty(), m > n || (n - m) % 2 == 1);
        let keys: BTreeSet<Vec<(usize, usize)>> = all.iter().map(|d| d.pairs().to_vec()).collect();
        prop_assert_eq!(keys.len(), all.len());
        for d in &all {
            prop_assert_eq!(d.chaos_order(), m);
            prop_assert_eq!(d.pairs().len() * 2 + m, n);
            prop_assert!(Diagram::new(n, d.pairs()).is_ok());
        }
    }

    #[test]
    fn adjacent_pairs_are_never_arcs(n in 2usize..=8, m in 0usize..=6) {
        for d in enumerate_pairings(n, m).unwrap() {
            for &(i, j) in d.pairs() {
                prop_assert_eq!(Diagram::kind((i, j)) == PairKind::Consecutive, j == i + 1);
            }
            let arcs = d.arcs().count();
            let consecutive = d.consecutive_pairs().count();
            prop_assert_eq!(arcs + consecutive, d.pairs().len());
            let in_runs: usize = maximal_consecutive_sequences(&d).iter().map(|r| r.len()).sum();
            prop_assert_eq!(in_runs, consecutive);
        }
    }
}
