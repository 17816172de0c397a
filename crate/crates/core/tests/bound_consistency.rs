use gluedtrees::bounds::{exit_bound, floor_pow2_root, improper_bound, total_win_bound};
use gluedtrees::embedding::{improper_pair_frequency, search_worst_tree};
use gluedtrees::harness::{success_rates, STRATEGY_IDS};
use gluedtrees::{make_tree, TreeShape};

#[test]
fn strategies_stay_below_the_bound() {
    for n in 9..=18u32 {
        let budget = floor_pow2_root(n, 3);
        let bound = total_win_bound(budget + 1, n).unwrap().total;
        let estimates =
            success_rates(n, &STRATEGY_IDS, budget, 200, 0x5eed + u64::from(n)).unwrap();
        for (id, e) in STRATEGY_IDS.iter().zip(&estimates) {
            assert!(
                e.ci99_upper <= bound,
                "n={n} {id}: {} > {bound}",
                e.ci99_upper
            );
        }
    }
}

#[test]
fn exit_and_improper_frequencies_respect_their_bounds() {
    for n in [6u32, 9, 12] {
        let t = floor_pow2_root(n, 3) as usize;
        for (k, shape) in TreeShape::ALL.into_iter().enumerate() {
            let tree = make_tree(shape, t, k as u64).unwrap();
            let audit = improper_pair_frequency(n, &tree, 16, 2048, 31 + k as u64).unwrap();
            let exit = exit_bound(t as u64, n);
            let improper = improper_bound(t as u64, n).unwrap().paper;
            assert!(
                audit.exited.mean <= exit + 3.0 * audit.exited.stderr,
                "n={n} {shape} exit"
            );
            assert!(
                audit.improper.mean <= improper + 3.0 * audit.improper.stderr,
                "n={n} {shape} improper"
            );
            assert!(audit.pair_sum >= audit.improper.mean - 3.0 * audit.improper.stderr);
        }
    }
}

#[test]
fn exit_frequency_below_bound_for_long_paths() {
    // Paths long enough to reach the EXIT, where the bound is informative.
    for n in [8u32, 10] {
        let t = 2 * n as usize + 2;
        let tree = make_tree(TreeShape::Path, t, 0).unwrap();
        let audit = improper_pair_frequency(n, &tree, 32, 4096, 5).unwrap();
        assert!(audit.exited.successes > 0);
        assert!(audit.exited.mean <= exit_bound(t as u64, n) + 3.0 * audit.exited.stderr);
    }
}

#[test]
fn worst_tree_search_stays_below_the_bound() {
    for n in [9u32, 12] {
        let t = floor_pow2_root(n, 3);
        let best = search_worst_tree(n, t as usize, 6, 16, 1024, 77).unwrap();
        let bound = total_win_bound(t, n).unwrap().total;
        assert!(best.estimate.mean <= bound + 3.0 * best.estimate.stderr);
    }
    let single = search_worst_tree(6, 1, 5, 4, 64, 1).unwrap();
    assert_eq!(single.estimate.successes, 0);
    let one = search_worst_tree(6, 4, 1, 4, 64, 1).unwrap();
    assert_eq!(one.candidate_index, 0);
    assert_eq!(one.shape, TreeShape::Path);
}
