use num_traits::ToPrimitive;

use gluedtrees::bounds::{
    exact, shape_constant, theorem1_point, theorem2_point, theorem_scan, TheoremRow,
};

fn fixture() -> Vec<TheoremRow> {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/theorem_scan.csv"
    );
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs()
}

#[test]
fn scan_matches_reference_fixture() {
    let reference = fixture();
    let scan = theorem_scan(120).unwrap();
    assert_eq!(scan.rows.len(), reference.len());
    for (got, want) in scan.rows.iter().zip(&reference) {
        assert_eq!(got.n, want.n);
        assert_eq!(got.theorem1_queries, want.theorem1_queries, "n={}", got.n);
        assert_eq!(got.theorem2_queries, want.theorem2_queries, "n={}", got.n);
        assert!(
            rel_close(got.theorem1_bound, want.theorem1_bound),
            "n={}",
            got.n
        );
        assert!(
            rel_close(got.theorem2_bound, want.theorem2_bound),
            "n={}",
            got.n
        );
        assert_eq!(
            got.theorem2_dominates, want.theorem2_dominates,
            "n={}",
            got.n
        );
    }
    let last_bad = reference
        .iter()
        .rposition(|r| !r.theorem2_dominates)
        .unwrap();
    assert_eq!(scan.n0, Some(reference[last_bad + 1].n));
    assert_eq!(scan.n0, Some(14));
}

#[test]
fn multiples_of_six_agree_with_exact_forms() {
    for n in (6..=120).step_by(6) {
        let one = theorem1_point(n);
        assert_eq!(one.queries, 1u64 << (n / 6));
        assert_eq!(one.prob_bound, 4.0 / (1u64 << (n / 6)) as f64);
        let two = theorem2_point(n).unwrap();
        assert_eq!(two.queries, 1u64 << (n / 3));
        let exact_total = exact::total_win_bound(two.queries, n)
            .unwrap()
            .to_f64()
            .unwrap();
        assert!(rel_close(two.prob_bound, exact_total));
    }
}

#[test]
fn shape_constant_is_finite_and_attained() {
    let (c, at) = shape_constant(12, 120).unwrap();
    assert!(c.is_finite() && c > 0.0);
    assert!((12..=120).contains(&at));
    for n in 12..=120u32 {
        let t = gluedtrees::bounds::floor_pow2_root(n, 3);
        let total = gluedtrees::bounds::total_win_bound(t, n).unwrap().total;
        assert!(total <= c * f64::from(n) * (-f64::from(n) / 3.0).exp2() * (1.0 + 1e-12));
    }
}
