//! Closed-form probability bounds for the embedding game and the two
//! theorem operating points.
//!
//! Every evaluator has a floating-point form for reports and an exact
//! rational form in [`exact`] for identity checks. `t` is the query-tree
//! vertex count and `n` the tree height; most bounds need `t < 2^n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_domain(t: u64, n: u32) -> Result<()> {
    if n < 64 && t >= 1u64 << n {
        return Err(Error::Domain(format!("t = {t} must be below 2^n = 2^{n}")));
    }
    Ok(())
}

fn check_height(h: u32, n: u32) -> Result<()> {
    if h > n {
        return Err(Error::Domain(format!("height {h} exceeds tree height {n}")));
    }
    Ok(())
}

#[inline]
fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// `2^n - t`; exact whenever `n <= 53`.
fn slack(t: u64, n: u32) -> f64 {
    pow2(n as i32) - t as f64
}

/// `t^2 2^{-n}`: at most `t` tries on each of at most `t` root paths, each
/// needing `n` consecutive moves toward the EXIT.
pub fn exit_bound(t: u64, n: u32) -> f64 {
    (t as f64).powi(2) * pow2(-(n as i32))
}

/// `sum_{h'=h}^{n} 2^{h-h'} / (2^n - t)`: a path crossing the middle layer
/// reaches a fixed height-`h` vertex through one of its ancestors.
pub fn reach_bound_series(h: u32, n: u32, t: u64) -> Result<f64> {
    check_height(h, n)?;
    check_domain(t, n)?;
    let sum: f64 = (h..=n).map(|hp| pow2(h as i32 - hp as i32)).sum();
    Ok(sum / slack(t, n))
}

/// `4 / (2^n - t)^2`: both paths cross the middle layer and meet at `u`.
pub fn pair_bound_both_sides(n: u32, t: u64) -> Result<f64> {
    check_domain(t, n)?;
    Ok(4.0 / slack(t, n).powi(2))
}

/// `3 / (2 (2^n - t)^2)`: the sharper constant quoted for the same event.
pub fn pair_bound_refined(n: u32, t: u64) -> Result<f64> {
    check_domain(t, n)?;
    Ok(1.5 / slack(t, n).powi(2))
}

/// `2^{h-n} / (2^n - t)`: only one path crosses the middle layer and the
/// other ends at its ancestor `u` of height `h` on the left.
pub fn ancestor_pair_bound(h: u32, n: u32, t: u64) -> Result<f64> {
    check_height(h, n)?;
    check_domain(t, n)?;
    Ok(pow2(h as i32 - n as i32) / slack(t, n))
}

/// `(n + 1) / (2^n - t)`, the sum of [`ancestor_pair_bound`] over all left
/// vertices (`2^{n-h}` of each height `h`).
pub fn ancestor_sum(n: u32, t: u64) -> Result<f64> {
    check_domain(t, n)?;
    Ok(f64::from(n + 1) / slack(t, n))
}

/// Both readings of the improper-embedding bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImproperBound {
    /// `t^2 / (2^n - t) * (2^{n+2} / (2^n - t) + n + 1)`, as displayed.
    pub paper: f64,
    /// `t^2 * (2^{n+2} * 4 / (2^n - t)^2 + (n + 1) / (2^n - t))`, the sum of
    /// the per-pair terms; exceeds `paper` by `3 t^2 2^{n+2} / (2^n - t)^2`.
    pub terms: f64,
}

pub fn improper_bound(t: u64, n: u32) -> Result<ImproperBound> {
    check_domain(t, n)?;
    let s = slack(t, n);
    let t2 = (t as f64).powi(2);
    let cycle_points = pow2(n as i32 + 2);
    Ok(ImproperBound {
        paper: t2 / s * (cycle_points / s + f64::from(n + 1)),
        terms: t2 * (cycle_points * pair_bound_both_sides(n, t)? + ancestor_sum(n, t)?),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: u32,
    pub t: u64,
    pub exit_bound: f64,
    pub improper_bound: f64,
    pub improper_bound_terms: f64,
    /// `exit_bound + improper_bound`.
    pub total: f64,
    /// `total >= 1`.
    pub vacuous: bool,
}

/// Finite-`n` form of the bound on `E_G[P^G(T)]` for trees of `t` vertices.
pub fn total_win_bound(t: u64, n: u32) -> Result<BoundReport> {
    let improper = improper_bound(t, n)?;
    let exit = exit_bound(t, n);
    let total = exit + improper.paper;
    Ok(BoundReport {
        n,
        t,
        exit_bound: exit,
        improper_bound: improper.paper,
        improper_bound_terms: improper.terms,
        total,
        vacuous: total >= 1.0,
    })
}

/// `floor(2^{n/k})`, exact for `n <= 127`.
pub fn floor_pow2_root(n: u32, k: u32) -> u64 {
    assert!(k >= 1 && n <= 127, "floor_pow2_root supports n <= 127");
    let target = 1u128 << n;
    let fits = |q: u128| q.checked_pow(k).is_some_and(|p| p <= target);
    let mut q = pow2(n as i32).powf(1.0 / f64::from(k)).floor() as u128;
    while !fits(q) {
        q -= 1;
    }
    while fits(q + 1) {
        q += 1;
    }
    q as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub n: u32,
    pub queries: u64,
    pub prob_bound: f64,
}

/// Earlier bound: `floor(2^{n/6})` queries succeed with probability at most
/// `4 * 2^{-n/6}`. Non-multiples of 6 floor the query count only.
pub fn theorem1_point(n: u32) -> OperatingPoint {
    OperatingPoint {
        n,
        queries: floor_pow2_root(n, 6),
        prob_bound: 4.0 * (-f64::from(n) / 6.0).exp2(),
    }
}

/// Improved bound: `floor(2^{n/3})` queries, with the explicit finite-`n`
/// bound `total_win_bound(queries, n).total`.
pub fn theorem2_point(n: u32) -> Result<OperatingPoint> {
    let queries = floor_pow2_root(n, 3);
    Ok(OperatingPoint {
        n,
        queries,
        prob_bound: total_win_bound(queries, n)?.total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremRow {
    pub n: u32,
    pub theorem1_queries: u64,
    pub theorem1_bound: f64,
    pub theorem2_queries: u64,
    pub theorem2_bound: f64,
    /// More queries allowed and a smaller failure bound.
    pub theorem2_dominates: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremScan {
    pub rows: Vec<TheoremRow>,
    /// Smallest `n` from which the improved point dominates for every
    /// scanned height.
    pub n0: Option<u32>,
}

pub fn theorem_scan(n_max: u32) -> Result<TheoremScan> {
    let rows = (1..=n_max)
        .map(|n| {
            let one = theorem1_point(n);
            let two = theorem2_point(n)?;
            Ok(TheoremRow {
                n,
                theorem1_queries: one.queries,
                theorem1_bound: one.prob_bound,
                theorem2_queries: two.queries,
                theorem2_bound: two.prob_bound,
                theorem2_dominates: two.queries > one.queries && two.prob_bound < one.prob_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n0 = match rows.iter().rposition(|r| !r.theorem2_dominates) {
        Some(last_bad) if last_bad + 1 == rows.len() => None,
        Some(last_bad) => Some(rows[last_bad + 1].n),
        None => rows.first().map(|r| r.n),
    };
    Ok(TheoremScan { rows, n0 })
}

/// `max_n total_win_bound(floor(2^{n/3}), n) * 2^{n/3} / n` over the range,
/// with the maximising `n`.
pub fn shape_constant(n_min: u32, n_max: u32) -> Result<(f64, u32)> {
    let mut best = (f64::NEG_INFINITY, n_min);
    for n in n_min..=n_max {
        let total = total_win_bound(floor_pow2_root(n, 3), n)?.total;
        let c = total * (f64::from(n) / 3.0).exp2() / f64::from(n);
        if c > best.0 {
            best = (c, n);
        }
    }
    Ok(best)
}

/// Exact rational forms of the evaluators above.
pub mod exact {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    use super::{check_domain, check_height};
    use crate::error::Result;

    pub fn int(x: u64) -> BigRational {
        BigRational::from_integer(BigInt::from(x))
    }

    /// `2^e` for any integer `e`.
    pub fn pow2(e: i64) -> BigRational {
        let p = BigInt::one() << e.unsigned_abs();
        if e >= 0 {
            BigRational::from_integer(p)
        } else {
            BigRational::new(BigInt::one(), p)
        }
    }

    fn slack(t: u64, n: u32) -> BigRational {
        pow2(i64::from(n)) - int(t)
    }

    pub fn exit_bound(t: u64, n: u32) -> BigRational {
        int(t) * int(t) * pow2(-i64::from(n))
    }

    pub fn reach_bound_series(h: u32, n: u32, t: u64) -> Result<BigRational> {
        check_height(h, n)?;
        check_domain(t, n)?;
        let sum = (h..=n).fold(BigRational::zero(), |acc, hp| {
            acc + pow2(i64::from(h) - i64::from(hp))
        });
        Ok(sum / slack(t, n))
    }

    pub fn pair_bound_both_sides(n: u32, t: u64) -> Result<BigRational> {
        check_domain(t, n)?;
        let s = slack(t, n);
        Ok(int(4) / (&s * &s))
    }

    pub fn pair_bound_refined(n: u32, t: u64) -> Result<BigRational> {
        check_domain(t, n)?;
        let s = slack(t, n);
        Ok(int(3) / (int(2) * &s * &s))
    }

    pub fn ancestor_pair_bound(h: u32, n: u32, t: u64) -> Result<BigRational> {
        check_height(h, n)?;
        check_domain(t, n)?;
        Ok(pow2(i64::from(h) - i64::from(n)) / slack(t, n))
    }

    /// Closed form `(n + 1) / (2^n - t)`.
    pub fn ancestor_sum(n: u32, t: u64) -> Result<BigRational> {
        check_domain(t, n)?;
        Ok(int(u64::from(n) + 1) / slack(t, n))
    }

    /// Defining sum `sum_{h=0}^{n} 2^{n-h} ancestor_pair_bound(h, n, t)`.
    pub fn ancestor_sum_by_summation(n: u32, t: u64) -> Result<BigRational> {
        (0..=n).try_fold(BigRational::zero(), |acc, h| {
            Ok(acc + pow2(i64::from(n) - i64::from(h)) * ancestor_pair_bound(h, n, t)?)
        })
    }

    /// `(closed form, per-term sum)`.
    pub fn improper_bound(t: u64, n: u32) -> Result<(BigRational, BigRational)> {
        check_domain(t, n)?;
        let s = slack(t, n);
        let t2 = int(t) * int(t);
        let cycle_points = pow2(i64::from(n) + 2);
        let closed = &t2 / &s * (&cycle_points / &s + int(u64::from(n) + 1));
        let terms = &t2 * (&cycle_points * pair_bound_both_sides(n, t)? + ancestor_sum(n, t)?);
        Ok((closed, terms))
    }

    pub fn total_win_bound(t: u64, n: u32) -> Result<BigRational> {
        Ok(exit_bound(t, n) + improper_bound(t, n)?.0)
    }
}

#[cfg(test)]
mod tests {
    use num_traits::ToPrimitive;

    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
    }

    #[test]
    fn exit_values() {
        assert_eq!(exit_bound(1, 3), 0.125);
        assert_eq!(exit_bound(2, 4), 0.25);
        assert_eq!(exit_bound(4, 2), 4.0);
        assert!(total_win_bound(3, 2).unwrap().vacuous);
    }

    #[test]
    fn reach_series_values() {
        for t in [0, 1, 5] {
            assert_eq!(reach_bound_series(3, 3, t).unwrap(), 1.0 / (8.0 - t as f64));
        }
        assert_eq!(reach_bound_series(0, 3, 2).unwrap(), 0.3125);
        assert!(matches!(reach_bound_series(0, 3, 8), Err(Error::Domain(_))));
        assert!(matches!(reach_bound_series(4, 3, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn pair_values() {
        assert!(close(pair_bound_both_sides(5, 2).unwrap(), 4.0 / 900.0));
        assert_eq!(pair_bound_both_sides(3, 0).unwrap(), 1.0 / 16.0);
        assert_eq!(pair_bound_refined(3, 0).unwrap(), 3.0 / 128.0);
        assert!(close(pair_bound_refined(5, 2).unwrap(), 1.5 / 900.0));
        assert!(pair_bound_both_sides(2, 4).is_err());
        assert!(pair_bound_refined(2, 4).is_err());
    }

    #[test]
    fn ancestor_values() {
        assert_eq!(ancestor_pair_bound(3, 3, 2).unwrap(), 1.0 / 6.0);
        assert_eq!(ancestor_pair_bound(0, 3, 2).unwrap(), 1.0 / 48.0);
        assert_eq!(ancestor_pair_bound(2, 4, 4).unwrap(), 0.25 / 12.0);
        assert_eq!(ancestor_sum(3, 4).unwrap(), 1.0);
        assert_eq!(ancestor_sum(4, 0).unwrap(), 5.0 / 16.0);
    }

    #[test]
    fn improper_values() {
        let b = improper_bound(4, 6).unwrap();
        assert!(close(b.paper, 16.0 / 60.0 * (256.0 / 60.0 + 7.0)));
        assert!((b.paper - 3.004).abs() < 1e-3);
        let b = improper_bound(2, 10).unwrap();
        assert!(close(b.paper, 4.0 / 1022.0 * (4096.0 / 1022.0 + 11.0)));
        assert!((b.paper - 0.0587).abs() < 1e-4);
        assert!(b.terms > b.paper);
    }

    #[test]
    fn total_for_single_vertex() {
        for n in 1..=20 {
            let r = total_win_bound(1, n).unwrap();
            let s = 2f64.powi(n as i32) - 1.0;
            assert_eq!(r.exit_bound, 2f64.powi(-(n as i32)));
            assert!(close(
                r.improper_bound,
                (1.0 / s) * (2f64.powi(n as i32 + 2) / s + f64::from(n + 1))
            ));
            assert_eq!(r.total, r.exit_bound + r.improper_bound);
            assert_eq!(r.vacuous, r.total >= 1.0);
        }
    }

    #[test]
    fn theorem_points() {
        assert_eq!(
            theorem1_point(36),
            OperatingPoint {
                n: 36,
                queries: 64,
                prob_bound: 0.0625
            }
        );
        assert_eq!(
            theorem1_point(6),
            OperatingPoint {
                n: 6,
                queries: 2,
                prob_bound: 2.0
            }
        );
        assert_eq!(
            theorem1_point(12),
            OperatingPoint {
                n: 12,
                queries: 4,
                prob_bound: 1.0
            }
        );
        assert_eq!(theorem2_point(30).unwrap().queries, 1024);
        assert_eq!(theorem2_point(3).unwrap().queries, 2);
        assert_eq!(theorem2_point(31).unwrap().queries, 1290);
    }

    #[test]
    fn floor_roots() {
        assert_eq!(floor_pow2_root(0, 3), 1);
        assert_eq!(floor_pow2_root(1, 3), 1);
        assert_eq!(floor_pow2_root(2, 3), 1);
        assert_eq!(floor_pow2_root(5, 3), 3);
        assert_eq!(floor_pow2_root(120, 3), 1 << 40);
        assert_eq!(floor_pow2_root(119, 3), 872_682_957_291);
        assert_eq!(floor_pow2_root(7, 6), 2);
    }

    #[test]
    fn float_forms_agree_with_exact() {
        for n in [3u32, 10, 24] {
            for t in [0u64, 1, 3, 7] {
                let (paper, terms) = exact::improper_bound(t, n).unwrap();
                let b = improper_bound(t, n).unwrap();
                assert!(close(b.paper, paper.to_f64().unwrap()));
                assert!(close(b.terms, terms.to_f64().unwrap()));
                assert!(close(
                    total_win_bound(t, n).unwrap().total,
                    exact::total_win_bound(t, n).unwrap().to_f64().unwrap()
                ));
            }
        }
    }
}
