//! Exact finite-`n` moments of `S_n = (1/(delta sqrt n)) sum_k (a_k⊗a_k - lambda^2)`.
//!
//! An index word `i ∈ [n]^p` only matters through its kernel `pi`, and
//! exactly `n (n-1) ... (n - |pi| + 1)` words share a given kernel.

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{falling_factorial, Rational, Surd};
use crate::error::{domain, Result};
use crate::free_moments::CumulantSpec;
use crate::limit_law::{mu_q_moment_fast, QParam};
use crate::partitions::{enumerate_set_partitions, Partition};
use crate::tensor_trace::{expansion_sum, pairing_sum, scale_by_inverse_root, TensorParams};

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiniteNMoment {
    pub p: usize,
    pub n: u64,
    #[serde(serialize_with = "serialize_display")]
    pub value: Surd,
    #[serde(serialize_with = "serialize_display")]
    pub limit: Rational,
    /// `value - limit`; `None` only if the two cannot share a radicand.
    #[serde(serialize_with = "serialize_display_opt")]
    pub gap: Option<Surd>,
}

fn serialize_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn serialize_display_opt<T: std::fmt::Display, S: serde::Serializer>(
    v: &Option<T>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

/// `tau⊗tau(S_n^p)`, summed over kernels without singleton blocks.
pub fn s_n_moment(p: usize, n: u64, spec: &CumulantSpec) -> Result<Surd> {
    if n == 0 {
        return Err(domain("the number of summands n must be at least 1"));
    }
    let params = TensorParams::from_spec(spec)?;
    if p == 0 {
        return Ok(Surd::rational(Rational::from_integer(1.into())));
    }
    let kernels: Vec<Partition> = enumerate_set_partitions(p, 2)?.collect();
    let terms: Vec<Rational> = kernels
        .par_iter()
        .map(|pi| {
            let count = falling_factorial(n, pi.num_blocks() as u64);
            if count.is_zero() {
                return Ok(Rational::zero());
            }
            Ok(expansion_sum(pi, spec)? * Rational::from_integer(count))
        })
        .collect::<Result<_>>()?;
    let total = terms.into_iter().fold(Rational::zero(), |acc, t| acc + t);
    // n^{-p/2} delta^{-p} = (n delta^2)^{-p/2}
    let scale = params.delta2() * Rational::from_integer(BigInt::from(n));
    Ok(scale_by_inverse_root(total, &scale, p))
}

/// `lim_n tau⊗tau(S_n^p)`: only pair-partition kernels survive the
/// `n^{-p/2}` normalization.
pub fn s_n_limit(p: usize, spec: &CumulantSpec) -> Result<Rational> {
    if p % 2 == 1 {
        return Ok(Rational::zero());
    }
    if p == 0 {
        return Ok(Rational::from_integer(1.into()));
    }
    pairing_sum(p, spec)
}

/// Exact finite-`n` moment alongside the `mu_q` moment at the `q` of the cumulant list.
pub fn finite_n_moment(p: usize, n: u64, spec: &CumulantSpec) -> Result<FiniteNMoment> {
    let params = TensorParams::from_spec(spec)?;
    let value = s_n_moment(p, n, spec)?;
    let limit = mu_q_moment_fast(p, &QParam::from_params(&params))?;
    let gap = value.checked_sub(&Surd::rational(limit.clone()));
    Ok(FiniteNMoment {
        p,
        n,
        value,
        limit,
        gap,
    })
}

/// Rows for every even `p` in `2..=pmax` and every `n` in `ns`.
pub fn convergence_table(pmax: usize, ns: &[u64], spec: &CumulantSpec) -> Result<Vec<FiniteNMoment>> {
    let mut rows = Vec::new();
    for p in (2..=pmax).step_by(2) {
        for &n in ns {
            rows.push(finite_n_moment(p, n, spec)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, ratio};
    use crate::free_moments::Tail;
    use crate::tensor_trace::tau_oracle;
    use proptest::prelude::*;

    fn spec(k: &[i64]) -> CumulantSpec {
        CumulantSpec::from_integers(k, Tail::Truncated).unwrap()
    }

    fn zero_tail(k: &[i64]) -> CumulantSpec {
        CumulantSpec::from_integers(k, Tail::Zero).unwrap()
    }

    fn rational(s: Surd) -> Rational {
        s.as_rational().unwrap().clone()
    }

    /// Independent route: sum the trace over every index word in `[n]^p`.
    fn word_sum(p: usize, n: usize, s: &CumulantSpec) -> Surd {
        let params = TensorParams::from_spec(s).unwrap();
        let mut total = Rational::zero();
        let mut word = vec![0usize; p];
        loop {
            let pi = Partition::from_labels(&word);
            total += expansion_sum(&pi, s).unwrap();
            let mut i = 0;
            while i < p && word[i] == n - 1 {
                word[i] = 0;
                i += 1;
            }
            if i == p {
                break;
            }
            word[i] += 1;
        }
        let scale = params.delta2() * Rational::from_integer(BigInt::from(n));
        scale_by_inverse_root(total, &scale, p)
    }

    #[test]
    fn centered_fourth_moment() {
        let s = spec(&[0, 1, 0, 0]);
        for n in [1u64, 2, 10, 20, 40, 100] {
            let expected = rat(2) + ratio(2, n as i64);
            assert_eq!(rational(s_n_moment(4, n, &s).unwrap()), expected);
        }
    }

    #[test]
    fn shifted_fourth_moment() {
        let s = spec(&[1, 1, 0, 0]);
        for n in [1u64, 3, 10] {
            assert_eq!(rational(s_n_moment(4, n, &s).unwrap()), ratio(20, 9) + ratio(2, n as i64));
        }
    }

    #[test]
    fn second_moment_is_one() {
        for s in [spec(&[0, 1]), spec(&[2, 3]), spec(&[-1, 1, 5])] {
            for n in [1u64, 7, 1000] {
                assert_eq!(rational(s_n_moment(2, n, &s).unwrap()), rat(1));
            }
        }
    }

    #[test]
    fn counting_identity_matches_word_sum() {
        for s in [zero_tail(&[1, 1]), spec(&[2, 1, -1, 3, 1, 0]), zero_tail(&[0, 2, 1])] {
            for p in 1..=5 {
                for n in 1..=3 {
                    assert_eq!(s_n_moment(p, n as u64, &s).unwrap(), word_sum(p, n, &s), "p={p} n={n}");
                }
            }
        }
    }

    #[test]
    fn odd_moments_of_even_specs_vanish() {
        let s = spec(&[0, 1, 0, 2, 0, -1, 0]);
        for p in [1, 3, 5, 7] {
            for n in [1u64, 4, 9] {
                assert!(s_n_moment(p, n, &s).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn odd_moments_of_shifted_specs_are_irrational() {
        let s = zero_tail(&[1, 1]);
        let v = s_n_moment(3, 2, &s).unwrap();
        assert!(!v.is_zero());
        assert!(v.as_rational().is_none());
    }

    #[test]
    fn limit_extraction_matches_mu_q() {
        let s = spec(&[1, 1, 0, 0]);
        let q = QParam::new(ratio(2, 3)).unwrap();
        for p in [2, 4, 6, 8] {
            assert_eq!(s_n_limit(p, &s).unwrap(), mu_q_moment_fast(p, &q).unwrap());
        }
        assert!(s_n_limit(5, &s).unwrap().is_zero());
    }

    #[test]
    fn convergence_rows() {
        let rows = convergence_table(4, &[10, 20, 40], &spec(&[0, 1, 0, 0])).unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows.iter().filter(|r| r.p == 2) {
            assert!(r.gap.as_ref().unwrap().is_zero());
        }
        let gaps: Vec<Rational> = rows
            .iter()
            .filter(|r| r.p == 4)
            .map(|r| rational(r.gap.clone().unwrap()))
            .collect();
        assert_eq!(gaps, vec![ratio(1, 5), ratio(1, 10), ratio(1, 20)]);
    }

    #[test]
    fn sixth_moment_gap_halves() {
        let rows = convergence_table(6, &[8, 16, 32], &zero_tail(&[1, 1])).unwrap();
        let gaps: Vec<Rational> = rows
            .iter()
            .filter(|r| r.p == 6)
            .map(|r| rational(r.gap.clone().unwrap()))
            .collect();
        for w in gaps.windows(2) {
            let ratio = &w[0] / &w[1];
            assert!(ratio >= crate::arith::ratio(4, 3) && ratio <= rat(3), "{ratio}");
        }
    }

    #[test]
    fn truncation_is_reported() {
        assert!(matches!(
            s_n_moment(6, 4, &spec(&[1, 1, 0, 0])),
            Err(crate::Error::Truncation { required: 6, .. })
        ));
        assert!(s_n_moment(4, 0, &spec(&[0, 1, 0, 0])).is_err());
    }

    #[test]
    fn single_summand_is_a_single_variable() {
        // With n = 1, S_1 = b_1 and the moment is the trace of b_1^p.
        let s = spec(&[1, 2, 1, 0, 0, 0]);
        for p in 2..=6 {
            let one_block = Partition::new(p, vec![(1..=p).collect()]).unwrap();
            assert_eq!(s_n_moment(p, 1, &s).unwrap(), tau_oracle(&one_block, &s).unwrap().into_surd());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn leading_term_is_universal(k3 in -3i64..=3, k4 in -3i64..=3, k5 in -3i64..=3, k6 in -3i64..=3) {
            let a = spec(&[1, 1, 0, 0, 0, 0]);
            let b = spec(&[1, 1, k3, k4, k5, k6]);
            for p in [4, 6] {
                prop_assert_eq!(s_n_limit(p, &a).unwrap(), s_n_limit(p, &b).unwrap());
            }
        }
    }
}
