use freetensor_core::arith::{rat, ratio};
use freetensor_core::clt::{convergence_table, s_n_limit};
use freetensor_core::limit_law::{hankel_validity, mu_q_moment_direct, mu_q_moment_fast, mu_q_moments_fast};
use freetensor_core::partitions::enumerate_pair_partitions;
use freetensor_core::tensor_trace::{tau_closed_form, tau_oracle};
use freetensor_core::{CumulantSpec, QParam, Rational, TensorParams};
use proptest::prelude::*;

fn closed_form_sum(p: usize, params: &TensorParams) -> Rational {
    enumerate_pair_partitions(p)
        .unwrap()
        .map(|pi| tau_closed_form(&pi, params).as_rational().cloned().expect("rational"))
        .sum()
}

#[test]
fn limit_of_finite_n_moments_is_mu_q() {
    let spec = CumulantSpec::new(vec![ratio(1, 2), rat(3), ratio(-1, 4), rat(2)]).unwrap();
    let params = TensorParams::from_spec(&spec).unwrap();
    let q = QParam::from_params(&params);
    for p in [2, 4, 6, 8] {
        let limit = s_n_limit(p, &spec).unwrap();
        assert_eq!(limit, mu_q_moment_fast(p, &q).unwrap(), "p = {p}");
        assert_eq!(limit, closed_form_sum(p, &params), "p = {p}");
    }
}

#[test]
fn oracle_summed_over_pairings_is_the_limit_moment() {
    let spec = CumulantSpec::new(vec![rat(2), rat(1), rat(5), rat(-3)]).unwrap();
    let q = QParam::from_params(&TensorParams::from_spec(&spec).unwrap());
    let total: Rational = enumerate_pair_partitions(6)
        .unwrap()
        .map(|pi| tau_oracle(pi.as_partition(), &spec).unwrap().as_rational().cloned().unwrap())
        .sum();
    assert_eq!(total, mu_q_moment_direct(6, &q).unwrap());
}

#[test]
fn finite_n_gaps_shrink() {
    let spec = CumulantSpec::new(vec![rat(1), rat(1), rat(0), rat(0), rat(0), rat(0)]).unwrap();
    let rows = convergence_table(6, &[4, 16, 64], &spec).unwrap();
    for p in [4, 6] {
        let gaps: Vec<f64> = rows.iter().filter(|r| r.p == p).map(|r| r.gap.as_ref().unwrap().to_f64().abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "p = {p}: {gaps:?}");
    }
}

#[test]
fn limit_moments_form_a_valid_sequence() {
    for (l, s) in [(1, 1), (1, 3), (2, 1), (0, 1)] {
        let q = QParam::from_params(&TensorParams::new(rat(l), rat(s)).unwrap());
        assert!(hankel_validity(&mu_q_moments_fast(12, &q).unwrap(), 6).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn limit_moments_depend_only_on_q(l in -6i64..=6, s in 1i64..=6, scale in 1i64..=4) {
        // (lambda, sigma^2) and (c lambda, c^2 sigma^2) share q.
        let a = TensorParams::new(rat(l), rat(s)).unwrap();
        let b = TensorParams::new(rat(l * scale), rat(s * scale * scale)).unwrap();
        prop_assert_eq!(a.q(), b.q());
        prop_assert_eq!(closed_form_sum(6, &a), closed_form_sum(6, &b));
        prop_assert_eq!(closed_form_sum(6, &a), mu_q_moment_direct(6, &QParam::from_params(&a)).unwrap());
    }
}
