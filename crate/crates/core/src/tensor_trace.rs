//! Mixed traces `tau⊗tau(pi)` of the normalized tensor variables
//! `b = (a⊗a - lambda^2) / delta`, evaluated three independent ways.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::arith::{pow2, rpow, to_fraction_string, Rational, Surd};
use crate::error::{check_cap, domain, Result};
use crate::free_moments::{canonical_labels, mixed_moment_labels, CumulantSpec};
use crate::partitions::{
    enumerate_pair_partitions, is_bipartite, noncrossing_closure, PairPartition, Partition,
};

/// Largest order accepted by the `2^p` subset expansion.
pub const ORACLE_CAP: usize = 16;

/// Mean and variance of `a`, with the derived `delta^2` and `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorParams {
    lambda: Rational,
    sigma2: Rational,
}

impl TensorParams {
    pub fn new(lambda: Rational, sigma2: Rational) -> Result<Self> {
        if !sigma2.is_positive() {
            return Err(domain("the variance sigma^2 must be positive"));
        }
        Ok(Self { lambda, sigma2 })
    }

    pub fn from_spec(spec: &CumulantSpec) -> Result<Self> {
        Self::new(spec.lambda().clone(), spec.sigma2().clone())
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    pub fn sigma2(&self) -> &Rational {
        &self.sigma2
    }

    /// `delta^2 = var(a⊗a) = sigma^2 (sigma^2 + 2 lambda^2)`.
    pub fn delta2(&self) -> Rational {
        let l2 = &self.lambda * &self.lambda;
        &self.sigma2 * (&self.sigma2 + l2 * Rational::from_integer(2.into()))
    }

    /// `q = 2 lambda^2 / (sigma^2 + 2 lambda^2)`, always in `[0, 1]`.
    pub fn q(&self) -> Rational {
        let two_l2 = &self.lambda * &self.lambda * Rational::from_integer(2.into());
        &two_l2 / (&self.sigma2 + &two_l2)
    }
}

/// The exact value of a mixed tensor trace. Odd orders may carry a
/// `1/delta` factor, hence the surd representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceValue(Surd);

impl TraceValue {
    pub fn rational(value: Rational) -> Self {
        Self(Surd::rational(value))
    }

    pub fn surd(&self) -> &Surd {
        &self.0
    }

    pub fn into_surd(self) -> Surd {
        self.0
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        self.0.as_rational()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
}

impl fmt::Display for TraceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Contribution of one connected pairing of `[2k]`: 1 for a single block,
/// `2 (q/2)^k` if its crossing graph is bipartite, else 0.
pub(crate) fn component_factor(pairing: &PairPartition, q: &Rational) -> Rational {
    let k = pairing.num_blocks();
    if k == 1 {
        Rational::one()
    } else if is_bipartite(pairing.as_partition()) {
        rpow(q, k) * pow2(1 - k as i64)
    } else {
        Rational::zero()
    }
}

/// Product over the components of the noncrossing closure of their
/// connected-pairing contributions.
pub fn tau_closed_form(pairing: &PairPartition, params: &TensorParams) -> TraceValue {
    TraceValue::rational(closed_form_q(pairing, &params.q()))
}

pub(crate) fn closed_form_q(pairing: &PairPartition, q: &Rational) -> Rational {
    let mut value = Rational::one();
    for comp in noncrossing_closure(pairing).components {
        let f = component_factor(&comp.pairing, q);
        if f.is_zero() {
            return f;
        }
        value *= f;
    }
    value
}

/// One step of [`tau_reduce_traced`]; points carry their original labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReductionStep {
    /// A block of cyclically adjacent points was removed.
    StripInterval { block: (usize, usize) },
    /// The points strictly inside `block` are matched among themselves and
    /// were split off as an independent factor.
    Factor { block: (usize, usize), inside: Vec<usize> },
    /// An irreducible remainder evaluated in closed form.
    Residual { points: Vec<usize>, pairing: String, value: String },
}

/// A pairing on an arbitrary ordered point set, in local coordinates.
struct Piece {
    points: Vec<usize>,
    partner: Vec<usize>,
}

impl Piece {
    fn remove(&self, keep: impl Fn(usize) -> bool) -> Piece {
        let m = self.points.len();
        let mut new_index = vec![usize::MAX; m];
        let mut points = Vec::new();
        for i in (0..m).filter(|&i| keep(i)) {
            new_index[i] = points.len();
            points.push(self.points[i]);
        }
        let partner = (0..m)
            .filter(|&i| keep(i))
            .map(|i| new_index[self.partner[i]])
            .collect();
        Piece { points, partner }
    }

    fn find_interval(&self) -> Option<usize> {
        let m = self.points.len();
        (0..m).find(|&i| self.partner[i] == (i + 1) % m)
    }

    fn find_closed_block(&self) -> Option<(usize, usize)> {
        let m = self.points.len();
        (0..m)
            .filter(|&i| self.partner[i] > i + 1)
            .map(|i| (i, self.partner[i]))
            .find(|&(i, j)| (i + 1..j).all(|k| self.partner[k] > i && self.partner[k] < j))
    }

    fn as_pairing(&self) -> PairPartition {
        PairPartition::from_partner(&self.partner)
    }
}

/// Evaluates by stripping cyclic interval blocks and factoring across blocks
/// whose interior is closed under the matching; what remains goes to the
/// closed form.
pub fn tau_reduce(pairing: &PairPartition, params: &TensorParams) -> TraceValue {
    tau_reduce_traced(pairing, params).0
}

pub fn tau_reduce_traced(
    pairing: &PairPartition,
    params: &TensorParams,
) -> (TraceValue, Vec<ReductionStep>) {
    let q = params.q();
    let mut steps = Vec::new();
    let mut value = Rational::one();
    let mut work = vec![Piece {
        points: (1..=pairing.p()).collect(),
        partner: pairing.partner(),
    }];
    while let Some(mut piece) = work.pop() {
        loop {
            if piece.points.is_empty() {
                break;
            }
            if let Some(i) = piece.find_interval() {
                let j = piece.partner[i];
                let (a, b) = (piece.points[i.min(j)], piece.points[i.max(j)]);
                steps.push(ReductionStep::StripInterval { block: (a, b) });
                piece = piece.remove(|k| k != i && k != j);
                continue;
            }
            if let Some((i, j)) = piece.find_closed_block() {
                let inside = piece.remove(|k| k > i && k < j);
                steps.push(ReductionStep::Factor {
                    block: (piece.points[i], piece.points[j]),
                    inside: inside.points.clone(),
                });
                work.push(inside);
                piece = piece.remove(|k| k <= i || k >= j);
                continue;
            }
            let residual = piece.as_pairing();
            let v = closed_form_q(&residual, &q);
            steps.push(ReductionStep::Residual {
                points: piece.points.clone(),
                pairing: residual.to_string(),
                value: to_fraction_string(&v),
            });
            value *= v;
            break;
        }
    }
    (TraceValue::rational(value), steps)
}

/// The defining expansion
/// `delta^{-p} sum_{I ⊆ [p]} (-lambda^2)^{|I|} tau(prod_{l ∉ I} a_{i_l})^2`
/// for the index kernel `partition`, with free mixed moments of `a`
/// determined by `spec`.
pub fn tau_oracle(partition: &Partition, spec: &CumulantSpec) -> Result<TraceValue> {
    let params = TensorParams::from_spec(spec)?;
    let sum = expansion_sum(partition, spec)?;
    Ok(TraceValue(scale_by_inverse_root(sum, &params.delta2(), partition.p())))
}

/// `x * r^{-p/2}` as an exact surd.
pub(crate) fn scale_by_inverse_root(x: Rational, r: &Rational, p: usize) -> Surd {
    if p.is_multiple_of(2) {
        Surd::rational(x / rpow(r, p / 2))
    } else {
        // r^{-p/2} = r^{-(p+1)/2} sqrt(r)
        Surd::new(x / rpow(r, p.div_ceil(2)), r.clone())
    }
}

/// The subset sum of [`tau_oracle`] before division by `delta^p`.
pub(crate) fn expansion_sum(partition: &Partition, spec: &CumulantSpec) -> Result<Rational> {
    TensorParams::from_spec(spec)?;
    let p = partition.p();
    check_cap("tau_oracle order", p, ORACLE_CAP)?;
    if partition.has_singleton() {
        return Ok(Rational::zero());
    }
    spec.require_order(partition.max_block_size())?;

    let labels: Vec<u8> = partition.block_labels().iter().map(|&l| l as u8).collect();
    let neg_l2 = -(spec.lambda() * spec.lambda());
    let weights: Vec<Rational> = (0..=p).map(|k| rpow(&neg_l2, k)).collect();
    let full: u32 = if p == 0 { 0 } else { u32::MAX >> (32 - p) };

    let mut cache: HashMap<Vec<u8>, Rational> = HashMap::new();
    let mut sum = Rational::zero();
    let mut subword = Vec::with_capacity(p);
    for removed in 0..=full {
        if removed != 0 && neg_l2.is_zero() {
            break;
        }
        subword.clear();
        subword.extend((0..p).filter(|&i| removed & (1 << i) == 0).map(|i| labels[i]));
        let key = canonical_labels(&subword);
        let moment = match cache.get(&key) {
            Some(m) => m.clone(),
            None => {
                let m = mixed_moment_labels(&key, spec)?;
                cache.insert(key, m.clone());
                m
            }
        };
        if moment.is_zero() {
            continue;
        }
        sum += &weights[removed.count_ones() as usize] * &moment * &moment;
    }
    Ok(sum)
}

/// `sum_{pi in P_2(p)} tau_oracle(pi, spec)`: the even moment of the limit
/// law as seen by `spec`.
pub fn pairing_sum(p: usize, spec: &CumulantSpec) -> Result<Rational> {
    let mut total = Rational::zero();
    for pairing in enumerate_pair_partitions(p)? {
        let v = tau_oracle(pairing.as_partition(), spec)?;
        total += v.as_rational().expect("even order is rational");
    }
    Ok(total)
}

/// Whether two specs with the same mean and variance give the same
/// pair-partition sum at order `p`.
pub fn universality_check(p: usize, a: &CumulantSpec, b: &CumulantSpec) -> Result<bool> {
    if a.lambda() != b.lambda() || a.sigma2() != b.sigma2() {
        return Err(domain("universality compares specs with equal kappa_1 and kappa_2"));
    }
    Ok(pairing_sum(p, a)? == pairing_sum(p, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, ratio};
    use crate::free_moments::{free_cumulants_from_moments, MomentTable, Tail};
    use crate::partitions::{enumerate_pair_partitions, enumerate_set_partitions, is_noncrossing};
    use proptest::prelude::*;

    fn spec(k: &[i64]) -> CumulantSpec {
        CumulantSpec::from_integers(k, Tail::Truncated).unwrap()
    }

    fn pp(s: &str) -> PairPartition {
        s.parse().unwrap()
    }

    fn part(s: &str) -> Partition {
        s.parse().unwrap()
    }

    fn two_thirds() -> TensorParams {
        TensorParams::new(rat(1), rat(1)).unwrap()
    }

    fn rational(v: TraceValue) -> Rational {
        v.as_rational().unwrap().clone()
    }

    /// Free mixed moment by explicit summation over NC(m).
    fn nc_moment(word: &[usize], s: &CumulantSpec) -> Rational {
        if word.is_empty() {
            return rat(1);
        }
        enumerate_set_partitions(word.len(), 1)
            .unwrap()
            .filter(is_noncrossing)
            .filter(|pi| pi.blocks().iter().all(|b| b.iter().all(|&x| word[x - 1] == word[b[0] - 1])))
            .map(|pi| pi.blocks().iter().map(|b| s.kappa(b.len()).unwrap()).fold(rat(1), |a, k| a * k))
            .fold(rat(0), |a, t| a + t)
    }

    /// Independent oracle: expands the product of `a⊗a - lambda^2` letter by
    /// letter, with the tensor legs evaluated by NC(m) summation.
    fn brute_expansion(partition: &Partition, s: &CumulantSpec) -> Rational {
        let p = partition.p();
        let labels: Vec<usize> = partition.block_labels().iter().map(|l| l + 1).collect();
        let l2 = s.lambda() * s.lambda();
        let mut total = Rational::zero();
        for mask in 0u32..(1 << p) {
            let kept: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).map(|i| labels[i]).collect();
            let m = nc_moment(&kept, s);
            let removed = p - mask.count_ones() as usize;
            let sign = if removed.is_multiple_of(2) { rat(1) } else { rat(-1) };
            total += sign * rpow(&l2, removed) * &m * &m;
        }
        let params = TensorParams::from_spec(s).unwrap();
        total / rpow(&params.delta2(), p / 2)
    }

    #[test]
    fn params_derived_values() {
        let t = two_thirds();
        assert_eq!(t.delta2(), rat(3));
        assert_eq!(t.q(), ratio(2, 3));
        let centered = TensorParams::new(rat(0), ratio(1, 2)).unwrap();
        assert_eq!(centered.q(), rat(0));
        assert!(TensorParams::new(rat(1), rat(0)).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let t = two_thirds();
        assert_eq!(rational(tau_closed_form(&pp("1,2|3,4"), &t)), rat(1));
        assert_eq!(rational(tau_closed_form(&pp("1,3|2,4"), &t)), ratio(2, 9));
        assert_eq!(rational(tau_closed_form(&pp("1,4|2,5|3,6"), &t)), rat(0));
    }

    #[test]
    fn reduce_examples() {
        let t = two_thirds();
        let (v, steps) = tau_reduce_traced(&pp("1,4|2,3"), &t);
        assert_eq!(rational(v), rat(1));
        assert_eq!(steps.len(), 2);
        assert!(steps.iter().all(|s| matches!(s, ReductionStep::StripInterval { .. })));

        assert_eq!(rational(tau_reduce(&pp("1,6|2,4|3,5"), &t)), ratio(2, 9));

        let (v, steps) = tau_reduce_traced(&pp("1,3|2,4"), &t);
        assert_eq!(rational(v), ratio(2, 9));
        assert!(matches!(steps.as_slice(), [ReductionStep::Residual { .. }]));
    }

    #[test]
    fn reduce_factors_across_closed_blocks() {
        let t = two_thirds();
        let pairing = pp("1,3|2,4|5,10|6,8|7,9");
        let (v, steps) = tau_reduce_traced(&pairing, &t);
        assert!(steps.iter().any(|s| matches!(
            s,
            ReductionStep::Factor { block: (5, 10), .. }
        )));
        assert_eq!(rational(v), ratio(4, 81));
    }

    #[test]
    fn oracle_examples() {
        let s = spec(&[1, 1, 0, 0]);
        assert!(tau_oracle(&part("1|2,3"), &s).unwrap().is_zero());
        assert_eq!(rational(tau_oracle(&part("1,3|2,4"), &s).unwrap()), ratio(2, 9));
        let centered = spec(&[0, 1, 0, 0]);
        assert_eq!(rational(tau_oracle(&part("1,2,3,4"), &centered).unwrap()), rat(4));
        let empty = Partition::new(0, vec![]).unwrap();
        assert_eq!(rational(tau_oracle(&empty, &s).unwrap()), rat(1));
    }

    #[test]
    fn oracle_guards() {
        let p18 = Partition::new(18, vec![(1..=18).collect()]).unwrap();
        assert!(matches!(tau_oracle(&p18, &spec(&[0, 1])), Err(crate::Error::Size { .. })));
        assert!(matches!(
            tau_oracle(&part("1,2,3"), &spec(&[1, 1])),
            Err(crate::Error::Truncation { required: 3, .. })
        ));
    }

    #[test]
    fn odd_order_carries_inverse_delta() {
        // tau⊗tau on {1,2,3} with lambda = 1, sigma^2 = 1 and a zero tail:
        // (tau(a^3)^2 - 3 tau(a^2)^2 + 3 tau(a)^2 - 1) / delta^3 with moments 1, 2, 4.
        let s = CumulantSpec::with_zero_tail(vec![rat(1), rat(1)]).unwrap();
        let v = tau_oracle(&part("1,2,3"), &s).unwrap();
        // (16 - 12 + 3 - 1) / 3^{3/2} = 6 / (3 sqrt 3) = (2/3) sqrt 3
        assert_eq!(v.surd(), &Surd::new(ratio(2, 3), rat(3)));
    }

    #[test]
    fn oracle_matches_brute_expansion() {
        for s in [spec(&[1, 1, 0, 0]), spec(&[2, 3, -1, 5]), spec(&[-1, 2, 1, 0])] {
            for p in 2..=6 {
                for pi in enumerate_set_partitions(p, 2).unwrap().filter(|pi| pi.max_block_size() <= 4) {
                    if p % 2 == 1 {
                        continue;
                    }
                    assert_eq!(rational(tau_oracle(&pi, &s).unwrap()), brute_expansion(&pi, &s), "{pi}");
                }
            }
        }
    }

    #[test]
    fn three_routes_agree_through_eight() {
        let s = spec(&[1, 1, 0, 0]);
        let t = TensorParams::from_spec(&s).unwrap();
        for p in [2, 4, 6, 8] {
            for pi in enumerate_pair_partitions(p).unwrap() {
                let oracle = rational(tau_oracle(pi.as_partition(), &s).unwrap());
                assert_eq!(oracle, rational(tau_closed_form(&pi, &t)), "{pi}");
                assert_eq!(oracle, rational(tau_reduce(&pi, &t)), "{pi}");
            }
        }
    }

    #[test]
    fn noncrossing_pairings_evaluate_to_one() {
        let s = spec(&[3, 2, 0, 0]);
        for pi in enumerate_pair_partitions(8).unwrap().filter(|pi| is_noncrossing(pi.as_partition())) {
            assert_eq!(rational(tau_oracle(pi.as_partition(), &s).unwrap()), rat(1));
        }
    }

    #[test]
    fn multiplicativity_over_closure_components() {
        let s = spec(&[1, 2, 0, 0]);
        for p in [4, 6, 8] {
            for pi in enumerate_pair_partitions(p).unwrap() {
                let whole = rational(tau_oracle(pi.as_partition(), &s).unwrap());
                let product = noncrossing_closure(&pi)
                    .components
                    .iter()
                    .map(|c| rational(tau_oracle(c.pairing.as_partition(), &s).unwrap()))
                    .fold(rat(1), |acc, v| acc * v);
                assert_eq!(whole, product, "{pi}");
            }
        }
    }

    #[test]
    fn universality_examples() {
        assert!(universality_check(2, &spec(&[1, 1, 0, 0]), &spec(&[1, 1, 7, -3])).unwrap());
        let a = spec(&[0, 1, 0, 0, 0, 0]);
        let b = spec(&[0, 1, 0, -1, 0, 2]);
        assert!(universality_check(6, &a, &b).unwrap());
        // Two-point law on {0, 2}: mean 1, variance 1, m_k = 2^{k-1}.
        let m: Vec<Rational> = (0..=4).map(|k| if k == 0 { rat(1) } else { pow2(k - 1) }).collect();
        let two_point = free_cumulants_from_moments(&MomentTable::new(m).unwrap(), 4).unwrap();
        assert!(universality_check(4, &spec(&[1, 1, 0, 0]), &two_point).unwrap());
        assert!(universality_check(4, &spec(&[1, 1, 0, 0]), &spec(&[0, 1, 0, 0])).is_err());
    }

    fn arb_pairing(max_pairs: usize) -> impl Strategy<Value = PairPartition> {
        (1..=max_pairs)
            .prop_flat_map(|k| Just((0..2 * k).collect::<Vec<usize>>()).prop_shuffle())
            .prop_map(|perm| {
                let mut partner = vec![0; perm.len()];
                for c in perm.chunks(2) {
                    partner[c[0]] = c[1];
                    partner[c[1]] = c[0];
                }
                PairPartition::from_partner(&partner)
            })
    }

    fn arb_q() -> impl Strategy<Value = Rational> {
        (0i64..=12).prop_map(|n| ratio(n, 12))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cyclic_invariance(pi in arb_pairing(4), shift in 0usize..8) {
            let s = spec(&[1, 2, 0, 0]);
            let a = tau_oracle(pi.as_partition(), &s).unwrap();
            let b = tau_oracle(&pi.as_partition().rotate(shift), &s).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn cyclic_invariance_general(shift in 0usize..6, k in 0usize..203) {
            let s = spec(&[2, 1, 1, -1, 0, 0]);
            if let Some(pi) = enumerate_set_partitions(6, 1).unwrap().nth(k) {
                let a = tau_oracle(&pi, &s).unwrap();
                let b = tau_oracle(&pi.rotate(shift), &s).unwrap();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn adjacent_pair_insertion_is_neutral(k in 0usize..203, at in 0usize..7) {
            let s = spec(&[1, 2, 1, 0, 0, 0]);
            let pi = match enumerate_set_partitions(6, 1).unwrap().nth(k) {
                Some(pi) => pi,
                None => return Ok(()),
            };
            let at = at.min(pi.p());
            // Shift elements >= at + 1 by two and insert {at + 1, at + 2}.
            let shift = |x: usize| if x > at { x + 2 } else { x };
            let mut blocks: Vec<Vec<usize>> = pi.blocks().iter().map(|b| b.iter().map(|&x| shift(x)).collect()).collect();
            blocks.push(vec![at + 1, at + 2]);
            let bigger = Partition::new(pi.p() + 2, blocks).unwrap();
            let a = tau_oracle(&pi, &s).unwrap();
            let b = tau_oracle(&bigger, &s).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn singletons_vanish(k in 0usize..203) {
            let s = spec(&[3, 1, 2, 1, 0, 0]);
            let pi = enumerate_set_partitions(6, 1).unwrap().nth(k).unwrap();
            if pi.has_singleton() {
                prop_assert!(tau_oracle(&pi, &s).unwrap().is_zero());
            }
        }

        #[test]
        fn closed_form_in_unit_interval(pi in arb_pairing(7), q in arb_q()) {
            let v = closed_form_q(&pi, &q);
            prop_assert!(v >= rat(0) && v <= rat(1));
        }

        #[test]
        fn reduction_matches_closed_form(pi in arb_pairing(8), n in 0i64..6, d in 1i64..4) {
            let t = TensorParams::new(ratio(n, d), ratio(d, 2)).unwrap();
            prop_assert_eq!(tau_reduce(&pi, &t), tau_closed_form(&pi, &t));
        }
    }
}
