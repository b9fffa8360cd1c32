//! Moments and free cumulants of the limit law `mu_q`.
//!
//! Two routes are kept deliberately separate: a weighted count over
//! bipartite pairings, and the moment recursion driven by the free cumulants.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::arith::{binomial, catalan, pow2, rpow, Rational};
use crate::error::{domain, Result};
use crate::free_moments::{
    free_cumulants_from_moments, moments_from_free_cumulants, mu1_moments, CumulantSpec,
    MomentTable,
};
use crate::partitions::{
    count_bipartite_connected, IntersectionGraph, PairPartitions, DEFAULT_PAIR_CAP,
};
use crate::tensor_trace::TensorParams;

/// The interpolation parameter, an exact rational in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QParam(Rational);

impl QParam {
    pub fn new(q: Rational) -> Result<Self> {
        if q.is_negative() || q > Rational::one() {
            return Err(domain(format!("q = {q} is outside [0, 1]")));
        }
        Ok(Self(q))
    }

    /// `q = 2 lambda^2 / (sigma^2 + 2 lambda^2)`.
    pub fn from_params(params: &TensorParams) -> Self {
        Self(params.q())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }
}

/// Moments and free cumulants of `mu_q` up to a common order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LimitLawTable {
    pub q: QParam,
    pub moments: MomentTable,
    pub cumulants: CumulantSpec,
}

/// Histogram of `(cc, cr)` over bipartite pairings of `[order]`.
type CrossingHistogram = Vec<((usize, usize), u64)>;

fn histogram_memo() -> &'static Mutex<HashMap<usize, CrossingHistogram>> {
    static MEMO: OnceLock<Mutex<HashMap<usize, CrossingHistogram>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

fn bipartite_histogram(order: usize) -> Result<CrossingHistogram> {
    PairPartitions::with_first_partner(order, 2, DEFAULT_PAIR_CAP)?;
    if let Some(h) = histogram_memo().lock().unwrap().get(&order) {
        return Ok(h.clone());
    }
    let merged = (2..=order)
        .into_par_iter()
        .map(|first| {
            let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
            for pi in PairPartitions::with_first_partner(order, first, DEFAULT_PAIR_CAP).expect("validated") {
                let graph = IntersectionGraph::new(pi.as_partition());
                if !graph.is_bipartite() {
                    continue;
                }
                let cc = graph.components().len();
                let cr = (0..graph.num_vertices()).filter(|&v| graph.degree(v) > 0).count();
                *counts.entry((cc, cr)).or_default() += 1;
            }
            counts
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let mut hist: CrossingHistogram = merged.into_iter().collect();
    hist.sort_unstable();
    histogram_memo().lock().unwrap().insert(order, hist.clone());
    Ok(hist)
}

/// `m_{2p}(mu_q) = sum over bipartite pairings of [2p] of 2^{cc - p} q^{cr}`.
/// Odd orders vanish.
pub fn mu_q_moment_direct(order: usize, q: &QParam) -> Result<Rational> {
    if order == 0 {
        return Ok(Rational::one());
    }
    if order % 2 == 1 {
        return Ok(Rational::zero());
    }
    let half = (order / 2) as i64;
    let mut total = Rational::zero();
    for ((cc, cr), count) in bipartite_histogram(order)? {
        total += Rational::from_integer(BigInt::from(count)) * pow2(cc as i64 - half) * rpow(q.value(), cr);
    }
    Ok(total)
}

/// `kappa_n(mu_q)`: 1 for `n = 2`, zero for odd `n`, and
/// `2 (q/2)^{n/2}` times the number of bipartite connected pairings of `[n]` otherwise.
pub fn mu_q_cumulant(n: usize, q: &QParam) -> Result<Rational> {
    if n == 0 {
        return Err(domain("free cumulants are indexed from 1"));
    }
    if n % 2 == 1 {
        return Ok(Rational::zero());
    }
    if n == 2 {
        return Ok(Rational::one());
    }
    let half = n / 2;
    let count = count_bipartite_connected(n)?;
    Ok(Rational::from_integer(BigInt::from(count)) * rpow(q.value(), half) * pow2(1 - half as i64))
}

/// `kappa_n(mu_q)` from additivity of the R-transform under the defining
/// convolution: `q^{n/2} kappa_n(mu_1) + (1 - q)^{n/2} kappa_n(mu_sc)`, with
/// `kappa_n(mu_1)` obtained by inverting the moments of `mu_1`.
pub fn mu_q_cumulant_additive(n: usize, q: &QParam) -> Result<Rational> {
    if n == 0 {
        return Err(domain("free cumulants are indexed from 1"));
    }
    if n % 2 == 1 {
        return Ok(Rational::zero());
    }
    let half = n / 2;
    let mu1 = free_cumulants_from_moments(&mu1_moments(n), n)?;
    let from_mu1 = rpow(q.value(), half) * &mu1.kappas()[n - 1];
    let from_sc = if n == 2 {
        Rational::one() - q.value()
    } else {
        Rational::zero()
    };
    Ok(from_mu1 + from_sc)
}

/// `(kappa_1, ..., kappa_order)` of `mu_q`, truncated at `order`.
pub fn mu_q_cumulants(order: usize, q: &QParam) -> Result<CumulantSpec> {
    let kappas = (1..=order.max(2)).map(|n| mu_q_cumulant(n, q)).collect::<Result<_>>()?;
    CumulantSpec::new(kappas)
}

/// Moments of `mu_q` to `order` through the free moment recursion.
pub fn mu_q_moments_fast(order: usize, q: &QParam) -> Result<MomentTable> {
    moments_from_free_cumulants(&mu_q_cumulants(order, q)?, order)
}

pub fn mu_q_moment_fast(order: usize, q: &QParam) -> Result<Rational> {
    Ok(mu_q_moments_fast(order, q)?[order].clone())
}

pub fn limit_law_table(order: usize, q: &QParam) -> Result<LimitLawTable> {
    let cumulants = mu_q_cumulants(order, q)?;
    let moments = moments_from_free_cumulants(&cumulants, order)?;
    Ok(LimitLawTable {
        q: q.clone(),
        moments,
        cumulants,
    })
}

/// Checks `sum_l binom(2p, 2l) C_l C_{p-l} = C_p C_{p+1}` for every `p <= pmax`.
pub fn catalan_product_identity(pmax: u64) -> bool {
    (0..=pmax).all(|p| {
        let lhs: BigInt = (0..=p)
            .map(|l| binomial(2 * p, 2 * l) * catalan(l) * catalan(p - l))
            .sum();
        lhs == catalan(p) * catalan(p + 1)
    })
}

/// Whether the Hankel matrix `(m_{i+j})_{0 <= i, j <= k}` is positive
/// semidefinite, decided by exact symmetric elimination.
pub fn hankel_validity(moments: &MomentTable, k: usize) -> Result<bool> {
    if moments.order() < 2 * k {
        return Err(domain(format!(
            "a Hankel check of size {k} needs moments to order {}",
            2 * k
        )));
    }
    let n = k + 1;
    let mut a: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| moments[i + j].clone()).collect())
        .collect();
    for col in 0..n {
        let pivot = a[col][col].clone();
        if pivot.is_negative() {
            return Ok(false);
        }
        if pivot.is_zero() {
            // A PSD matrix with a zero diagonal entry has a zero row there.
            if a[col][col + 1..].iter().any(|x| !x.is_zero()) {
                return Ok(false);
            }
            continue;
        }
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = &a[row][col] / &pivot;
            let (upper, lower) = a.split_at_mut(row);
            for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= &factor * y;
            }
        }
    }
    Ok(true)
}
