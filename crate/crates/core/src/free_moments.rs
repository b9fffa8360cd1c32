//! Moment/free-cumulant transforms and mixed moments of free identically
//! distributed families, all in exact rational arithmetic.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::arith::{binomial, catalan, pow2, Rational};
use crate::error::{domain, Error, Result};

/// How cumulants beyond the listed orders are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tail {
    /// Higher cumulants are unknown; asking for one is an error.
    Truncated,
    /// Higher cumulants are declared to be zero (e.g. shifted semicircles).
    Zero,
}

/// Free cumulants `(kappa_1, ..., kappa_K)` of a scalar variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulantSpec {
    kappas: Vec<Rational>,
    tail: Tail,
}

impl CumulantSpec {
    /// Truncated: cumulants beyond `kappas.len()` are unknown.
    pub fn new(kappas: Vec<Rational>) -> Result<Self> {
        Self::build(kappas, Tail::Truncated)
    }

    /// Cumulants beyond `kappas.len()` all vanish.
    pub fn with_zero_tail(kappas: Vec<Rational>) -> Result<Self> {
        Self::build(kappas, Tail::Zero)
    }

    pub fn from_integers(kappas: &[i64], tail: Tail) -> Result<Self> {
        let kappas = kappas.iter().map(|&k| Rational::from_integer(BigInt::from(k))).collect();
        Self::build(kappas, tail)
    }

    fn build(kappas: Vec<Rational>, tail: Tail) -> Result<Self> {
        if kappas.len() < 2 {
            return Err(domain("a cumulant spec needs at least kappa_1 and kappa_2"));
        }
        Ok(Self { kappas, tail })
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.kappas.len()
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn kappas(&self) -> &[Rational] {
        &self.kappas
    }

    /// Mean `lambda = kappa_1`.
    pub fn lambda(&self) -> &Rational {
        &self.kappas[0]
    }

    /// Variance `sigma^2 = kappa_2`.
    pub fn sigma2(&self) -> &Rational {
        &self.kappas[1]
    }

    pub fn covers(&self, n: usize) -> bool {
        n <= self.kappas.len() || self.tail == Tail::Zero
    }

    pub fn require_order(&self, n: usize) -> Result<()> {
        if self.covers(n) {
            Ok(())
        } else {
            Err(Error::Truncation {
                required: n,
                available: self.kappas.len(),
            })
        }
    }

    /// `kappa_n` for `n >= 1`.
    pub fn kappa(&self, n: usize) -> Result<Rational> {
        assert!(n >= 1, "cumulants are indexed from 1");
        self.require_order(n)?;
        Ok(self.kappas.get(n - 1).cloned().unwrap_or_else(Rational::zero))
    }
}

/// Exact moments `(m_0 = 1, m_1, ..., m_N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentTable {
    moments: Vec<Rational>,
}

impl MomentTable {
    pub fn new(moments: Vec<Rational>) -> Result<Self> {
        match moments.first() {
            Some(m0) if m0.is_one() => Ok(Self { moments }),
            _ => Err(domain("a moment table must start with m_0 = 1")),
        }
    }

    /// Highest available order `N`.
    pub fn order(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn get(&self, n: usize) -> Option<&Rational> {
        self.moments.get(n)
    }

    pub fn moments(&self) -> &[Rational] {
        &self.moments
    }

    pub fn into_vec(self) -> Vec<Rational> {
        self.moments
    }
}

impl std::ops::Index<usize> for MomentTable {
    type Output = Rational;

    fn index(&self, n: usize) -> &Rational {
        &self.moments[n]
    }
}

/// Index word `(i_1, ..., i_m)`: equal entries are the same variable,
/// distinct entries are free copies.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    indices: Vec<usize>,
}

impl Word {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.contains(&0) {
            return Err(domain("word indices must be positive"));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Relabels by first occurrence; only the kernel of the word matters.
    pub fn canonical_labels(&self) -> Vec<u8> {
        canonical_labels(&self.indices)
    }

    pub fn max_multiplicity(&self) -> usize {
        max_multiplicity(&self.canonical_labels())
    }
}

pub(crate) fn canonical_labels<T: PartialEq + Copy>(word: &[T]) -> Vec<u8> {
    let mut seen: Vec<T> = Vec::new();
    word.iter()
        .map(|x| match seen.iter().position(|y| y == x) {
            Some(i) => i as u8,
            None => {
                seen.push(*x);
                (seen.len() - 1) as u8
            }
        })
        .collect()
}

fn max_multiplicity(labels: &[u8]) -> usize {
    let mut counts = [0usize; 256];
    for &l in labels {
        counts[l as usize] += 1;
    }
    counts.iter().copied().max().unwrap_or(0)
}

/// Running table of `[z^k] M(z)^s` where `M(z) = sum_k m_k z^k`, filled in
/// as moments become known. Drives the first-block recursion
/// `m_n = sum_s kappa_s [z^{n-s}] M(z)^s` in both directions.
struct PowerTable {
    moments: Vec<Rational>,
    // coeffs[s][k] = [z^k] M(z)^s
    coeffs: Vec<Vec<Rational>>,
}

impl PowerTable {
    fn new(max_order: usize) -> Self {
        let mut coeffs = vec![Vec::with_capacity(max_order + 1); max_order + 1];
        for row in coeffs.iter_mut() {
            row.push(Rational::one());
        }
        Self {
            moments: vec![Rational::one()],
            coeffs,
        }
    }

    /// `sum_{s=1}^{n-1} kappa_s [z^{n-s}] M^s`, the part of `m_n` not involving `kappa_n`.
    fn lower_terms(&self, n: usize, kappas: &[Rational]) -> Rational {
        (1..n)
            .map(|s| &kappas[s - 1] * &self.coeffs[s][n - s])
            .fold(Rational::zero(), |acc, t| acc + t)
    }

    fn push_moment(&mut self, m: Rational) {
        self.moments.push(m);
        let k = self.moments.len() - 1;
        self.coeffs[0].push(Rational::zero());
        for s in 1..self.coeffs.len() {
            let c = (0..=k)
                .map(|j| &self.moments[j] * &self.coeffs[s - 1][k - j])
                .fold(Rational::zero(), |acc, t| acc + t);
            self.coeffs[s].push(c);
        }
    }
}

/// Moments `m_0..m_N` from free cumulants by the first-block recursion.
pub fn moments_from_free_cumulants(spec: &CumulantSpec, order: usize) -> Result<MomentTable> {
    spec.require_order(order)?;
    let kappas: Vec<Rational> = (1..=order).map(|s| spec.kappa(s)).collect::<Result<_>>()?;
    let mut table = PowerTable::new(order);
    for n in 1..=order {
        let m = table.lower_terms(n, &kappas) + &kappas[n - 1];
        table.push_moment(m);
    }
    Ok(MomentTable { moments: table.moments })
}

/// Inverts [`moments_from_free_cumulants`]: the unique free cumulants of order
/// `1..=N` reproducing the given moments. The result is truncated at `N`.
pub fn free_cumulants_from_moments(moments: &MomentTable, order: usize) -> Result<CumulantSpec> {
    if order > moments.order() {
        return Err(domain(format!(
            "moments are known to order {} but order {order} was requested",
            moments.order()
        )));
    }
    let mut table = PowerTable::new(order);
    let mut kappas: Vec<Rational> = Vec::with_capacity(order);
    for n in 1..=order {
        let kappa = &moments[n] - table.lower_terms(n, &kappas);
        kappas.push(kappa);
        table.push_moment(moments[n].clone());
    }
    CumulantSpec::new(kappas)
}

/// `tau(a_{i_1} ... a_{i_m})` for an i.i.d. free family whose common law has
/// free cumulants `spec`: the sum over noncrossing partitions with
/// monochromatic blocks of the product of `kappa_{|V|}`.
pub fn mixed_moment(word: &Word, spec: &CumulantSpec) -> Result<Rational> {
    mixed_moment_labels(&word.canonical_labels(), spec)
}

pub(crate) fn mixed_moment_labels(labels: &[u8], spec: &CumulantSpec) -> Result<Rational> {
    let need = max_multiplicity(labels);
    if need == 0 {
        return Ok(Rational::one());
    }
    spec.require_order(need)?;
    let kappas: Vec<Rational> = (1..=need).map(|s| spec.kappa(s)).collect::<Result<_>>()?;
    Ok(NcMomentSolver::new(labels, &kappas).interval(0, labels.len()))
}

/// Interval dynamic program over the block containing the leftmost letter:
/// its remaining elements split the word into gaps that are partitioned
/// independently.
struct NcMomentSolver<'a> {
    word: &'a [u8],
    kappas: &'a [Rational],
    len: usize,
    // interval[i * (len + 1) + j] = moment of word[i..j]
    interval: Vec<Option<Rational>>,
    // chain[(k, j, s)] = sum over choices of s - 1 further same-colored
    // positions in (k, j) of the product of gap moments
    chain: Vec<Option<Rational>>,
}

impl<'a> NcMomentSolver<'a> {
    fn new(word: &'a [u8], kappas: &'a [Rational]) -> Self {
        let len = word.len();
        Self {
            word,
            kappas,
            len,
            interval: vec![None; (len + 1) * (len + 1)],
            chain: vec![None; (len + 1) * (len + 1) * (kappas.len() + 1)],
        }
    }

    fn interval(&mut self, i: usize, j: usize) -> Rational {
        if i == j {
            return Rational::one();
        }
        let key = i * (self.len + 1) + j;
        if let Some(v) = &self.interval[key] {
            return v.clone();
        }
        let color = self.word[i];
        let available = self.word[i..j].iter().filter(|&&c| c == color).count();
        let mut total = Rational::zero();
        for s in 1..=available.min(self.kappas.len()) {
            if self.kappas[s - 1].is_zero() {
                continue;
            }
            let c = self.chain(i, j, s);
            if !c.is_zero() {
                total += &self.kappas[s - 1] * c;
            }
        }
        self.interval[key] = Some(total.clone());
        total
    }

    fn chain(&mut self, k: usize, j: usize, s: usize) -> Rational {
        if s == 1 {
            return self.interval(k + 1, j);
        }
        let key = (k * (self.len + 1) + j) * (self.kappas.len() + 1) + s;
        if let Some(v) = &self.chain[key] {
            return v.clone();
        }
        let color = self.word[k];
        let mut total = Rational::zero();
        for l in k + 1..j {
            if self.word[l] != color {
                continue;
            }
            let gap = self.interval(k + 1, l);
            if gap.is_zero() {
                continue;
            }
            let rest = self.chain(l, j, s - 1);
            total += gap * rest;
        }
        self.chain[key] = Some(total.clone());
        total
    }
}

/// Moments of the classical convolution of two semicircles scaled by
/// `1/sqrt(2)`: `m_{2p} = 2^{-p} sum_l binom(2p, 2l) C_l C_{p-l}`, odd moments zero.
pub fn mu1_moments(order: usize) -> MomentTable {
    let moments = (0..=order)
        .map(|n| {
            if n % 2 == 1 {
                return Rational::zero();
            }
            let p = (n / 2) as u64;
            let sum: BigInt = (0..=p)
                .map(|l| binomial(2 * p, 2 * l) * catalan(l) * catalan(p - l))
                .sum();
            Rational::from_integer(sum) * pow2(-(p as i64))
        })
        .collect();
    MomentTable { moments }
}
