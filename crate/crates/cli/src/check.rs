//! Self-check suite: cross-route agreement and structural invariants.

use clap::ValueEnum;
use freetensor_core::arith::{catalan, pairings_count, pow2, rat, ratio};
use freetensor_core::clt::{s_n_limit, s_n_moment};
use freetensor_core::free_moments::{
    free_cumulants_from_moments, mixed_moment, moments_from_free_cumulants, Tail, Word,
};
use freetensor_core::limit_law::{
    catalan_product_identity, hankel_validity, mu_q_cumulant, mu_q_cumulant_additive,
    mu_q_moment_direct, mu_q_moment_fast, mu_q_moments_fast,
};
use freetensor_core::partitions::{
    enumerate_pair_partitions, enumerate_set_partitions, is_connected, is_connected_by_intervals,
    is_noncrossing, noncrossing_closure, stats,
};
use freetensor_core::tensor_trace::{pairing_sum, tau_closed_form, tau_oracle, tau_reduce};
use freetensor_core::{CumulantSpec, MomentTable, QParam, Rational, TensorParams};
use num_traits::ToPrimitive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

pub struct CheckOutcome {
    pub name: &'static str,
    pub result: Result<String, String>,
}

type Check = fn(Level) -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: freetensor_core::Error) -> String {
    e.to_string()
}

fn pick(level: Level, quick: usize, full: usize) -> usize {
    match level {
        Level::Quick => quick,
        Level::Full => full,
    }
}

fn spec(k: &[i64]) -> CumulantSpec {
    CumulantSpec::from_integers(k, Tail::Truncated).expect("at least two cumulants")
}

fn q_grid() -> Vec<QParam> {
    (0..=4).map(|k| QParam::new(ratio(k, 4)).expect("in range")).collect()
}

fn pair_enumeration(level: Level) -> Result<String, String> {
    let max = pick(level, 8, 12);
    for p in (2..=max).step_by(2) {
        let (mut total, mut nc) = (0u64, 0u64);
        for pi in enumerate_pair_partitions(p).map_err(err)? {
            total += 1;
            let st = stats(pi.as_partition());
            ensure(st.cr + st.ncr == st.num_blocks, || format!("{pi}: cr + ncr != |pi|"))?;
            if st.cr == 0 {
                nc += 1;
            }
        }
        ensure(Some(total) == pairings_count(p as u64).to_u64(), || format!("p = {p}: {total}"))?;
        ensure(Some(nc) == catalan(p as u64 / 2).to_u64(), || format!("p = {p}: {nc} noncrossing"))?;
    }
    Ok(format!("p <= {max}"))
}

fn closure_round_trip(level: Level) -> Result<String, String> {
    let max = pick(level, 8, 10);
    for p in (2..=max).step_by(2) {
        for pi in enumerate_pair_partitions(p).map_err(err)? {
            let dec = noncrossing_closure(&pi);
            ensure(dec.reassemble() == pi, || format!("{pi} does not reassemble"))?;
            ensure(is_noncrossing(&dec.closure), || format!("closure of {pi} crosses"))?;
            ensure(dec.closure.num_blocks() == stats(pi.as_partition()).cc, || format!("{pi}: |closure| != cc"))?;
        }
    }
    Ok(format!("p <= {max}"))
}

fn connectedness_definitions(level: Level) -> Result<String, String> {
    let max = pick(level, 8, 10);
    for p in (2..=max).step_by(2) {
        for pi in enumerate_pair_partitions(p).map_err(err)? {
            let part = pi.as_partition();
            ensure(is_connected(part) == is_connected_by_intervals(part), || format!("{pi}"))?;
        }
    }
    Ok(format!("p <= {max}"))
}

fn sample_specs(order: usize) -> Vec<CumulantSpec> {
    let seeds: [(i64, i64); 4] = [(1, 2), (-3, 5), (7, 3), (2, 9)];
    seeds
        .iter()
        .map(|&(a, b)| {
            let kappas = (0..order as i64).map(|i| ratio((a * (i + 1) + b * i * i) % 11 - 5, b + i % 3)).collect();
            CumulantSpec::new(kappas).expect("order >= 2")
        })
        .collect()
}

fn cumulant_round_trip(_level: Level) -> Result<String, String> {
    for s in sample_specs(10) {
        let m = moments_from_free_cumulants(&s, 10).map_err(err)?;
        let back = free_cumulants_from_moments(&m, 10).map_err(err)?;
        ensure(back.kappas() == s.kappas(), || "round trip changed the cumulants".into())?;
    }
    Ok("order 10".into())
}

fn nc_sum(word: &[usize], s: &CumulantSpec) -> Result<Rational, String> {
    if word.is_empty() {
        return Ok(rat(1));
    }
    let mut total = rat(0);
    for pi in enumerate_set_partitions(word.len(), 1).map_err(err)?.filter(is_noncrossing) {
        if pi.blocks().iter().all(|b| b.iter().all(|&x| word[x - 1] == word[b[0] - 1])) {
            let mut term = rat(1);
            for b in pi.blocks() {
                term *= s.kappa(b.len()).map_err(err)?;
            }
            total += term;
        }
    }
    Ok(total)
}

fn recursion_vs_enumeration(level: Level) -> Result<String, String> {
    let max = pick(level, 6, 8);
    for s in sample_specs(max) {
        let m = moments_from_free_cumulants(&s, max).map_err(err)?;
        for n in 0..=max {
            ensure(m[n] == nc_sum(&vec![1; n], &s)?, || format!("order {n}"))?;
        }
        for word in [vec![1, 2, 1, 2], vec![1, 2, 2, 1, 3, 1], vec![2, 1, 2, 3, 1, 3]] {
            let dp = mixed_moment(&Word::new(word.clone()).expect("positive"), &s).map_err(err)?;
            ensure(dp == nc_sum(&word, &s)?, || format!("word {word:?}"))?;
        }
    }
    Ok(format!("orders <= {max}"))
}

fn trace_routes(level: Level) -> Result<String, String> {
    let max = pick(level, 6, 8);
    let s = spec(&[1, 1, 0, 0]);
    let params = TensorParams::from_spec(&s).map_err(err)?;
    let mut count = 0;
    for p in (2..=max).step_by(2) {
        for pi in enumerate_pair_partitions(p).map_err(err)? {
            let oracle = tau_oracle(pi.as_partition(), &s).map_err(err)?;
            ensure(oracle == tau_closed_form(&pi, &params), || format!("{pi}: closed form"))?;
            ensure(oracle == tau_reduce(&pi, &params), || format!("{pi}: reduction"))?;
            count += 1;
        }
    }
    Ok(format!("{count} pairings"))
}

fn multiplicativity(level: Level) -> Result<String, String> {
    let max = pick(level, 6, 8);
    let s = spec(&[1, 2, 0, 0]);
    for p in (2..=max).step_by(2) {
        for pi in enumerate_pair_partitions(p).map_err(err)? {
            let whole = tau_oracle(pi.as_partition(), &s).map_err(err)?;
            let mut product = rat(1);
            for c in noncrossing_closure(&pi).components {
                let v = tau_oracle(c.pairing.as_partition(), &s).map_err(err)?;
                product *= v.as_rational().cloned().unwrap_or_default();
            }
            ensure(whole.as_rational() == Some(&product), || format!("{pi}"))?;
        }
    }
    Ok(format!("p <= {max}"))
}

fn universality(level: Level) -> Result<String, String> {
    let max = pick(level, 6, 8);
    let moments: Vec<Rational> = (0..=8).map(|k| if k == 0 { rat(1) } else { pow2(k - 1) }).collect();
    let two_point = free_cumulants_from_moments(&MomentTable::new(moments).map_err(err)?, 8).map_err(err)?;
    for p in (4..=max).step_by(2) {
        let base = pairing_sum(p, &spec(&[0, 1, 0, 0])).map_err(err)?;
        for other in [spec(&[0, 1, 0, -1]), spec(&[0, 1, 0, 2])] {
            ensure(pairing_sum(p, &other).map_err(err)? == base, || format!("centered, p = {p}"))?;
        }
        let shifted = pairing_sum(p, &spec(&[1, 1, 0, 0])).map_err(err)?;
        ensure(pairing_sum(p, &two_point).map_err(err)? == shifted, || format!("shifted, p = {p}"))?;
    }
    Ok(format!("p <= {max}"))
}

fn moment_routes(level: Level) -> Result<String, String> {
    let max = pick(level, 8, 12);
    for q in q_grid() {
        for order in (2..=max).step_by(2) {
            let a = mu_q_moment_direct(order, &q).map_err(err)?;
            let b = mu_q_moment_fast(order, &q).map_err(err)?;
            ensure(a == b, || format!("order {order}, q = {}", q.value()))?;
        }
    }
    Ok(format!("orders <= {max}"))
}

fn cumulant_routes(level: Level) -> Result<String, String> {
    let max = pick(level, 8, 12);
    for q in q_grid() {
        for n in 1..=max {
            let a = mu_q_cumulant(n, &q).map_err(err)?;
            let b = mu_q_cumulant_additive(n, &q).map_err(err)?;
            ensure(a == b, || format!("order {n}, q = {}", q.value()))?;
        }
    }
    Ok(format!("orders <= {max}"))
}

fn hankel(_level: Level) -> Result<String, String> {
    for k in 0..=10 {
        let q = QParam::new(ratio(k, 10)).expect("in range");
        let m = mu_q_moments_fast(10, &q).map_err(err)?;
        ensure(hankel_validity(&m, 5).map_err(err)?, || format!("q = {}", q.value()))?;
    }
    Ok("K = 5".into())
}

fn catalan_identity(_level: Level) -> Result<String, String> {
    ensure(catalan_product_identity(7), || "p <= 7".into())?;
    Ok("p <= 7".into())
}

fn finite_n(level: Level) -> Result<String, String> {
    let max = pick(level, 6, 8);
    let centered = spec(&[0, 1, 0, 0]);
    for n in [1u64, 10, 100] {
        let v = s_n_moment(4, n, &centered).map_err(err)?;
        ensure(v.as_rational() == Some(&(rat(2) + ratio(2, n as i64))), || format!("n = {n}: {v}"))?;
    }
    let shifted = spec(&[1, 1, 0, 0]);
    let q = QParam::new(ratio(2, 3)).expect("in range");
    for p in (2..=max).step_by(2) {
        let limit = s_n_limit(p, &shifted).map_err(err)?;
        ensure(limit == mu_q_moment_fast(p, &q).map_err(err)?, || format!("p = {p}"))?;
    }
    Ok(format!("limits through p = {max}"))
}

pub fn run(level: Level) -> Vec<CheckOutcome> {
    let checks: [(&'static str, Check); 13] = [
        ("pair_enumeration_counts", pair_enumeration),
        ("closure_round_trip", closure_round_trip),
        ("connectedness_definitions_agree", connectedness_definitions),
        ("cumulant_round_trip", cumulant_round_trip),
        ("moment_recursion_vs_enumeration", recursion_vs_enumeration),
        ("trace_routes_agree", trace_routes),
        ("trace_multiplicativity", multiplicativity),
        ("universality", universality),
        ("limit_moment_routes_agree", moment_routes),
        ("limit_cumulant_routes_agree", cumulant_routes),
        ("hankel_positivity", hankel),
        ("catalan_product_identity", catalan_identity),
        ("finite_n_moments", finite_n),
    ];
    checks
        .iter()
        .map(|(name, f)| CheckOutcome {
            name,
            result: std::panic::catch_unwind(|| f(level)).unwrap_or_else(|_| Err("panicked".into())),
        })
        .collect()
}
