//! Monte Carlo model: normalized sums of `M_k ⊗ M_k` for shifted Wigner
//! matrices `M_k = lambda I + sigma W_k`, compared against `mu_q`.
//!
//! This is the only floating-point module. Trials draw from independent
//! ChaCha8 streams keyed by `(seed, trial)`, so results do not depend on the
//! number of worker threads.

use nalgebra::DMatrix;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{to_fraction_string, Rational};
use crate::error::{check_cap, domain, Error, Result};
use crate::limit_law::{mu_q_moment_fast, QParam};
use crate::tensor_trace::TensorParams;

pub const DEFAULT_MAX_DIM: usize = 64;
/// Moments above this order would need pair-partition counts beyond the default cap.
pub const MAX_SIM_ORDER: usize = 16;
pub const GENERATOR: &str = "ChaCha8Rng from rand_chacha 0.3; seed_from_u64(seed), stream = trial index";

/// What is subtracted from each `M_k ⊗ M_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// The finite-`d` expectation `lambda^2 I + sigma^2 v (P + F)`, where `v` is
    /// the off-diagonal Wigner variance, `P` is the unnormalized projection onto
    /// `sum_i e_i ⊗ e_i` and `F` is the swap.
    #[default]
    Exact,
    /// The limiting value `lambda^2 I` only.
    Limit,
}

/// Normalization of the Wigner samples. Both keep the diagonal variance at
/// twice the off-diagonal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WignerScale {
    /// Off-diagonal variance `1/(d+1)`, so `E (1/d) tr W^2 = 1` exactly.
    #[default]
    UnitVariance,
    /// Off-diagonal variance `1/d`; `E (1/d) tr W^2 = 1 + 1/d`.
    Standard,
}

impl WignerScale {
    /// Off-diagonal entry variance at dimension `d`.
    pub fn off_diagonal_variance(self, d: usize) -> f64 {
        match self {
            WignerScale::UnitVariance => 1.0 / (d as f64 + 1.0),
            WignerScale::Standard => 1.0 / d as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub d: usize,
    pub n: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub pmax: usize,
    pub centering: Centering,
    pub scale: WignerScale,
    pub max_dim: usize,
}

impl SimConfig {
    pub fn new(d: usize, n: usize, lambda: f64, sigma: f64, trials: usize, seed: u64, pmax: usize) -> Result<Self> {
        let config = Self {
            d,
            n,
            lambda,
            sigma,
            trials,
            seed,
            pmax,
            centering: Centering::default(),
            scale: WignerScale::default(),
            max_dim: DEFAULT_MAX_DIM,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    pub fn with_scale(mut self, scale: WignerScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_max_dim(mut self, max_dim: usize) -> Result<Self> {
        self.max_dim = max_dim;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(domain("matrix dimension d must be at least 2"));
        }
        if self.n < 1 || self.trials < 1 {
            return Err(domain("n and trials must be at least 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !self.lambda.is_finite() {
            return Err(domain("sigma must be positive and lambda finite"));
        }
        if self.pmax % 2 == 1 {
            return Err(domain("pmax must be even"));
        }
        check_cap("simulation moment order", self.pmax, MAX_SIM_ORDER)?;
        check_cap("matrix dimension d", self.d, self.max_dim)
    }

    /// `delta = sqrt(sigma^2 (sigma^2 + 2 lambda^2))`.
    pub fn delta(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        (s2 * (s2 + 2.0 * self.lambda * self.lambda)).sqrt()
    }

    /// `q` computed exactly from the binary values of `lambda` and `sigma^2`.
    pub fn q_exact(&self) -> Result<QParam> {
        let exact = |x: f64| Rational::from_float(x).ok_or_else(|| domain("non-finite parameter"));
        let params = TensorParams::new(exact(self.lambda)?, exact(self.sigma * self.sigma)?)?;
        Ok(QParam::from_params(&params))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub p: usize,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub reference: f64,
    pub reference_exact: String,
    /// `(mean - reference) / std_error`; absent when the standard error is zero.
    pub z_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub generator: String,
    pub q: String,
    pub estimates: Vec<MomentEstimate>,
}

impl SimResult {
    pub fn estimate(&self, p: usize) -> Option<&MomentEstimate> {
        self.estimates.iter().find(|e| e.p == p)
    }

    /// Columns `p, empirical_mean, std_error, reference, z_score`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["p", "empirical_mean", "std_error", "reference", "z_score"]).map_err(io)?;
        for e in &self.estimates {
            w.write_record([
                e.p.to_string(),
                e.empirical_mean.to_string(),
                e.std_error.to_string(),
                e.reference.to_string(),
                e.z_score.map(|z| z.to_string()).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// The generator for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Real symmetric Gaussian matrix with off-diagonal variance `1/d` and
/// diagonal variance `2/d`.
pub fn sample_wigner<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    sample_wigner_scaled(d, WignerScale::Standard, rng)
}

/// Real symmetric Gaussian matrix with off-diagonal variance `v` and diagonal
/// variance `2v`, where `v = scale.off_diagonal_variance(d)`.
pub fn sample_wigner_scaled<R: Rng + ?Sized>(d: usize, scale: WignerScale, rng: &mut R) -> DMatrix<f64> {
    let v = scale.off_diagonal_variance(d);
    let off = v.sqrt();
    let diag = (2.0 * v).sqrt();
    let mut w = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            let z: f64 = rng.sample(StandardNormal);
            if i == j {
                w[(i, i)] = diag * z;
            } else {
                w[(i, j)] = off * z;
                w[(j, i)] = off * z;
            }
        }
    }
    w
}

/// Adds `scale * (m ⊗ m)` to `acc`, indexing `(m ⊗ m)[(i d + k, j d + l)] = m_ij m_kl`.
fn add_kron_square(acc: &mut DMatrix<f64>, m: &DMatrix<f64>, scale: f64) {
    let d = m.nrows();
    for j in 0..d {
        for l in 0..d {
            let col_m = m.column(l);
            let mut col = acc.column_mut(j * d + l);
            for i in 0..d {
                let a = scale * m[(i, j)];
                if a == 0.0 {
                    continue;
                }
                let mut block = col.rows_mut(i * d, d);
                block.axpy(a, &col_m, 1.0);
            }
        }
    }
}

/// `(1/(delta sqrt n)) sum_k (M_k ⊗ M_k - C)` for Wigner samples drawn with `scale`.
pub fn delta_from_samples(
    ws: &[DMatrix<f64>],
    lambda: f64,
    sigma: f64,
    centering: Centering,
    scale: WignerScale,
) -> DMatrix<f64> {
    assert!(!ws.is_empty(), "at least one sample is needed");
    let d = ws[0].nrows();
    let n = ws.len() as f64;
    let dd = d * d;
    let mut acc = DMatrix::zeros(dd, dd);
    for w in ws {
        let m = w * sigma + DMatrix::identity(d, d) * lambda;
        add_kron_square(&mut acc, &m, 1.0);
    }
    let l2 = lambda * lambda;
    for r in 0..dd {
        acc[(r, r)] -= n * l2;
    }
    if centering == Centering::Exact {
        let c = n * sigma * sigma * scale.off_diagonal_variance(d);
        for i in 0..d {
            for j in 0..d {
                acc[(i * d + i, j * d + j)] -= c;
                acc[(i * d + j, j * d + i)] -= c;
            }
        }
    }
    let s2 = sigma * sigma;
    let delta = (s2 * (s2 + 2.0 * l2)).sqrt();
    acc /= delta * n.sqrt();
    acc
}

/// The matrix of one trial.
pub fn build_delta(config: &SimConfig, trial: u64) -> Result<DMatrix<f64>> {
    config.validate()?;
    let mut rng = trial_rng(config.seed, trial);
    let ws: Vec<DMatrix<f64>> = (0..config.n)
        .map(|_| sample_wigner_scaled(config.d, config.scale, &mut rng))
        .collect();
    Ok(delta_from_samples(&ws, config.lambda, config.sigma, config.centering, config.scale))
}

/// `(1/N) tr(A^p)` for `p = 0..=pmax`, where `N` is the size of the
/// symmetric matrix `a`. Uses `tr(A^{s+t}) = sum_ij (A^s)_ij (A^t)_ij`, so
/// only powers up to `pmax/2` are formed.
pub fn normalized_traces(a: &DMatrix<f64>, pmax: usize) -> Vec<f64> {
    let size = a.nrows() as f64;
    let half = pmax.div_ceil(2).max(1);
    let mut powers: Vec<DMatrix<f64>> = vec![a.clone()];
    while powers.len() < half {
        let next = powers.last().unwrap() * a;
        powers.push(next);
    }
    (0..=pmax)
        .map(|p| match p {
            0 => 1.0,
            1 => a.trace() / size,
            _ => {
                let s = p / 2;
                let t = p - s;
                powers[s - 1].dot(&powers[t - 1]) / size
            }
        })
        .collect()
}

/// Runs all trials and aggregates per-order means and standard errors.
pub fn empirical_moments(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let q = config.q_exact()?;
    let per_trial: Vec<Vec<f64>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| build_delta(config, t).map(|delta| normalized_traces(&delta, config.pmax)))
        .collect::<Result<_>>()?;

    let trials = per_trial.len() as f64;
    let mut estimates = Vec::with_capacity(config.pmax + 1);
    for p in 0..=config.pmax {
        let mean = per_trial.iter().map(|m| m[p]).sum::<f64>() / trials;
        let std_error = if per_trial.len() > 1 {
            let var = per_trial.iter().map(|m| (m[p] - mean).powi(2)).sum::<f64>() / (trials - 1.0);
            (var / trials).sqrt()
        } else {
            0.0
        };
        let reference_exact = mu_q_moment_fast(p, &q)?;
        let reference = reference_exact.to_f64().unwrap_or(f64::NAN);
        let z_score = (std_error > 0.0).then(|| (mean - reference) / std_error);
        estimates.push(MomentEstimate {
            p,
            empirical_mean: mean,
            std_error,
            reference,
            reference_exact: to_fraction_string(&reference_exact),
            z_score,
        });
    }
    Ok(SimResult {
        config: config.clone(),
        generator: GENERATOR.to_string(),
        q: to_fraction_string(q.value()),
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a.kronecker(b)
    }

    #[test]
    fn wigner_is_reproducible_and_symmetric() {
        let a = sample_wigner(2, &mut trial_rng(7, 0));
        let b = sample_wigner(2, &mut trial_rng(7, 0));
        let c = sample_wigner(2, &mut trial_rng(7, 1));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn wigner_low_moments() {
        let d = 50;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for t in 0..100 {
            let w = sample_wigner(d, &mut trial_rng(11, t));
            m1 += w.trace() / d as f64;
            m2 += (&w * &w).trace() / d as f64;
        }
        assert!((m1 / 100.0).abs() < 0.05);
        assert!((m2 / 100.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn unit_variance_scale_has_unit_second_moment() {
        // E tr W^2 = d(d-1) v + 2 d v = d (d + 1) v.
        for d in [2, 5, 17] {
            let v = WignerScale::UnitVariance.off_diagonal_variance(d);
            assert!((d as f64 * (d as f64 + 1.0) * v / d as f64 - 1.0).abs() < 1e-15);
        }
        let d = 4;
        let trials = 20_000;
        let mut m2 = 0.0;
        for t in 0..trials {
            let w = sample_wigner_scaled(d, WignerScale::UnitVariance, &mut trial_rng(13, t));
            m2 += (&w * &w).trace() / d as f64;
        }
        assert!((m2 / trials as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn kron_accumulation_matches_nalgebra() {
        let m = sample_wigner(4, &mut trial_rng(3, 0)) * 1.5 + DMatrix::identity(4, 4) * 0.5;
        let mut acc = DMatrix::zeros(16, 16);
        add_kron_square(&mut acc, &m, 2.0);
        assert!((acc - kron(&m, &m) * 2.0).abs().max() < 1e-12);
    }

    #[test]
    fn single_centered_term_is_a_tensor_square() {
        let w = sample_wigner(3, &mut trial_rng(5, 0));
        let delta = delta_from_samples(std::slice::from_ref(&w), 0.0, 1.0, Centering::Limit, WignerScale::Standard);
        assert_eq!(delta, kron(&w, &w));
    }

    #[test]
    fn exact_centering_removes_the_mean() {
        // E[W ⊗ W] = (P + F)/d, so the centered sum has expectation zero.
        let d = 3;
        let trials = 4000;
        let mut mean = DMatrix::zeros(d * d, d * d);
        for t in 0..trials {
            let w = sample_wigner(d, &mut trial_rng(21, t));
            mean += kron(&w, &w);
        }
        mean /= trials as f64;
        let mut expected = DMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                expected[(i * d + i, j * d + j)] += 1.0 / d as f64;
                expected[(i * d + j, j * d + i)] += 1.0 / d as f64;
            }
        }
        assert!((mean - expected).abs().max() < 0.05);
    }

    #[test]
    fn delta_is_symmetric_and_reproducible() {
        let config = SimConfig::new(2, 2, 1.0, 1.0, 1, 99, 4).unwrap();
        let a = build_delta(&config, 0).unwrap();
        let b = build_delta(&config, 0).unwrap();
        assert_eq!(a.shape(), (4, 4));
        assert_eq!(a, b);
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn traces_match_explicit_powers() {
        let w = sample_wigner(6, &mut trial_rng(1, 0));
        let traces = normalized_traces(&w, 6);
        let mut power = DMatrix::<f64>::identity(6, 6);
        for (p, t) in traces.iter().enumerate() {
            assert!((t - power.trace() / 6.0).abs() < 1e-10, "p={p}");
            power = &power * &w;
        }
    }

    #[test]
    fn config_guards() {
        assert!(SimConfig::new(1, 1, 0.0, 1.0, 1, 0, 4).is_err());
        assert!(SimConfig::new(4, 1, 0.0, 0.0, 1, 0, 4).is_err());
        assert!(SimConfig::new(4, 1, 0.0, 1.0, 1, 0, 3).is_err());
        assert!(matches!(SimConfig::new(65, 1, 0.0, 1.0, 1, 0, 4), Err(Error::Size { .. })));
        let small = SimConfig::new(8, 1, 0.0, 1.0, 1, 0, 4).unwrap();
        assert!(small.with_max_dim(4).is_err());
    }

    #[test]
    fn exact_q_for_unit_parameters() {
        let config = SimConfig::new(4, 1, 1.0, 1.0, 1, 0, 4).unwrap();
        assert_eq!(config.q_exact().unwrap().value(), &crate::arith::ratio(2, 3));
    }

    #[test]
    fn results_are_deterministic() {
        let config = SimConfig::new(6, 5, 0.5, 1.0, 3, 42, 4).unwrap();
        let a = empirical_moments(&config).unwrap();
        let b = empirical_moments(&config).unwrap();
        assert_eq!(a, b);
        let e0 = a.estimate(0).unwrap();
        assert_eq!(e0.empirical_mean, 1.0);
        assert_eq!(e0.std_error, 0.0);
        assert!(a.estimates.iter().all(|e| e.std_error >= 0.0));
    }

    #[test]
    fn centered_reference_is_catalan() {
        let config = SimConfig::new(4, 2, 0.0, 1.0, 2, 0, 8).unwrap();
        let r = empirical_moments(&config).unwrap();
        let refs: Vec<String> = r.estimates.iter().map(|e| e.reference_exact.clone()).collect();
        assert_eq!(refs, vec!["1/1", "0/1", "1/1", "0/1", "2/1", "0/1", "5/1", "0/1", "14/1"]);
    }

    #[test]
    fn csv_has_expected_columns() {
        let config = SimConfig::new(4, 2, 1.0, 1.0, 2, 0, 2).unwrap();
        let csv = empirical_moments(&config).unwrap().to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("p,empirical_mean,std_error,reference,z_score"));
        assert_eq!(lines.count(), 3);
    }
}
