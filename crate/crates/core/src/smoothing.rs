//! Randomized smoothing: Monte Carlo prediction and certification of a base
//! ReLU classifier under isotropic Gaussian noise.
//!
//! Noise is replayable. Sample `j` is drawn from a ChaCha8 stream keyed by
//! the config seed with stream id `j`, so every evaluation of the smoothed
//! classifier with the same config sees the same `M` noise vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::{beta::beta_reg, erf::erfc_inv};

use crate::error::{Error, Result};
use crate::models::{check_dim, ReluNetwork};

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingConfig {
    pub sigma_p: f64,
    pub m_samples: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl SmoothingConfig {
    pub fn new(sigma_p: f64, m_samples: usize, alpha: f64, seed: u64) -> Result<SmoothingConfig> {
        let cfg = SmoothingConfig { sigma_p, m_samples, alpha, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_p > 0.0 && self.sigma_p.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma_p must be positive, got {}", self.sigma_p)));
        }
        if self.m_samples < 2 {
            return Err(Error::InvalidConfig(format!("m_samples must be >= 2, got {}", self.m_samples)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Output of the smoothed classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SmoothPrediction {
    Class(usize),
    Abstain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothCertificate {
    pub label: usize,
    pub top_count: usize,
    pub p_a_lower: f64,
    /// `None` means abstain.
    pub radius: Option<f64>,
}

pub const SMOOTHING_CSV_HEADER: [&str; 7] =
    ["input_id", "sigma_p", "m_samples", "alpha", "label_or_abstain", "p_a_lower", "radius"];

impl SmoothCertificate {
    pub fn csv_record(&self, input_id: &str, cfg: &SmoothingConfig) -> Vec<String> {
        let label = match self.radius {
            Some(_) => self.label.to_string(),
            None => "abstain".to_string(),
        };
        vec![
            input_id.to_string(),
            cfg.sigma_p.to_string(),
            cfg.m_samples.to_string(),
            cfg.alpha.to_string(),
            label,
            self.p_a_lower.to_string(),
            self.radius.map(|r| r.to_string()).unwrap_or_default(),
        ]
    }
}

/// Standard normal quantile.
pub fn phi_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DomainError(format!("phi_inv needs p in (0, 1), got {p}")));
    }
    Ok(-std::f64::consts::SQRT_2 * erfc_inv(2.0 * p))
}

/// One-sided Clopper-Pearson lower bound at confidence `1 - alpha`: the
/// `alpha` quantile of `Beta(k, n - k + 1)`.
pub fn clopper_pearson_lower(k: u64, n: u64, alpha: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::DomainError(format!("need 0 <= k <= n and n >= 1, got k={k}, n={n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DomainError(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if k == n {
        return Ok(alpha.powf(1.0 / n as f64));
    }
    let (a, b) = (k as f64, (n - k + 1) as f64);
    // beta_reg is increasing in x; bisect to the last representable bracket
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
fn binomial_upper_tail_half(k: u64, n: u64) -> f64 {
    if k == 0 {
        1.0
    } else if k > n {
        0.0
    } else {
        beta_reg(k as f64, (n - k + 1) as f64, 0.5)
    }
}

/// Two-sided binomial test p-value of `top` against `runner` under `p = 1/2`.
pub fn binomial_test_p_value(top: u64, runner: u64) -> f64 {
    if top == runner {
        return 1.0;
    }
    (2.0 * binomial_upper_tail_half(top.max(runner), top + runner)).min(1.0)
}

/// `0.5 σ (Φ⁻¹(p̲_A) − Φ⁻¹(p̄_B))`, for callers holding a separate runner-up
/// bound. Returns `None` when the bracket is not informative.
pub fn radius_general(sigma_p: f64, p_a_lower: f64, p_b_upper: f64) -> Result<Option<f64>> {
    if p_a_lower <= p_b_upper {
        return Ok(None);
    }
    let za = phi_inv(p_a_lower)?;
    let zb = phi_inv(p_b_upper)?;
    Ok(Some(0.5 * sigma_p * (za - zb)))
}

/// Certificate from raw vote counts, with `p̄_B = 1 − p̲_A`.
pub fn certificate_from_counts(counts: &[usize], cfg: &SmoothingConfig) -> Result<SmoothCertificate> {
    cfg.validate()?;
    let total: usize = counts.iter().sum();
    if total != cfg.m_samples {
        return Err(Error::DomainError(format!(
            "vote total {total} differs from m_samples {}",
            cfg.m_samples
        )));
    }
    let (label, _) = top_two(counts);
    let top_count = counts[label];
    let p_a_lower = clopper_pearson_lower(top_count as u64, total as u64, cfg.alpha)?;
    let radius = if p_a_lower > 0.5 { Some(cfg.sigma_p * phi_inv(p_a_lower)?) } else { None };
    Ok(SmoothCertificate { label, top_count, p_a_lower, radius })
}

/// Top class and runner-up class by count; lowest index wins ties.
fn top_two(counts: &[usize]) -> (usize, usize) {
    let top = crate::models::argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    let mut runner = if top == 0 { 1 } else { 0 };
    for (k, &c) in counts.iter().enumerate() {
        if k != top && c > counts[runner] {
            runner = k;
        }
    }
    (top, runner)
}

/// The `M` Gaussian noise vectors of a config, materialized once so that
/// many candidate points can be scored against identical noise.
#[derive(Clone, Debug)]
pub struct NoiseBank {
    dim: usize,
    m: usize,
    samples: Vec<f64>,
}

impl NoiseBank {
    pub fn new(cfg: &SmoothingConfig, dim: usize) -> Result<NoiseBank> {
        cfg.validate()?;
        let mut samples = Vec::with_capacity(cfg.m_samples * dim);
        for j in 0..cfg.m_samples {
            samples.extend(noise_sample(cfg, j as u64, dim));
        }
        Ok(NoiseBank { dim, m: cfg.m_samples, samples })
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.samples[j * self.dim..(j + 1) * self.dim]
    }

    pub fn votes(&self, net: &ReluNetwork, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(net.input_dim(), x.len())?;
        check_dim(self.dim, x.len())?;
        let mut counts = vec![0usize; net.classes()];
        let mut z = vec![0.0; self.dim];
        for j in 0..self.m {
            for ((zi, xi), ni) in z.iter_mut().zip(x).zip(self.sample(j)) {
                *zi = xi + ni;
            }
            counts[net.predict(&z)?] += 1;
        }
        Ok(counts)
    }

    pub fn predict(&self, net: &ReluNetwork, x: &[f64], alpha: f64) -> Result<SmoothPrediction> {
        Ok(prediction_from_counts(&self.votes(net, x)?, alpha))
    }
}

/// Noise vector `j`: `σ_P · N(0, I)` from ChaCha8 seeded with `cfg.seed`,
/// stream `j`.
pub fn noise_sample(cfg: &SmoothingConfig, j: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(j);
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            cfg.sigma_p * z
        })
        .collect()
}

pub fn prediction_from_counts(counts: &[usize], alpha: f64) -> SmoothPrediction {
    let (top, runner) = top_two(counts);
    if binomial_test_p_value(counts[top] as u64, counts[runner] as u64) > alpha {
        SmoothPrediction::Abstain
    } else {
        SmoothPrediction::Class(top)
    }
}

pub fn smooth_predict(net: &ReluNetwork, x: &[f64], cfg: &SmoothingConfig) -> Result<SmoothPrediction> {
    check_dim(net.input_dim(), x.len())?;
    NoiseBank::new(cfg, x.len())?.predict(net, x, cfg.alpha)
}

pub fn smooth_certify(net: &ReluNetwork, x: &[f64], cfg: &SmoothingConfig) -> Result<SmoothCertificate> {
    check_dim(net.input_dim(), x.len())?;
    let bank = NoiseBank::new(cfg, x.len())?;
    certificate_from_counts(&bank.votes(net, x)?, cfg)
}
