//! Certified L2 radii.
//!
//! * [`exact_radius_linear`] is the natural round-to-nearest computation of
//!   `|w·x + b| / ‖w‖`, the value an attacker can undercut.
//! * [`sound_radius_linear`] runs the same expression through rounded
//!   interval arithmetic; its lower end is a sound certificate.
//! * [`exact_radius_relu_matched`] is the exact radius of a ReLU network
//!   when the adversarial endpoint lies in the same activation region.
//! * [`rhat_search`] bisects `[R̲, R̄]` with the rounding-search attack as
//!   the violation oracle.

use crate::attack::{self, AttackBudget, AttackOutcome};
use crate::error::{Error, Result};
use crate::fp::ordered_key;
use crate::interval::{self, Interval};
use crate::models::{check_dim, norm, ActivationPattern, LinearModel, ReluNetwork};

/// Float radius, its interval enclosure and, optionally, the bisected radius.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub r_tilde: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub r_hat: Option<f64>,
}

pub const CERTIFICATE_CSV_HEADER: [&str; 6] =
    ["model_id", "input_id", "r_tilde", "r_lo", "r_hi", "r_hat"];

impl CertificateReport {
    /// R̃ together with the interval bounds for a linear model.
    pub fn linear(m: &LinearModel, x: &[f64]) -> Result<CertificateReport> {
        let r_tilde = exact_radius_linear(m, x)?;
        let (r_lo, r_hi) = sound_radius_linear(m, x)?;
        Ok(CertificateReport { r_tilde, r_lo, r_hi, r_hat: None })
    }

    pub fn with_rhat(mut self, m: &LinearModel, x: &[f64], budget: &AttackBudget) -> Result<Self> {
        self.r_hat = Some(rhat_search(m, x, (self.r_lo, self.r_hi), budget)?);
        Ok(self)
    }

    /// `r_lo ≤ r_tilde ≤ r_hi`, `r_hat ∈ [r_lo, r_hi]`, all nonnegative.
    pub fn is_consistent(&self) -> bool {
        let hat_ok = self.r_hat.is_none_or(|h| self.r_lo <= h && h <= self.r_hi);
        self.r_lo >= 0.0 && self.r_lo <= self.r_tilde && self.r_tilde <= self.r_hi && hat_ok
    }

    pub fn csv_record(&self, model_id: &str, input_id: &str) -> Vec<String> {
        vec![
            model_id.to_string(),
            input_id.to_string(),
            self.r_tilde.to_string(),
            self.r_lo.to_string(),
            self.r_hi.to_string(),
            self.r_hat.map(|v| v.to_string()).unwrap_or_default(),
        ]
    }
}

/// `|w·x + b| / ‖w‖` in round-to-nearest with left-to-right sums.
pub fn exact_radius_linear(m: &LinearModel, x: &[f64]) -> Result<f64> {
    let score = m.score(x)?;
    let w_norm = norm(&m.w);
    if w_norm == 0.0 {
        return Err(Error::ZeroWeightNorm);
    }
    Ok(score.abs() / w_norm)
}

/// Interval enclosure `[R̲, R̄]` of the real radius. Every operation mirrors
/// [`exact_radius_linear`], so `R̲ ≤ R̃ ≤ R̄`.
pub fn sound_radius_linear(m: &LinearModel, x: &[f64]) -> Result<(f64, f64)> {
    let r = sound_radius_interval(m, x)?;
    Ok((r.lo().max(0.0), r.hi()))
}

pub fn sound_radius_interval(m: &LinearModel, x: &[f64]) -> Result<Interval> {
    check_dim(m.dim(), x.len())?;
    let w = interval::points(&m.w);
    let score = interval::dot(&w, &interval::points(x))? + Interval::point(m.b);
    let w_norm = interval::norm2(&w)?;
    score.abs().div(w_norm)
}

/// Exact radius for moving `x` from class `current` to `target`, valid only
/// when the adversarial endpoint shares the activation pattern of `x`.
/// Returns `None` when the patterns differ.
pub fn exact_radius_relu_matched(
    net: &ReluNetwork,
    x: &[f64],
    current: usize,
    target: usize,
    endpoint_pattern: &ActivationPattern,
) -> Result<Option<f64>> {
    net.check_labels(current, target)?;
    let forward_label = net.predict(x)?;
    if forward_label != current {
        return Err(Error::LabelMismatch { expected: current, got: forward_label });
    }
    let lin = net.linearize(x)?;
    if &lin.activation_pattern != endpoint_pattern {
        return Ok(None);
    }
    let diff = lin.difference_model(current, target)?;
    exact_radius_linear(&diff, x).map(Some)
}

/// Bisects float radii in `[lo, hi]` with `violated(r)` reporting whether an
/// adversarial example of norm `≤ r` was found. Returns the largest tested
/// radius without a violation, `lo` if every tested radius was violated.
///
/// Bisection runs on the integer ordering of the float bit patterns and stops
/// at adjacent floats or after 64 steps.
pub fn bisect_radius<F>(lo: f64, hi: f64, mut violated: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    if lo.is_nan() || hi.is_nan() || lo < 0.0 || lo > hi || !hi.is_finite() {
        return Err(Error::InvalidBracket { lo, hi });
    }
    if !violated(hi)? {
        return Ok(hi);
    }
    let (mut safe, mut bad) = (ordered_key(lo), ordered_key(hi));
    for _ in 0..64 {
        if bad - safe <= 1 {
            break;
        }
        let mid = safe + (bad - safe) / 2;
        if violated(f64::from_bits(mid as u64))? {
            bad = mid;
        } else {
            safe = mid;
        }
    }
    Ok(f64::from_bits(safe as u64))
}

/// R̂: the largest radius in `[R̲, R̄]` at which the rounding-search attack
/// (seeded at that radius, accepting float norms `≤ r`) finds nothing.
pub fn rhat_search(
    m: &LinearModel,
    x: &[f64],
    bounds: (f64, f64),
    budget: &AttackBudget,
) -> Result<f64> {
    let (lo, hi) = bounds;
    bisect_radius(lo, hi, |r| {
        let outcome = attack::attack_linear_at(m, x, r, attack::ThresholdKind::R, budget, None)?;
        Ok(matches!(outcome, AttackOutcome::Success(_)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Layer, Matrix};

    #[test]
    fn three_four_five() {
        let m = LinearModel::new(vec![3.0, 4.0], 0.0).unwrap();
        assert_eq!(exact_radius_linear(&m, &[5.0, 0.0]).unwrap(), 3.0);
        let (lo, hi) = sound_radius_linear(&m, &[5.0, 0.0]).unwrap();
        assert!(lo <= 3.0 && 3.0 <= hi);
        assert!(hi - lo <= 1e-12);
    }

    #[test]
    fn on_boundary() {
        let m = LinearModel::new(vec![1.0], -1.0).unwrap();
        assert_eq!(exact_radius_linear(&m, &[1.0]).unwrap(), 0.0);
        let (lo, _) = sound_radius_linear(&m, &[1.0]).unwrap();
        assert_eq!(lo, 0.0);
    }

    #[test]
    fn zero_weights() {
        let m = LinearModel::new(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(exact_radius_linear(&m, &[1.0, 1.0]).unwrap_err(), Error::ZeroWeightNorm);
        assert!(matches!(sound_radius_linear(&m, &[1.0, 1.0]), Err(Error::DivisorSpansZero { .. })));
    }

    #[test]
    fn report_consistency() {
        let m = LinearModel::new(vec![0.1, -0.7, 0.3], 0.25).unwrap();
        let rep = CertificateReport::linear(&m, &[0.9, 0.11, -0.4]).unwrap();
        assert!(rep.is_consistent());
        assert_eq!(rep.csv_record("m", "0")[5], "");
    }

    #[test]
    fn bisection_edge_cases() {
        assert_eq!(bisect_radius(1.0, 2.0, |_| Ok(false)).unwrap(), 2.0);
        assert_eq!(bisect_radius(1.0, 2.0, |r| Ok(r > 1.0)).unwrap(), 1.0);
        let cut = 1.5;
        let r = bisect_radius(1.0, 2.0, |r| Ok(r >= cut)).unwrap();
        assert_eq!(r, crate::fp::next_down(cut).unwrap());
        assert!(matches!(bisect_radius(2.0, 1.0, |_| Ok(true)), Err(Error::InvalidBracket { .. })));
        assert!(bisect_radius(-1.0, 1.0, |_| Ok(true)).is_err());
    }

    #[test]
    fn relu_matched_radius_by_hand() {
        let net = ReluNetwork::new(vec![
            Layer::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![0.0]).unwrap(),
            Layer::new(Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(), vec![0.0, 0.0])
                .unwrap(),
        ])
        .unwrap();
        let at = net.activation_pattern(&[2.0]).unwrap();
        assert_eq!(exact_radius_relu_matched(&net, &[2.0], 0, 1, &at).unwrap(), Some(2.0));
        let off = net.activation_pattern(&[-1.0]).unwrap();
        assert_eq!(exact_radius_relu_matched(&net, &[2.0], 0, 1, &off).unwrap(), None);
        assert!(matches!(
            exact_radius_relu_matched(&net, &[2.0], 1, 0, &at),
            Err(Error::LabelMismatch { .. })
        ));
    }
}
