//! Rounding-search attacks on certified radii.
//!
//! The recipe is the same for every target: find a perturbation `δ` that
//! points at the decision boundary and has norm exactly equal to the
//! certified radius, then sample ULP-level neighbours `δ′` of it and keep
//! the first one whose round-to-nearest norm still passes the victim's
//! `‖δ′‖ ≤ R` check while the prediction at `x + δ′` changes.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::{exact_radius_linear, exact_radius_relu_matched, sound_radius_linear};
use crate::error::{Error, Result};
use crate::fp::{step_n, Direction};
use crate::models::{check_dim, norm, sign_label, LinearModel, ReluNetwork};
use crate::smoothing::{certificate_from_counts, NoiseBank, SmoothPrediction, SmoothingConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct AttackBudget {
    /// N, candidates drawn per attack.
    pub n_neighbors_total: usize,
    /// n, ULP steps on each side of every coordinate.
    pub n_steps_per_side: u32,
    pub seed: u64,
    pub max_pgd_iters: u64,
    /// s, the ReluPGD step length.
    pub pgd_step: f64,
    /// Keep scanning after the first success and count all of them.
    pub exhaustive: bool,
}

impl AttackBudget {
    pub fn new(n_neighbors_total: usize, n_steps_per_side: u32, seed: u64) -> Result<AttackBudget> {
        let b = AttackBudget {
            n_neighbors_total,
            n_steps_per_side,
            seed,
            max_pgd_iters: 1_000_000,
            pgd_step: 1e-5,
            exhaustive: false,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_pgd(mut self, max_iters: u64, step: f64) -> Result<AttackBudget> {
        self.max_pgd_iters = max_iters;
        self.pgd_step = step;
        self.validate()?;
        Ok(self)
    }

    pub fn exhaustive(mut self, on: bool) -> AttackBudget {
        self.exhaustive = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> AttackBudget {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors_total == 0 || self.n_steps_per_side == 0 || self.max_pgd_iters == 0 {
            return Err(Error::InvalidConfig("attack budget counts must be positive".into()));
        }
        if !(self.pgd_step > 0.0 && self.pgd_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("pgd step must be positive, got {}", self.pgd_step)));
        }
        Ok(())
    }
}

/// Valid input box `[lo, hi]` applied to every coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Domain> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidBracket { lo, hi });
        }
        Ok(Domain { lo, hi })
    }

    #[inline]
    pub fn clip(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Which radius a reported attack is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ThresholdKind {
    RTilde,
    RLo,
    R,
    Smoothed,
}

impl ThresholdKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdKind::RTilde => "r_tilde",
            ThresholdKind::RLo => "r_lo",
            ThresholdKind::R => "r",
            ThresholdKind::Smoothed => "smoothed",
        }
    }
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ThresholdKind> {
        [ThresholdKind::RTilde, ThresholdKind::RLo, ThresholdKind::R, ThresholdKind::Smoothed]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown threshold kind {s:?}")))
    }
}

/// A classifier output as seen by the attack: a class (±1 for linear
/// models, an index otherwise) or an abstention of the smoothed classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Class(i64),
    Abstain,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Class(c) => write!(f, "{c}"),
            Verdict::Abstain => f.write_str("abstain"),
        }
    }
}

impl From<SmoothPrediction> for Verdict {
    fn from(p: SmoothPrediction) -> Verdict {
        match p {
            SmoothPrediction::Class(c) => Verdict::Class(c as i64),
            SmoothPrediction::Abstain => Verdict::Abstain,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult {
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    /// The sampled candidate δ′ before clipping.
    pub delta_prime: Vec<f64>,
    /// Round-to-nearest norm of the perturbation actually applied.
    pub delta_norm: f64,
    pub threshold: f64,
    pub threshold_kind: ThresholdKind,
    pub label_before: Verdict,
    pub label_after: Verdict,
    /// 1-based index of the first success, or N in exhaustive mode.
    pub candidates_tested: usize,
    /// Number of successful candidates seen (1 unless exhaustive).
    pub successes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NotFoundReason {
    NoCandidate,
    PatternMismatch,
    PgdExhausted,
    DeadRegion,
    AbstainedTarget,
}

impl NotFoundReason {
    pub fn as_str(self) -> &'static str {
        match self {
            NotFoundReason::NoCandidate => "no_candidate",
            NotFoundReason::PatternMismatch => "pattern_mismatch",
            NotFoundReason::PgdExhausted => "pgd_exhausted",
            NotFoundReason::DeadRegion => "dead_region",
            NotFoundReason::AbstainedTarget => "abstained_target",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttackOutcome {
    Success(AttackResult),
    NotFound {
        reason: NotFoundReason,
        threshold_kind: ThresholdKind,
        threshold: Option<f64>,
        label_before: Verdict,
        candidates_tested: usize,
    },
}

pub const ATTACK_CSV_HEADER: [&str; 9] = [
    "model_id",
    "input_id",
    "threshold_kind",
    "threshold",
    "delta_norm",
    "label_before",
    "label_after",
    "candidates_tested",
    "success",
];

impl AttackOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, AttackOutcome::Success(_))
    }

    pub fn result(&self) -> Option<&AttackResult> {
        match self {
            AttackOutcome::Success(r) => Some(r),
            AttackOutcome::NotFound { .. } => None,
        }
    }

    pub fn candidates_tested(&self) -> usize {
        match self {
            AttackOutcome::Success(r) => r.candidates_tested,
            AttackOutcome::NotFound { candidates_tested, .. } => *candidates_tested,
        }
    }

    pub fn csv_record(&self, model_id: &str, input_id: &str) -> Vec<String> {
        match self {
            AttackOutcome::Success(r) => vec![
                model_id.to_string(),
                input_id.to_string(),
                r.threshold_kind.to_string(),
                r.threshold.to_string(),
                r.delta_norm.to_string(),
                r.label_before.to_string(),
                r.label_after.to_string(),
                r.candidates_tested.to_string(),
                "true".to_string(),
            ],
            AttackOutcome::NotFound { threshold_kind, threshold, label_before, candidates_tested, .. } => {
                vec![
                    model_id.to_string(),
                    input_id.to_string(),
                    threshold_kind.to_string(),
                    threshold.map(|t| t.to_string()).unwrap_or_default(),
                    String::new(),
                    label_before.to_string(),
                    String::new(),
                    candidates_tested.to_string(),
                    "false".to_string(),
                ]
            }
        }
    }
}

/// `sign · (R / ‖ν‖) · ν` in round-to-nearest.
pub fn scale_to_radius(nu: &[f64], radius: f64, sign_to_boundary: i8) -> Result<Vec<f64>> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::DomainError(format!("radius must be finite and >= 0, got {radius}")));
    }
    if sign_to_boundary != 1 && sign_to_boundary != -1 {
        return Err(Error::DomainError(format!("sign must be +1 or -1, got {sign_to_boundary}")));
    }
    let n = norm(nu);
    if n == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let factor = radius / n;
    let s = f64::from(sign_to_boundary);
    Ok(nu.iter().map(|v| s * (factor * v)).collect())
}

/// `{v} ∪ {n values below} ∪ {n values above}` in ascending order. Steps
/// that would leave the finite range are dropped.
pub fn candidate_set(v: f64, n: u32) -> Result<Vec<f64>> {
    if !v.is_finite() {
        return Err(Error::NonFiniteInput(v));
    }
    let mut set = Vec::with_capacity(2 * n as usize + 1);
    for k in (1..=n).rev() {
        if let Ok(d) = step_n(v, Direction::Down, k) {
            set.push(d);
        }
    }
    set.push(v);
    for k in 1..=n {
        match step_n(v, Direction::Up, k) {
            Ok(u) => set.push(u),
            Err(_) => break,
        }
    }
    set.dedup_by(|a, b| a.to_bits() == b.to_bits());
    Ok(set)
}

/// Draws neighbour vectors of `δ`, one coordinate at a time, uniformly from
/// each coordinate's candidate set. Draw `k` is the same for any budget
/// larger than `k`, so a larger `N` only appends candidates.
pub struct NeighborSampler {
    sets: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    remaining: usize,
}

impl NeighborSampler {
    pub fn new(delta: &[f64], n_steps: u32, total: usize, seed: u64) -> Result<NeighborSampler> {
        let sets = delta.iter().map(|&d| candidate_set(d, n_steps)).collect::<Result<Vec<_>>>()?;
        Ok(NeighborSampler { sets, rng: ChaCha8Rng::seed_from_u64(seed), remaining: total })
    }

    pub fn from_budget(delta: &[f64], budget: &AttackBudget) -> Result<NeighborSampler> {
        NeighborSampler::new(delta, budget.n_steps_per_side, budget.n_neighbors_total, budget.seed)
    }

    pub fn candidate_sets(&self) -> &[Vec<f64>] {
        &self.sets
    }

    /// Writes the next draw into `out`; false once the budget is spent.
    pub fn fill(&mut self, out: &mut [f64]) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.remaining -= 1;
        for (o, set) in out.iter_mut().zip(&self.sets) {
            *o = set[self.rng.random_range(0..set.len())];
        }
        true
    }
}

impl Iterator for NeighborSampler {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.sets.len()];
        self.fill(&mut out).then_some(out)
    }
}

/// All `N` neighbour draws of `δ`.
pub fn fp_neighbors(delta: &[f64], budget: &AttackBudget) -> Result<Vec<Vec<f64>>> {
    budget.validate()?;
    Ok(NeighborSampler::from_budget(delta, budget)?.collect())
}

/// Applies a candidate: `x′ = clip(x + δ′)` and the perturbation that was
/// really applied, `δ′ᵢ` on unclipped coordinates and `bound − xᵢ` where
/// the box cut it short.
pub fn apply_candidate(
    x: &[f64],
    delta: &[f64],
    domain: Option<Domain>,
    x_prime: &mut [f64],
    applied: &mut [f64],
) {
    for i in 0..x.len() {
        let raw = x[i] + delta[i];
        match domain {
            Some(d) if !d.contains(raw) => {
                let c = d.clip(raw);
                x_prime[i] = c;
                applied[i] = c - x[i];
            }
            _ => {
                x_prime[i] = raw;
                applied[i] = delta[i];
            }
        }
    }
}

/// Seed perturbation, threshold and classifier for one neighbour search.
fn neighbor_search<F>(
    x: &[f64],
    seed_delta: &[f64],
    threshold: f64,
    threshold_kind: ThresholdKind,
    budget: &AttackBudget,
    domain: Option<Domain>,
    label_before: Verdict,
    mut classify: F,
) -> Result<AttackOutcome>
where
    F: FnMut(&[f64]) -> Result<Verdict>,
{
    budget.validate()?;
    let d = x.len();
    let mut sampler = NeighborSampler::from_budget(seed_delta, budget)?;
    let (mut cand, mut x_prime, mut applied) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut first: Option<AttackResult> = None;
    let mut successes = 0;
    let mut tested = 0;
    while sampler.fill(&mut cand) {
        tested += 1;
        apply_candidate(x, &cand, domain, &mut x_prime, &mut applied);
        let delta_norm = norm(&applied);
        if !(delta_norm <= threshold) {
            continue;
        }
        let after = classify(&x_prime)?;
        if after == label_before {
            continue;
        }
        successes += 1;
        if first.is_none() {
            first = Some(AttackResult {
                x: x.to_vec(),
                x_prime: x_prime.clone(),
                delta_prime: cand.clone(),
                delta_norm,
                threshold,
                threshold_kind,
                label_before,
                label_after: after,
                candidates_tested: tested,
                successes: 1,
            });
        }
        if !budget.exhaustive {
            break;
        }
    }
    Ok(match first {
        Some(mut r) => {
            if budget.exhaustive {
                r.candidates_tested = tested;
                r.successes = successes;
            }
            AttackOutcome::Success(r)
        }
        None => AttackOutcome::NotFound {
            reason: NotFoundReason::NoCandidate,
            threshold_kind,
            threshold: Some(threshold),
            label_before,
            candidates_tested: tested,
        },
    })
}

/// Rounding search against `R̃`.
pub fn attack_linear(
    m: &LinearModel,
    x: &[f64],
    budget: &AttackBudget,
    domain: Option<Domain>,
) -> Result<AttackOutcome> {
    attack_linear_threshold(m, x, ThresholdKind::RTilde, budget, domain)
}

/// Rounding search against `R̃` or against the sound `R̲`.
pub fn attack_linear_threshold(
    m: &LinearModel,
    x: &[f64],
    kind: ThresholdKind,
    budget: &AttackBudget,
    domain: Option<Domain>,
) -> Result<AttackOutcome> {
    let r = match kind {
        ThresholdKind::RTilde => exact_radius_linear(m, x)?,
        ThresholdKind::RLo => sound_radius_linear(m, x)?.0,
        other => {
            return Err(Error::InvalidConfig(format!("{other} is not a linear-model threshold")));
        }
    };
    attack_linear_at(m, x, r, kind, budget, domain)
}

/// Rounding search with `δ` scaled to `r` and candidates accepted when
/// their float norm is `≤ r`.
pub fn attack_linear_at(
    m: &LinearModel,
    x: &[f64],
    r: f64,
    kind: ThresholdKind,
    budget: &AttackBudget,
    domain: Option<Domain>,
) -> Result<AttackOutcome> {
    let score = m.score(x)?;
    let before = sign_label(score);
    let delta = scale_to_radius(&m.w, r, -before)?;
    neighbor_search(x, &delta, r, kind, budget, domain, Verdict::Class(before.into()), |xp| {
        Ok(Verdict::Class(m.predict(xp)?.into()))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum PgdOutcome {
    Found { delta: Vec<f64>, x_prime: Vec<f64>, iterations: u64 },
    Exhausted { iterations: u64 },
}

/// Linearized projected gradient descent: repeatedly step `s` along the
/// local direction `τ[t] − τ[l]` until the network predicts `target`.
pub fn relu_pgd(
    net: &ReluNetwork,
    x: &[f64],
    current: usize,
    target: usize,
    budget: &AttackBudget,
    domain: Option<Domain>,
) -> Result<PgdOutcome> {
    budget.validate()?;
    net.check_labels(current, target)?;
    let label = net.predict(x)?;
    if label != current {
        return Err(Error::LabelMismatch { expected: current, got: label });
    }
    let mut xp = x.to_vec();
    for it in 1..=budget.max_pgd_iters {
        let nu = net.perturb_dir(&xp, current, target)?;
        let n = norm(&nu);
        if n == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let step = budget.pgd_step / n;
        for (v, g) in xp.iter_mut().zip(&nu) {
            let moved = *v + step * g;
            *v = domain.map_or(moved, |d| d.clip(moved));
        }
        if net.predict(&xp)? == target {
            let delta = xp.iter().zip(x).map(|(a, b)| a - b).collect();
            return Ok(PgdOutcome::Found { delta, x_prime: xp, iterations: it });
        }
    }
    Ok(PgdOutcome::Exhausted { iterations: budget.max_pgd_iters })
}

fn pgd_failure(
    outcome: Result<PgdOutcome>,
    kind: ThresholdKind,
    threshold: Option<f64>,
    before: Verdict,
) -> Result<std::result::Result<(Vec<f64>, Vec<f64>), AttackOutcome>> {
    let not_found = |reason| AttackOutcome::NotFound {
        reason,
        threshold_kind: kind,
        threshold,
        label_before: before,
        candidates_tested: 0,
    };
    match outcome {
        Ok(PgdOutcome::Found { delta, x_prime, .. }) => Ok(Ok((delta, x_prime))),
        Ok(PgdOutcome::Exhausted { .. }) => Ok(Err(not_found(NotFoundReason::PgdExhausted))),
        Err(Error::ZeroDirection) => Ok(Err(not_found(NotFoundReason::DeadRegion))),
        Err(e) => Err(e),
    }
}

/// ReluPGD towards the runner-up class, then, if the endpoint shares the
/// activation pattern of `x`, a rounding search against the exact radius of
/// that region.
///
/// Inside one activation region the displacement is parallel to the local
/// direction `ν = τ[t] − τ[l]`, so the seed perturbation is `ν` scaled to
/// the radius rather than the accumulated PGD displacement.
pub fn attack_relu_exact(
    net: &ReluNetwork,
    x: &[f64],
    budget: &AttackBudget,
    domain: Option<Domain>,
) -> Result<AttackOutcome> {
    let f = net.forward(x)?;
    let l = f.label;
    let t = net.runner_up(&f.scores, l);
    let before = Verdict::Class(l as i64);
    let pgd = relu_pgd(net, x, l, t, budget, domain);
    let x_end = match pgd_failure(pgd, ThresholdKind::R, None, before)? {
        Ok((_, x_end)) => x_end,
        Err(nf) => return Ok(nf),
    };
    let end_pattern = net.activation_pattern(&x_end)?;
    let Some(r) = exact_radius_relu_matched(net, x, l, t, &end_pattern)? else {
        return Ok(AttackOutcome::NotFound {
            reason: NotFoundReason::PatternMismatch,
            threshold_kind: ThresholdKind::R,
            threshold: None,
            label_before: before,
            candidates_tested: 0,
        });
    };
    let diff = net.linearize(x)?.difference_model(l, t)?;
    let delta = scale_to_radius(&diff.w, r, -sign_label(diff.score(x)?))?;
    neighbor_search(x, &delta, r, ThresholdKind::R, budget, domain, before, |xp| {
        Ok(Verdict::Class(net.predict(xp)? as i64))
    })
}

/// Rounding search against a smoothed classifier: ReluPGD on the base
/// network supplies the direction, the smoothing certificate supplies the
/// radius, and candidates are judged by the smoothed prediction with the
/// certificate's own noise. An abstention at a candidate counts as a
/// changed prediction.
pub fn attack_smoothed(
    net: &ReluNetwork,
    x: &[f64],
    cfg: &SmoothingConfig,
    budget: &AttackBudget,
    domain: Option<Domain>,
) -> Result<AttackOutcome> {
    check_dim(net.input_dim(), x.len())?;
    let bank = NoiseBank::new(cfg, x.len())?;
    let counts = bank.votes(net, x)?;
    let cert = certificate_from_counts(&counts, cfg)?;
    let smoothed = crate::smoothing::prediction_from_counts(&counts, cfg.alpha);
    let before = Verdict::Class(cert.label as i64);
    let abstained = |threshold| AttackOutcome::NotFound {
        reason: NotFoundReason::AbstainedTarget,
        threshold_kind: ThresholdKind::Smoothed,
        threshold,
        label_before: Verdict::from(smoothed),
        candidates_tested: 0,
    };
    let Some(radius) = cert.radius else {
        return Ok(abstained(None));
    };
    if smoothed != SmoothPrediction::Class(cert.label) {
        return Ok(abstained(Some(radius)));
    }
    let f = net.forward(x)?;
    let t = net.runner_up(&f.scores, f.label);
    let pgd = relu_pgd(net, x, f.label, t, budget, domain);
    let delta = match pgd_failure(pgd, ThresholdKind::Smoothed, Some(radius), before)? {
        Ok((delta, _)) => delta,
        Err(nf) => return Ok(nf),
    };
    let seed = scale_to_radius(&delta, radius, 1)?;
    neighbor_search(x, &seed, radius, ThresholdKind::Smoothed, budget, domain, before, |xp| {
        Ok(bank.predict(net, xp, cfg.alpha)?.into())
    })
}

/// Independent re-check of a reported success: rebuilds `x′` from `x` and
/// `δ′`, recomputes the float norm, compares it with the threshold, and
/// re-runs the classifier at both points.
pub fn replay<F>(result: &AttackResult, domain: Option<Domain>, mut classify: F) -> Result<bool>
where
    F: FnMut(&[f64]) -> Result<Verdict>,
{
    let d = result.x.len();
    check_dim(d, result.delta_prime.len())?;
    let (mut xp, mut applied) = (vec![0.0; d], vec![0.0; d]);
    apply_candidate(&result.x, &result.delta_prime, domain, &mut xp, &mut applied);
    let same_point = xp.iter().zip(&result.x_prime).all(|(a, b)| a.to_bits() == b.to_bits());
    let in_domain = domain.is_none_or(|dm| xp.iter().all(|&v| dm.contains(v)));
    let n = norm(&applied);
    let before = classify(&result.x)?;
    let after = classify(&xp)?;
    Ok(same_point
        && in_domain
        && n.to_bits() == result.delta_norm.to_bits()
        && n <= result.threshold
        && before == result.label_before
        && after == result.label_after
        && after != before)
}
