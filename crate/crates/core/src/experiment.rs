//! Batch experiments and report aggregation.
//!
//! Every trial draws its randomness from its own ChaCha8 stream, keyed by
//! the experiment seed and numbered by `(D, tag, trial)`. Trials run on a
//! rayon pool but results are collected in trial order, so output files do
//! not depend on the number of workers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::{
    attack_linear_threshold, attack_relu_exact, attack_smoothed, replay, AttackBudget, AttackOutcome,
    Domain, NotFoundReason, ThresholdKind, Verdict, ATTACK_CSV_HEADER,
};
use crate::certify::{exact_radius_linear, rhat_search, sound_radius_linear};
use crate::data_io::{
    gen_blobs, gen_error_scale_case, gen_random_linear_case_from, gen_random_relu_net, load_idx, read_csv,
    write_csv_atomic, write_tsv_atomic, Dataset,
};
use crate::error::{Error, Result};
use crate::models::{LinearModel, ReluNetwork};
use crate::smoothing::{NoiseBank, SmoothingConfig};
use crate::train::{linear_accuracy, train_linear_svm, train_mlp, TrainConfig};

pub const WORKERS_ENV: &str = "FPCERT_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    RandomLinear,
    RoundingError,
    SvmAttack,
    ReluExactAttack,
    SmoothingAttack,
    Mitigation,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::RandomLinear,
        ExperimentKind::RoundingError,
        ExperimentKind::SvmAttack,
        ExperimentKind::ReluExactAttack,
        ExperimentKind::SmoothingAttack,
        ExperimentKind::Mitigation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::RandomLinear => "random_linear",
            ExperimentKind::RoundingError => "rounding_error",
            ExperimentKind::SvmAttack => "svm_attack",
            ExperimentKind::ReluExactAttack => "relu_exact_attack",
            ExperimentKind::SmoothingAttack => "smoothing_attack",
            ExperimentKind::Mitigation => "mitigation",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ExperimentKind> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// N; `None` means `D²`.
    pub n_neighbors: Option<usize>,
    pub n_steps: u32,
    pub pgd_step: f64,
    pub max_pgd_iters: u64,
    pub threshold: ThresholdKind,
    pub output: PathBuf,
    /// Worker threads; `None` reads `FPCERT_WORKERS`, then falls back to
    /// rayon's default.
    pub workers: Option<usize>,
    /// Directory holding the four standard MNIST IDX files.
    pub mnist_dir: Option<PathBuf>,
    pub pairs: Vec<(i64, i64)>,
    pub train_size: usize,
    pub sigmas: Vec<f64>,
    pub m_samples: Vec<usize>,
    pub alpha: f64,
}

impl ExperimentSpec {
    /// Desk-scale defaults for `kind`.
    pub fn new(kind: ExperimentKind, output: impl Into<PathBuf>) -> ExperimentSpec {
        let mut spec = ExperimentSpec {
            kind,
            dims: vec![10, 25, 50, 100, 200],
            trials: 1000,
            seed: 0,
            n_neighbors: None,
            n_steps: 2,
            pgd_step: 1e-5,
            max_pgd_iters: 1_000_000,
            threshold: ThresholdKind::RTilde,
            output: output.into(),
            workers: None,
            mnist_dir: None,
            pairs: vec![(0, 1)],
            train_size: 2000,
            sigmas: vec![3.0],
            m_samples: vec![100],
            alpha: 0.001,
        };
        match kind {
            ExperimentKind::RandomLinear => {}
            ExperimentKind::RoundingError => {
                spec.dims = vec![20, 100, 500, 1000];
                spec.trials = 1;
            }
            ExperimentKind::Mitigation => spec.dims = vec![3, 30],
            ExperimentKind::SvmAttack => {
                spec.dims = vec![50];
                spec.trials = 500;
                spec.n_neighbors = Some(5000);
            }
            ExperimentKind::ReluExactAttack => {
                spec.dims = vec![10];
                spec.trials = 200;
                spec.pgd_step = 1e-3;
                spec.max_pgd_iters = 100_000;
            }
            ExperimentKind::SmoothingAttack => {
                spec.dims = vec![2];
                spec.trials = 500;
                spec.n_neighbors = Some(1000);
                spec.pgd_step = 1e-2;
                spec.max_pgd_iters = 10_000;
            }
        }
        spec
    }

    /// The full-size grids: 10 000 trials, `D ∈ [1, 100]` for the random
    /// linear experiments, all 45 digit pairs, `M` up to 10 000.
    pub fn paper_scale(mut self) -> ExperimentSpec {
        match self.kind {
            ExperimentKind::RandomLinear | ExperimentKind::Mitigation => {
                self.dims = (1..=100).collect();
                self.trials = 10_000;
            }
            ExperimentKind::RoundingError => self.dims = (20..=1000).collect(),
            ExperimentKind::SvmAttack => {
                self.pairs = (0..10).flat_map(|a| (a + 1..10).map(move |b| (a, b))).collect();
                self.train_size = usize::MAX;
                self.trials = usize::MAX;
            }
            ExperimentKind::ReluExactAttack => self.trials = 10_000,
            ExperimentKind::SmoothingAttack => {
                self.sigmas = vec![1.0, 3.0, 5.0, 7.0];
                self.m_samples = vec![100, 1000, 10_000];
                self.trials = 1000;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::InvalidConfig("dims must be a nonempty list of positive sizes".into()));
        }
        if self.n_neighbors == Some(0) || self.n_steps == 0 {
            return Err(Error::InvalidConfig("neighbour budget must be positive".into()));
        }
        if self.kind == ExperimentKind::SmoothingAttack {
            for &s in &self.sigmas {
                for &m in &self.m_samples {
                    SmoothingConfig::new(s, m, self.alpha, 0)?;
                }
            }
        }
        if self.kind == ExperimentKind::SvmAttack && self.pairs.iter().any(|(a, b)| a == b) {
            return Err(Error::InvalidConfig("svm pairs need two distinct labels".into()));
        }
        self.budget(1, 0)?;
        Ok(())
    }

    /// Attack budget for dimension `d` with the given neighbour seed.
    pub fn budget(&self, d: usize, seed: u64) -> Result<AttackBudget> {
        AttackBudget::new(self.n_neighbors.unwrap_or(d * d), self.n_steps, seed)?
            .with_pgd(self.max_pgd_iters, self.pgd_step)
    }
}

/// Header plus string rows, written as CSV and as TSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let h: Vec<&str> = self.header.iter().map(String::as_str).collect();
        write_csv_atomic(path, &h, &self.rows)
    }

    /// CSV at `path` and the same table as TSV next to it.
    pub fn write_both(&self, path: &Path) -> Result<()> {
        self.write_csv(path)?;
        let h: Vec<&str> = self.header.iter().map(String::as_str).collect();
        write_tsv_atomic(&path.with_extension("tsv"), &h, &self.rows)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentTables {
    pub summary: Table,
    /// Per-attack rows in the attack CSV format, when the experiment has them.
    pub attacks: Option<Table>,
}

pub fn attacks_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.attacks.csv"))
}

/// Runs the experiment and writes its tables: the summary to
/// `spec.output` (plus a `.tsv` twin) and per-attack rows, if any, to
/// `<stem>.attacks.csv`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTables> {
    let tables = compute_experiment(spec)?;
    tables.summary.write_both(&spec.output)?;
    if let Some(a) = &tables.attacks {
        a.write_csv(&attacks_path(&spec.output))?;
    }
    Ok(tables)
}

pub fn compute_experiment(spec: &ExperimentSpec) -> Result<ExperimentTables> {
    spec.validate()?;
    with_pool(spec.workers, || match spec.kind {
        ExperimentKind::RandomLinear => run_random_linear(spec).map(|t| (t, None)),
        ExperimentKind::RoundingError => run_rounding_error(spec).map(|t| (t, None)),
        ExperimentKind::Mitigation => run_mitigation(spec).map(|t| (t, None)),
        ExperimentKind::SvmAttack => run_svm_attack(spec).map(|(t, a)| (t, Some(a))),
        ExperimentKind::ReluExactAttack => run_relu_exact(spec).map(|t| (t, None)),
        ExperimentKind::SmoothingAttack => run_smoothing_attack(spec).map(|t| (t, None)),
    })?
    .map(|(summary, attacks)| ExperimentTables { summary, attacks })
}

pub fn worker_count(explicit: Option<usize>) -> Result<usize> {
    if let Some(n) = explicit {
        return Ok(n);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{WORKERS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(0),
    }
}

/// Runs `f` on a rayon pool with the configured number of threads (0 lets
/// rayon decide).
pub fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(workers)?)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

/// The random stream of one trial.
pub fn trial_rng(seed: u64, d: usize, tag: u8, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((d as u64) << 32) | (u64::from(tag) << 24) | (trial as u64 & 0xff_ffff));
    rng
}

fn rate(successes: usize, trials: usize) -> String {
    (successes as f64 / trials as f64).to_string()
}

/// Fails unless the success replays: float norm within the threshold and a
/// changed label, recomputed from scratch.
pub fn check_replay<F>(outcome: &AttackOutcome, domain: Option<Domain>, classify: F) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<Verdict>,
{
    if let AttackOutcome::Success(r) = outcome {
        if !replay(r, domain, classify)? {
            return Err(Error::Invariant(format!(
                "reported success does not replay (norm {} vs threshold {})",
                r.delta_norm, r.threshold
            )));
        }
    }
    Ok(())
}

fn linear_classifier(m: &LinearModel) -> impl FnMut(&[f64]) -> Result<Verdict> + '_ {
    move |x| Ok(Verdict::Class(m.predict(x)?.into()))
}

/// One random linear trial: model, input, and the neighbour seed.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTrial {
    pub d: usize,
    pub trial: usize,
    pub model: LinearModel,
    pub x: Vec<f64>,
    pub budget_seed: u64,
}

pub fn linear_trial(seed: u64, d: usize, trial: usize) -> Result<LinearTrial> {
    let mut rng = trial_rng(seed, d, 0, trial);
    let (model, x) = gen_random_linear_case_from(d, &mut rng)?;
    Ok(LinearTrial { d, trial, model, x, budget_seed: rng.next_u64() })
}

/// All trials for one dimension, attacked against `kind`, in trial order.
pub fn random_linear_outcomes(
    spec: &ExperimentSpec,
    d: usize,
    kind: ThresholdKind,
) -> Result<Vec<(LinearTrial, AttackOutcome)>> {
    (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let t = linear_trial(spec.seed, d, trial)?;
            let budget = spec.budget(d, t.budget_seed)?;
            let out = attack_linear_threshold(&t.model, &t.x, kind, &budget, None)?;
            check_replay(&out, None, linear_classifier(&t.model))?;
            Ok((t, out))
        })
        .collect()
}

fn run_random_linear(spec: &ExperimentSpec) -> Result<Table> {
    if !matches!(spec.threshold, ThresholdKind::RTilde | ThresholdKind::RLo) {
        return Err(Error::InvalidConfig("random_linear uses threshold r_tilde or r_lo".into()));
    }
    let mut table = Table::new(&["D", "trials", "successes", "rate"]);
    for &d in &spec.dims {
        let outs = random_linear_outcomes(spec, d, spec.threshold)?;
        let s = outs.iter().filter(|(_, o)| o.is_success()).count();
        table.push(vec![d.to_string(), spec.trials.to_string(), s.to_string(), rate(s, spec.trials)]);
    }
    Ok(table)
}

/// `R̃`, `[R̲, R̄]` and the width for the badly scaled case at dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundingErrorRow {
    pub d: usize,
    pub r_tilde: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub width: f64,
    pub overflow: bool,
}

pub fn rounding_error_row(d: usize) -> Result<RoundingErrorRow> {
    let (m, x) = gen_error_scale_case(d)?;
    let r_tilde = exact_radius_linear(&m, &x)?;
    let (r_lo, r_hi) = sound_radius_linear(&m, &x)?;
    let overflow = !r_tilde.is_finite() || !r_hi.is_finite();
    Ok(RoundingErrorRow { d, r_tilde, r_lo, r_hi, width: r_hi - r_lo, overflow })
}

fn run_rounding_error(spec: &ExperimentSpec) -> Result<Table> {
    let mut table = Table::new(&["D", "r_tilde", "r_lo", "r_hi", "width", "status"]);
    let rows: Vec<RoundingErrorRow> =
        spec.dims.par_iter().map(|&d| rounding_error_row(d)).collect::<Result<_>>()?;
    for r in rows {
        table.push(vec![
            r.d.to_string(),
            r.r_tilde.to_string(),
            r.r_lo.to_string(),
            r.r_hi.to_string(),
            r.width.to_string(),
            if r.overflow { "overflow" } else { "ok" }.to_string(),
        ]);
    }
    Ok(table)
}

/// Per-trial outcome of the mitigation experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct MitigationTrial {
    pub r_tilde: f64,
    pub r_hat: f64,
    pub success_r_tilde: bool,
    pub success_r_lo: bool,
}

pub fn mitigation_trials(spec: &ExperimentSpec, d: usize) -> Result<Vec<MitigationTrial>> {
    (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let t = linear_trial(spec.seed, d, trial)?;
            let budget = spec.budget(d, t.budget_seed)?;
            let r_tilde = exact_radius_linear(&t.model, &t.x)?;
            let bounds = sound_radius_linear(&t.model, &t.x)?;
            let hi = attack_linear_threshold(&t.model, &t.x, ThresholdKind::RTilde, &budget, None)?;
            let lo = attack_linear_threshold(&t.model, &t.x, ThresholdKind::RLo, &budget, None)?;
            check_replay(&hi, None, linear_classifier(&t.model))?;
            check_replay(&lo, None, linear_classifier(&t.model))?;
            let r_hat = rhat_search(&t.model, &t.x, bounds, &budget)?;
            Ok(MitigationTrial {
                r_tilde,
                r_hat,
                success_r_tilde: hi.is_success(),
                success_r_lo: lo.is_success(),
            })
        })
        .collect()
}

fn run_mitigation(spec: &ExperimentSpec) -> Result<Table> {
    let mut table = Table::new(&[
        "D",
        "trials",
        "successes_r_tilde",
        "successes_r_lo",
        "rhat_above_rtilde",
        "rhat_at_or_below_rtilde",
    ]);
    for &d in &spec.dims {
        let trials = mitigation_trials(spec, d)?;
        let count = |f: &dyn Fn(&MitigationTrial) -> bool| trials.iter().filter(|t| f(t)).count();
        table.push(vec![
            d.to_string(),
            spec.trials.to_string(),
            count(&|t| t.success_r_tilde).to_string(),
            count(&|t| t.success_r_lo).to_string(),
            count(&|t| t.r_hat > t.r_tilde).to_string(),
            count(&|t| t.r_hat <= t.r_tilde).to_string(),
        ]);
    }
    Ok(table)
}

/// Train and test sets for the SVM experiment: MNIST scaled to `[0, 1]`
/// when a directory is given, otherwise ten synthetic Gaussian classes in
/// `[0, 1]^D`.
pub fn svm_data(spec: &ExperimentSpec) -> Result<(Dataset, Dataset)> {
    match &spec.mnist_dir {
        Some(dir) => Ok((
            load_idx(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"), true)?,
            load_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"), true)?,
        )),
        None => {
            let d = spec.dims[0];
            let mut rng = trial_rng(spec.seed, d, 1, 0);
            let centers: Vec<Vec<f64>> =
                (0..10).map(|_| (0..d).map(|_| rng.random_range(0.2..0.8)).collect()).collect();
            let clip = |ds: Dataset| -> Result<Dataset> {
                let mut f = ds.features;
                f.as_mut_slice().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
                Dataset::new(f, ds.labels, Domain::new(0.0, 1.0)?)
            };
            let per_class = spec.train_size.min(100_000).div_ceil(2).max(1);
            let train = clip(gen_blobs(per_class, &centers, 0.15, rng.next_u64())?)?;
            let test = clip(gen_blobs(spec.trials.min(100_000).div_ceil(2).max(1), &centers, 0.15, rng.next_u64())?)?;
            Ok((train, test))
        }
    }
}

fn run_svm_attack(spec: &ExperimentSpec) -> Result<(Table, Table)> {
    let (train, test) = svm_data(spec)?;
    let mut summary = Table::new(&[
        "pair",
        "train_size",
        "train_accuracy",
        "val_accuracy",
        "attacked",
        "successes_r_tilde",
        "successes_r_lo",
        "rate_r_tilde",
    ]);
    let mut attacks = Table::new(&ATTACK_CSV_HEADER);
    for (pair_idx, &(a, b)) in spec.pairs.iter().enumerate() {
        let tr = train.binary_pair(a, b)?.take(spec.train_size);
        let te = test.binary_pair(a, b)?.take(spec.trials);
        let cfg = TrainConfig { seed: spec.seed, ..TrainConfig::default() };
        let (model, _) = train_linear_svm(&tr, &cfg)?;
        let domain = Some(te.domain);
        let model_id = format!("{a}-{b}");
        let outs: Vec<(AttackOutcome, AttackOutcome)> = (0..te.len())
            .into_par_iter()
            .map(|i| {
                let seed = trial_rng(spec.seed, pair_idx, 2, i).next_u64();
                let budget = spec.budget(te.dim(), seed)?;
                let x = te.row(i);
                let hi = attack_linear_threshold(&model, x, ThresholdKind::RTilde, &budget, domain)?;
                let lo = attack_linear_threshold(&model, x, ThresholdKind::RLo, &budget, domain)?;
                check_replay(&hi, domain, linear_classifier(&model))?;
                check_replay(&lo, domain, linear_classifier(&model))?;
                Ok((hi, lo))
            })
            .collect::<Result<_>>()?;
        for (i, (hi, lo)) in outs.iter().enumerate() {
            attacks.push(hi.csv_record(&model_id, &i.to_string()));
            attacks.push(lo.csv_record(&model_id, &i.to_string()));
        }
        let s_hi = outs.iter().filter(|(h, _)| h.is_success()).count();
        let s_lo = outs.iter().filter(|(_, l)| l.is_success()).count();
        summary.push(vec![
            model_id,
            tr.len().to_string(),
            linear_accuracy(&model, &tr)?.to_string(),
            linear_accuracy(&model, &te)?.to_string(),
            te.len().to_string(),
            s_hi.to_string(),
            s_lo.to_string(),
            rate(s_hi, te.len().max(1)),
        ]);
    }
    Ok((summary, attacks))
}

pub const RELU_NET_KINDS: [(&str, bool); 2] = [("nonnegative", true), ("unconstrained", false)];

/// Architecture of the random networks in the ReLU experiment.
pub fn relu_arch(d: usize) -> Vec<usize> {
    vec![d, 16, 16, 2]
}

/// Random network and nonnegative input of one ReLU trial.
pub fn relu_trial(seed: u64, d: usize, nonnegative: bool, trial: usize) -> Result<(ReluNetwork, Vec<f64>, u64)> {
    let mut rng = trial_rng(seed, d, 3 + u8::from(nonnegative), trial);
    let net = gen_random_relu_net(&relu_arch(d), nonnegative, &mut rng)?;
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
    Ok((net, x, rng.next_u64()))
}

fn run_relu_exact(spec: &ExperimentSpec) -> Result<Table> {
    let mut table =
        Table::new(&["D", "net_kind", "trials", "pgd_found", "pattern_matched", "successes", "rate"]);
    for &d in &spec.dims {
        for (name, nonneg) in RELU_NET_KINDS {
            let outs: Vec<AttackOutcome> = (0..spec.trials)
                .into_par_iter()
                .map(|trial| {
                    let (net, x, seed) = relu_trial(spec.seed, d, nonneg, trial)?;
                    let out = attack_relu_exact(&net, &x, &spec.budget(d, seed)?, None)?;
                    check_replay(&out, None, |p| Ok(Verdict::Class(net.predict(p)? as i64)))?;
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            let reason = |o: &AttackOutcome| match o {
                AttackOutcome::NotFound { reason, .. } => Some(*reason),
                AttackOutcome::Success(_) => None,
            };
            let pgd_found = outs
                .iter()
                .filter(|o| !matches!(reason(o), Some(NotFoundReason::PgdExhausted | NotFoundReason::DeadRegion)))
                .count();
            let matched = outs
                .iter()
                .filter(|o| matches!(reason(o), None | Some(NotFoundReason::NoCandidate)))
                .count();
            let s = outs.iter().filter(|o| o.is_success()).count();
            table.push(vec![
                d.to_string(),
                name.to_string(),
                spec.trials.to_string(),
                pgd_found.to_string(),
                matched.to_string(),
                s.to_string(),
                rate(s, spec.trials),
            ]);
        }
    }
    Ok(table)
}

/// The two-class task of the smoothing experiment: a small MLP trained on
/// two overlapping Gaussian blobs in `D` dimensions, and `inputs` fresh
/// points from the same blobs.
pub fn smoothing_task(seed: u64, d: usize, inputs: usize) -> Result<(ReluNetwork, Dataset)> {
    let mut rng = trial_rng(seed, d, 5, 0);
    let mut c0 = vec![0.0; d];
    let mut c1 = vec![0.0; d];
    c0[0] = -2.0;
    c1[0] = 2.0;
    let centers = [c0, c1];
    let train = gen_blobs(200, &centers, 1.0, rng.next_u64())?;
    let cfg = TrainConfig { epochs: 30, batch_size: 32, seed: rng.next_u64(), ..TrainConfig::default() };
    let (net, _) = train_mlp(&train, &[d, 16, 16, 2], &cfg)?;
    let test = gen_blobs(inputs.div_ceil(2), &centers, 1.0, rng.next_u64())?.take(inputs);
    Ok((net, test))
}

/// Outcomes of the smoothed attack on every task input, in order.
pub fn smoothing_outcomes(
    spec: &ExperimentSpec,
    net: &ReluNetwork,
    inputs: &Dataset,
    cfg: &SmoothingConfig,
) -> Result<Vec<AttackOutcome>> {
    let bank = NoiseBank::new(cfg, inputs.dim())?;
    (0..inputs.len())
        .into_par_iter()
        .map(|i| {
            let seed = trial_rng(spec.seed, inputs.dim(), 6, i).next_u64();
            let out = attack_smoothed(net, inputs.row(i), cfg, &spec.budget(inputs.dim(), seed)?, None)?;
            check_replay(&out, None, |p| Ok(bank.predict(net, p, cfg.alpha)?.into()))?;
            Ok(out)
        })
        .collect()
}

fn run_smoothing_attack(spec: &ExperimentSpec) -> Result<Table> {
    let d = spec.dims[0];
    let (net, inputs) = smoothing_task(spec.seed, d, spec.trials)?;
    let mut table = Table::new(&["sigma_p", "m_samples", "inputs", "certified", "successes", "rate"]);
    for &sigma in &spec.sigmas {
        for &m in &spec.m_samples {
            let cfg = SmoothingConfig::new(sigma, m, spec.alpha, spec.seed)?;
            let outs = smoothing_outcomes(spec, &net, &inputs, &cfg)?;
            let certified = outs
                .iter()
                .filter(|o| !matches!(o, AttackOutcome::NotFound { reason: NotFoundReason::AbstainedTarget, .. }))
                .count();
            let s = outs.iter().filter(|o| o.is_success()).count();
            table.push(vec![
                sigma.to_string(),
                m.to_string(),
                inputs.len().to_string(),
                certified.to_string(),
                s.to_string(),
                rate(s, inputs.len()),
            ]);
        }
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportTables {
    /// Attacks and successes per model and threshold kind, then one total
    /// row per threshold kind.
    pub summary: Table,
    /// Success rates (percent) for digit pairs `a-b`, rows `a = 0..8`,
    /// columns `b = 1..9`, when every model id is such a pair.
    pub triangle: Option<Table>,
}

/// Aggregates attack CSV files.
pub fn report(inputs: &[PathBuf]) -> Result<ReportTables> {
    let mut counts: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for path in inputs {
        let (header, rows) = read_csv(path)?;
        if header != ATTACK_CSV_HEADER {
            return Err(Error::Csv(format!("{} is not an attack table", path.display())));
        }
        for row in rows {
            let success = match row[8].as_str() {
                "true" => true,
                "false" => false,
                other => return Err(Error::Csv(format!("bad success flag {other:?} in {}", path.display()))),
            };
            let e = counts.entry((row[0].clone(), row[2].clone())).or_default();
            e.0 += 1;
            e.1 += usize::from(success);
        }
    }
    let mut summary = Table::new(&["model_id", "threshold_kind", "attacked", "successes", "rate"]);
    let mut totals: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ((model, kind), (n, s)) in &counts {
        summary.push(vec![model.clone(), kind.clone(), n.to_string(), s.to_string(), rate(*s, *n)]);
        let t = totals.entry(kind.clone()).or_default();
        t.0 += n;
        t.1 += s;
    }
    for (kind, (n, s)) in &totals {
        summary.push(vec!["TOTAL".into(), kind.clone(), n.to_string(), s.to_string(), rate(*s, *n)]);
    }
    Ok(ReportTables { summary, triangle: pair_triangle(&counts) })
}

fn parse_pair(id: &str) -> Option<(usize, usize)> {
    let (a, b) = id.split_once('-')?;
    let (a, b) = (a.parse::<usize>().ok()?, b.parse::<usize>().ok()?);
    (a < b && b <= 9).then_some((a, b))
}

fn pair_triangle(counts: &BTreeMap<(String, String), (usize, usize)>) -> Option<Table> {
    let kind = if counts.keys().any(|(_, k)| k == "r_tilde") {
        "r_tilde".to_string()
    } else {
        counts.keys().next()?.1.clone()
    };
    let mut cells = [[None::<f64>; 10]; 10];
    for ((model, k), (n, s)) in counts {
        let (a, b) = parse_pair(model)?;
        if *k == kind && *n > 0 {
            cells[a][b] = Some(100.0 * *s as f64 / *n as f64);
        }
    }
    let mut header = vec![String::new()];
    header.extend((1..=9).map(|b| b.to_string()));
    let mut t = Table { header, rows: Vec::new() };
    for (a, row) in cells.iter().enumerate().take(9) {
        let mut r = vec![a.to_string()];
        r.extend((1..=9).map(|b| row[b].map(|v| format!("{v:.2}")).unwrap_or_default()));
        t.rows.push(r);
    }
    Some(t)
}
