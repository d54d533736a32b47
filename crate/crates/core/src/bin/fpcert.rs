use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use fpcert::attack::{
    attack_linear_threshold, attack_relu_exact, attack_smoothed, relu_pgd, AttackBudget,
    Domain, PgdOutcome, ThresholdKind, ATTACK_CSV_HEADER,
};
use fpcert::certify::{exact_radius_relu_matched, CertificateReport, CERTIFICATE_CSV_HEADER};
use fpcert::data_io::{
    csv_bytes, load_dataset_csv, load_idx, load_model, save_model, write_csv_atomic, Dataset, LoadedModel,
    Model,
};
use fpcert::experiment::{check_replay, report, run_experiment, ExperimentKind, ExperimentSpec};
use fpcert::smoothing::{smooth_certify, SmoothingConfig, SMOOTHING_CSV_HEADER};
use fpcert::train::{linear_accuracy, network_accuracy, train_linear_svm, train_mlp, TrainConfig};
use fpcert::{Error, Result, Verdict};

#[derive(Parser)]
#[command(name = "fpcert", version, about = "Floating-point soundness checks for certified robustness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a linear SVM or a ReLU network.
    Train(TrainArgs),
    /// Certified radii for dataset rows.
    Certify(CertifyArgs),
    /// Rounding-search attacks on dataset rows.
    Attack(AttackArgs),
    /// Run a batch experiment and write its tables.
    Experiment(ExperimentArgs),
    /// Aggregate attack CSV files.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file (`x0..,label`) or IDX prefix `P` for `P-images-idx3-ubyte`
    /// and `P-labels-idx1-ubyte`.
    #[arg(long)]
    dataset: PathBuf,
    /// Scale IDX pixels to [0, 1].
    #[arg(long)]
    rescale: bool,
    /// Input domain `lo,hi` for CSV data (default unbounded).
    #[arg(long, value_parser = parse_pair_f64, allow_hyphen_values = true)]
    domain: Option<(f64, f64)>,
    /// Keep only labels `a,b`, relabelled -1/+1.
    #[arg(long, value_parser = parse_pair_i64, allow_hyphen_values = true)]
    pair: Option<(i64, i64)>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Total neighbour candidates N (default D²).
    #[arg(long)]
    n_neighbors: Option<usize>,
    /// ULP steps per side n.
    #[arg(long, default_value_t = 2)]
    steps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pgd_step: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pgd_iters: u64,
}

#[derive(Args)]
struct SmoothArgs {
    /// Use the smoothed classifier with noise level sigma.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    m_samples: usize,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `svm` or `mlp`.
    #[arg(long, default_value = "svm")]
    kind: String,
    /// Hidden layer sizes for `mlp`, e.g. `64,64`.
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    /// Keep hidden weights and biases nonnegative.
    #[arg(long)]
    clamp: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Per-epoch objective and accuracy.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Only this row (default: all rows up to --limit).
    #[arg(long)]
    input_row: Option<usize>,
    #[arg(long)]
    limit: Option<usize>,
    /// Report the interval enclosure [r_lo, r_hi].
    #[arg(long)]
    sound: bool,
    /// Bisect R̂ inside [r_lo, r_hi].
    #[arg(long)]
    rhat: bool,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    smooth: SmoothArgs,
    /// CSV output (default stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// r_tilde or r_lo for linear models; relu networks use r, or
    /// smoothed with --sigma.
    #[arg(long, default_value = "r_tilde")]
    threshold: String,
    #[arg(long)]
    input_row: Option<usize>,
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    smooth: SmoothArgs,
    /// Model id column (default: file stem).
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    kind: String,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long)]
    pgd_step: Option<f64>,
    #[arg(long)]
    pgd_iters: Option<u64>,
    /// r_tilde or r_lo (random_linear).
    #[arg(long)]
    threshold: Option<String>,
    /// Worker threads (default from FPCERT_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Full-size grids instead of the desk-scale defaults.
    #[arg(long)]
    paper_scale: bool,
    /// Directory with the MNIST IDX files (svm_attack).
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    /// Digit pairs such as `0-1,3-8` (svm_attack).
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<String>>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    m_samples: Option<Vec<usize>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Attack CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Pairwise success-rate triangle for digit-pair model ids.
    #[arg(long)]
    triangle: Option<PathBuf>,
}

fn parse_pair_f64(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn parse_pair_i64(s: &str) -> std::result::Result<(i64, i64), String> {
    let (a, b) = s.split_once(',').ok_or("expected a,b")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 4,
        Error::InvalidConfig(_)
        | Error::InvalidBracket { .. }
        | Error::SameLabels(_)
        | Error::LabelOutOfRange { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Train(a) => train(a),
        Command::Certify(a) => certify(a),
        Command::Attack(a) => attack(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpcert: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_data(a: &DataArgs) -> Result<Dataset> {
    let data = if a.dataset.is_file() {
        let (lo, hi) = a.domain.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        load_dataset_csv(&a.dataset, Domain::new(lo, hi)?)?
    } else {
        let with = |suffix: &str| {
            let mut p = a.dataset.clone().into_os_string();
            p.push(suffix);
            PathBuf::from(p)
        };
        load_idx(&with("-images-idx3-ubyte"), &with("-labels-idx1-ubyte"), a.rescale)?
    };
    match a.pair {
        Some((neg, pos)) => data.binary_pair(neg, pos),
        None => Ok(data),
    }
}

fn rows(data: &Dataset, row: Option<usize>, limit: Option<usize>) -> Result<Vec<usize>> {
    match row {
        Some(i) if i < data.len() => Ok(vec![i]),
        Some(i) => Err(Error::InvalidConfig(format!("row {i} out of range ({} rows)", data.len()))),
        None => Ok((0..data.len().min(limit.unwrap_or(usize::MAX))).collect()),
    }
}

fn budget(b: &BudgetArgs, d: usize, row: usize) -> Result<AttackBudget> {
    // Each row gets its own neighbour seed so that single-row runs reproduce
    // the corresponding row of a full run.
    let seed = b.seed.wrapping_add(row as u64);
    AttackBudget::new(b.n_neighbors.unwrap_or(d * d), b.steps, seed)?.with_pgd(b.pgd_iters, b.pgd_step)
}

fn smoothing_cfg(s: &SmoothArgs, seed: u64) -> Result<Option<SmoothingConfig>> {
    s.sigma.map(|sigma| SmoothingConfig::new(sigma, s.m_samples, s.alpha, seed)).transpose()
}

fn emit(path: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    match path {
        Some(p) => write_csv_atomic(p, header, rows),
        None => {
            let bytes = csv_bytes(header, rows, b',')?;
            std::io::stdout().write_all(&bytes).map_err(|e| Error::Io { path: "-".into(), message: e.to_string() })
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut data = load_data(&a.data)?;
    if let Some(n) = a.train_size {
        data = data.take(n);
    }
    let cfg = TrainConfig {
        learning_rate: a.lr,
        momentum: a.momentum,
        batch_size: a.batch,
        epochs: a.epochs,
        l1_lambda: a.lambda,
        clamp_nonnegative: a.clamp,
        seed: a.seed,
    };
    let mut meta = BTreeMap::new();
    meta.insert("trainer".to_string(), Value::from(a.kind.clone()));
    meta.insert("train_size".to_string(), Value::from(data.len()));
    meta.insert("seed".to_string(), Value::from(a.seed));
    if let Some((neg, pos)) = a.data.pair {
        meta.insert("pair".to_string(), Value::from(format!("{neg}-{pos}")));
    }
    if a.kind == "svm" && a.data.pair.is_none() {
        data = data.binary_pair(-1, 1)?;
    }
    let (model, log, acc) = match a.kind.as_str() {
        "svm" => {
            let (m, log) = train_linear_svm(&data, &cfg)?;
            let acc = linear_accuracy(&m, &data)?;
            (Model::Linear(m), log, acc)
        }
        "mlp" => {
            let classes = data.labels.iter().copied().max().unwrap_or(0) + 1;
            let mut arch = vec![data.dim()];
            arch.extend(&a.hidden);
            arch.push(usize::try_from(classes.max(2)).map_err(|_| Error::InvalidConfig("negative labels".into()))?);
            let (n, log) = train_mlp(&data, &arch, &cfg)?;
            let acc = network_accuracy(&n, &data)?;
            (Model::Relu(n), log, acc)
        }
        other => return Err(Error::InvalidConfig(format!("unknown trainer {other:?} (svm or mlp)"))),
    };
    meta.insert("train_accuracy".to_string(), Value::from(acc));
    save_model(&a.output, &model, &meta)?;
    if let Some(p) = &a.log {
        log.write_csv(p)?;
    }
    eprintln!("trained {} on {} rows, accuracy {acc}", a.kind, data.len());
    Ok(())
}

fn load(path: &Path) -> Result<LoadedModel> {
    let m = load_model(path)?;
    if m.legacy_decimal {
        eprintln!("fpcert: {} has no bit patterns; decimal values used", path.display());
    }
    Ok(m)
}

fn model_id(explicit: Option<&String>, loaded: &LoadedModel, path: &Path) -> String {
    if let Some(id) = explicit {
        return id.clone();
    }
    if let Some(Value::String(p)) = loaded.metadata.get("pair") {
        return p.clone();
    }
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn certify(a: CertifyArgs) -> Result<()> {
    let loaded = load(&a.model)?;
    let data = load_data(&a.data)?;
    let id = model_id(None, &loaded, &a.model);
    let domain = Some(data.domain);
    let mut out = Vec::new();
    let header: Vec<&str> = match &loaded.model {
        Model::Linear(m) => {
            for i in rows(&data, a.input_row, a.limit)? {
                let x = data.row(i);
                let mut rep = CertificateReport::linear(m, x)?;
                if a.rhat {
                    rep = rep.with_rhat(m, x, &budget(&a.budget, x.len(), i)?)?;
                }
                let mut rec = rep.csv_record(&id, &i.to_string());
                if !a.sound {
                    rec[3].clear();
                    rec[4].clear();
                }
                out.push(rec);
            }
            CERTIFICATE_CSV_HEADER.to_vec()
        }
        Model::Relu(net) => match smoothing_cfg(&a.smooth, a.budget.seed)? {
            Some(cfg) => {
                for i in rows(&data, a.input_row, a.limit)? {
                    out.push(smooth_certify(net, data.row(i), &cfg)?.csv_record(&i.to_string(), &cfg));
                }
                SMOOTHING_CSV_HEADER.to_vec()
            }
            None => {
                for i in rows(&data, a.input_row, a.limit)? {
                    let x = data.row(i);
                    let f = net.forward(x)?;
                    let t = net.runner_up(&f.scores, f.label);
                    let b = budget(&a.budget, x.len(), i)?;
                    let r = match relu_pgd(net, x, f.label, t, &b, domain) {
                        Ok(PgdOutcome::Found { x_prime, .. }) => {
                            let pattern = net.activation_pattern(&x_prime)?;
                            exact_radius_relu_matched(net, x, f.label, t, &pattern)?
                        }
                        Ok(PgdOutcome::Exhausted { .. }) | Err(Error::ZeroDirection) => None,
                        Err(e) => return Err(e),
                    };
                    out.push(vec![
                        id.clone(),
                        i.to_string(),
                        f.label.to_string(),
                        t.to_string(),
                        r.map(|v| v.to_string()).unwrap_or_default(),
                    ]);
                }
                vec!["model_id", "input_id", "label", "target", "r"]
            }
        },
    };
    emit(a.output.as_deref(), &header, &out)
}

fn attack(a: AttackArgs) -> Result<()> {
    let loaded = load(&a.model)?;
    let data = load_data(&a.data)?;
    let id = model_id(a.model_id.as_ref(), &loaded, &a.model);
    let domain = Some(data.domain);
    let kind: ThresholdKind = a.threshold.parse()?;
    let mut out = Vec::new();
    let mut successes = 0usize;
    let selected = rows(&data, a.input_row, a.limit)?;
    for &i in &selected {
        let x = data.row(i);
        let b = budget(&a.budget, x.len(), i)?;
        let outcome = match (&loaded.model, kind) {
            (Model::Linear(m), ThresholdKind::RTilde | ThresholdKind::RLo) => {
                let o = attack_linear_threshold(m, x, kind, &b, domain)?;
                check_replay(&o, domain, |p| Ok(Verdict::Class(m.predict(p)?.into())))?;
                o
            }
            (Model::Relu(net), ThresholdKind::R) => {
                let o = attack_relu_exact(net, x, &b, domain)?;
                check_replay(&o, domain, |p| Ok(Verdict::Class(net.predict(p)? as i64)))?;
                o
            }
            (Model::Relu(net), ThresholdKind::Smoothed) => {
                let cfg = smoothing_cfg(&a.smooth, a.budget.seed)?
                    .ok_or_else(|| Error::InvalidConfig("--threshold smoothed needs --sigma".into()))?;
                let o = attack_smoothed(net, x, &cfg, &b, domain)?;
                let bank = fpcert::smoothing::NoiseBank::new(&cfg, x.len())?;
                check_replay(&o, domain, |p| Ok(bank.predict(net, p, cfg.alpha)?.into()))?;
                o
            }
            (_, k) => return Err(Error::InvalidConfig(format!("threshold {k} does not fit this model type"))),
        };
        successes += usize::from(outcome.is_success());
        out.push(outcome.csv_record(&id, &i.to_string()));
    }
    emit(a.output.as_deref(), &ATTACK_CSV_HEADER, &out)?;
    eprintln!("{successes} successes over {} inputs", selected.len());
    Ok(())
}

fn parse_digit_pair(s: &str) -> Result<(i64, i64)> {
    let bad = || Error::InvalidConfig(format!("pair {s:?} is not of the form a-b"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let kind: ExperimentKind = a.kind.parse()?;
    let mut spec = ExperimentSpec::new(kind, a.output);
    if a.paper_scale {
        spec = spec.paper_scale();
    }
    spec.seed = a.seed;
    spec.workers = a.workers;
    spec.mnist_dir = a.mnist_dir;
    if let Some(d) = a.dims {
        spec.dims = d;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if a.n_neighbors.is_some() {
        spec.n_neighbors = a.n_neighbors;
    }
    if let Some(s) = a.steps {
        spec.n_steps = s;
    }
    if let Some(s) = a.pgd_step {
        spec.pgd_step = s;
    }
    if let Some(s) = a.pgd_iters {
        spec.max_pgd_iters = s;
    }
    if let Some(t) = a.threshold {
        spec.threshold = t.parse()?;
    }
    if let Some(p) = a.pairs {
        spec.pairs = p.iter().map(|s| parse_digit_pair(s)).collect::<Result<_>>()?;
    }
    if let Some(n) = a.train_size {
        spec.train_size = n;
    }
    if let Some(s) = a.sigmas {
        spec.sigmas = s;
    }
    if let Some(m) = a.m_samples {
        spec.m_samples = m;
    }
    if let Some(al) = a.alpha {
        spec.alpha = al;
    }
    let tables = run_experiment(&spec)?;
    eprintln!("{}: {} rows written to {}", kind, tables.summary.rows.len(), spec.output.display());
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let r = report(&a.inputs)?;
    match &a.output {
        Some(p) => r.summary.write_both(p)?,
        None => {
            let h: Vec<&str> = r.summary.header.iter().map(String::as_str).collect();
            emit(None, &h, &r.summary.rows)?;
        }
    }
    if let Some(p) = &a.triangle {
        let t = r
            .triangle
            .ok_or_else(|| Error::InvalidConfig("model ids are not digit pairs a-b".into()))?;
        t.write_both(p)?;
    }
    Ok(())
}
