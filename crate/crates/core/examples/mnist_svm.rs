//! Binary MNIST SVM attack.
//!
//! Usage: `cargo run --release --example mnist_svm -- <mnist-dir> [a b]`
//! where the directory holds the four standard IDX files.

use std::path::PathBuf;

use fpcert::attack::{attack_linear_threshold, AttackBudget, ThresholdKind};
use fpcert::data_io::load_idx;
use fpcert::train::{linear_accuracy, train_linear_svm, TrainConfig};

fn main() -> fpcert::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from) else {
        eprintln!("usage: mnist_svm <mnist-dir> [a b]");
        std::process::exit(2);
    };
    let a: i64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let b: i64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let train = load_idx(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"), true)?;
    let test = load_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"), true)?;
    let (tr, te) = (train.binary_pair(a, b)?, test.binary_pair(a, b)?);
    let (m, _) = train_linear_svm(&tr, &TrainConfig::default())?;
    println!("{a}-vs-{b}: train {:.4}, test {:.4}", linear_accuracy(&m, &tr)?, linear_accuracy(&m, &te)?);

    let n = te.len().min(200);
    let mut hits = [0; 2];
    for i in 0..n {
        let budget = AttackBudget::new(5000, 2, i as u64)?;
        for (k, kind) in [ThresholdKind::RTilde, ThresholdKind::RLo].into_iter().enumerate() {
            hits[k] += usize::from(attack_linear_threshold(&m, te.row(i), kind, &budget, Some(te.domain))?.is_success());
        }
    }
    println!("{n} test images: {} broken at r_tilde, {} at r_lo", hits[0], hits[1]);
    Ok(())
}
