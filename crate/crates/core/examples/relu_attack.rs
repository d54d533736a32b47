//! Exact-radius attack on small random ReLU networks.

use fpcert::attack::{attack_relu_exact, AttackBudget, AttackOutcome};
use fpcert::data_io::gen_random_relu_net;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fpcert::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 10;
    for nonnegative in [true, false] {
        let mut counts = std::collections::BTreeMap::new();
        for i in 0..40u64 {
            let net = gen_random_relu_net(&[d, 16, 16, 2], nonnegative, &mut rng)?;
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
            let budget = AttackBudget::new(d * d, 2, i)?.with_pgd(100_000, 1e-3)?;
            let key = match attack_relu_exact(&net, &x, &budget, None)? {
                AttackOutcome::Success(_) => "success",
                AttackOutcome::NotFound { reason, .. } => reason.as_str(),
            };
            *counts.entry(key).or_insert(0) += 1;
        }
        println!("nonnegative={nonnegative}: {counts:?}");
    }
    Ok(())
}
