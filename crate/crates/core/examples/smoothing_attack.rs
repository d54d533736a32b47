//! Certify a smoothed two-class network and attack its certificates.

use fpcert::attack::{attack_smoothed, AttackBudget, AttackOutcome};
use fpcert::experiment::smoothing_task;
use fpcert::smoothing::{smooth_certify, SmoothingConfig};

fn main() -> fpcert::Result<()> {
    let (net, inputs) = smoothing_task(1, 2, 60)?;
    let cfg = SmoothingConfig::new(3.0, 100, 0.001, 1)?;
    let cert = smooth_certify(&net, inputs.row(0), &cfg)?;
    println!("input 0: label {} p_A >= {} radius {:?}", cert.label, cert.p_a_lower, cert.radius);

    let mut successes = 0;
    for i in 0..inputs.len() {
        let budget = AttackBudget::new(1000, 2, i as u64)?.with_pgd(10_000, 1e-2)?;
        if let AttackOutcome::Success(r) = attack_smoothed(&net, inputs.row(i), &cfg, &budget, None)? {
            successes += 1;
            if successes == 1 {
                println!("input {i}: {} -> {} at ||delta'|| = {} <= {}", r.label_before, r.label_after, r.delta_norm, r.threshold);
            }
        }
    }
    println!("{successes} / {} certified inputs broken", inputs.len());
    Ok(())
}
