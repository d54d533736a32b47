//! Rounding search against random linear classifiers, first with the float
//! radius and then with the sound lower bound.

use fpcert::attack::{attack_linear_threshold, replay, AttackBudget, AttackOutcome, ThresholdKind, Verdict};
use fpcert::data_io::gen_random_linear_case;

fn main() -> fpcert::Result<()> {
    let d = 50;
    let mut hits = [0usize; 2];
    for trial in 0..200u64 {
        let (m, x) = gen_random_linear_case(d, trial)?;
        let budget = AttackBudget::new(d * d, 2, trial)?;
        for (k, kind) in [ThresholdKind::RTilde, ThresholdKind::RLo].into_iter().enumerate() {
            if let AttackOutcome::Success(r) = attack_linear_threshold(&m, &x, kind, &budget, None)? {
                hits[k] += 1;
                let ok = replay(&r, None, |p| Ok(Verdict::Class(m.predict(p)?.into())))?;
                if hits[k] == 1 {
                    println!(
                        "{kind}: ||delta'|| = {} <= {} , label {} -> {}, replay {ok}",
                        r.delta_norm, r.threshold, r.label_before, r.label_after
                    );
                }
            }
        }
    }
    println!("D={d}: {} / 200 against r_tilde, {} / 200 against r_lo", hits[0], hits[1]);
    Ok(())
}
