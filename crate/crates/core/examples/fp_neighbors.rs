//! Float neighbours of a perturbation seed and a few sampled candidates.

use fpcert::attack::{candidate_set, fp_neighbors, AttackBudget};
use fpcert::fp::{next_down, next_up, ulp};

fn main() -> fpcert::Result<()> {
    println!("ulp(1.0) = {:e}", ulp(1.0));
    println!("below 1.0: {:?}, above 1.0: {:?}", next_down(1.0)?, next_up(1.0)?);

    let delta = [1.0, 1.0];
    for (i, &v) in delta.iter().enumerate() {
        println!("candidates[{i}] = {:?}", candidate_set(v, 2)?);
    }
    let budget = AttackBudget::new(5, 2, 42)?;
    for d in fp_neighbors(&delta, &budget)? {
        println!("{d:?}");
    }
    Ok(())
}
