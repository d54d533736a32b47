//! Bisect the largest attack-free radius inside the interval enclosure.

use fpcert::attack::AttackBudget;
use fpcert::certify::CertificateReport;
use fpcert::data_io::gen_random_linear_case;
use fpcert::fp::ulp_distance;

fn main() -> fpcert::Result<()> {
    for seed in 0..8u64 {
        let d = 30;
        let (m, x) = gen_random_linear_case(d, seed)?;
        let rep = CertificateReport::linear(&m, &x)?.with_rhat(&m, &x, &AttackBudget::new(d * d, 2, seed)?)?;
        let r_hat = rep.r_hat.unwrap_or(rep.r_lo);
        println!(
            "seed {seed}: r_tilde {:<20} r_hat {:<20} (r_hat - r_tilde = {} ulps)",
            rep.r_tilde,
            r_hat,
            ulp_distance(rep.r_tilde, r_hat)
        );
    }
    Ok(())
}
