//! Float radius versus its interval enclosure for a random linear model.

use fpcert::certify::CertificateReport;
use fpcert::data_io::gen_random_linear_case;
use fpcert::interval::Interval;

fn main() -> fpcert::Result<()> {
    for d in [2, 10, 100] {
        let (m, x) = gen_random_linear_case(d, 3)?;
        let rep = CertificateReport::linear(&m, &x)?;
        println!(
            "D={d:<4} r_tilde={:<22} r_lo={:<22} r_hi={:<22} consistent={}",
            rep.r_tilde,
            rep.r_lo,
            rep.r_hi,
            rep.is_consistent()
        );
    }

    let third = Interval::point(1.0).div(Interval::point(3.0))?;
    println!("1/3 in {third:?}");

    let naive = ((2e-30 + 1e30) - 1e30) - 1e-30;
    let iv = ((Interval::point(2e-30) + Interval::point(1e30)) - Interval::point(1e30)) - Interval::point(1e-30);
    println!("round-to-nearest: {naive:e}; interval: {iv:?}; contains 1e-30: {}", iv.contains(1e-30));
    Ok(())
}
