//! Width of the radius enclosure for a badly scaled linear model.

use fpcert::experiment::rounding_error_row;

fn main() -> fpcert::Result<()> {
    println!("{:>5} {:>24} {:>24} {:>10}", "D", "r_lo", "r_hi", "width");
    for d in [19, 20, 50, 100, 200, 500, 1000] {
        let r = rounding_error_row(d)?;
        println!("{:>5} {:>24} {:>24} {:>10}", r.d, r.r_lo, r.r_hi, r.width);
    }
    Ok(())
}
