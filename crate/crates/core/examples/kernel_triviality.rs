//! Growth exponents of the regular angular modes of the linearized operator.
use singular_liouville::closed_forms::Alpha;
use singular_liouville::linearized_modes::kernel_triviality_report;

fn main() -> singular_liouville::Result<()> {
    for a in [0.5, 1.5, 2.5] {
        let alpha = Alpha::new(a)?;
        let rep = kernel_triviality_report(alpha, 8.0 * alpha.beta().powi(2), 4)?;
        println!("alpha = {a}: certified = {}", rep.certified);
        for row in rep.rows {
            println!(
                "  k = {}  exponent at 0 = {:?}  at infinity = {:?}",
                row.k, row.exponent_zero, row.exponent_infinity
            );
        }
    }
    Ok(())
}
