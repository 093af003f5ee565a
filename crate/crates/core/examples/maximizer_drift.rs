//! The gradient term moves the maximum by O(delta^{1/(2 alpha + 1)}).
use singular_liouville::closed_forms::{Alpha, LocalData};
use singular_liouville::expansion_verify::argmax_displacement;

fn main() -> singular_liouville::Result<()> {
    for a in [0.5, 1.5, 2.5] {
        let alpha = Alpha::new(a)?;
        let local = LocalData::new(8.0 * alpha.beta().powi(2), [1.0, 0.0], [[0.0; 2]; 2])?;
        let fit = argmax_displacement(alpha, &local, &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6])?;
        println!(
            "alpha = {a}: exponent {:.4} (expected {:.4})",
            fit.exponent.unwrap_or(f64::NAN),
            1.0 / (2.0 * a + 1.0)
        );
        for (d, r) in fit.radii {
            println!("  delta {d:.0e}  |y_max| {r:.4e}");
        }
    }
    Ok(())
}
