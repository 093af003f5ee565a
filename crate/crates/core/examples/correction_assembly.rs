//! Second-order correction assembled from its four angular pieces.
use singular_liouville::closed_forms::{Alpha, BubbleParams, LocalData};
use singular_liouville::linearized_modes::build_correction_c;
use singular_liouville::ode_engine::log_radii;

fn main() -> singular_liouville::Result<()> {
    let alpha = Alpha::new(0.5)?;
    let local = LocalData::new(18.0, [0.7, -0.4], [[1.2, 0.3], [0.3, -0.5]])?;
    let bp = BubbleParams::new(alpha, 18.0, 20.0)?;
    let c = build_correction_c(alpha, &local, &bp, 1.0 / bp.scale)?;
    for p in &c.pieces {
        println!(
            "{:<14} envelope {:.4e}  doubled domain {:.4e}",
            p.harmonic.label(),
            p.envelope,
            p.envelope_doubled
        );
    }
    let res = c.max_mode_residual(&log_radii(1e-2, 1e2, 4.0))?;
    println!("max mode residual {res:.2e} (delta^2 = {:.2e})", bp.scale.powi(2));
    for y in [[0.5, 0.0], [1.0, 1.0], [-3.0, 2.0], [10.0, -10.0]] {
        println!("c({:?}) = {:+.6e}", y, c.eval(y)?);
    }
    Ok(())
}
