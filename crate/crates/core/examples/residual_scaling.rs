//! Residual of the truncated expansion at increasing order.
use singular_liouville::blowup_family::DEFAULT_HEIGHTS;
use singular_liouville::closed_forms::{Alpha, ExpansionOrder, LocalData};
use singular_liouville::expansion_verify::{residual_sweep, slope_gain, PolarGrid};

fn main() -> singular_liouville::Result<()> {
    let alpha = Alpha::new(0.5)?;
    let grid = PolarGrid::standard();
    let cases = [
        ("gradient only", LocalData::new(18.0, [1.0, 0.0], [[0.0; 2]; 2])?, ExpansionOrder::Bubble, ExpansionOrder::Gradient),
        ("laplacian only", LocalData::new(18.0, [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])?, ExpansionOrder::Gradient, ExpansionOrder::Logarithmic),
    ];
    for (name, local, lo, hi) in cases {
        println!("{name}:");
        for order in [lo, hi] {
            for (delta, rep) in residual_sweep(alpha, &local, &DEFAULT_HEIGHTS, order, &grid)? {
                println!("  order {} delta {delta:.3e} residual {:.3e}", order.index(), rep.weighted_sup);
            }
        }
        let g = slope_gain(alpha, &local, &DEFAULT_HEIGHTS, lo, hi, &grid)?;
        println!("  slopes {:.3} -> {:.3}, gain {:.3}", g.lower_slope, g.upper_slope, g.gain);
    }
    Ok(())
}
