//! Fit the delta^2 log(1/delta) coefficient of the boundary deviation.
use singular_liouville::acceptance::BOUNDARY_FIT_HEIGHTS;
use singular_liouville::blowup_family::{fit_boundary_coefficient, run_family};
use singular_liouville::closed_forms::{Alpha, LocalData};
use singular_liouville::ode_engine::QuadraticWeight;

fn main() -> singular_liouville::Result<()> {
    let alpha = Alpha::new(0.5)?;
    let recs = run_family(alpha, &QuadraticWeight { v0: 18.0, c: 1.0 }, &BOUNDARY_FIT_HEIGHTS, 1.0)?;
    for r in &recs {
        println!("u0 = {:>4}  delta = {:.3e}  d = {:+.4e}", r.u0, r.delta, r.d_boundary);
    }
    let fit = fit_boundary_coefficient(&recs, alpha, &LocalData::radial(18.0, 2.0)?)?;
    println!(
        "estimate {:.5} +- {:.1e}, reference {:.5}, relative error {:.2e}",
        fit.estimate, fit.stderr, fit.reference, fit.rel_error
    );
    Ok(())
}
