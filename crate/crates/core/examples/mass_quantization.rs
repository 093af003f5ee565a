//! Total mass of radial solutions approaches 8 pi (1 + alpha).
use singular_liouville::blowup_family::run_family;
use singular_liouville::closed_forms::Alpha;
use singular_liouville::ode_engine::QuadraticWeight;

fn main() -> singular_liouville::Result<()> {
    let alpha = Alpha::new(0.5)?;
    let quantum = 8.0 * std::f64::consts::PI * alpha.beta();
    let heights = [2.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    let recs = run_family(alpha, &QuadraticWeight { v0: 18.0, c: 3.0 }, &heights, 1.0)?;
    for r in recs {
        println!("u0 = {:>4}  delta = {:.3e}  mass = {:.6}  (quantum {quantum:.6})", r.u0, r.delta, r.mass);
    }
    Ok(())
}
