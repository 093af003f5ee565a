//! Disk Green's function and the representation of a radial solution.
use singular_liouville::closed_forms::Alpha;
use singular_liouville::expansion_verify::{green_disk, green_identity_check};
use singular_liouville::ode_engine::{shoot_liouville, QuadraticWeight};

fn main() -> singular_liouville::Result<()> {
    println!("G(0, (0.5, 0)) = {:.12}", green_disk(1.0, [0.0, 0.0], [0.5, 0.0])?);
    println!("G((0.3, 0.2), (0, 1)) = {:.3e}", green_disk(1.0, [0.3, 0.2], [0.0, 1.0])?);
    let alpha = Alpha::new(0.5)?;
    let w = QuadraticWeight { v0: 18.0, c: 2.0 };
    for u0 in [5.0, 12.0, 20.0] {
        let shot = shoot_liouville(alpha, &w, u0, 1.0, 1e-10)?;
        let chk = green_identity_check(&shot.profile()?, alpha, &w)?;
        println!("u0 = {u0}: u(0) = {:.10}, representation = {:.10}, gap {:.1e}", chk.center, chk.representation, chk.discrepancy);
    }
    Ok(())
}
