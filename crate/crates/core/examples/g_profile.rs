//! First-order radial profile: closed form against a shooting solve.
use singular_liouville::closed_forms::{eval_g, Alpha};
use singular_liouville::linearized_modes::solve_g_numeric;

fn main() -> singular_liouville::Result<()> {
    let alpha = Alpha::new(0.5)?;
    let prof = solve_g_numeric(alpha, 18.0, 1e4)?;
    println!("{:>8} {:>14} {:>14} {:>10}", "r", "closed", "numeric", "rel err");
    for r in [1e-2, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
        let exact = eval_g(alpha, 18.0, r).value;
        let (num, _) = prof.interpolate(r).expect("inside the profile");
        println!("{r:>8} {exact:>14.9} {num:>14.9} {:>10.1e}", (num / exact - 1.0).abs());
    }
    Ok(())
}
