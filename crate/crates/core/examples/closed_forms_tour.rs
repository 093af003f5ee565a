//! Bubble, expansion constants, first-order profile and the mode pair.
use singular_liouville::closed_forms::*;

fn main() -> singular_liouville::Result<()> {
    let alpha = Alpha::new(0.5)?;
    let v0 = 18.0;
    let c = expansion_coefficients(alpha, v0)?;
    println!("lambda1 = {:.12}, lambda2 = {:.12}", c.lambda1, c.lambda2);

    let bp = BubbleParams::new(alpha, v0, 20.0)?;
    println!("u0 = 20 gives delta = {:.4e}", bp.scale);
    for r in [0.0, 1e-3, 1e-2, 0.1, 1.0] {
        let u = eval_bubble(&bp, r, Normalization::HeightU0)?;
        let g = eval_g(alpha, v0, r);
        let f = eval_radial_kernel(alpha, v0, r);
        println!("r = {r:<6} U = {:>10.5} g = {:>9.5} kernel = {:>8.5}", u.value, g.value, f.value);
    }

    let nu = alpha.mode_index(1);
    for s in [0.5, 1.0, 2.0] {
        let f = eval_mode_fundamentals(nu, s)?;
        let w = f.f1 * f.f2_prime - f.f1_prime * f.f2;
        println!("s = {s}: f1 = {:.6}, f2 = {:.6}, W = {w:.6} (closed form {:.6})", f.f1, f.f2, mode_wronskian(nu, s));
    }
    Ok(())
}
