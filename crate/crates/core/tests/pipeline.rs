use std::f64::consts::PI;

use singular_liouville::blowup_family::{fit_boundary_coefficient, run_family};
use singular_liouville::closed_forms::{eval_bubble, Alpha, BubbleParams, LocalData, Normalization};
use singular_liouville::expansion_verify::green_identity_check;
use singular_liouville::ode_engine::{shoot_liouville, ConstantWeight, FnWeight, QuadraticWeight};

#[test]
fn constant_weight_shot_is_the_bubble() {
    let alpha = Alpha::new(1.5).unwrap();
    let shot = shoot_liouville(alpha, &ConstantWeight(50.0), 12.0, 1.0, 1e-10).unwrap();
    let prof = shot.profile().unwrap();
    let bp = BubbleParams::new(alpha, 50.0, 12.0).unwrap();
    for r in [1e-3, 1e-2, 0.1, 1.0] {
        let (u, _) = prof.interpolate(r).unwrap();
        let exact = eval_bubble(&bp, r, Normalization::HeightU0).unwrap().value;
        assert!((u - exact).abs() < 1e-7, "r={r}: {u} vs {exact}");
    }
    assert!((shot.total_mass() / (8.0 * PI * 2.5) - 1.0).abs() < 1e-3);
}

#[test]
fn green_identity_for_a_varying_weight() {
    let alpha = Alpha::new(0.5).unwrap();
    let w = FnWeight(|r: f64| [18.0 + r * r - 0.5 * r.powi(4), 2.0 * r - 2.0 * r.powi(3), 2.0 - 6.0 * r * r]);
    let shot = shoot_liouville(alpha, &w, 10.0, 1.0, 1e-10).unwrap();
    let chk = green_identity_check(&shot.profile().unwrap(), alpha, &w).unwrap();
    assert!(chk.discrepancy < 1e-6, "{chk:?}");
}

#[test]
fn boundary_coefficient_scales_with_laplacian() {
    // doubling the curvature doubles the fitted coefficient
    let alpha = Alpha::new(0.5).unwrap();
    let heights = [14.0, 17.0, 20.0, 23.0, 26.0, 29.0];
    let mut estimates = Vec::new();
    for c in [0.5, 1.0] {
        let recs = run_family(alpha, &QuadraticWeight { v0: 18.0, c }, &heights, 1.0).unwrap();
        let fit = fit_boundary_coefficient(&recs, alpha, &LocalData::radial(18.0, 2.0 * c).unwrap()).unwrap();
        assert!(fit.rel_error < 0.1, "{fit:?}");
        estimates.push(fit.estimate);
    }
    assert!((estimates[1] / estimates[0] - 2.0).abs() < 0.1, "{estimates:?}");
}
