//! The nine acceptance checks, shared by the `acceptance` test target and the
//! `verify` subcommand. Each check returns a pass flag and a one-line detail.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blowup_family::{deviation_band, fit_boundary_coefficient, run_family, DEFAULT_HEIGHTS};
use crate::closed_forms::{
    eval_g, eval_mode_fundamentals, eval_radial_kernel, expansion_coefficients, gradient_amplitude, mode_wronskian,
    Alpha, BubbleParams, ExpansionOrder, LocalData,
};
use crate::error::Result;
use crate::expansion_verify::{argmax_displacement, slope_gain, PolarGrid};
use crate::linearized_modes::{build_correction_c, kernel_triviality_report};
use crate::ode_engine::{log_radii, ConstantWeight, QuadraticWeight};

/// High-precision value of `Lambda_1` at `alpha = 1/2`, `V(0) = 18`.
pub const LAMBDA1_REFERENCE: f64 = -0.134_355_508_461_793_91;

#[derive(Debug, Clone, serde::Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {} {}: {} ({:.2}s / {:.0}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

fn timed(id: u8, name: &'static str, budget: f64, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let res = f();
    let elapsed = start.elapsed();
    let over = elapsed > Duration::from_secs_f64(budget);
    let (passed, mut detail) = match res {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if over {
        detail.push_str("; over time budget");
    }
    Outcome {
        id,
        name,
        passed: passed && !over,
        detail,
        seconds: elapsed.as_secs_f64(),
        budget_seconds: budget,
    }
}

/// Sample a non-integer `alpha` in `(0.1, 4)` away from the guard band.
fn sample_alpha(rng: &mut ChaCha8Rng) -> Alpha {
    loop {
        if let Ok(a) = Alpha::new(rng.gen_range(0.1..4.0)) {
            return a;
        }
    }
}

pub fn constants(seed: u64) -> Outcome {
    timed(1, "constants", 1.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let alpha = sample_alpha(&mut rng);
            let v0 = rng.gen_range(0.5..200.0);
            let c = expansion_coefficients(alpha, v0)?;
            worst = worst.max(((c.lambda2 * v0 + c.lambda1) / c.lambda1).abs());
        }
        let c = expansion_coefficients(Alpha::new(0.5)?, 18.0)?;
        let err = (c.lambda1 - LAMBDA1_REFERENCE).abs();
        Ok((
            worst <= 1e-12 && err <= 1e-6,
            format!(
                "max |L2 v0 + L1|/|L1| = {worst:.1e}; L1(0.5, 18) = {:.10} (reference error {err:.1e}), L2 = {:.10}",
                c.lambda1, c.lambda2
            ),
        ))
    })
}

/// `g'' + g'/r + (v0 r^{2a} e^U - 1/r^2) g + r^{2a+1} e^U` with `g''` coded
/// from the closed form.
pub(crate) fn g_residual(alpha: Alpha, v0: f64, r: f64) -> f64 {
    let k = gradient_amplitude(alpha, v0);
    let a = alpha.bubble_coefficient(v0);
    let p = alpha.power();
    let big_a = a * r.powf(p);
    let d = 1.0 + big_a;
    let n = 1.0 + (1.0 - p) * big_a;
    let g2 = -k * (p * big_a / r) * ((1.0 - p) * d - 2.0 * n) / d.powi(3);
    let g = eval_g(alpha, v0, r);
    let w = r.powf(2.0 * alpha.value()) / (d * d);
    g2 + g.deriv / r + (v0 * w - 1.0 / (r * r)) * g.value + r * w
}

/// `f'' + f'/r + v0 r^{2a} e^U f` for the radial kernel.
fn kernel_residual(alpha: Alpha, v0: f64, r: f64) -> f64 {
    let a = alpha.bubble_coefficient(v0);
    let p = alpha.power();
    let big_a = a * r.powf(p);
    let d = 1.0 + big_a;
    let d1 = p * big_a / r;
    let d2 = p * (p - 1.0) * big_a / (r * r);
    let f2 = -2.0 * (d2 * d - 2.0 * d1 * d1) / d.powi(3);
    let f = eval_radial_kernel(alpha, v0, r);
    f2 + f.deriv / r + v0 * r.powf(2.0 * alpha.value()) / (d * d) * f.value
}

fn mode_residuals(index: f64, s: f64) -> Result<[f64; 2]> {
    let h = 1e-4 * s;
    let d = |x: f64| eval_mode_fundamentals(index, x);
    let (m2, m1, p1, p2) = (d(s - 2.0 * h)?, d(s - h)?, d(s + h)?, d(s + 2.0 * h)?);
    let c = d(s)?;
    let q = 8.0 / (1.0 + s * s).powi(2) - index * index / (s * s);
    let fd = |a: f64, b: f64, e: f64, f: f64| (-f + 8.0 * e - 8.0 * b + a) / (12.0 * h);
    let f1pp = fd(m2.f1_prime, m1.f1_prime, p1.f1_prime, p2.f1_prime);
    let f2pp = fd(m2.f2_prime, m1.f2_prime, p1.f2_prime, p2.f2_prime);
    // relative to the size of the individual terms
    let scale1 = f1pp.abs() + (c.f1_prime / s).abs() + (q * c.f1).abs();
    let scale2 = f2pp.abs() + (c.f2_prime / s).abs() + (q * c.f2).abs();
    Ok([
        (f1pp + c.f1_prime / s + q * c.f1).abs() / scale1.max(1.0),
        (f2pp + c.f2_prime / s + q * c.f2).abs() / scale2.max(1.0),
    ])
}

pub fn closed_form_residuals() -> Outcome {
    timed(2, "closed-form residuals", 5.0, || {
        let mut g_worst = 0.0f64;
        let mut k_worst = 0.0f64;
        let mut m_worst = 0.0f64;
        let mut w_worst = 0.0f64;
        let radii = log_radii(1e-3, 1e3, 10.0);
        for alpha in [0.5, 1.5, 2.5] {
            let al = Alpha::new(alpha)?;
            let v0 = 18.0;
            for &r in &radii {
                g_worst = g_worst.max(g_residual(al, v0, r).abs());
                k_worst = k_worst.max(kernel_residual(al, v0, r).abs());
            }
            for index in [al.mode_index(1), 2.0 * al.delta()] {
                for &s in &log_radii(1e-2, 1e2, 10.0) {
                    let [a, b] = mode_residuals(index, s)?;
                    m_worst = m_worst.max(a).max(b);
                    let f = eval_mode_fundamentals(index, s)?;
                    let w = f.f1 * f.f2_prime - f.f1_prime * f.f2;
                    let exact = mode_wronskian(index, s);
                    w_worst = w_worst.max(((w - exact) / exact).abs());
                }
            }
        }
        Ok((
            g_worst <= 1e-8 && k_worst <= 1e-8 && m_worst <= 1e-6 && w_worst <= 1e-10,
            format!(
                "g {g_worst:.1e}, kernel {k_worst:.1e}, fundamental pair {m_worst:.1e}, Wronskian {w_worst:.1e}"
            ),
        ))
    })
}

pub fn kernel_certification() -> Outcome {
    timed(3, "kernel certification", 30.0, || {
        let mut worst = 0.0f64;
        let mut ok = true;
        for alpha in [0.5, 1.5, 2.5] {
            let al = Alpha::new(alpha)?;
            let rep = kernel_triviality_report(al, 8.0 * al.beta().powi(2), 3)?;
            for row in &rep.rows {
                match row.exponent_infinity {
                    Some(e) => {
                        let rel = (e / row.k as f64 - 1.0).abs();
                        worst = worst.max(rel);
                        ok &= rel <= 0.05 && row.certified;
                    }
                    None => ok = false,
                }
            }
        }
        Ok((ok, format!("largest relative deviation of growth exponent from k: {worst:.2e}")))
    })
}

pub fn mass_quantization() -> Outcome {
    timed(4, "mass quantization", 30.0, || {
        let al = Alpha::new(0.5)?;
        let recs = run_family(al, &ConstantWeight(18.0), &[30.0], 1.0)?;
        let quantum = 8.0 * PI * al.beta();
        let rel = (recs[0].mass / quantum - 1.0).abs();
        Ok((rel <= 0.01, format!("mass {:.6} vs {quantum:.6} (rel {rel:.1e})", recs[0].mass)))
    })
}

pub fn deviation_shadow() -> Outcome {
    timed(5, "deviation band", 60.0, || {
        let al = Alpha::new(0.5)?;
        let heights = [10.0, 15.0, 20.0, 25.0, 30.0];
        let recs = run_family(al, &ConstantWeight(18.0), &heights, 1.0)?;
        let band = deviation_band(&recs, 1e-9);
        let max = recs.iter().fold(0.0f64, |m, r| m.max(r.sup_dev));
        Ok((band <= 1.5, format!("max/min = {band:.3} (largest sup|v - U| = {max:.1e}, floor 1e-9)")))
    })
}

/// Heights used for the boundary-coefficient fit at `alpha = 1/2`.
pub const BOUNDARY_FIT_HEIGHTS: [f64; 7] = [14.0, 16.5, 19.0, 21.5, 24.0, 26.5, 29.0];

pub fn boundary_coefficient() -> Outcome {
    timed(6, "boundary coefficient", 180.0, || {
        let al = Alpha::new(0.5)?;
        let weight = QuadraticWeight { v0: 18.0, c: 1.0 };
        let recs = run_family(al, &weight, &BOUNDARY_FIT_HEIGHTS, 1.0)?;
        let local = LocalData::radial(18.0, 2.0)?;
        let fit = fit_boundary_coefficient(&recs, al, &local)?;
        Ok((
            fit.rel_error <= 0.1,
            format!(
                "estimate {:.5} +- {:.1e} vs {:.5} (rel {:.1e})",
                fit.estimate, fit.stderr, fit.reference, fit.rel_error
            ),
        ))
    })
}

pub fn residual_scaling() -> Outcome {
    timed(7, "residual scaling", 180.0, || {
        let al = Alpha::new(0.5)?;
        let grid = PolarGrid::standard();
        let grad = LocalData::new(18.0, [1.0, 0.0], [[0.0; 2]; 2])?;
        let lap = LocalData::new(18.0, [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])?;
        let first = slope_gain(al, &grad, &DEFAULT_HEIGHTS, ExpansionOrder::Bubble, ExpansionOrder::Gradient, &grid)?;
        let second = slope_gain(
            al,
            &lap,
            &DEFAULT_HEIGHTS,
            ExpansionOrder::Gradient,
            ExpansionOrder::Logarithmic,
            &grid,
        )?;
        Ok((
            first.gain >= 0.8 && second.gain >= 0.4,
            format!(
                "gradient-only gain {:.3} ({:.3} -> {:.3}, need 0.8); laplacian-only gain {:.3} ({:.3} -> {:.3}, need 0.4)",
                first.gain, first.lower_slope, first.upper_slope, second.gain, second.lower_slope, second.upper_slope
            ),
        ))
    })
}

pub fn maximizer_drift() -> Outcome {
    timed(8, "maximizer drift", 10.0, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for alpha in [0.5, 1.5] {
            let al = Alpha::new(alpha)?;
            let local = LocalData::new(8.0 * al.beta().powi(2), [1.0, 0.0], [[0.0; 2]; 2])?;
            let fit = argmax_displacement(al, &local, &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6])?;
            let expected = 1.0 / (2.0 * alpha + 1.0);
            let e = fit.exponent.unwrap_or(f64::NAN);
            ok &= (e - expected).abs() <= 0.05;
            parts.push(format!("alpha {alpha}: {e:.4} vs {expected:.4}"));
        }
        Ok((ok, parts.join("; ")))
    })
}

pub fn correction_assembly() -> Outcome {
    timed(9, "correction assembly", 60.0, || {
        let al = Alpha::new(0.5)?;
        let local = LocalData::new(18.0, [0.7, -0.4], [[1.2, 0.3], [0.3, -0.5]])?;
        let bp = BubbleParams::new(al, 18.0, 20.0)?;
        let c = build_correction_c(al, &local, &bp, 1.0 / bp.scale)?;
        let radii = log_radii(1e-2, 1e2, 4.0);
        let res = c.max_mode_residual(&radii)?;
        let bound = 1e-6 * bp.scale.powi(2);
        let mut drift = 0.0f64;
        for p in &c.pieces {
            if p.envelope > 0.0 {
                drift = drift.max((p.envelope_doubled / p.envelope - 1.0).abs());
            }
        }
        let bounded = c.envelope.is_finite();
        Ok((
            res <= bound && bounded && drift <= 0.1,
            format!(
                "mode residual {res:.1e} (bound {bound:.1e}); envelope {:.3e}, drift under doubling {drift:.1e}",
                c.envelope
            ),
        ))
    })
}

/// Run all nine checks in order.
pub fn run_all(seed: u64) -> Vec<Outcome> {
    vec![
        constants(seed),
        closed_form_residuals(),
        kernel_certification(),
        mass_quantization(),
        deviation_shadow(),
        boundary_coefficient(),
        residual_scaling(),
        maximizer_drift(),
        correction_assembly(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_residual_helpers_vanish() {
        let al = Alpha::new(0.5).unwrap();
        assert!(g_residual(al, 18.0, 1.0).abs() < 1e-12);
        assert!(kernel_residual(al, 18.0, 0.7).abs() < 1e-12);
    }

    #[test]
    fn outcome_line_format() {
        let o = Outcome {
            id: 3,
            name: "x",
            passed: true,
            detail: "ok".into(),
            seconds: 0.5,
            budget_seconds: 30.0,
        };
        assert_eq!(o.line(), "[PASS] 3 x: ok (0.50s / 30s)");
    }
}
