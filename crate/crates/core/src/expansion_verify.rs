//! Checks of the blowup expansion as an approximate solution: PDE residual
//! on a polar grid, the disk Green's function and its representation
//! identity, and the drift of the maximizer induced by the gradient term.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::closed_forms::{
    eval_g, expansion_coefficients, expansion_terms_unchecked, softplus, Alpha, ExpansionOrder, LocalData,
};
use crate::error::{Error, Result};
use crate::fit::fit_scaling_exponent;
use crate::ode_engine::{RadialProfile, RadialWeight};
use crate::quadrature::integrate;

/// Fewest angles accepted by [`PolarGrid`].
pub const MIN_ANGLES: usize = 64;
/// Smallest innermost radius accepted by [`PolarGrid`].
pub const MIN_RADIUS: f64 = 1e-6;

/// Tensor grid uniform in `log r` and in the angle.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    radii: Vec<f64>,
    angles: Vec<f64>,
    log_step: f64,
}

impl PolarGrid {
    /// Radii from `r_min` to `r_max` with spacing close to `log_step` in
    /// `log r`, and `n_angles` angles starting at 0.
    pub fn new(r_min: f64, r_max: f64, log_step: f64, n_angles: usize) -> Result<Self> {
        Self::with_offset(r_min, r_max, log_step, n_angles, 0.0)
    }

    /// Same grid with every angle shifted by `offset`.
    pub fn with_offset(r_min: f64, r_max: f64, log_step: f64, n_angles: usize, offset: f64) -> Result<Self> {
        if !(r_min >= MIN_RADIUS) || !(r_max > r_min) || !r_max.is_finite() {
            return Err(Error::InvalidInput(format!(
                "radii must satisfy {MIN_RADIUS} <= r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if n_angles < MIN_ANGLES {
            return Err(Error::InvalidInput(format!("need at least {MIN_ANGLES} angles, got {n_angles}")));
        }
        if !(log_step > 0.0) {
            return Err(Error::InvalidInput("log step must be positive".into()));
        }
        let span = (r_max / r_min).ln();
        let n = (span / log_step).ceil().max(4.0) as usize;
        let log_step = span / n as f64;
        let radii = (0..=n).map(|i| r_min * (log_step * i as f64).exp()).collect();
        let angles = (0..n_angles)
            .map(|j| offset + 2.0 * PI * j as f64 / n_angles as f64)
            .collect();
        Ok(PolarGrid { radii, angles, log_step })
    }

    /// The grid used by the residual experiments: `r` in `[1e-6, 1]`,
    /// step 0.01 in `log r`, 256 angles.
    pub fn standard() -> Self {
        Self::new(1e-6, 1.0, 0.01, 256).expect("valid constants")
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
    pub fn log_step(&self) -> f64 {
        self.log_step
    }
    pub fn angle_step(&self) -> f64 {
        2.0 * PI / self.angles.len() as f64
    }
}

/// How the Laplacian of the bubble itself is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianMode {
    /// Bubble Laplacian in closed form; finite differences only act on the
    /// corrections. Keeps the residual free of discretization error that
    /// would otherwise swamp the `delta^2` terms.
    ExactBubble,
    /// Finite differences on the whole expansion.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Second,
    Fourth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualOptions {
    pub laplacian: LaplacianMode,
    pub stencil: Stencil,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions {
            laplacian: LaplacianMode::ExactBubble,
            stencil: Stencil::Fourth,
        }
    }
}

/// Largest weighted residual found on the grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ResidualReport {
    /// `sup r^2 |Delta u + |x|^{2 alpha} V e^u|`, divided by the peak of the
    /// bubble's own term `r^{2+2 alpha} V(0) e^U`, which is `2 (1+alpha)^2`.
    pub weighted_sup: f64,
    pub r: f64,
    pub theta: f64,
}

fn second_difference(f: &[f64], i: usize, stencil: Stencil, h: f64, periodic: bool) -> f64 {
    let n = f.len() as isize;
    let at = |k: isize| {
        let idx = if periodic { (i as isize + k).rem_euclid(n) } else { i as isize + k };
        f[idx as usize]
    };
    match stencil {
        Stencil::Second => (at(-1) - 2.0 * at(0) + at(1)) / (h * h),
        Stencil::Fourth => (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h * h),
    }
}

/// Residual of the truncated expansion (harmonic part zero) for the
/// quadratic model `V(x) = V(0) + grad . x + x . hess x / 2`.
pub fn pde_residual(
    alpha: Alpha,
    local: &LocalData,
    u0: f64,
    order: ExpansionOrder,
    grid: &PolarGrid,
) -> Result<ResidualReport> {
    pde_residual_with(alpha, local, u0, order, grid, &ResidualOptions::default())
}

pub fn pde_residual_with(
    alpha: Alpha,
    local: &LocalData,
    u0: f64,
    order: ExpansionOrder,
    grid: &PolarGrid,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    let coeffs = expansion_coefficients(alpha, local.v0)?;
    let p = alpha.power();
    let nr = grid.radii.len();
    let na = grid.angles.len();
    let exact = opts.laplacian == LaplacianMode::ExactBubble;

    // field to difference and the bubble exponent on every node
    let mut field = vec![vec![0.0; na]; nr];
    let mut corr = vec![vec![0.0; na]; nr];
    let mut bubble = vec![0.0; nr];
    for (i, &r) in grid.radii.iter().enumerate() {
        for (j, &th) in grid.angles.iter().enumerate() {
            let x = [r * th.cos(), r * th.sin()];
            let terms = expansion_terms_unchecked(alpha, local, &coeffs, u0, x);
            let c = terms.correction(order);
            bubble[i] = terms.bubble;
            corr[i][j] = c;
            field[i][j] = if exact { c } else { terms.bubble + c };
        }
    }
    let ht = grid.log_step;
    let ha = grid.angle_step();
    let peak = 2.0 * alpha.beta().powi(2);
    let rows: Vec<(f64, usize, usize)> = (2..nr - 2)
        .into_par_iter()
        .map(|i| {
            let r = grid.radii[i];
            let mut worst = (0.0f64, i, 0usize);
            for j in 0..na {
                let radial: [f64; 5] = [
                    field[i - 2][j],
                    field[i - 1][j],
                    field[i][j],
                    field[i + 1][j],
                    field[i + 2][j],
                ];
                let ftt = second_difference(&radial, 2, opts.stencil, ht, false);
                let fthth = second_difference(&field[i], j, opts.stencil, ha, true);
                let th = grid.angles[j];
                let x = [r * th.cos(), r * th.sin()];
                let v = local.quadratic_model(x);
                let c = corr[i][j];
                // r^p e^{bubble} in log-space
                let w = (p * r.ln() + bubble[i]).exp();
                let source = if exact {
                    w * (local.model_excess(x) * c.exp() + local.v0 * c.exp_m1())
                } else {
                    w * v * c.exp()
                };
                let res = (ftt + fthth + source).abs() / peak;
                if !res.is_finite() {
                    worst = (f64::NAN, i, j);
                    break;
                }
                if res > worst.0 {
                    worst = (res, i, j);
                }
            }
            worst
        })
        .collect();
    if let Some(&(_, i, j)) = rows.iter().find(|w| w.0.is_nan()) {
        return Err(Error::NonFinite {
            what: "PDE residual".into(),
            location: format!("r = {}, theta = {}", grid.radii[i], grid.angles[j]),
        });
    }
    let best = rows
        .into_iter()
        .fold((0.0f64, 2usize, 0usize), |m, w| if w.0 > m.0 { w } else { m });
    Ok(ResidualReport {
        weighted_sup: best.0,
        r: grid.radii[best.1],
        theta: grid.angles[best.2],
    })
}

/// Residual norms for a list of heights, in increasing-height order.
pub fn residual_sweep(
    alpha: Alpha,
    local: &LocalData,
    heights: &[f64],
    order: ExpansionOrder,
    grid: &PolarGrid,
) -> Result<Vec<(f64, ResidualReport)>> {
    heights
        .iter()
        .map(|&u0| Ok((alpha.scale(u0), pde_residual(alpha, local, u0, order, grid)?)))
        .collect()
}

/// Fitted `delta`-slopes of the residual at two consecutive orders.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SlopeGain {
    pub lower_slope: f64,
    pub upper_slope: f64,
    pub gain: f64,
}

pub fn slope_gain(
    alpha: Alpha,
    local: &LocalData,
    heights: &[f64],
    lower: ExpansionOrder,
    upper: ExpansionOrder,
    grid: &PolarGrid,
) -> Result<SlopeGain> {
    let slope = |order| -> Result<f64> {
        let pairs: Vec<(f64, f64)> = residual_sweep(alpha, local, heights, order, grid)?
            .into_iter()
            .map(|(d, r)| (d, r.weighted_sup))
            .collect();
        Ok(fit_scaling_exponent(&pairs)?.0)
    };
    let lower_slope = slope(lower)?;
    let upper_slope = slope(upper)?;
    Ok(SlopeGain {
        lower_slope,
        upper_slope,
        gain: upper_slope - lower_slope,
    })
}

/// Green's function of the Laplacian on the disk of radius `R` with zero
/// boundary values, normalized so that `-Delta G = delta_eta`.
pub fn green_disk(r_disk: f64, y: [f64; 2], eta: [f64; 2]) -> Result<f64> {
    if !(r_disk > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {r_disk}")));
    }
    let ny2 = y[0] * y[0] + y[1] * y[1];
    let ne2 = eta[0] * eta[0] + eta[1] * eta[1];
    let tol = r_disk * (1.0 + 1e-12);
    if ny2.sqrt() > tol || ne2.sqrt() > tol {
        return Err(Error::InvalidInput("points must lie in the closed disk".into()));
    }
    let dist = (y[0] - eta[0]).hypot(y[1] - eta[1]);
    if dist == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    // |y|/R |R^2 y/|y|^2 - eta|, squared, written without the division by |y|
    let dot = y[0] * eta[0] + y[1] * eta[1];
    let image2 = r_disk * r_disk - 2.0 * dot + ny2 * ne2 / (r_disk * r_disk);
    Ok((0.5 * image2.ln() - dist.ln()) / (2.0 * PI))
}

/// Outcome of the radial Green representation check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GreenIdentity {
    /// `u(0)`, extrapolated from the innermost node.
    pub center: f64,
    /// `u(R) + int_0^R log(R/r) r^{2 alpha + 1} H e^u dr`.
    pub representation: f64,
    pub discrepancy: f64,
}

/// For a radial solution on `[0, R]`,
/// `u(0) = u(R) + int_{B_R} G(0, eta) |eta|^{2 alpha} H e^u d eta`
/// and the angular integral collapses to a factor `2 pi`.
pub fn green_identity_check<W: RadialWeight + ?Sized>(
    profile: &RadialProfile,
    alpha: Alpha,
    weight: &W,
) -> Result<GreenIdentity> {
    let nodes = profile.nodes();
    let n = nodes.len();
    if n < 4 {
        return Err(Error::InvalidInput("profile too short".into()));
    }
    let p = alpha.power();
    let r_disk = nodes[n - 1];
    let r1 = nodes[0];
    let (u1, du1) = (profile.values()[0], profile.derivs()[0]);
    // u - u(0) ~ -c r^p near the origin, so r u' = p (u - u(0))
    let center = u1 - r1 * du1 / p;

    // inner disk with the startup behaviour frozen
    let q = 2.0 * alpha.value() + 1.0;
    let h0 = weight.value(0.0);
    let inner = if h0 == 0.0 {
        0.0
    } else {
        h0 * (center + (q + 1.0) * r1.ln()).exp() / (q + 1.0) * ((r_disk / r1).ln() + 1.0 / (q + 1.0))
    };

    // outer part in t = log r, integrand log(R/r) r^{p} H e^u
    let integrand = |t: f64| {
        let r = t.exp();
        let (u, _) = profile.interpolate(r.clamp(r1, r_disk)).expect("inside profile");
        let h = weight.value(r);
        if h == 0.0 {
            return 0.0;
        }
        (r_disk / r).ln() * h * (p * t + u).exp()
    };
    let (t0, t1) = (r1.ln(), r_disk.ln());
    let pieces = ((t1 - t0) / 0.5).ceil().max(1.0) as usize;
    let mut outer = 0.0;
    for k in 0..pieces {
        let a = t0 + (t1 - t0) * k as f64 / pieces as f64;
        let b = t0 + (t1 - t0) * (k + 1) as f64 / pieces as f64;
        outer += integrate(integrand, a, b, 1e-13, 1e-11)?.value;
    }
    let representation = profile.values()[n - 1] + inner + outer;
    Ok(GreenIdentity {
        center,
        representation,
        discrepancy: (center - representation).abs(),
    })
}

/// Maximizer drift along the gradient direction.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ArgmaxFit {
    /// `(delta, |y_max|)` in blown-up units.
    pub radii: Vec<(f64, f64)>,
    /// Fitted exponent; `None` when the gradient vanishes (maximizer at 0).
    pub exponent: Option<f64>,
    pub stderr: Option<f64>,
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Location of the maximum of `U + phi` along the e1 axis for each scale,
/// and the fitted exponent of `|y_max|` against `delta`.
pub fn argmax_displacement(alpha: Alpha, local: &LocalData, deltas: &[f64]) -> Result<ArgmaxFit> {
    if local.grad[1] != 0.0 {
        return Err(Error::InvalidInput("gradient must point along e1".into()));
    }
    if deltas.len() < 4 {
        return Err(Error::InvalidInput("need at least 4 scales".into()));
    }
    let (lo, hi) = deltas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if !(lo > 0.0) || (hi / lo).log10() < 2.0 - 1e-9 {
        return Err(Error::InvalidInput("scales must be positive and span two decades".into()));
    }
    let c = local.grad[0];
    if c == 0.0 {
        return Ok(ArgmaxFit {
            radii: deltas.iter().map(|&d| (d, 0.0)).collect(),
            exponent: None,
            stderr: None,
        });
    }
    let a = alpha.bubble_coefficient(local.v0);
    let ln_a = a.ln();
    let p = alpha.power();
    let mut radii = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        // U(|y|) + delta c g(|y|) sign(y) on the axis
        let f = |y: f64| {
            let r = y.abs();
            if r == 0.0 {
                return 0.0;
            }
            -2.0 * softplus(ln_a + p * r.ln()) + delta * c * eval_g(alpha, local.v0, r).value * y.signum()
        };
        let mut width = 1.0;
        let mut found = None;
        for _ in 0..2 {
            let y = golden_max(f, -width, width, 1e-13 * width);
            if (width - y.abs()) > 1e-6 * width {
                found = Some(y);
                break;
            }
            width *= 10.0;
        }
        let y = found.ok_or(Error::BracketEndpoint(width))?;
        radii.push((delta, y.abs()));
    }
    let (slope, err) = fit_scaling_exponent(&radii)?;
    Ok(ArgmaxFit {
        radii,
        exponent: Some(slope),
        stderr: Some(err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode_engine::{shoot_liouville, ConstantWeight};
    use proptest::prelude::*;

    fn half() -> Alpha {
        Alpha::new(0.5).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(PolarGrid::new(1e-7, 1.0, 0.01, 256).is_err());
        assert!(PolarGrid::new(1e-6, 1.0, 0.01, 32).is_err());
        assert!(PolarGrid::new(1e-3, 1e-4, 0.01, 64).is_err());
    }

    #[test]
    fn bubble_is_exact_solution() {
        let local = LocalData::new(18.0, [0.0, 0.0], [[0.0; 2]; 2]).unwrap();
        let grid = PolarGrid::new(1e-6, 1.0, 0.05, 64).unwrap();
        let rep = pde_residual(half(), &local, 20.0, ExpansionOrder::Bubble, &grid).unwrap();
        assert!(rep.weighted_sup <= 1e-6);
        let fd = ResidualOptions {
            laplacian: LaplacianMode::FiniteDifference,
            stencil: Stencil::Fourth,
        };
        let grid = PolarGrid::new(1e-6, 1.0, 0.01, 64).unwrap();
        let rep = pde_residual_with(half(), &local, 20.0, ExpansionOrder::Bubble, &grid, &fd).unwrap();
        assert!(rep.weighted_sup <= 1e-6, "{}", rep.weighted_sup);
    }

    #[test]
    fn discretization_error_converges() {
        let local = LocalData::new(18.0, [0.0, 0.0], [[0.0; 2]; 2]).unwrap();
        for (stencil, ratio) in [(Stencil::Second, 0.25), (Stencil::Fourth, 1.0 / 16.0)] {
            let opts = ResidualOptions {
                laplacian: LaplacianMode::FiniteDifference,
                stencil,
            };
            let coarse = PolarGrid::new(1e-3, 1.0, 0.1, 64).unwrap();
            let fine = PolarGrid::new(1e-3, 1.0, 0.05, 128).unwrap();
            let e1 = pde_residual_with(half(), &local, 4.0, ExpansionOrder::Bubble, &coarse, &opts).unwrap();
            let e2 = pde_residual_with(half(), &local, 4.0, ExpansionOrder::Bubble, &fine, &opts).unwrap();
            let got = e2.weighted_sup / e1.weighted_sup;
            assert!((got / ratio - 1.0).abs() < 0.2, "{stencil:?}: {got}");
        }
    }

    #[test]
    fn residual_is_rotation_covariant() {
        let local = LocalData::new(18.0, [1.0, 0.0], [[0.5, 0.2], [0.2, -0.3]]).unwrap();
        let turn = 0.7;
        let grid = PolarGrid::new(1e-4, 1.0, 0.05, 64).unwrap();
        let turned = PolarGrid::with_offset(1e-4, 1.0, 0.05, 64, turn).unwrap();
        let a = pde_residual(half(), &local, 12.0, ExpansionOrder::Logarithmic, &turned).unwrap();
        let b = pde_residual(half(), &local.rotated(turn), 12.0, ExpansionOrder::Logarithmic, &grid).unwrap();
        assert!((a.weighted_sup - b.weighted_sup).abs() < 1e-10 * a.weighted_sup.max(1.0));
    }

    #[test]
    fn green_center_value() {
        let g = green_disk(1.0, [0.0, 0.0], [0.5, 0.0]).unwrap();
        assert!((g - 2f64.ln() / (2.0 * PI)).abs() < 1e-15);
        let near = green_disk(1.0, [1e-9, 0.0], [0.5, 0.0]).unwrap();
        assert!((near - g).abs() < 1e-8);
        assert!(matches!(green_disk(1.0, [0.1, 0.1], [0.1, 0.1]), Err(Error::CoincidentPoints)));
    }

    #[test]
    fn green_vanishes_on_boundary() {
        for k in 0..16 {
            let t = 2.0 * PI * k as f64 / 16.0;
            let g = green_disk(1.0, [0.3, 0.2], [t.cos(), t.sin()]).unwrap();
            assert!(g.abs() <= 1e-10, "{g}");
        }
    }

    proptest! {
        #[test]
        fn green_is_symmetric(r1 in 0.0f64..0.99, t1 in 0.0f64..6.3, r2 in 0.0f64..0.99, t2 in 0.0f64..6.3) {
            let y = [r1 * t1.cos(), r1 * t1.sin()];
            let e = [r2 * t2.cos(), r2 * t2.sin()];
            prop_assume!((y[0] - e[0]).hypot(y[1] - e[1]) > 1e-6);
            let a = green_disk(1.0, y, e).unwrap();
            let b = green_disk(1.0, e, y).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn green_identity_on_solutions() {
        for (u0, tol) in [(5.0, 1e-6), (20.0, 1e-4)] {
            let shot = shoot_liouville(half(), &ConstantWeight(18.0), u0, 1.0, 1e-10).unwrap();
            let chk = green_identity_check(&shot.profile().unwrap(), half(), &ConstantWeight(18.0)).unwrap();
            assert!(chk.discrepancy <= tol, "u0={u0}: {chk:?}");
        }
    }

    #[test]
    fn green_identity_trivial_case() {
        let meta = crate::ode_engine::ProfileMeta {
            alpha: Some(0.5),
            interval: (0.0, 1.0),
            variable: crate::ode_engine::Variable::Radius,
        };
        let nodes: Vec<f64> = (1..=50).map(|i| i as f64 / 50.0).collect();
        let prof = RadialProfile::new(nodes, vec![0.0; 50], vec![0.0; 50], meta).unwrap();
        let chk = green_identity_check(&prof, half(), &ConstantWeight(0.0)).unwrap();
        assert_eq!(chk.discrepancy, 0.0);
    }

    #[test]
    fn maximizer_drift_exponent() {
        let deltas = [1e-2, 1e-3, 1e-4, 1e-5];
        for (alpha, expected) in [(0.5, 0.5), (1.5, 0.25)] {
            let al = Alpha::new(alpha).unwrap();
            let v0 = 8.0 * al.beta().powi(2);
            let local = LocalData::new(v0, [1.0, 0.0], [[0.0; 2]; 2]).unwrap();
            let fit = argmax_displacement(al, &local, &deltas).unwrap();
            let e = fit.exponent.unwrap();
            assert!((e - expected).abs() < 0.05, "alpha={alpha}: {e}");
        }
        let flat = LocalData::new(18.0, [0.0, 0.0], [[0.0; 2]; 2]).unwrap();
        let fit = argmax_displacement(half(), &flat, &deltas).unwrap();
        assert!(fit.radii.iter().all(|r| r.1 == 0.0));
        assert!(fit.exponent.is_none());
    }
}
