//! Angular modes of the operator `Delta + v0 |y|^{2 alpha} e^U` linearized at
//! the bubble: kernel certification, the forced k = 1 problem for the first
//! correction, and the assembly of the second-order correction `c`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::closed_forms::{eval_g, eval_mode_fundamentals, Alpha, BubbleParams, LocalData};
use crate::error::{Error, Result};
use crate::fit::log_log_slope;
use crate::ode_engine::{
    integrate, integrate_singular_t, log_grid, log_radii, variation_of_parameters_with_index, Direction, IntegratorOptions,
    ModeProblem, ProfileMeta, RadialFn, RadialProfile, Seed, SingularOptions, Stretch, Variable, VopOptions,
    VopSolution,
};

/// Which potential the kernel report linearizes around.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPotential {
    /// `v0 r^{2 alpha} e^U - k^2 / r^2`.
    Bubble,
    /// `-k^2 / r^2` only; the solutions are exact powers.
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    pub potential: KernelPotential,
    pub tol: f64,
    pub start_radius: f64,
    pub zero_window: (f64, f64),
    pub infinity_window: (f64, f64),
    /// Relative slack on the growth exponent at infinity.
    pub slack: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            potential: KernelPotential::Bubble,
            tol: 1e-10,
            start_radius: 1e-5,
            zero_window: (1e-4, 1e-2),
            infinity_window: (1e2, 1e4),
            slack: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub k: u32,
    /// Fitted exponent near 0; `None` when the window is not monotone.
    pub exponent_zero: Option<f64>,
    pub exponent_infinity: Option<f64>,
    /// Largest deviation from the closed-form regular solution after
    /// normalization at r = 1 (bubble potential, index away from 1).
    pub closed_form_error: Option<f64>,
    /// A fit window failed; the row cannot certify anything.
    pub flagged: bool,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub alpha: f64,
    pub v0: f64,
    pub rows: Vec<KernelRow>,
    pub certified: bool,
}

/// For each mode `k = 1..=k_max`, integrate the solution regular at 0 and
/// fit its power behaviour at both ends. A mode is certified when the
/// growth exponent at infinity is at least `k (1 - slack)`: the regular
/// solution is then unbounded, so no bounded kernel element exists in it.
pub fn kernel_triviality_report(alpha: Alpha, v0: f64, k_max: u32) -> Result<KernelReport> {
    kernel_triviality_report_with(alpha, v0, k_max, &KernelOptions::default())
}

pub fn kernel_triviality_report_with(alpha: Alpha, v0: f64, k_max: u32, opts: &KernelOptions) -> Result<KernelReport> {
    if k_max == 0 || k_max > 10 {
        return Err(Error::InvalidInput(format!("k_max must be in 1..=10, got {k_max}")));
    }
    if !(v0 > 0.0) {
        return Err(Error::InvalidInput(format!("v0 must be positive, got {v0}")));
    }
    let rows = (1..=k_max)
        .into_par_iter()
        .map(|k| kernel_row(alpha, v0, k, opts))
        .collect::<Result<Vec<_>>>()?;
    let certified = rows.iter().all(|r| r.certified);
    Ok(KernelReport {
        alpha: alpha.value(),
        v0,
        rows,
        certified,
    })
}

fn kernel_row(alpha: Alpha, v0: f64, k: u32, opts: &KernelOptions) -> Result<KernelRow> {
    let r_max = opts.infinity_window.1;
    let problem = match opts.potential {
        KernelPotential::Bubble => ModeProblem::bubble_mode(alpha, v0, k, r_max),
        KernelPotential::Euler => ModeProblem::euler(k, r_max),
    };
    let sopts = SingularOptions {
        tol: opts.tol,
        match_radius: opts.start_radius,
        samples_per_unit: 20.0,
    };
    let (ts, states) = integrate_singular_t(&problem, Direction::Outward, Seed::Regular, &sopts)?;
    let nodes: Vec<f64> = ts.iter().map(|t| t.exp()).collect();
    let values: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let derivs = states.iter().zip(&nodes).map(|(s, r)| s[1] / r).collect();
    let profile = RadialProfile::new(
        nodes,
        values,
        derivs,
        ProfileMeta {
            alpha: Some(alpha.value()),
            interval: (opts.start_radius, r_max),
            variable: Variable::Radius,
        },
    )?;
    let exponent_zero = profile.growth_exponent(opts.zero_window.0, opts.zero_window.1)?;
    let exponent_infinity = profile.growth_exponent(opts.infinity_window.0, opts.infinity_window.1)?;
    let flagged = exponent_zero.is_none() || exponent_infinity.is_none();
    let certified = !flagged && exponent_infinity.is_some_and(|e| e >= k as f64 * (1.0 - opts.slack));

    let closed_form_error = match opts.potential {
        KernelPotential::Bubble => closed_form_deviation(alpha, v0, k, &profile),
        KernelPotential::Euler => None,
    };
    Ok(KernelRow {
        k,
        exponent_zero,
        exponent_infinity,
        closed_form_error,
        flagged,
        certified,
    })
}

fn closed_form_deviation(alpha: Alpha, v0: f64, k: u32, profile: &RadialProfile) -> Option<f64> {
    let nu = alpha.mode_index(k);
    let st = Stretch::new(alpha, v0);
    let reference = |r: f64| eval_mode_fundamentals(nu, st.s_of_r(r)).ok().map(|f| f.f1);
    let (u1, _) = profile.interpolate(1.0)?;
    let f1 = reference(1.0)?;
    if u1 == 0.0 || f1 == 0.0 {
        return None;
    }
    let mut worst = 0.0f64;
    for (r, u) in profile.nodes().iter().zip(profile.values()) {
        let f = reference(*r)? / f1;
        worst = worst.max((u / u1 - f).abs() / f.abs().max(1e-3));
    }
    Some(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedModeOptions {
    pub tol: f64,
    pub start_radius: f64,
    pub samples_per_unit: f64,
}

impl Default for ForcedModeOptions {
    fn default() -> Self {
        ForcedModeOptions {
            tol: 1e-11,
            start_radius: 1e-5,
            samples_per_unit: 40.0,
        }
    }
}

/// Normalized Wronskian below which the two fundamental solutions are
/// treated as dependent.
pub const RESONANCE_THRESHOLD: f64 = 1e-8;

/// Solution of a forced mode problem that is regular at 0 and decays at
/// infinity, built from numerically integrated fundamental solutions.
///
/// Both quadratures of the variation-of-parameters formula ride along as
/// extra components of the two integrations, so they share the step
/// control of the fundamental solutions.
pub fn solve_forced_mode(problem: &ModeProblem, opts: &ForcedModeOptions) -> Result<RadialProfile> {
    crate::ode_engine::check_tol(opts.tol)?;
    let grid = log_grid(opts.start_radius, problem.r_max, opts.samples_per_unit);
    let n = grid.len();
    let nu = problem.nu;
    let rhs = |t: f64, y: &[f64; 3]| {
        let r = t.exp();
        let q = nu * nu - r * r * problem.perturbation(r);
        [y[1], q * y[0], y[0] * r * r * problem.forcing(r)]
    };
    let seeded = |t: f64, mu: f64, law| {
        let (u, ut) = problem.seed(t.exp(), mu, law);
        let atol = opts.tol * u.abs().max(ut.abs()).clamp(1e-300, 1.0);
        ([u, ut, 0.0], IntegratorOptions {
            atol,
            ..IntegratorOptions::with_tol(opts.tol)
        })
    };

    let (y1_start, o1) = seeded(grid[0], nu, problem.near_zero);
    let out = integrate(rhs, grid[0], y1_start, &grid[1..], &o1)?;
    let mut y1 = vec![y1_start];
    y1.extend(out.states.iter().copied());

    let (y2_start, o2) = seeded(grid[n - 1], -nu, problem.near_infinity);
    let stops: Vec<f64> = grid[..n - 1].iter().rev().copied().collect();
    let inw = integrate(rhs, grid[n - 1], y2_start, &stops, &o2)?;
    let mut y2 = vec![y2_start];
    y2.extend(inw.states.iter().copied());
    y2.reverse();

    let mid = n / 2;
    let w = y1[mid][0] * y2[mid][1] - y1[mid][1] * y2[mid][0];
    let norm = (y1[mid][0] * y2[mid][1]).abs() + (y1[mid][1] * y2[mid][0]).abs();
    if !(norm > 0.0) || (w / norm).abs() < RESONANCE_THRESHOLD {
        return Err(Error::Resonance(if norm > 0.0 { w / norm } else { 0.0 }));
    }

    // power-law tails of the two quadratures outside the grid
    let integrand = |ys: &[[f64; 3]], i: usize| {
        let r = grid[i].exp();
        ys[i][0] * r * r * problem.forcing(r)
    };
    let tail = |g0: f64, g1: f64, dt: f64| {
        if g0 == 0.0 || g1 == 0.0 || g0 * g1 < 0.0 {
            return 0.0;
        }
        let kappa = (g1 / g0).ln() / dt;
        if kappa.abs() < 1e-3 {
            0.0
        } else {
            g0 / kappa
        }
    };
    let h = grid[1] - grid[0];
    let lower_tail = tail(integrand(&y1, 0), integrand(&y1, 1), h);
    let upper_tail = -tail(integrand(&y2, n - 1), integrand(&y2, n - 2), -h);

    let mut nodes = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    for i in 0..n {
        let r = grid[i].exp();
        // B = int_{-inf}^t y1 F, A = int_t^inf y2 F
        let b = y1[i][2] + lower_tail;
        let a = -y2[i][2] + upper_tail;
        let u = (y1[i][0] * a + y2[i][0] * b) / w;
        let ut = (y1[i][1] * a + y2[i][1] * b) / w;
        nodes.push(r);
        values.push(u);
        derivs.push(ut / r);
    }
    RadialProfile::new(
        nodes,
        values,
        derivs,
        ProfileMeta {
            alpha: None,
            interval: (opts.start_radius, problem.r_max),
            variable: Variable::Radius,
        },
    )
}

/// The k = 1 problem `g'' + g'/r + (v0 r^{2a} e^U - 1/r^2) g = -r^{2a+1} e^U`,
/// solved numerically for comparison with the closed form.
pub fn solve_g_numeric(alpha: Alpha, v0: f64, r_max: f64) -> Result<RadialProfile> {
    if !(r_max >= 1e3) {
        return Err(Error::InvalidInput(format!("R must be at least 1e3, got {r_max}")));
    }
    let a = alpha.bubble_coefficient(v0);
    let p = alpha.power();
    let exponent = 2.0 * alpha.value() + 1.0;
    let forcing: RadialFn = Arc::new(move |r: f64| {
        let den = 1.0 + a * r.powf(p);
        -r.powf(exponent) / (den * den)
    });
    let problem = ModeProblem::bubble_mode(alpha, v0, 1, r_max).with_forcing(forcing);
    let mut prof = solve_forced_mode(&problem, &ForcedModeOptions::default())?;
    prof.meta.alpha = Some(alpha.value());
    Ok(prof)
}

/// Degree-two angular harmonics in the frame where the gradient is along e1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Harmonic {
    /// `theta1^2 - 1/2`
    Theta1Sq,
    /// `theta2^2 - 1/2`
    Theta2Sq,
    /// `theta1 theta2`
    Theta1Theta2,
}

impl Harmonic {
    pub fn eval(self, theta: [f64; 2]) -> f64 {
        match self {
            Harmonic::Theta1Sq => theta[0] * theta[0] - 0.5,
            Harmonic::Theta2Sq => theta[1] * theta[1] - 0.5,
            Harmonic::Theta1Theta2 => theta[0] * theta[1],
        }
    }

    /// Second angular derivative at polar angle `phi`.
    pub fn second_angular_derivative(self, phi: f64) -> f64 {
        match self {
            Harmonic::Theta1Sq => -2.0 * (2.0 * phi).cos(),
            Harmonic::Theta2Sq => 2.0 * (2.0 * phi).cos(),
            Harmonic::Theta1Theta2 => -2.0 * (2.0 * phi).sin(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Harmonic::Theta1Sq => "theta1^2-1/2",
            Harmonic::Theta2Sq => "theta2^2-1/2",
            Harmonic::Theta1Theta2 => "theta1*theta2",
        }
    }
}

/// Split of the second-order forcing into its angular pieces, in blown-up
/// coordinates `y`. Inputs with a general gradient are rotated so the
/// gradient points along e1; all methods take unrotated `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingDecomposition {
    pub alpha: Alpha,
    pub delta: f64,
    /// Local data in the aligned frame.
    pub aligned: LocalData,
    /// Angle of the gradient; `y_aligned = R(-angle) y`.
    pub angle: f64,
    original: LocalData,
}

impl ForcingDecomposition {
    pub fn new(alpha: Alpha, local: &LocalData, delta: f64) -> Self {
        let angle = if local.grad_norm_sq() > 0.0 {
            local.grad[1].atan2(local.grad[0])
        } else {
            0.0
        };
        ForcingDecomposition {
            alpha,
            delta,
            aligned: local.rotated(angle),
            angle,
            original: *local,
        }
    }

    pub fn align(&self, y: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [c * y[0] + s * y[1], -s * y[0] + c * y[1]]
    }

    fn bubble_weight(&self, r: f64) -> f64 {
        // r^{2 alpha} e^U
        let a = self.alpha.bubble_coefficient(self.original.v0);
        let den = 1.0 + a * r.powf(self.alpha.power());
        r.powf(2.0 * self.alpha.value()) / (den * den)
    }

    fn g(&self, r: f64) -> f64 {
        eval_g(self.alpha, self.original.v0, r).value
    }

    /// `delta^2 (x . hess x) / 2` at `x = y`, original frame.
    pub fn f1(&self, y: [f64; 2]) -> f64 {
        let h = &self.original.hess;
        0.5 * self.delta.powi(2) * (h[0][0] * y[0] * y[0] + 2.0 * h[0][1] * y[0] * y[1] + h[1][1] * y[1] * y[1])
    }

    /// Trace-free part of [`Self::f1`].
    pub fn f11(&self, y: [f64; 2]) -> f64 {
        let ya = self.align(y);
        let r2 = ya[0] * ya[0] + ya[1] * ya[1];
        if r2 == 0.0 {
            return 0.0;
        }
        let r = r2.sqrt();
        let th = [ya[0] / r, ya[1] / r];
        let h = &self.aligned.hess;
        self.delta.powi(2)
            * r2
            * (0.5 * h[0][0] * Harmonic::Theta1Sq.eval(th)
                + 0.5 * h[1][1] * Harmonic::Theta2Sq.eval(th)
                + h[0][1] * Harmonic::Theta1Theta2.eval(th))
    }

    /// `delta^2 r^2 Delta V(0) / 4`.
    pub fn f12(&self, y: [f64; 2]) -> f64 {
        0.25 * self.delta.powi(2) * (y[0] * y[0] + y[1] * y[1]) * self.original.laplacian
    }

    fn coupling_radial(&self, r: f64) -> f64 {
        let g = self.g(r);
        self.bubble_weight(r) * self.original.grad_norm_sq() * (0.5 * self.original.v0 * g * g + g * r)
    }

    /// Angular (theta1^2 - 1/2) part of the gradient coupling.
    pub fn c11(&self, y: [f64; 2]) -> f64 {
        let ya = self.align(y);
        let r = ya[0].hypot(ya[1]);
        if r == 0.0 {
            return 0.0;
        }
        self.delta.powi(2) * self.coupling_radial(r) * Harmonic::Theta1Sq.eval([ya[0] / r, ya[1] / r])
    }

    /// Angle-free part of the gradient coupling.
    pub fn c12(&self, y: [f64; 2]) -> f64 {
        0.5 * self.delta.powi(2) * self.coupling_radial(y[0].hypot(y[1]))
    }

    /// `(v0/2) r^{2a} e^U phi^2 + delta r^{2a} (grad . y) e^U phi` evaluated directly.
    pub fn coupling(&self, y: [f64; 2]) -> f64 {
        let r = y[0].hypot(y[1]);
        if r == 0.0 {
            return 0.0;
        }
        let gy = self.original.grad[0] * y[0] + self.original.grad[1] * y[1];
        let phi = self.delta * self.g(r) * gy / r;
        let w = self.bubble_weight(r);
        0.5 * self.original.v0 * w * phi * phi + self.delta * w * gy * phi
    }

    /// The four radial sources `Q` (without the `delta^2` factor) with their
    /// harmonics; `c = delta^2 sum f_k(theta) h_k(r)`.
    pub fn pieces(&self) -> Vec<(Harmonic, RadialFn)> {
        let me = *self;
        let hess = self.aligned.hess;
        let curvature = move |coef: f64| -> RadialFn {
            Arc::new(move |r: f64| coef * r * r * me.bubble_weight(r))
        };
        vec![
            (Harmonic::Theta1Sq, curvature(0.5 * hess[0][0])),
            (Harmonic::Theta2Sq, curvature(0.5 * hess[1][1])),
            (Harmonic::Theta1Theta2, curvature(hess[0][1])),
            (Harmonic::Theta1Sq, Arc::new(move |r: f64| me.coupling_radial(r))),
        ]
    }
}

/// Radial source `E(r)` of the equation left after removing `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderForcing {
    pub alpha: Alpha,
    pub local: LocalData,
    pub delta: f64,
}

impl SecondOrderForcing {
    pub fn eval(&self, r: f64) -> f64 {
        let d = ForcingDecomposition::new(self.alpha, &self.local, self.delta);
        let w = d.bubble_weight(r);
        self.delta.powi(2) * (0.25 * r * r * self.local.laplacian * w) + d.c12([r, 0.0])
    }
}

/// One harmonic piece of the correction.
#[derive(Clone)]
pub struct CorrectionPiece {
    pub harmonic: Harmonic,
    /// `h` sampled against `r` (without the `delta^2` factor).
    pub profile: RadialProfile,
    /// `sup |h| (1 + r)^3 / r^2` over `r <= R`.
    pub envelope: f64,
    /// Same supremum when the domain is doubled.
    pub envelope_doubled: f64,
    solution: Option<VopSolution>,
    stretch: Stretch,
    source: RadialFn,
}

impl std::fmt::Debug for CorrectionPiece {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorrectionPiece")
            .field("harmonic", &self.harmonic)
            .field("envelope", &self.envelope)
            .field("envelope_doubled", &self.envelope_doubled)
            .finish()
    }
}

impl CorrectionPiece {
    /// `h` and `dh/dr` at radius `r`.
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        match &self.solution {
            None => Ok((0.0, 0.0)),
            Some(sol) => {
                let (f, fs) = sol.eval(self.stretch.s_of_r(r))?;
                Ok((f, fs * self.stretch.ds_dr(r)))
            }
        }
    }

    /// Residual of `h'' + h'/r + (v0 r^{2a} e^U - 4/r^2) h + Q` at `r`, with
    /// `h''` from a fourth-order difference of the exact `h'`.
    pub fn residual(&self, r: f64) -> Result<f64> {
        let st = self.stretch;
        let step = 1e-3 * r;
        let d = |x: f64| self.eval(x).map(|v| v.1);
        let h2 = (-d(r + 2.0 * step)? + 8.0 * d(r + step)? - 8.0 * d(r - step)? + d(r - 2.0 * step)?)
            / (12.0 * step);
        let (h, h1) = self.eval(r)?;
        let a = st.alpha.bubble_coefficient(st.v0);
        let den = 1.0 + a * r.powf(st.alpha.power());
        let pot = st.v0 * r.powf(2.0 * st.alpha.value()) / (den * den) - 4.0 / (r * r);
        Ok(h2 + h1 / r + pot * h + (self.source)(r))
    }
}

/// The assembled correction `c`.
#[derive(Debug, Clone)]
pub struct CorrectionC {
    pub delta: f64,
    pub r_max: f64,
    pub decomposition: ForcingDecomposition,
    pub pieces: Vec<CorrectionPiece>,
    /// Largest piece envelope on the domain.
    pub envelope: f64,
}

impl CorrectionC {
    /// `c(y)` in blown-up coordinates.
    pub fn eval(&self, y: [f64; 2]) -> Result<f64> {
        let ya = self.decomposition.align(y);
        let r = ya[0].hypot(ya[1]);
        if r == 0.0 {
            return Ok(0.0);
        }
        let th = [ya[0] / r, ya[1] / r];
        let mut total = 0.0;
        for p in &self.pieces {
            total += p.harmonic.eval(th) * p.eval(r)?.0;
        }
        Ok(self.delta.powi(2) * total)
    }

    /// Largest mode-wise residual `delta^2 |L h_k + Q_k|` over the radii.
    pub fn max_mode_residual(&self, radii: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in &self.pieces {
            for &r in radii {
                worst = worst.max(self.delta.powi(2) * p.residual(r)?.abs());
            }
        }
        Ok(worst)
    }
}

fn q_envelope_check(alpha: Alpha, v0: f64, q: &RadialFn, r_max: f64) -> Result<()> {
    let a = alpha.bubble_coefficient(v0);
    let p = alpha.power();
    let env = |r: f64| r.powf(p) / (1.0 + a * r.powf(p)).powi(2);
    let radii = log_radii(1e-4, 2.0 * r_max, 10.0);
    let ratios: Vec<(f64, f64)> = radii.iter().map(|&r| (r, q(r) / env(r))).collect();
    if let Some((r, _)) = ratios.iter().find(|(_, x)| !x.is_finite()) {
        return Err(Error::EnvelopeViolation(format!("source not finite at r = {r}")));
    }
    let peak = ratios.iter().fold(0.0f64, |m, x| m.max(x.1.abs()));
    if peak == 0.0 {
        return Ok(());
    }
    // the ratio must not grow toward either end
    let head: Vec<(f64, f64)> = ratios.iter().take(20).map(|&(r, x)| (r, x.abs().max(1e-300))).collect();
    let tail: Vec<(f64, f64)> = ratios
        .iter()
        .rev()
        .take(20)
        .map(|&(r, x)| (r, x.abs().max(1e-300)))
        .collect();
    let head_ok = head.iter().all(|x| x.1 < 1e-12 * peak) || log_log_slope(&head)?.0 >= -0.05;
    let tail_ok = tail.iter().all(|x| x.1 < 1e-12 * peak) || log_log_slope(&tail)?.0 <= 0.05;
    if !head_ok || !tail_ok {
        return Err(Error::EnvelopeViolation(format!(
            "|Q(r)| is not bounded by C r^{{{p}}} / (1 + a r^{{{p}}})^2 (growth at {})",
            if head_ok { "infinity" } else { "the origin" }
        )));
    }
    Ok(())
}

/// Solve `h'' + h'/r + (v0 r^{2a} e^U - 4/r^2) h = -Q(r)` through the
/// `s` variable with the closed-form pair of index `2/(1+alpha)`.
pub fn solve_h1(alpha: Alpha, v0: f64, q: RadialFn, r_max: f64) -> Result<(Option<VopSolution>, Stretch)> {
    q_envelope_check(alpha, v0, &q, r_max)?;
    let st = Stretch::new(alpha, v0);
    let b2 = alpha.beta().powi(2);
    let a = alpha.bubble_coefficient(v0);
    let two_alpha = 2.0 * alpha.value();
    if (0..8).all(|i| q(10f64.powi(i - 3)) == 0.0) {
        return Ok((None, st));
    }
    let qs = q.clone();
    let l: RadialFn = Arc::new(move |s: f64| {
        let r = st.r_of_s(s);
        -qs(r) * r.powf(-two_alpha) / (a * b2)
    });
    let s_max = st.s_of_r(r_max);
    let sol = variation_of_parameters_with_index(2.0 * alpha.delta(), l, s_max, &VopOptions::default())?;
    Ok((Some(sol), st))
}

fn piece_envelope(sol: &Option<VopSolution>, st: &Stretch, r_max: f64) -> Result<(RadialProfile, f64)> {
    let nodes = log_radii(1e-3, r_max, 40.0);
    let mut values = Vec::with_capacity(nodes.len());
    let mut derivs = Vec::with_capacity(nodes.len());
    let mut env = 0.0f64;
    for &r in &nodes {
        let (h, hr) = match sol {
            None => (0.0, 0.0),
            Some(s) => {
                let (f, fs) = s.eval(st.s_of_r(r).min(s.s_max))?;
                (f, fs * st.ds_dr(r))
            }
        };
        env = env.max(h.abs() * (1.0 + r).powi(3) / (r * r));
        values.push(h);
        derivs.push(hr);
    }
    let prof = RadialProfile::new(
        nodes,
        values,
        derivs,
        ProfileMeta {
            alpha: Some(st.alpha.value()),
            interval: (0.0, r_max),
            variable: Variable::Radius,
        },
    )?;
    Ok((prof, env))
}

/// Smallest cutoff used when solving for the pieces of `c`.
pub const MIN_SOLVE_RADIUS: f64 = 100.0;

/// Assemble `c` on the blown-up domain `|y| < R` (normally `R = 1/delta`).
pub fn build_correction_c(alpha: Alpha, local: &LocalData, p: &BubbleParams, r_max: f64) -> Result<CorrectionC> {
    if (p.v0 - local.v0).abs() > 1e-12 * local.v0 {
        return Err(Error::InvalidInput("bubble and local data disagree on V(0)".into()));
    }
    let decomposition = ForcingDecomposition::new(alpha, local, p.scale);
    let pieces = decomposition
        .pieces()
        .into_par_iter()
        .map(|(harmonic, q)| {
            // the pieces decay on the whole plane; small domains only sample them
            let r_solve = r_max.max(MIN_SOLVE_RADIUS);
            let (solution, stretch) = solve_h1(alpha, local.v0, q.clone(), r_solve)?;
            let (profile, envelope) = piece_envelope(&solution, &stretch, r_max)?;
            let (solution2, _) = solve_h1(alpha, local.v0, q.clone(), 2.0 * r_solve)?;
            let (_, envelope_doubled) = piece_envelope(&solution2, &stretch, 2.0 * r_max)?;
            Ok(CorrectionPiece {
                harmonic,
                profile,
                envelope,
                envelope_doubled,
                solution,
                stretch,
                source: q,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let envelope = pieces.iter().fold(0.0f64, |m, p| m.max(p.envelope));
    Ok(CorrectionC {
        delta: p.scale,
        r_max,
        decomposition,
        pieces,
        envelope,
    })
}

/// `int_0^{2 pi} f (-f'') dtheta` and `4 int_0^{2 pi} f^2 dtheta` by the
/// trapezoidal rule, which is exact for trigonometric polynomials.
pub fn harmonic_eigen_check(h: Harmonic, samples: usize) -> (f64, f64) {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..samples {
        let phi = 2.0 * PI * i as f64 / samples as f64;
        let th = [phi.cos(), phi.sin()];
        let f = h.eval(th);
        lhs += -f * h.second_angular_derivative(phi);
        rhs += 4.0 * f * f;
    }
    let w = 2.0 * PI / samples as f64;
    (lhs * w, rhs * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half() -> Alpha {
        Alpha::new(0.5).unwrap()
    }

    #[test]
    fn euler_baseline_exact() {
        let opts = KernelOptions {
            potential: KernelPotential::Euler,
            ..KernelOptions::default()
        };
        let rep = kernel_triviality_report_with(half(), 18.0, 3, &opts).unwrap();
        for row in &rep.rows {
            assert!((row.exponent_zero.unwrap() - row.k as f64).abs() < 1e-8);
            assert!((row.exponent_infinity.unwrap() - row.k as f64).abs() < 1e-8);
        }
        assert!(rep.certified);
    }

    #[test]
    fn bubble_modes_certified() {
        let rep = kernel_triviality_report(half(), 18.0, 3).unwrap();
        assert!(rep.certified);
        for row in &rep.rows {
            let k = row.k as f64;
            assert!((row.exponent_zero.unwrap() - k).abs() < 0.05 * k);
            assert!((row.exponent_infinity.unwrap() - k).abs() < 0.05 * k);
            assert!(row.closed_form_error.unwrap() < 1e-6, "{row:?}");
        }
    }

    #[test]
    fn rejects_large_k_max() {
        assert!(kernel_triviality_report(half(), 18.0, 11).is_err());
    }

    #[test]
    fn g_numeric_matches_closed_form() {
        let prof = solve_g_numeric(half(), 18.0, 1e3).unwrap();
        let (g1, _) = prof.interpolate(1.0).unwrap();
        assert!((g1 + 1.0 / 6.0).abs() < 1e-6, "{g1}");
        for (r, g) in prof.nodes().iter().zip(prof.values()) {
            if (1e-2..=1e2).contains(r) {
                let exact = eval_g(half(), 18.0, *r).value;
                assert!((g / exact - 1.0).abs() < 1e-6, "r={r}: {g} vs {exact}");
            }
        }
    }

    #[test]
    fn unforced_mode_is_zero() {
        let problem = ModeProblem::bubble_mode(half(), 18.0, 1, 1e3).with_forcing(Arc::new(|_| 0.0));
        let prof = solve_forced_mode(&problem, &ForcedModeOptions::default()).unwrap();
        assert!(prof.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn harmonics_are_eigenfunctions() {
        for h in [Harmonic::Theta1Sq, Harmonic::Theta2Sq, Harmonic::Theta1Theta2] {
            let (l, r) = harmonic_eigen_check(h, 64);
            assert!((l - r).abs() < 1e-10, "{h:?}");
        }
    }

    #[test]
    fn zero_data_gives_zero_correction() {
        let local = LocalData::new(18.0, [0.0, 0.0], [[0.0; 2]; 2]).unwrap();
        let p = BubbleParams::from_scale(half(), 18.0, 1e-2).unwrap();
        let c = build_correction_c(half(), &local, &p, 100.0).unwrap();
        for y in [[0.3, 0.1], [2.0, -5.0], [50.0, 1.0]] {
            assert_eq!(c.eval(y).unwrap(), 0.0);
        }
        assert_eq!(c.envelope, 0.0);
    }

    #[test]
    fn saddle_hessian_correction() {
        let local = LocalData::new(18.0, [0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]]).unwrap();
        let p = BubbleParams::from_scale(half(), 18.0, 1e-2).unwrap();
        let c = build_correction_c(half(), &local, &p, 100.0).unwrap();
        let radii = log_radii(0.1, 10.0, 10.0);
        let res = c.max_mode_residual(&radii).unwrap();
        assert!(res <= 1e-6 * 1e-4, "{res:e}");
        for piece in &c.pieces {
            let e = piece.envelope;
            let e2 = piece.envelope_doubled;
            assert!(e.is_finite());
            if e > 0.0 {
                assert!((e2 / e - 1.0).abs() < 0.1, "{e} {e2}");
            }
        }
    }

    #[test]
    fn growing_source_rejected() {
        let q: RadialFn = Arc::new(|r: f64| r);
        assert!(matches!(
            solve_h1(half(), 18.0, q, 100.0),
            Err(Error::EnvelopeViolation(_))
        ));
    }

    #[test]
    fn second_order_forcing_decay() {
        let local = LocalData::new(18.0, [1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let e = SecondOrderForcing {
            alpha: half(),
            local,
            delta: 1e-2,
        };
        let pairs: Vec<(f64, f64)> = [1e3, 2e3, 5e3, 1e4].iter().map(|&r| (r, e.eval(r).abs())).collect();
        let (slope, _) = log_log_slope(&pairs).unwrap();
        assert!((slope + 3.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn aligned_coupling_has_pure_angular_content() {
        let local = LocalData::new(18.0, [0.7, 0.0], [[0.0; 2]; 2]).unwrap();
        let d = ForcingDecomposition::new(half(), &local, 1e-2);
        let n = 64;
        let r = 1.3;
        let (mut c11_modes, mut c12_modes) = ([0.0f64; 5], [0.0f64; 5]);
        for i in 0..n {
            let phi = 2.0 * PI * i as f64 / n as f64;
            let y = [r * phi.cos(), r * phi.sin()];
            for m in 0..5 {
                let w = (m as f64 * phi).cos();
                c11_modes[m] += d.c11(y) * w / n as f64;
                c12_modes[m] += d.c12(y) * w / n as f64;
            }
        }
        let scale = d.c11([r, 0.0]).abs();
        for m in [0, 1, 3, 4] {
            assert!(c11_modes[m].abs() <= 1e-12 * scale.max(1.0), "mode {m}");
        }
        for (m, v) in c12_modes.iter().enumerate().skip(1) {
            assert!(v.abs() <= 1e-12 * scale.max(1.0), "mode {m}");
        }
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs(
            g1 in -2.0f64..2.0, g2 in -2.0f64..2.0,
            h11 in -3.0f64..3.0, h12 in -3.0f64..3.0, h22 in -3.0f64..3.0,
            y1 in -20.0f64..20.0, y2 in -20.0f64..20.0,
        ) {
            let local = LocalData::new(18.0, [g1, g2], [[h11, h12], [h12, h22]]).unwrap();
            let d = ForcingDecomposition::new(half(), &local, 1e-2);
            let y = [y1, y2];
            let f1 = d.f1(y);
            prop_assert!((f1 - d.f11(y) - d.f12(y)).abs() <= 1e-12 * (1.0 + f1.abs()));
            let c = d.coupling(y);
            prop_assert!((c - d.c11(y) - d.c12(y)).abs() <= 1e-10 * (1e-8 + c.abs()));
        }
    }
}
