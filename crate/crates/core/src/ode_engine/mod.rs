//! Radial ODEs with a regular singular point at the origin.
//!
//! Mode problems `u'' + u'/r + (P(r) - nu^2/r^2) u = s(r)` are integrated in
//! `t = log r`, where they read `u_tt = (nu^2 - r^2 P) u + r^2 s` and have
//! smooth coefficients. The startup at a small radius uses a two-term
//! Frobenius series.

pub mod dopri;
pub mod liouville;
pub mod vop;

use std::fmt;
use std::sync::Arc;

use crate::closed_forms::Alpha;
use crate::error::{Error, Result};
use crate::fit::log_log_slope;

pub use dopri::{integrate, IntegratorOptions, Trajectory};
pub use liouville::{
    shoot_liouville, shoot_liouville_with, ConstantWeight, FnWeight, Formulation, LiouvilleShot,
    QuadraticWeight, RadialWeight, ShootOptions,
};
pub use vop::{variation_of_parameters, variation_of_parameters_with_index, VopOptions, VopSolution};

/// Default integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default startup radius for the Frobenius series.
pub const DEFAULT_MATCH_RADIUS: f64 = 1e-4;

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which independent variable a profile is sampled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    /// Physical radius `r`.
    Radius,
    /// Blown-up radius `r / delta`.
    BlownUp,
    /// `s = sqrt(a) r^{1+alpha}`.
    Stretched,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileMeta {
    pub alpha: Option<f64>,
    pub interval: (f64, f64),
    pub variable: Variable,
}

/// A radial function sampled on a strictly increasing positive grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    pub meta: ProfileMeta,
}

impl RadialProfile {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, derivs: Vec<f64>, meta: ProfileMeta) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != values.len() || nodes.len() != derivs.len() {
            return Err(Error::InvalidInput("profile arrays must be non-empty and of equal length".into()));
        }
        if !(nodes[0] > 0.0) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("profile nodes must be positive and strictly increasing".into()));
        }
        if let Some(i) = values.iter().chain(&derivs).position(|v| !v.is_finite()) {
            let i = i % nodes.len();
            return Err(Error::NonFinite {
                what: "profile sample".into(),
                location: format!("r = {}", nodes[i]),
            });
        }
        Ok(RadialProfile { nodes, values, derivs, meta })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cubic Hermite interpolation of value and derivative.
    pub fn interpolate(&self, r: f64) -> Option<(f64, f64)> {
        let n = self.nodes.len();
        if r < self.nodes[0] || r > self.nodes[n - 1] {
            return None;
        }
        let j = self.nodes.partition_point(|&x| x <= r).clamp(1, n - 1);
        let (x0, x1) = (self.nodes[j - 1], self.nodes[j]);
        let h = x1 - x0;
        let s = (r - x0) / h;
        let (y0, y1) = (self.values[j - 1], self.values[j]);
        let (m0, m1) = (self.derivs[j - 1] * h, self.derivs[j] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let dvalue = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        Some((value, dvalue))
    }

    /// Log-log slope of `|value|` on the nodes inside `[lo, hi]`.
    ///
    /// Returns `None` when `|value|` is not strictly monotone on the window,
    /// which means the power-law regime has not been reached.
    pub fn growth_exponent(&self, lo: f64, hi: f64) -> Result<Option<f64>> {
        let pairs: Vec<(f64, f64)> = self
            .nodes
            .iter()
            .zip(&self.values)
            .filter(|(r, _)| **r >= lo && **r <= hi)
            .map(|(r, v)| (*r, v.abs()))
            .collect();
        if pairs.len() < 4 {
            return Err(Error::Fit(format!("only {} samples in window [{lo}, {hi}]", pairs.len())));
        }
        if pairs.iter().any(|p| p.1 == 0.0) {
            return Ok(None);
        }
        let increasing = pairs.windows(2).all(|w| w[1].1 > w[0].1);
        let decreasing = pairs.windows(2).all(|w| w[1].1 < w[0].1);
        if !increasing && !decreasing {
            return Ok(None);
        }
        Ok(Some(log_log_slope(&pairs)?.0))
    }
}

/// Leading power law `coefficient * r^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

/// A second-order radial mode problem
/// `u'' + u'/r + (P(r) - nu^2/r^2) u = s(r)` on `(0, r_max]`.
#[derive(Clone)]
pub struct ModeProblem {
    pub k: u32,
    pub nu: f64,
    perturbation: RadialFn,
    forcing: Option<RadialFn>,
    pub r_max: f64,
    /// Behaviour of `P` as `r -> 0`, used by the Frobenius startup.
    pub near_zero: Option<PowerLaw>,
    /// Behaviour of `P` as `r -> infinity`, used by the decaying seed.
    pub near_infinity: Option<PowerLaw>,
}

impl fmt::Debug for ModeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModeProblem")
            .field("k", &self.k)
            .field("nu", &self.nu)
            .field("r_max", &self.r_max)
            .field("forced", &self.forcing.is_some())
            .finish()
    }
}

impl ModeProblem {
    pub fn new(k: u32, nu: f64, perturbation: RadialFn, r_max: f64) -> Self {
        ModeProblem {
            k,
            nu,
            perturbation,
            forcing: None,
            r_max,
            near_zero: None,
            near_infinity: None,
        }
    }

    /// Euler equation `u'' + u'/r - k^2 u / r^2 = 0`.
    pub fn euler(k: u32, r_max: f64) -> Self {
        Self::new(k, k as f64, Arc::new(|_| 0.0), r_max)
    }

    /// Angular mode `k` of the operator linearized at the bubble:
    /// `P(r) = v0 r^{2 alpha} e^{U(r)}`.
    pub fn bubble_mode(alpha: Alpha, v0: f64, k: u32, r_max: f64) -> Self {
        let a = alpha.bubble_coefficient(v0);
        let p = alpha.power();
        let two_alpha = 2.0 * alpha.value();
        let pert: RadialFn = Arc::new(move |r: f64| {
            let den = 1.0 + a * r.powf(p);
            v0 * r.powf(two_alpha) / (den * den)
        });
        let mut m = Self::new(k, k as f64, pert, r_max);
        m.near_zero = Some(PowerLaw {
            coefficient: v0,
            exponent: two_alpha,
        });
        m.near_infinity = Some(PowerLaw {
            coefficient: v0 / (a * a),
            exponent: two_alpha - 2.0 * p,
        });
        m
    }

    pub fn with_forcing(mut self, forcing: RadialFn) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn perturbation(&self, r: f64) -> f64 {
        (self.perturbation)(r)
    }

    /// Full potential `q(r) = P(r) - nu^2 / r^2`.
    pub fn potential(&self, r: f64) -> f64 {
        self.perturbation(r) - self.nu * self.nu / (r * r)
    }

    pub fn forcing(&self, r: f64) -> f64 {
        self.forcing.as_ref().map_or(0.0, |s| s(r))
    }

    pub fn is_forced(&self) -> bool {
        self.forcing.is_some()
    }

    /// Right-hand side of the first-order system in `t = log r`.
    pub(crate) fn rhs_t(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        let r = t.exp();
        let q = self.nu * self.nu - r * r * self.perturbation(r);
        [y[1], q * y[0] + r * r * self.forcing(r)]
    }

    /// Residual of the ODE in `r` given value and first two derivatives.
    pub fn residual(&self, r: f64, u: f64, du: f64, d2u: f64) -> f64 {
        d2u + du / r + self.potential(r) * u - self.forcing(r)
    }

    /// Power-law seed `r^mu (1 + b r^m)` at radius `r`, returned as `(u, u_t)`.
    pub(crate) fn seed(&self, r: f64, mu: f64, law: Option<PowerLaw>) -> (f64, f64) {
        if mu == 0.0 && law.is_none_or(|l| l.exponent < -2.0) && self.nu == 0.0 {
            // second solution of the k = 0 Euler equation
            return (r.ln(), 1.0);
        }
        let (b, m) = match law {
            Some(l) => {
                let m = l.exponent + 2.0;
                let den = m * (m + 2.0 * mu);
                if den.abs() < 1e-8 {
                    (0.0, 0.0)
                } else {
                    (-l.coefficient / den, m)
                }
            }
            None => (0.0, 0.0),
        };
        let base = r.powf(mu);
        let corr = b * r.powf(m);
        (base * (1.0 + corr), base * (mu + (mu + m) * corr))
    }
}

/// Direction of integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From the startup radius out to `r_max`.
    Outward,
    /// From `r_max` in to the startup radius.
    Inward,
}

/// Power behaviour imposed at the starting end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seed {
    /// `r^{nu}` behaviour.
    Regular,
    /// `r^{-nu}` behaviour.
    Decaying,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularOptions {
    pub tol: f64,
    pub match_radius: f64,
    /// Output samples per unit of `log r`.
    pub samples_per_unit: f64,
}

impl Default for SingularOptions {
    fn default() -> Self {
        SingularOptions {
            tol: DEFAULT_TOL,
            match_radius: DEFAULT_MATCH_RADIUS,
            samples_per_unit: 50.0,
        }
    }
}

/// Uniform grid in `log r` covering `[lo, hi]`.
pub(crate) fn log_grid(lo: f64, hi: f64, per_unit: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let n = ((b - a) * per_unit).ceil().max(2.0) as usize;
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Radii equally spaced in `log r` covering `[lo, hi]`.
pub fn log_radii(lo: f64, hi: f64, per_unit: f64) -> Vec<f64> {
    log_grid(lo, hi, per_unit).into_iter().map(f64::exp).collect()
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::InvalidInput(format!("tolerance {tol:e} outside [1e-13, 1e-6]")));
    }
    Ok(())
}

/// Homogeneous solution of a mode problem with the requested power behaviour
/// at the starting end. The forcing, if any, is included in the ODE.
pub fn integrate_singular(problem: &ModeProblem, direction: Direction, seed: Seed, tol: f64) -> Result<RadialProfile> {
    integrate_singular_with(
        problem,
        direction,
        seed,
        &SingularOptions {
            tol,
            ..SingularOptions::default()
        },
    )
}

pub fn integrate_singular_with(
    problem: &ModeProblem,
    direction: Direction,
    seed: Seed,
    opts: &SingularOptions,
) -> Result<RadialProfile> {
    let (ts, states) = integrate_singular_t(problem, direction, seed, opts)?;
    let nodes: Vec<f64> = ts.iter().map(|t| t.exp()).collect();
    let values = states.iter().map(|s| s[0]).collect();
    let derivs = states.iter().zip(&nodes).map(|(s, r)| s[1] / r).collect();
    RadialProfile::new(
        nodes,
        values,
        derivs,
        ProfileMeta {
            alpha: None,
            interval: (opts.match_radius, problem.r_max),
            variable: Variable::Radius,
        },
    )
}

/// Same as [`integrate_singular_with`] but returns `(t, [u, u_t])` on the
/// uniform `log r` grid, ordered by increasing `t`.
pub(crate) fn integrate_singular_t(
    problem: &ModeProblem,
    direction: Direction,
    seed: Seed,
    opts: &SingularOptions,
) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    check_tol(opts.tol)?;
    if !(problem.r_max > opts.match_radius) || !problem.r_max.is_finite() {
        return Err(Error::InvalidInput(format!(
            "r_max = {} must be finite and exceed the startup radius {}",
            problem.r_max, opts.match_radius
        )));
    }
    let grid = log_grid(opts.match_radius, problem.r_max, opts.samples_per_unit);
    let mu = match seed {
        Seed::Regular => problem.nu,
        Seed::Decaying => -problem.nu,
    };
    let (start_t, law, stops): (f64, Option<PowerLaw>, Vec<f64>) = match direction {
        Direction::Outward => (grid[0], problem.near_zero, grid[1..].to_vec()),
        Direction::Inward => (
            *grid.last().expect("grid"),
            problem.near_infinity,
            grid[..grid.len() - 1].iter().rev().copied().collect(),
        ),
    };
    let (u, ut) = problem.seed(start_t.exp(), mu, law);
    let options = IntegratorOptions::with_tol(opts.tol);
    // scale the absolute tolerance with the seed magnitude so tiny seeds are resolved
    let options = IntegratorOptions {
        atol: opts.tol * u.abs().max(ut.abs()).clamp(1e-300, 1.0),
        ..options
    };
    let traj = integrate(|t, y: &[f64; 2]| problem.rhs_t(t, y), start_t, [u, ut], &stops, &options)?;
    let mut ts = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    ts.push(start_t);
    states.push([u, ut]);
    ts.extend(traj.times.iter().copied());
    states.extend(traj.states.iter().copied());
    if direction == Direction::Inward {
        ts.reverse();
        states.reverse();
    }
    Ok((ts, states))
}

/// `s = sqrt(a) r^{1+alpha}`, the variable in which the linearized
/// operator has rational coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stretch {
    pub alpha: Alpha,
    pub v0: f64,
}

impl Stretch {
    pub fn new(alpha: Alpha, v0: f64) -> Self {
        Stretch { alpha, v0 }
    }
    pub fn s_of_r(&self, r: f64) -> f64 {
        self.alpha.bubble_coefficient(self.v0).sqrt() * r.powf(self.alpha.beta())
    }
    pub fn r_of_s(&self, s: f64) -> f64 {
        (s / self.alpha.bubble_coefficient(self.v0).sqrt()).powf(1.0 / self.alpha.beta())
    }
    /// `ds/dr` at radius `r`.
    pub fn ds_dr(&self, r: f64) -> f64 {
        self.alpha.beta() * self.s_of_r(r) / r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::eval_mode_fundamentals;

    #[test]
    fn euler_regular_solution_is_pure_power() {
        let problem = ModeProblem::euler(2, 1.0);
        let opts = SingularOptions {
            tol: 1e-12,
            match_radius: 1e-3,
            samples_per_unit: 40.0,
        };
        let prof = integrate_singular_with(&problem, Direction::Outward, Seed::Regular, &opts).unwrap();
        let first = prof.values()[0] / prof.nodes()[0].powi(2);
        for (r, u) in prof.nodes().iter().zip(prof.values()) {
            assert!((u / (r * r) - first).abs() < 1e-9, "r={r}");
        }
    }

    #[test]
    fn bubble_mode_regular_solution_matches_closed_form() {
        // the regular solution is f_11(s(r)) up to normalization
        let alpha = Alpha::new(0.5).unwrap();
        let problem = ModeProblem::bubble_mode(alpha, 18.0, 1, 100.0);
        let prof = integrate_singular(&problem, Direction::Outward, Seed::Regular, 1e-11).unwrap();
        let st = Stretch::new(alpha, 18.0);
        let nu = alpha.mode_index(1);
        let (u1, _) = prof.interpolate(1.0).unwrap();
        let c1 = eval_mode_fundamentals(nu, st.s_of_r(1.0)).unwrap().f1;
        for (r, u) in prof.nodes().iter().zip(prof.values()).step_by(37) {
            let f = eval_mode_fundamentals(nu, st.s_of_r(*r)).unwrap().f1;
            assert!((u / u1 - f / c1).abs() <= 1e-7 * (f / c1).abs().max(1e-3), "r={r}");
        }
    }

    #[test]
    fn decaying_solution_matches_closed_form() {
        let alpha = Alpha::new(0.5).unwrap();
        let problem = ModeProblem::bubble_mode(alpha, 18.0, 1, 1e4);
        let prof = integrate_singular(&problem, Direction::Inward, Seed::Decaying, 1e-11).unwrap();
        let st = Stretch::new(alpha, 18.0);
        let nu = alpha.mode_index(1);
        let (u1, _) = prof.interpolate(st.r_of_s(1.0)).unwrap();
        let c1 = eval_mode_fundamentals(nu, 1.0).unwrap().f2;
        for (r, u) in prof.nodes().iter().zip(prof.values()).step_by(29) {
            let f = eval_mode_fundamentals(nu, st.s_of_r(*r)).unwrap().f2;
            assert!((u / u1 - f / c1).abs() <= 1e-6 * (f / c1).abs(), "r={r}");
        }
        let far = prof.growth_exponent(1e2, 1e4).unwrap().unwrap();
        assert!((far + 1.0).abs() < 0.05, "{far}");
        let near = prof.growth_exponent(2e-4, 1e-2).unwrap().unwrap();
        assert!((near + 1.0).abs() < 0.05, "{near}");
    }

    #[test]
    fn rejects_bad_tolerance() {
        let problem = ModeProblem::euler(1, 1.0);
        assert!(integrate_singular(&problem, Direction::Outward, Seed::Regular, 1e-3).is_err());
        assert!(integrate_singular(&problem, Direction::Outward, Seed::Regular, 1e-15).is_err());
    }

    #[test]
    fn profile_invariants_enforced() {
        let meta = ProfileMeta {
            alpha: None,
            interval: (0.0, 1.0),
            variable: Variable::Radius,
        };
        assert!(RadialProfile::new(vec![0.1, 0.1], vec![0.0; 2], vec![0.0; 2], meta).is_err());
        assert!(RadialProfile::new(vec![0.0, 0.1], vec![0.0; 2], vec![0.0; 2], meta).is_err());
        assert!(RadialProfile::new(vec![0.1, 0.2], vec![0.0, f64::NAN], vec![0.0; 2], meta).is_err());
        assert!(RadialProfile::new(vec![0.1, 0.2], vec![0.0; 3], vec![0.0; 2], meta).is_err());
    }

    #[test]
    fn stretch_round_trip() {
        let st = Stretch::new(Alpha::new(1.5).unwrap(), 7.0);
        for r in [1e-3, 0.5, 2.0, 300.0] {
            assert!((st.r_of_s(st.s_of_r(r)) / r - 1.0).abs() < 1e-13);
        }
    }
}
