//! Radial shooting for `u'' + u'/r + r^{2 alpha} H(r) e^u = 0`, `u(0) = u0`.
//!
//! The solve happens in the blown-up variable `rho = r / delta` with
//! `delta = exp(-u0 / (2 + 2 alpha))`, where `v(rho) = u(delta rho) - u0`
//! solves `v'' + v'/rho + rho^{2 alpha} H(delta rho) e^v = 0`, `v(0) = 0`.
//! For tall bubbles the deviation from the standard bubble is tiny compared
//! with `v` itself, so by default the unknown is the rescaled deviation
//! `omega = (v - U) / eps` which keeps full relative precision.

use crate::closed_forms::{logistic, softplus, Alpha, LocalData};
use crate::error::{Error, Result};

use super::dopri::{integrate, IntegratorOptions};
use super::{check_tol, log_grid, ProfileMeta, RadialProfile, Variable, DEFAULT_MATCH_RADIUS};

/// A positive radial weight `H(r)` with two derivatives.
pub trait RadialWeight: Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    fn second_derivative(&self, r: f64) -> f64;

    /// `H(r) - H(0)`; override when the subtraction would cancel.
    fn excess(&self, r: f64) -> f64 {
        self.value(r) - self.value(0.0)
    }

    /// Taylor data at the origin of the planar function `H(|x|)`.
    fn local_data(&self) -> Result<LocalData> {
        LocalData::radial(self.value(0.0), self.second_derivative(0.0))
    }
}

/// `H(r) = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantWeight(pub f64);

impl RadialWeight for ConstantWeight {
    fn value(&self, _: f64) -> f64 {
        self.0
    }
    fn derivative(&self, _: f64) -> f64 {
        0.0
    }
    fn second_derivative(&self, _: f64) -> f64 {
        0.0
    }
    fn excess(&self, _: f64) -> f64 {
        0.0
    }
}

/// `H(r) = v0 + c r^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticWeight {
    pub v0: f64,
    pub c: f64,
}

impl RadialWeight for QuadraticWeight {
    fn value(&self, r: f64) -> f64 {
        self.v0 + self.c * r * r
    }
    fn derivative(&self, r: f64) -> f64 {
        2.0 * self.c * r
    }
    fn second_derivative(&self, _: f64) -> f64 {
        2.0 * self.c
    }
    fn excess(&self, r: f64) -> f64 {
        self.c * r * r
    }
}

/// Weight from a closure returning `[H, H', H'']`.
pub struct FnWeight<F>(pub F);

impl<F> RadialWeight for FnWeight<F>
where
    F: Fn(f64) -> [f64; 3] + Send + Sync,
{
    fn value(&self, r: f64) -> f64 {
        (self.0)(r)[0]
    }
    fn derivative(&self, r: f64) -> f64 {
        (self.0)(r)[1]
    }
    fn second_derivative(&self, r: f64) -> f64 {
        (self.0)(r)[2]
    }
}

/// Unknown used by the shooting integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Integrate `v` itself.
    Direct,
    /// Integrate the rescaled deviation from the standard bubble.
    Deviation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub tol: f64,
    pub formulation: Formulation,
    /// Startup radius in the blown-up variable.
    pub match_radius: f64,
    /// Output samples per unit of `log rho`.
    pub samples_per_unit: f64,
    /// Verify the ODE residual on the output grid.
    pub residual_check: bool,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            tol: super::DEFAULT_TOL,
            formulation: Formulation::Deviation,
            match_radius: DEFAULT_MATCH_RADIUS,
            samples_per_unit: 100.0,
            residual_check: true,
        }
    }
}

/// One radial solution, stored in blown-up variables on a uniform
/// `log rho` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleShot {
    pub alpha: Alpha,
    pub u0: f64,
    pub delta: f64,
    pub v0: f64,
    pub r_max: f64,
    pub formulation: Formulation,
    /// Unit `eps` of the deviation: `v - U = eps * omega`.
    pub deviation_unit: f64,
    /// `log rho` at each sample.
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    /// `rho dv/drho`.
    pub v_t: Vec<f64>,
    /// `v - U`.
    pub deviation: Vec<f64>,
    /// `rho d(v - U)/drho`.
    pub deviation_t: Vec<f64>,
    /// `2 pi int_0^rho s^{2 alpha + 1} H(delta s) e^{v(s)} ds`, which equals the
    /// mass of the original solution on the disk of radius `delta rho`.
    pub mass: Vec<f64>,
    /// Largest ODE residual seen by the check (0 when disabled).
    pub max_residual: f64,
}

impl LiouvilleShot {
    /// Total mass `int_{B_R} |x|^{2 alpha} H e^u`.
    pub fn total_mass(&self) -> f64 {
        *self.mass.last().expect("non-empty shot")
    }

    /// `sup |v - U|` over the sampled blown-up domain.
    pub fn sup_deviation(&self) -> f64 {
        self.deviation.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// `v - U` at the outer boundary `rho = R / delta`.
    pub fn boundary_deviation(&self) -> f64 {
        *self.deviation.last().expect("non-empty shot")
    }

    /// The solution `u` in the original radius.
    pub fn profile(&self) -> Result<RadialProfile> {
        let nodes: Vec<f64> = self.t.iter().map(|t| self.delta * t.exp()).collect();
        let values = self.v.iter().map(|v| self.u0 + v).collect();
        let derivs = self.v_t.iter().zip(&nodes).map(|(vt, r)| vt / r).collect();
        RadialProfile::new(
            nodes,
            values,
            derivs,
            ProfileMeta {
                alpha: Some(self.alpha.value()),
                interval: (self.delta * self.t[0].exp(), self.r_max),
                variable: Variable::Radius,
            },
        )
    }

    /// `v` against `rho`.
    pub fn blown_up_profile(&self) -> Result<RadialProfile> {
        let nodes: Vec<f64> = self.t.iter().map(|t| t.exp()).collect();
        let derivs = self.v_t.iter().zip(&nodes).map(|(vt, r)| vt / r).collect();
        RadialProfile::new(
            nodes,
            self.v.clone(),
            derivs,
            ProfileMeta {
                alpha: Some(self.alpha.value()),
                interval: (self.t[0].exp(), self.r_max / self.delta),
                variable: Variable::BlownUp,
            },
        )
    }
}

/// Shoot with default options at the given tolerance.
pub fn shoot_liouville<W: RadialWeight + ?Sized>(
    alpha: Alpha,
    weight: &W,
    u0: f64,
    r_max: f64,
    tol: f64,
) -> Result<LiouvilleShot> {
    shoot_liouville_with(
        alpha,
        weight,
        u0,
        r_max,
        &ShootOptions {
            tol,
            ..ShootOptions::default()
        },
    )
}

pub fn shoot_liouville_with<W: RadialWeight + ?Sized>(
    alpha: Alpha,
    weight: &W,
    u0: f64,
    r_max: f64,
    opts: &ShootOptions,
) -> Result<LiouvilleShot> {
    check_tol(opts.tol)?;
    let beta = alpha.beta();
    if !u0.is_finite() || u0 > 30.0 * beta + 1e-9 {
        return Err(Error::InvalidInput(format!(
            "u0 = {u0} exceeds the supported range u0 <= {}",
            30.0 * beta
        )));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::InvalidInput(format!("R must be positive and finite, got {r_max}")));
    }
    let p = alpha.power();
    let delta = alpha.scale(u0);
    let v0 = weight.value(0.0);
    let a = alpha.bubble_coefficient(v0.max(f64::MIN_POSITIVE));
    let rho_max = r_max / delta;
    if !(rho_max > opts.match_radius) {
        return Err(Error::InvalidInput(format!(
            "blown-up radius {rho_max} is inside the startup radius {}",
            opts.match_radius
        )));
    }
    let grid = log_grid(opts.match_radius, rho_max, opts.samples_per_unit);
    for &t in std::iter::once(&f64::NEG_INFINITY).chain(&grid) {
        let r = delta * t.exp();
        let h = weight.value(r);
        if !(h > 0.0) {
            return Err(Error::NonPositiveWeight { r, value: h });
        }
    }
    let eps = if weight.derivative(0.0) != 0.0 { delta } else { delta * delta };
    let ln_a = a.ln();

    // rho^p e^U and U_t in log-space
    let bubble = move |t: f64| {
        let z = ln_a + p * t;
        let w = (p * t - 2.0 * softplus(z)).exp();
        (w, -2.0 * softplus(z), -2.0 * p * logistic(z))
    };
    let rhs = |t: f64, y: &[f64; 3]| -> [f64; 3] {
        let r = delta * t.exp();
        match opts.formulation {
            Formulation::Deviation => {
                let (w, _, _) = bubble(t);
                let e = (eps * y[0]).exp();
                let forcing = weight.excess(r) / eps * e + v0 * (eps * y[0]).exp_m1() / eps;
                [y[1], -w * forcing, w * weight.value(r) * e]
            }
            Formulation::Direct => {
                let m = (p * t + y[0]).exp() * weight.value(r);
                [y[1], -m, m]
            }
        }
    };

    let rho_s = opts.match_radius;
    let start_mass = v0 * rho_s.powf(p) / p;
    let y0 = match opts.formulation {
        Formulation::Deviation => [0.0, 0.0, start_mass],
        Formulation::Direct => [-v0 / (p * p) * rho_s.powf(p), -v0 / p * rho_s.powf(p), start_mass],
    };
    let options = IntegratorOptions::with_tol(opts.tol);
    let traj = integrate(rhs, grid[0], y0, &grid[1..], &options)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(y0);
    states.extend(traj.states.iter().copied());

    let n = grid.len();
    let mut v = Vec::with_capacity(n);
    let mut v_t = Vec::with_capacity(n);
    let mut dev = Vec::with_capacity(n);
    let mut dev_t = Vec::with_capacity(n);
    let mut mass = Vec::with_capacity(n);
    for (t, y) in grid.iter().zip(&states) {
        let (_, u, ut) = bubble(*t);
        match opts.formulation {
            Formulation::Deviation => {
                dev.push(eps * y[0]);
                dev_t.push(eps * y[1]);
                v.push(u + eps * y[0]);
                v_t.push(ut + eps * y[1]);
            }
            Formulation::Direct => {
                v.push(y[0]);
                v_t.push(y[1]);
                dev.push(y[0] - u);
                dev_t.push(y[1] - ut);
            }
        }
        mass.push(2.0 * std::f64::consts::PI * y[2]);
    }
    if let Some(i) = v.iter().chain(&v_t).chain(&mass).position(|x| !x.is_finite()) {
        let i = i % n;
        return Err(Error::NonFinite {
            what: "shooting solution".into(),
            location: format!("r = {}", delta * grid[i].exp()),
        });
    }

    let max_residual = if opts.residual_check {
        check_residual(&grid, &states, &rhs, opts.tol, delta)?
    } else {
        0.0
    };

    Ok(LiouvilleShot {
        alpha,
        u0,
        delta,
        v0,
        r_max,
        formulation: opts.formulation,
        deviation_unit: eps,
        t: grid,
        v,
        v_t,
        deviation: dev,
        deviation_t: dev_t,
        mass,
        max_residual,
    })
}

/// Compare a sixth-order central difference of the derivative channel with
/// the right-hand side of the ODE at every interior sample.
fn check_residual<F>(grid: &[f64], states: &[[f64; 3]], rhs: &F, tol: f64, delta: f64) -> Result<f64>
where
    F: Fn(f64, &[f64; 3]) -> [f64; 3],
{
    const C: [f64; 3] = [45.0, -9.0, 1.0];
    let n = grid.len();
    if n < 7 {
        return Ok(0.0);
    }
    let h = grid[1] - grid[0];
    let f: Vec<f64> = grid.iter().zip(states).map(|(t, y)| rhs(*t, y)[1]).collect();
    let scale = f.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let bound = 100.0 * tol * scale;
    let mut worst = (0.0, grid[0]);
    for i in 3..n - 3 {
        let mut d = 0.0;
        for (k, c) in C.iter().enumerate() {
            d += c * (states[i + k + 1][1] - states[i - k - 1][1]);
        }
        let res = (d / (60.0 * h) - f[i]).abs();
        if res > worst.0 {
            worst = (res, grid[i]);
        }
    }
    if worst.0 > bound {
        return Err(Error::ResidualCheck {
            residual: worst.0,
            bound,
            r: delta * worst.1.exp(),
        });
    }
    Ok(worst.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{eval_bubble, BubbleParams, Normalization};

    fn half() -> Alpha {
        Alpha::new(0.5).unwrap()
    }

    #[test]
    fn constant_weight_reproduces_bubble_directly() {
        let opts = ShootOptions {
            tol: 1e-11,
            formulation: Formulation::Direct,
            ..ShootOptions::default()
        };
        let shot = shoot_liouville_with(half(), &ConstantWeight(18.0), 0.0, 10.0, &opts).unwrap();
        let prof = shot.profile().unwrap();
        let bp = BubbleParams::new(half(), 18.0, 0.0).unwrap();
        let worst = prof
            .nodes()
            .iter()
            .zip(prof.values())
            .map(|(r, u)| (u - eval_bubble(&bp, *r, Normalization::UnitCenter).unwrap().value).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-7, "{worst:e}");
    }

    #[test]
    fn startup_coefficient() {
        let shot = shoot_liouville(half(), &ConstantWeight(18.0), 0.0, 1.0, 1e-10).unwrap();
        let prof = shot.profile().unwrap();
        for (r, u) in prof.nodes().iter().zip(prof.values()).take(50) {
            let c = u / r.powi(3);
            assert!((c + 2.0).abs() < 0.02, "r={r} c={c}");
        }
    }

    #[test]
    fn mass_matches_flux() {
        let w = QuadraticWeight { v0: 18.0, c: 1.0 };
        let shot = shoot_liouville(half(), &w, 12.0, 1.0, 1e-10).unwrap();
        let flux = -2.0 * std::f64::consts::PI * shot.v_t.last().unwrap();
        assert!((shot.total_mass() / flux - 1.0).abs() < 1e-8);
    }

    #[test]
    fn formulations_agree() {
        let w = QuadraticWeight { v0: 18.0, c: 3.0 };
        let a = shoot_liouville(half(), &w, 6.0, 1.0, 1e-11).unwrap();
        let b = shoot_liouville_with(
            half(),
            &w,
            6.0,
            1.0,
            &ShootOptions {
                tol: 1e-11,
                formulation: Formulation::Direct,
                ..ShootOptions::default()
            },
        )
        .unwrap();
        for (x, y) in a.v.iter().zip(&b.v) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((a.boundary_deviation() - b.boundary_deviation()).abs() < 1e-8);
    }

    #[test]
    fn rejects_nonpositive_weight_and_tall_start() {
        let w = FnWeight(|r: f64| [1.0 - 2.0 * r, -2.0, 0.0]);
        assert!(matches!(
            shoot_liouville(half(), &w, 0.0, 1.0, 1e-10),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(shoot_liouville(half(), &ConstantWeight(1.0), 46.0, 1.0, 1e-10).is_err());
    }
}
