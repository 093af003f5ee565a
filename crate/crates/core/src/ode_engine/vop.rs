//! Particular solutions of the forced mode equation
//! `f'' + f'/s + (8/(1+s^2)^2 - nu^2/s^2) f = l(s)` by variation of
//! parameters with the closed-form fundamental pair.
//!
//! With `W = f1 f2' - f1' f2 = 2 nu (1 - nu^2) / s`, the solution that is
//! regular at 0 and decays at infinity is
//! `f = f1(s) int_s^inf f2 l / W + f2(s) int_0^s f1 l / W`.

use crate::closed_forms::{eval_mode_fundamentals, mode_wronskian};
use crate::error::{Error, Result};
use crate::quadrature::integrate;

use super::{ProfileMeta, RadialFn, RadialProfile, Variable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VopOptions {
    /// Smallest grid node; the first cumulative integral starts at 0.
    pub s_min: f64,
    pub per_decade: usize,
    /// Allowed uncertainty of the tail estimate beyond the cutoff, relative
    /// to the largest value of the outer integral.
    pub tail_tol: f64,
    pub rel_tol: f64,
}

impl Default for VopOptions {
    fn default() -> Self {
        VopOptions {
            s_min: 1e-6,
            per_decade: 40,
            tail_tol: 1e-6,
            rel_tol: 1e-12,
        }
    }
}

/// The particular solution, represented by its two cumulative integrals.
#[derive(Clone)]
pub struct VopSolution {
    pub index: f64,
    pub s_max: f64,
    grid: Vec<f64>,
    /// `int_0^{s_j} f1 l / W`
    lower: Vec<f64>,
    /// `int_{s_j}^inf f2 l / W`, tail included
    upper: Vec<f64>,
    /// Power-law estimate of `int_{s_max}^inf f2 l / W`.
    pub tail: f64,
    /// Bound on the error committed by the tail estimate.
    pub tail_bound: f64,
    forcing: RadialFn,
    abs_tol: f64,
    rel_tol: f64,
}

impl std::fmt::Debug for VopSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VopSolution")
            .field("index", &self.index)
            .field("s_max", &self.s_max)
            .field("nodes", &self.grid.len())
            .field("tail", &self.tail)
            .finish()
    }
}

impl VopSolution {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn lower_integrand(&self, s: f64) -> f64 {
        let f = eval_mode_fundamentals(self.index, s).expect("index checked");
        f.f1 * (self.forcing)(s) / mode_wronskian(self.index, s)
    }

    fn upper_integrand(&self, s: f64) -> f64 {
        let f = eval_mode_fundamentals(self.index, s).expect("index checked");
        f.f2 * (self.forcing)(s) / mode_wronskian(self.index, s)
    }

    fn quad(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        Ok(integrate(f, a, b, self.abs_tol, self.rel_tol)?.value)
    }

    /// Value and `d/ds` of the particular solution at `s` in `(0, s_max]`.
    pub fn eval(&self, s: f64) -> Result<(f64, f64)> {
        if !(s > 0.0) || s > self.s_max * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!("s = {s} outside (0, {}]", self.s_max)));
        }
        let (b, a) = if s < self.grid[0] {
            let b = self.quad(|x| self.lower_integrand(x), 0.0, s)?;
            let a = self.upper[0] + self.quad(|x| self.upper_integrand(x), s, self.grid[0])?;
            (b, a)
        } else {
            let j = self.grid.partition_point(|&x| x <= s).saturating_sub(1);
            let s0 = self.grid[j];
            let b = self.lower[j] + self.quad(|x| self.lower_integrand(x), s0, s)?;
            let a = self.upper[j] - self.quad(|x| self.upper_integrand(x), s0, s)?;
            (b, a)
        };
        let f = eval_mode_fundamentals(self.index, s)?;
        Ok((f.f1 * a + f.f2 * b, f.f1_prime * a + f.f2_prime * b))
    }

    /// Residual of the forced equation at `s`, with the second derivative
    /// taken by a fourth-order central difference of the exact first
    /// derivative using step `h`.
    pub fn residual(&self, s: f64, h: f64) -> Result<f64> {
        let d = |x: f64| self.eval(x).map(|v| v.1);
        let f2 = (-d(s + 2.0 * h)? + 8.0 * d(s + h)? - 8.0 * d(s - h)? + d(s - 2.0 * h)?) / (12.0 * h);
        let (f, f1) = self.eval(s)?;
        let q = 8.0 / (1.0 + s * s).powi(2) - self.index * self.index / (s * s);
        Ok(f2 + f1 / s + q * f - (self.forcing)(s))
    }

    /// Samples on the internal grid (values in `s`, derivatives `d/ds`).
    pub fn profile(&self) -> Result<RadialProfile> {
        let mut values = Vec::with_capacity(self.grid.len());
        let mut derivs = Vec::with_capacity(self.grid.len());
        for (j, &s) in self.grid.iter().enumerate() {
            let f = eval_mode_fundamentals(self.index, s)?;
            values.push(f.f1 * self.upper[j] + f.f2 * self.lower[j]);
            derivs.push(f.f1_prime * self.upper[j] + f.f2_prime * self.lower[j]);
        }
        RadialProfile::new(
            self.grid.clone(),
            values,
            derivs,
            ProfileMeta {
                alpha: None,
                interval: (0.0, self.s_max),
                variable: Variable::Stretched,
            },
        )
    }
}

/// Solve with index `2 delta`.
pub fn variation_of_parameters(delta: f64, l1: RadialFn, s_max: f64) -> Result<VopSolution> {
    variation_of_parameters_with_index(2.0 * delta, l1, s_max, &VopOptions::default())
}

pub fn variation_of_parameters_with_index(
    index: f64,
    forcing: RadialFn,
    s_max: f64,
    opts: &VopOptions,
) -> Result<VopSolution> {
    eval_mode_fundamentals(index, 1.0)?;
    if !(s_max > opts.s_min * 10.0) || !s_max.is_finite() {
        return Err(Error::InvalidInput(format!("cutoff {s_max} too small or not finite")));
    }
    let decades = (s_max / opts.s_min).log10();
    let n = (decades * opts.per_decade as f64).ceil() as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|i| opts.s_min * 10f64.powf(decades * i as f64 / n as f64))
        .collect();
    let mut sol = VopSolution {
        index,
        s_max,
        grid,
        lower: Vec::new(),
        upper: Vec::new(),
        tail: 0.0,
        tail_bound: 0.0,
        forcing,
        abs_tol: 0.0,
        rel_tol: opts.rel_tol,
    };
    // integral magnitudes per unit log s set the absolute tolerance
    let scale = sol
        .grid
        .iter()
        .map(|&s| s * sol.lower_integrand(s).abs().max(sol.upper_integrand(s).abs()))
        .fold(0.0, f64::max);
    if !scale.is_finite() {
        return Err(Error::NonFinite {
            what: "forcing".into(),
            location: "variation-of-parameters grid".into(),
        });
    }
    sol.abs_tol = 1e-15 * scale;

    let m = sol.grid.len();
    let mut lower = Vec::with_capacity(m);
    lower.push(sol.quad(|x| sol.lower_integrand(x), 0.0, sol.grid[0])?);
    let mut pieces = Vec::with_capacity(m - 1);
    for w in sol.grid.windows(2) {
        let prev = *lower.last().expect("seeded");
        lower.push(prev + sol.quad(|x| sol.lower_integrand(x), w[0], w[1])?);
        pieces.push(sol.quad(|x| sol.upper_integrand(x), w[0], w[1])?);
    }

    // power-law tail of the outer integrand beyond the cutoff; the spread
    // between two local exponent estimates bounds the error of the estimate
    let j_end = sol.upper_integrand(s_max);
    let j_half = sol.upper_integrand(0.5 * s_max);
    let j_quarter = sol.upper_integrand(0.25 * s_max);
    let (tail, tail_bound) = if j_end == 0.0 && j_half == 0.0 {
        (0.0, 0.0)
    } else {
        let e1 = (j_end / j_half).abs().ln() / 2f64.ln();
        let e2 = (j_half / j_quarter).abs().ln() / 2f64.ln();
        if !(e1 < -1.05) || j_end * j_half <= 0.0 {
            return Err(Error::SlowTail {
                cutoff: s_max,
                tail: f64::INFINITY,
                tolerance: opts.tail_tol,
            });
        }
        let t1 = j_end * s_max / (-e1 - 1.0);
        let t2 = if e2 < -1.05 { j_end * s_max / (-e2 - 1.0) } else { 2.0 * t1 };
        (t1, (t1 - t2).abs() + 1e-3 * t1.abs())
    };
    let mut upper = vec![0.0; m];
    upper[m - 1] = tail;
    for j in (0..m - 1).rev() {
        upper[j] = upper[j + 1] + pieces[j];
    }
    let peak = upper.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if tail_bound > opts.tail_tol * peak.max(f64::MIN_POSITIVE) {
        return Err(Error::SlowTail {
            cutoff: s_max,
            tail: tail_bound,
            tolerance: opts.tail_tol * peak,
        });
    }
    sol.lower = lower;
    sol.upper = upper;
    sol.tail = tail;
    sol.tail_bound = tail_bound;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{eval_g, Alpha};
    use crate::ode_engine::Stretch;
    use std::sync::Arc;

    #[test]
    fn zero_forcing_gives_zero() {
        let sol = variation_of_parameters(2.0 / 3.0, Arc::new(|_| 0.0), 1e4).unwrap();
        for s in [1e-3, 0.5, 3.0, 1e3] {
            assert_eq!(sol.eval(s).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn reproduces_closed_form_g() {
        let alpha = Alpha::new(0.5).unwrap();
        let v0 = 18.0;
        let st = Stretch::new(alpha, v0);
        let a = alpha.bubble_coefficient(v0);
        let b2 = alpha.beta().powi(2);
        let l: RadialFn = Arc::new(move |s: f64| -st.r_of_s(s) / (a * b2 * (1.0 + s * s).powi(2)));
        let sol =
            variation_of_parameters_with_index(alpha.delta(), l, 1e4, &VopOptions::default()).unwrap();
        for s in [0.1, 0.3, 1.0, 2.5, 10.0] {
            let g = eval_g(alpha, v0, st.r_of_s(s)).value;
            let (f, _) = sol.eval(s).unwrap();
            assert!((f / g - 1.0).abs() < 1e-6, "s={s}: {f} vs {g}");
        }
    }

    #[test]
    fn residual_is_small() {
        let l: RadialFn = Arc::new(|s: f64| s.powf(4.0 / 3.0) / (1.0 + s * s).powi(2));
        let sol = variation_of_parameters(2.0 / 3.0, l, 1e4).unwrap();
        for s in [0.05, 0.4, 1.0, 7.0, 60.0] {
            let r = sol.residual(s, 1e-3 * s).unwrap();
            assert!(r.abs() < 1e-6, "s={s} residual={r:e}");
        }
    }

    #[test]
    fn slow_forcing_is_rejected() {
        // the outer integrand then decays like 1/s
        let l: RadialFn = Arc::new(|s: f64| s.powf(4.0 / 3.0) / (1.0 + s * s));
        let err = variation_of_parameters(2.0 / 3.0, l, 1e4).unwrap_err();
        assert!(matches!(err, Error::SlowTail { .. }), "{err}");
    }
}
