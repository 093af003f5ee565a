//! Blowup sequences obtained by sweeping the central height `u(0)`, and the
//! quantities measured on each member.

use rayon::prelude::*;

use crate::closed_forms::{eval_phi, expansion_coefficients, Alpha, BubbleParams, LocalData};
use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::linearized_modes::build_correction_c;
use crate::ode_engine::{shoot_liouville_with, RadialWeight, ShootOptions};

pub use crate::fit::fit_scaling_exponent;

/// Default central heights; at alpha = 1/2 the scales span about 1.7 decades.
pub const DEFAULT_HEIGHTS: [f64; 4] = [16.0, 20.0, 24.0, 28.0];

/// Diagnostics of one member of a blowup family.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FamilyRecord {
    pub u0: f64,
    pub delta: f64,
    /// `int_{B_R} |x|^{2 alpha} H e^u`.
    pub mass: f64,
    /// `sup |v - U|` on the blown-up domain.
    pub sup_dev: f64,
    /// `v - U - phi - c` on the blown-up boundary.
    pub d_boundary: f64,
    /// Radius of the maximum of `u` (0 for radial data).
    pub argmax_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyOptions {
    pub r_max: f64,
    pub shoot: ShootOptions,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            r_max: 1.0,
            shoot: ShootOptions::default(),
        }
    }
}

/// Shoot one radial solution per height and measure it.
pub fn run_family<W: RadialWeight + ?Sized>(alpha: Alpha, weight: &W, u0_list: &[f64], r_max: f64) -> Result<Vec<FamilyRecord>> {
    run_family_with(
        alpha,
        weight,
        u0_list,
        &FamilyOptions {
            r_max,
            ..FamilyOptions::default()
        },
    )
}

pub fn run_family_with<W: RadialWeight + ?Sized>(
    alpha: Alpha,
    weight: &W,
    u0_list: &[f64],
    opts: &FamilyOptions,
) -> Result<Vec<FamilyRecord>> {
    if u0_list.is_empty() {
        return Err(Error::InvalidInput("empty list of heights".into()));
    }
    if u0_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("heights must be strictly increasing".into()));
    }
    let local = weight.local_data()?;
    u0_list
        .par_iter()
        .map(|&u0| member(alpha, weight, &local, u0, opts).map_err(|e| Error::Family { u0, source: Box::new(e) }))
        .collect()
}

fn member<W: RadialWeight + ?Sized>(
    alpha: Alpha,
    weight: &W,
    local: &LocalData,
    u0: f64,
    opts: &FamilyOptions,
) -> Result<FamilyRecord> {
    let shot = shoot_liouville_with(alpha, weight, u0, opts.r_max, &opts.shoot)?;
    let bp = BubbleParams::new(alpha, local.v0, u0)?;
    let rho = opts.r_max / shot.delta;
    let edge = [rho, 0.0];
    let c = build_correction_c(alpha, local, &bp, rho)?;
    let d_boundary = shot.boundary_deviation() - eval_phi(local, &bp, edge) - c.eval(edge)?;
    let (imax, _) = shot
        .v
        .iter()
        .enumerate()
        .fold((usize::MAX, 0.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let argmax_radius = if imax == usize::MAX {
        0.0
    } else {
        shot.delta * shot.t[imax].exp()
    };
    Ok(FamilyRecord {
        u0,
        delta: shot.delta,
        mass: shot.total_mass(),
        sup_dev: shot.sup_deviation(),
        d_boundary,
        argmax_radius,
    })
}

/// Least-squares estimate of the `delta^2 log(1/delta)` coefficient of the
/// boundary value of `d`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundaryFit {
    pub estimate: f64,
    pub stderr: f64,
    /// Coefficient of the plain `delta^2` term.
    pub intercept: f64,
    pub reference: f64,
    /// `|estimate - reference| / |reference|`, or `|estimate|` for a zero reference.
    pub rel_error: f64,
    pub condition: f64,
}

/// Minimum decades of `delta` a boundary fit must span.
pub const MIN_SCALE_DECADES: f64 = 1.5;
/// Largest acceptable condition number of the fit basis.
pub const MAX_CONDITION: f64 = 1e8;

/// Fit `d/delta^2 = estimate * log(1/delta) + intercept`, which is the
/// `{delta^2 log(1/delta), delta^2}` basis with weights `1/delta^2`.
pub fn fit_boundary_coefficient(records: &[FamilyRecord], alpha: Alpha, local: &LocalData) -> Result<BoundaryFit> {
    if records.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 records, got {}", records.len())));
    }
    let (lo, hi) = records
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.delta), hi.max(r.delta)));
    let decades = (hi / lo).log10();
    if !(decades >= MIN_SCALE_DECADES) {
        return Err(Error::Fit(format!(
            "scales span {decades:.2} decades, need at least {MIN_SCALE_DECADES}"
        )));
    }
    let logs: Vec<f64> = records.iter().map(|r| -r.delta.ln()).collect();
    let ones = vec![1.0; records.len()];
    let y: Vec<f64> = records.iter().map(|r| r.d_boundary / (r.delta * r.delta)).collect();
    let fit = least_squares(&[logs, ones], &y)?;
    if !(fit.condition <= MAX_CONDITION) {
        return Err(Error::Fit(format!("ill-conditioned basis (condition {:.3e})", fit.condition)));
    }
    let reference = expansion_coefficients(alpha, local.v0)?.boundary_coefficient(local);
    let estimate = fit.coefficients[0];
    let rel_error = if reference == 0.0 {
        estimate.abs()
    } else {
        ((estimate - reference) / reference).abs()
    };
    Ok(BoundaryFit {
        estimate,
        stderr: fit.stderr[0],
        intercept: fit.coefficients[1],
        reference,
        rel_error,
        condition: fit.condition,
    })
}

/// Ratio `max / min` of the deviations, with values below `floor` treated as
/// exact zeros. Returns 1 when every deviation is numerically zero.
pub fn deviation_band(records: &[FamilyRecord], floor: f64) -> f64 {
    let max = records.iter().fold(0.0f64, |m, r| m.max(r.sup_dev));
    if max <= floor {
        return 1.0;
    }
    let min = records.iter().fold(f64::INFINITY, |m, r| m.min(r.sup_dev.max(floor)));
    max / min
}
