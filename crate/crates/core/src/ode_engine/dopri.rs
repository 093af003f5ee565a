//! Dormand-Prince 5(4) with the standard fourth-order dense output.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step magnitude allowed.
    pub max_step: f64,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorOptions {
            rtol: tol,
            atol: tol,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
struct DenseStep<const N: usize> {
    t: f64,
    h: f64,
    coeffs: [[f64; N]; 5],
}

/// Samples at the requested stops plus a continuous interpolant.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    steps: Vec<DenseStep<N>>,
    pub accepted: usize,
    pub rejected: usize,
}

impl<const N: usize> Trajectory<N> {
    /// Dense-output evaluation anywhere inside the integrated span.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        let first = self.steps.first()?;
        let forward = first.h > 0.0;
        let key = |s: &DenseStep<N>| if forward { s.t } else { -s.t };
        let tk = if forward { t } else { -t };
        let idx = self.steps.partition_point(|s| key(s) <= tk);
        let step = &self.steps[idx.saturating_sub(1).min(self.steps.len() - 1)];
        let theta = (t - step.t) / step.h;
        if !(-1e-9..=1.0 + 1e-9).contains(&theta) {
            return None;
        }
        let th1 = 1.0 - theta;
        let c = &step.coeffs;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i] + theta * (c[1][i] + th1 * (c[2][i] + theta * (c[3][i] + th1 * c[4][i])));
        }
        Some(out)
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` through every time in `stops`
/// (monotone in the direction of integration; the last one is the end).
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    stops: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut traj = Trajectory {
        times: Vec::with_capacity(stops.len()),
        states: Vec::with_capacity(stops.len()),
        steps: Vec::new(),
        accepted: 0,
        rejected: 0,
    };
    let Some(&t_end) = stops.last() else {
        return Ok(traj);
    };
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = (0.01 * span).min(opts.max_step).max(1e-12 * (1.0 + t0.abs()));
    let mut steps = 0usize;

    for &stop in stops {
        if (stop - t) * dir < -1e-14 * (1.0 + t.abs()) {
            return Err(Error::InvalidInput("integration stops are not monotone".into()));
        }
        while (stop - t) * dir > 1e-14 * (1.0 + stop.abs()) {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::StepLimit { steps, target: stop });
            }
            let remaining = (stop - t).abs();
            let mut hh = h.min(opts.max_step);
            let hits_stop = hh >= remaining;
            if hits_stop {
                hh = remaining;
            }
            let hs = hh * dir;
            if hh < 1e-13 * (1.0 + t.abs()) {
                return Err(Error::StepUnderflow { t, h: hh });
            }
            let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
            let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + hs,
                &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let t_new = if hits_stop { stop } else { t + hs };
            let k7 = f(t_new, &y_new);

            let mut err = 0.0;
            let mut finite = true;
            for i in 0..N {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
                finite &= y_new[i].is_finite();
            }
            let err = (err / N as f64).sqrt();
            if !finite || !err.is_finite() {
                traj.rejected += 1;
                h = 0.25 * hh;
                continue;
            }
            if err <= 1.0 {
                let mut coeffs = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y_new[i] - y[i];
                    let bspl = hs * k1[i] - dy;
                    coeffs[0][i] = y[i];
                    coeffs[1][i] = dy;
                    coeffs[2][i] = bspl;
                    coeffs[3][i] = dy - hs * k7[i] - bspl;
                    coeffs[4][i] = hs
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                traj.steps.push(DenseStep { t, h: hs, coeffs });
                traj.accepted += 1;
                t = t_new;
                y = y_new;
                k1 = k7;
                let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                // a step shortened to hit a stop says little about the natural size
                if !hits_stop || fac < 1.0 {
                    h = hh * fac;
                }
            } else {
                traj.rejected += 1;
                h = hh * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        traj.times.push(stop);
        traj.states.push(y);
    }
    Ok(traj)
}
