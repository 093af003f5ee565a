//! Explicit formulas: the singular bubble, its first and second corrections,
//! the expansion constants, the radial kernel and the closed-form
//! fundamental pairs of the angular mode equations.
//!
//! Every evaluator here is pure. Anything involving `exp(u0)` is evaluated
//! in log-space so that very tall bubbles never overflow.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Minimum distance from the positive integers accepted for `alpha`, and
/// from 1 for the Frobenius index of a closed-form fundamental pair.
pub const INTEGER_GUARD: f64 = 0.05;

/// Tolerance on `|psi(0)|` accepted by [`eval_expansion`].
pub const HARMONIC_ORIGIN_TOL: f64 = 1e-12;

/// Singularity order `alpha > 0`, kept away from the positive integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        Self::with_guard(value, INTEGER_GUARD)
    }

    pub fn with_guard(value: f64, guard: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveAlpha(value));
        }
        let nearest = value.round().max(1.0);
        if (value - nearest).abs() < guard {
            return Err(Error::IntegerAlpha {
                value,
                nearest: nearest as u64,
                guard,
            });
        }
        Ok(Alpha(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 + alpha`.
    pub fn beta(self) -> f64 {
        1.0 + self.0
    }

    /// Power `2 alpha + 2` of the bubble denominator.
    pub fn power(self) -> f64 {
        2.0 * self.0 + 2.0
    }

    /// `1 / (1 + alpha)`, the index of the k = 1 mode in the `s` variable.
    pub fn delta(self) -> f64 {
        1.0 / self.beta()
    }

    /// Frobenius index `k / (1 + alpha)` of mode `k` in the `s` variable.
    pub fn mode_index(self, k: u32) -> f64 {
        k as f64 / self.beta()
    }

    /// `a = v0 / (8 (1 + alpha)^2)`.
    pub fn bubble_coefficient(self, v0: f64) -> f64 {
        v0 / (8.0 * self.beta() * self.beta())
    }

    /// Blowup scale `exp(-u0 / (2 + 2 alpha))`.
    pub fn scale(self, u0: f64) -> f64 {
        (-u0 / self.power()).exp()
    }

    /// Inverse of [`Alpha::scale`].
    pub fn height_for_scale(self, delta: f64) -> f64 {
        -self.power() * delta.ln()
    }
}

/// Parameters of one standard bubble and its concentration scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleParams {
    pub alpha: Alpha,
    pub v0: f64,
    pub a: f64,
    pub u0: f64,
    pub scale: f64,
}

impl BubbleParams {
    pub fn new(alpha: Alpha, v0: f64, u0: f64) -> Result<Self> {
        if !(v0 > 0.0) || !v0.is_finite() {
            return Err(Error::InvalidInput(format!("v0 must be positive, got {v0}")));
        }
        if !u0.is_finite() {
            return Err(Error::InvalidInput(format!("u0 must be finite, got {u0}")));
        }
        Ok(BubbleParams {
            alpha,
            v0,
            a: alpha.bubble_coefficient(v0),
            u0,
            scale: alpha.scale(u0),
        })
    }

    /// Parameters whose scale is exactly `delta`.
    pub fn from_scale(alpha: Alpha, v0: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("scale must be positive, got {delta}")));
        }
        let mut p = Self::new(alpha, v0, alpha.height_for_scale(delta))?;
        p.scale = delta;
        Ok(p)
    }
}

/// Taylor data of `V = H e^psi` at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalData {
    pub v0: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
    pub laplacian: f64,
}

impl LocalData {
    pub fn new(v0: f64, grad: [f64; 2], hess: [[f64; 2]; 2]) -> Result<Self> {
        if !(v0 > 0.0) || !v0.is_finite() {
            return Err(Error::InvalidInput(format!("V(0) must be positive, got {v0}")));
        }
        if hess[0][1] != hess[1][0] {
            return Err(Error::InvalidInput("Hessian must be symmetric".into()));
        }
        if grad.iter().chain(hess.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite local data".into()));
        }
        Ok(LocalData {
            v0,
            grad,
            hess,
            laplacian: hess[0][0] + hess[1][1],
        })
    }

    /// Data of a radial weight `h(|x|)` with `h''(0) = second`.
    pub fn radial(v0: f64, second: f64) -> Result<Self> {
        Self::new(v0, [0.0, 0.0], [[second, 0.0], [0.0, second]])
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.grad[0] * self.grad[0] + self.grad[1] * self.grad[1]
    }

    /// Quadratic model `V(0) + grad.x + x.hess.x / 2`.
    pub fn quadratic_model(&self, x: [f64; 2]) -> f64 {
        self.v0 + self.model_excess(x)
    }

    /// `V(x) - V(0)` for the quadratic model.
    pub fn model_excess(&self, x: [f64; 2]) -> f64 {
        let h = &self.hess;
        self.grad[0] * x[0]
            + self.grad[1] * x[1]
            + 0.5 * (h[0][0] * x[0] * x[0] + 2.0 * h[0][1] * x[0] * x[1] + h[1][1] * x[1] * x[1])
    }

    /// The same data expressed in coordinates rotated by `angle`
    /// (new coordinates `x' = R(-angle) x`).
    pub fn rotated(&self, angle: f64) -> LocalData {
        let (s, c) = angle.sin_cos();
        // x = R x', so grad' = R^T grad and hess' = R^T hess R
        let g = [c * self.grad[0] + s * self.grad[1], -s * self.grad[0] + c * self.grad[1]];
        let r = [[c, -s], [s, c]];
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += r[k][i] * self.hess[k][l] * r[l][j];
                    }
                }
                h[i][j] = acc;
            }
        }
        let sym = 0.5 * (h[0][1] + h[1][0]);
        h[0][1] = sym;
        h[1][0] = sym;
        LocalData {
            v0: self.v0,
            grad: g,
            hess: h,
            laplacian: h[0][0] + h[1][1],
        }
    }
}

/// Second-order constants multiplying `Delta V(0)` and `|grad V(0)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCoefficients {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ExpansionCoefficients {
    /// Coefficient of the `delta^2 log(1/delta)` boundary term.
    pub fn boundary_coefficient(&self, local: &LocalData) -> f64 {
        self.lambda1 * local.laplacian + self.lambda2 * local.grad_norm_sq()
    }
}

/// Value and radial derivative of a radial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialValue {
    pub value: f64,
    pub deriv: f64,
}

/// Which bubble to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `U(r) = -2 log(1 + a r^{2a+2})`, equal to 0 at the origin.
    UnitCenter,
    /// `log(e^{u0} / (1 + a e^{u0} r^{2a+2})^2)`, equal to `u0` at the origin.
    HeightU0,
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 36.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-x})`.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn eval_bubble(p: &BubbleParams, r: f64, normalization: Normalization) -> Result<RadialValue> {
    if !(r >= 0.0) {
        return Err(Error::InvalidInput(format!("radius must be non-negative, got {r}")));
    }
    let power = p.alpha.power();
    let shift = match normalization {
        Normalization::UnitCenter => 0.0,
        Normalization::HeightU0 => p.u0,
    };
    if r == 0.0 {
        return Ok(RadialValue { value: shift, deriv: 0.0 });
    }
    // z = log(a e^{shift} r^p)
    let z = p.a.ln() + shift + power * r.ln();
    Ok(RadialValue {
        value: shift - 2.0 * softplus(z),
        deriv: -2.0 * power / r * logistic(z),
    })
}

pub fn expansion_coefficients(alpha: Alpha, v0: f64) -> Result<ExpansionCoefficients> {
    if !(v0 > 0.0) || !v0.is_finite() {
        return Err(Error::InvalidInput(format!("v0 must be positive, got {v0}")));
    }
    let beta = alpha.beta();
    let lambda1 = -PI / (v0 * (PI / beta).sin() * beta) * (8.0 * beta * beta / v0).powf(1.0 / beta);
    Ok(ExpansionCoefficients {
        lambda1,
        lambda2: -lambda1 / v0,
    })
}

/// Amplitude `2 (1 + alpha) / (alpha v0)` of the first correction.
pub fn gradient_amplitude(alpha: Alpha, v0: f64) -> f64 {
    2.0 * alpha.beta() / (alpha.value() * v0)
}

/// Radial profile `g(r) = -K r / (1 + a r^{2a+2})` of the first correction.
pub fn eval_g(alpha: Alpha, v0: f64, r: f64) -> RadialValue {
    let k = gradient_amplitude(alpha, v0);
    let a = alpha.bubble_coefficient(v0);
    let p = alpha.power();
    let ar = a * r.powf(p);
    let den = 1.0 + ar;
    RadialValue {
        value: -k * r / den,
        deriv: -k * (1.0 + (1.0 - p) * ar) / (den * den),
    }
}

/// The first correction `phi(y) = delta g(|y|) grad V(0) . y/|y|`.
pub fn eval_phi(local: &LocalData, p: &BubbleParams, y: [f64; 2]) -> f64 {
    let k = gradient_amplitude(p.alpha, p.v0);
    let r2 = y[0] * y[0] + y[1] * y[1];
    let ar = p.a * r2.powf(0.5 * p.alpha.power());
    // g(r)/r is bounded at the origin
    -k / (1.0 + ar) * p.scale * (local.grad[0] * y[0] + local.grad[1] * y[1])
}

/// Radial kernel `f(r) = (1 - a r^p) / (1 + a r^p)` of the linearized operator.
pub fn eval_radial_kernel(alpha: Alpha, v0: f64, r: f64) -> RadialValue {
    let a = alpha.bubble_coefficient(v0);
    let p = alpha.power();
    if r == 0.0 {
        return RadialValue { value: 1.0, deriv: 0.0 };
    }
    let z = a.ln() + p * r.ln();
    let sig = logistic(z);
    RadialValue {
        value: 1.0 - 2.0 * sig,
        deriv: -2.0 * p / r * sig * (1.0 - sig),
    }
}

/// Values and derivatives of the closed-form fundamental pair of
/// `f'' + f'/s + (8/(1+s^2)^2 - nu^2/s^2) f = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalPair {
    pub f1: f64,
    pub f1_prime: f64,
    pub f2: f64,
    pub f2_prime: f64,
}

/// Leading power-law coefficients of the pair: `f1 ~ c s^{nu}` and
/// `f2 ~ c s^{-nu}` at the indicated end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalAsymptotics {
    pub f1_at_zero: f64,
    pub f1_at_infinity: f64,
    pub f2_at_zero: f64,
    pub f2_at_infinity: f64,
}

fn check_index(index: f64) -> Result<()> {
    if !(index > 0.0) || !index.is_finite() {
        return Err(Error::InvalidInput(format!("index must be positive, got {index}")));
    }
    if (index - 1.0).abs() < INTEGER_GUARD {
        return Err(Error::DegenerateIndex {
            index,
            guard: INTEGER_GUARD,
        });
    }
    Ok(())
}

pub fn eval_mode_fundamentals(index: f64, s: f64) -> Result<FundamentalPair> {
    check_index(index)?;
    if !(s > 0.0) {
        return Err(Error::InvalidInput(format!("s must be positive, got {s}")));
    }
    let d = index;
    let den = 1.0 + s * s;
    let n1 = (d + 1.0) * s.powf(d) + (d - 1.0) * s.powf(d + 2.0);
    let n1p = (d + 1.0) * d * s.powf(d - 1.0) + (d - 1.0) * (d + 2.0) * s.powf(d + 1.0);
    let n2 = (d + 1.0) * s.powf(2.0 - d) + (d - 1.0) * s.powf(-d);
    let n2p = (d + 1.0) * (2.0 - d) * s.powf(1.0 - d) - (d - 1.0) * d * s.powf(-d - 1.0);
    Ok(FundamentalPair {
        f1: n1 / den,
        f1_prime: (n1p * den - 2.0 * s * n1) / (den * den),
        f2: n2 / den,
        f2_prime: (n2p * den - 2.0 * s * n2) / (den * den),
    })
}

pub fn mode_fundamental_asymptotics(index: f64) -> Result<FundamentalAsymptotics> {
    check_index(index)?;
    Ok(FundamentalAsymptotics {
        f1_at_zero: index + 1.0,
        f1_at_infinity: index - 1.0,
        f2_at_zero: index - 1.0,
        f2_at_infinity: index + 1.0,
    })
}

/// Wronskian `f1 f2' - f1' f2 = 2 nu (1 - nu^2) / s` of the closed-form pair.
pub fn mode_wronskian(index: f64, s: f64) -> f64 {
    2.0 * index * (1.0 - index * index) / s
}

/// Truncation order of the blowup expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExpansionOrder {
    /// Bubble plus harmonic part.
    Bubble = 0,
    /// Adds the gradient term.
    Gradient = 1,
    /// Adds the logarithmic second-order term.
    Logarithmic = 2,
}

impl ExpansionOrder {
    pub fn from_index(i: u32) -> Result<Self> {
        match i {
            0 => Ok(Self::Bubble),
            1 => Ok(Self::Gradient),
            2 => Ok(Self::Logarithmic),
            _ => Err(Error::InvalidInput(format!("expansion order must be 0, 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> u32 {
        self as u32
    }
}

/// The separate terms of the expansion at one point (harmonic part excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionTerms {
    pub bubble: f64,
    pub gradient: f64,
    pub logarithmic: f64,
}

impl ExpansionTerms {
    /// Everything beyond the bubble, up to `order`.
    pub fn correction(&self, order: ExpansionOrder) -> f64 {
        let mut c = 0.0;
        if order >= ExpansionOrder::Gradient {
            c += self.gradient;
        }
        if order >= ExpansionOrder::Logarithmic {
            c += self.logarithmic;
        }
        c
    }
}

/// Expansion terms without domain checks.
pub(crate) fn expansion_terms_unchecked(
    alpha: Alpha,
    local: &LocalData,
    coeffs: &ExpansionCoefficients,
    u0: f64,
    x: [f64; 2],
) -> ExpansionTerms {
    let r = x[0].hypot(x[1]);
    let a = alpha.bubble_coefficient(local.v0);
    let p = alpha.power();
    let k = gradient_amplitude(alpha, local.v0);
    let (bubble, inv_den) = if r == 0.0 {
        (u0, 1.0)
    } else {
        let z = a.ln() + u0 + p * r.ln();
        (u0 - 2.0 * softplus(z), logistic(-z))
    };
    let gradient = -k * (local.grad[0] * x[0] + local.grad[1] * x[1]) * inv_den;
    let beta = alpha.beta();
    let inv_scale = (u0 / (2.0 * beta)).exp();
    let logarithmic = coeffs.boundary_coefficient(local) * (2.0 + inv_scale * r).ln() * (-u0 / beta).exp();
    ExpansionTerms {
        bubble,
        gradient,
        logarithmic,
    }
}

pub fn expansion_terms(alpha: Alpha, local: &LocalData, u0: f64, x: [f64; 2]) -> Result<ExpansionTerms> {
    let coeffs = expansion_coefficients(alpha, local.v0)?;
    Ok(expansion_terms_unchecked(alpha, local, &coeffs, u0, x))
}

/// Evaluate the blowup expansion truncated at `order` at a point of the unit disk.
pub fn eval_expansion<P>(
    alpha: Alpha,
    local: &LocalData,
    psi: P,
    u0: f64,
    x: [f64; 2],
    order: ExpansionOrder,
) -> Result<f64>
where
    P: Fn([f64; 2]) -> f64,
{
    let psi0 = psi([0.0, 0.0]);
    if !(psi0.abs() <= HARMONIC_ORIGIN_TOL) {
        return Err(Error::HarmonicOffset(psi0));
    }
    let r = x[0].hypot(x[1]);
    if !(r <= 1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("|x| = {r} lies outside the unit disk")));
    }
    let terms = expansion_terms(alpha, local, u0, x)?;
    Ok(terms.bubble + psi(x) + terms.correction(order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn half() -> Alpha {
        Alpha::new(0.5).unwrap()
    }

    #[test]
    fn alpha_guard() {
        assert!(Alpha::new(2.0).is_err());
        assert!(Alpha::new(0.97).is_err());
        assert!(Alpha::new(1.06).is_ok());
        assert!(Alpha::new(0.02).is_ok());
        assert!(matches!(Alpha::new(-0.5), Err(Error::NonPositiveAlpha(_))));
        assert!(matches!(
            Alpha::new(3.01),
            Err(Error::IntegerAlpha { nearest: 3, .. })
        ));
    }

    #[test]
    fn bubble_values() {
        let p = BubbleParams::new(half(), 18.0, 0.0).unwrap();
        assert_eq!(p.a, 1.0);
        assert_eq!(eval_bubble(&p, 0.0, Normalization::UnitCenter).unwrap().value, 0.0);
        let at1 = eval_bubble(&p, 1.0, Normalization::UnitCenter).unwrap();
        assert_relative_eq!(at1.value, -1.386_294_361_119_890_6, max_relative = 1e-15);
        assert!(eval_bubble(&p, -1.0, Normalization::UnitCenter).is_err());
    }

    #[test]
    fn bubble_far_field_slope() {
        let p = BubbleParams::new(half(), 18.0, 0.0).unwrap();
        let pts: Vec<(f64, f64)> = (0..7)
            .map(|i| 10f64.powf(3.0 + 0.5 * i as f64))
            .map(|r| (r.ln(), eval_bubble(&p, r, Normalization::UnitCenter).unwrap().value))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert_relative_eq!(slope, -6.0, max_relative = 1e-6);
    }

    #[test]
    fn huge_height_stays_finite() {
        let p = BubbleParams::new(half(), 18.0, 5000.0).unwrap();
        for r in [0.0, 1e-300, 1e-10, 0.5, 1.0] {
            let v = eval_bubble(&p, r, Normalization::HeightU0).unwrap();
            assert!(v.value.is_finite() && v.deriv.is_finite());
        }
    }

    #[test]
    fn height_mode_matches_direct_formula() {
        let p = BubbleParams::new(half(), 18.0, 3.0).unwrap();
        let r: f64 = 0.3;
        let direct = (3f64.exp() / (1.0 + 3f64.exp() * r.powi(3)).powi(2)).ln();
        let v = eval_bubble(&p, r, Normalization::HeightU0).unwrap();
        assert_relative_eq!(v.value, direct, max_relative = 1e-14);
    }

    #[test]
    fn constants_reference_point() {
        // 50-digit mpmath values
        let c = expansion_coefficients(half(), 18.0).unwrap();
        assert_relative_eq!(c.lambda1, -0.134_355_508_461_793_9, max_relative = 1e-14);
        assert_relative_eq!(c.lambda2, 0.007_464_194_914_544_106, max_relative = 1e-14);
        let c = expansion_coefficients(Alpha::new(1.5).unwrap(), 50.0).unwrap();
        assert_relative_eq!(c.lambda1, -PI / (50.0 * (0.4 * PI).sin() * 2.5), max_relative = 1e-14);
        assert_relative_eq!(c.lambda1, -0.026_426_127_993_552_99, max_relative = 1e-14);
    }

    #[test]
    fn g_and_phi_examples() {
        let g = eval_g(half(), 18.0, 1.0);
        assert_relative_eq!(g.value, -1.0 / 6.0, max_relative = 1e-15);
        assert_eq!(eval_g(half(), 18.0, 0.0).value, 0.0);
        let p = BubbleParams::from_scale(half(), 18.0, 1e-2).unwrap();
        let local = LocalData::new(18.0, [1.0, 0.0], [[0.0; 2]; 2]).unwrap();
        assert_relative_eq!(eval_phi(&local, &p, [1.0, 0.0]), -1e-2 / 6.0, max_relative = 1e-14);
        let flat = LocalData::new(18.0, [0.0, 0.0], [[0.0; 2]; 2]).unwrap();
        assert_eq!(eval_phi(&flat, &p, [0.3, -2.0]), 0.0);
        assert_eq!(eval_phi(&local, &p, [0.0, 0.0]), 0.0);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(eval_radial_kernel(half(), 18.0, 0.0).value, 1.0);
        assert!(eval_radial_kernel(half(), 18.0, 1.0).value.abs() < 1e-15);
    }

    #[test]
    fn kernel_approach_to_minus_one() {
        // f(1/delta) + 1 ~ 2 a delta^{2a+2}
        for alpha in [0.5, 1.5] {
            let al = Alpha::new(alpha).unwrap();
            let pairs: Vec<(f64, f64)> = [3e-1, 1e-1, 3e-2, 1e-2]
                .iter()
                .map(|&d| (d, eval_radial_kernel(al, 18.0, 1.0 / d).value + 1.0))
                .collect();
            let (slope, _) = crate::fit::fit_scaling_exponent(&pairs).unwrap();
            assert!((slope / al.power() - 1.0).abs() < 0.05, "slope {slope}");
        }
    }

    #[test]
    fn fundamentals_at_one() {
        let f = eval_mode_fundamentals(2.0 / 3.0, 1.0).unwrap();
        assert_relative_eq!(f.f1, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(f.f2, 2.0 / 3.0, max_relative = 1e-15);
        assert!(matches!(
            eval_mode_fundamentals(1.02, 1.0),
            Err(Error::DegenerateIndex { .. })
        ));
    }

    #[test]
    fn wronskian_reference() {
        let nu = 4.0 / 3.0;
        let f = eval_mode_fundamentals(nu, 1.0).unwrap();
        let w = f.f1 * f.f2_prime - f.f1_prime * f.f2;
        assert_relative_eq!(w, -56.0 / 27.0, max_relative = 1e-13);
        assert_relative_eq!(mode_wronskian(nu, 1.0), -56.0 / 27.0, max_relative = 1e-15);
    }

    #[test]
    fn expansion_at_origin() {
        let al = half();
        let local = LocalData::new(18.0, [0.7, -0.2], [[1.0, 0.3], [0.3, 2.0]]).unwrap();
        let u0 = 12.0;
        let zero = |_: [f64; 2]| 0.0;
        let o1 = eval_expansion(al, &local, zero, u0, [0.0, 0.0], ExpansionOrder::Gradient).unwrap();
        let o0 = eval_expansion(al, &local, zero, u0, [0.0, 0.0], ExpansionOrder::Bubble).unwrap();
        let o2 = eval_expansion(al, &local, zero, u0, [0.0, 0.0], ExpansionOrder::Logarithmic).unwrap();
        assert_eq!(o1, o0);
        let c = expansion_coefficients(al, 18.0).unwrap();
        let expected = c.boundary_coefficient(&local) * 2f64.ln() * (-u0 / 1.5).exp();
        assert_relative_eq!(o2 - o1, expected, max_relative = 1e-12);
    }

    #[test]
    fn expansion_gradient_term_at_scale() {
        let al = half();
        let local = LocalData::new(18.0, [1.0, 0.0], [[0.0; 2]; 2]).unwrap();
        let u0 = 20.0;
        let delta = (-u0 / 3.0f64).exp();
        let t = expansion_terms(al, &local, u0, [delta, 0.0]).unwrap();
        assert_relative_eq!(t.gradient, -delta / 6.0, max_relative = 1e-12);
        // equals phi at y = (1, 0)
        let p = BubbleParams::new(al, 18.0, u0).unwrap();
        assert_relative_eq!(t.gradient, eval_phi(&local, &p, [1.0, 0.0]), max_relative = 1e-12);
    }

    #[test]
    fn expansion_rejects_offset_harmonic() {
        let local = LocalData::new(18.0, [0.0; 2], [[0.0; 2]; 2]).unwrap();
        let r = eval_expansion(half(), &local, |x| 1e-6 + x[0], 5.0, [0.1, 0.0], ExpansionOrder::Bubble);
        assert!(matches!(r, Err(Error::HarmonicOffset(_))));
        let r = eval_expansion(half(), &local, |x| x[0], 5.0, [1.1, 0.0], ExpansionOrder::Bubble);
        assert!(r.is_err());
        let ok = eval_expansion(half(), &local, |x| x[0] * x[1], 5.0, [0.3, 0.2], ExpansionOrder::Bubble).unwrap();
        let b = BubbleParams::new(half(), 18.0, 5.0).unwrap();
        let bub = eval_bubble(&b, 0.3f64.hypot(0.2), Normalization::HeightU0).unwrap().value;
        assert_relative_eq!(ok, bub + 0.06, max_relative = 1e-14);
    }

    #[test]
    fn rotation_preserves_invariants() {
        let local = LocalData::new(18.0, [0.7, -0.2], [[1.0, 0.3], [0.3, 2.0]]).unwrap();
        let rot = local.rotated(0.83);
        assert_relative_eq!(rot.laplacian, local.laplacian, max_relative = 1e-14);
        assert_relative_eq!(rot.grad_norm_sq(), local.grad_norm_sq(), max_relative = 1e-14);
        let x = [0.3, -0.4];
        let (s, c) = 0.83f64.sin_cos();
        let xr = [c * x[0] + s * x[1], -s * x[0] + c * x[1]];
        assert_relative_eq!(local.quadratic_model(x), rot.quadratic_model(xr), max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn lambda_ratio_identity(alpha in 0.06f64..0.94, v0 in 0.1f64..200.0) {
            let c = expansion_coefficients(Alpha::new(alpha).unwrap(), v0).unwrap();
            prop_assert!((c.lambda2 * v0 + c.lambda1).abs() <= 1e-14 * c.lambda1.abs());
            prop_assert!(c.lambda1 < 0.0 && c.lambda2 > 0.0);
        }

        #[test]
        fn phi_is_odd(x in -50f64..50.0, y in -50f64..50.0, gx in -3f64..3.0, gy in -3f64..3.0) {
            let p = BubbleParams::from_scale(Alpha::new(0.5).unwrap(), 18.0, 1e-3).unwrap();
            let local = LocalData::new(18.0, [gx, gy], [[0.0; 2]; 2]).unwrap();
            let sum = eval_phi(&local, &p, [x, y]) + eval_phi(&local, &p, [-x, -y]);
            prop_assert!(sum.abs() <= 1e-18);
        }

        #[test]
        fn reflection_of_fundamentals(s in 0.01f64..100.0, k in 1u32..4, alpha in prop::sample::select(vec![0.5, 1.5, 2.5])) {
            let nu = k as f64 / (1.0 + alpha);
            let at = eval_mode_fundamentals(nu, s).unwrap();
            let inv = eval_mode_fundamentals(nu, 1.0 / s).unwrap();
            prop_assert!((at.f2 - inv.f1).abs() <= 1e-12 * (1.0 + at.f2.abs()));
        }

        #[test]
        fn bubble_strictly_decreasing(r in 1e-6f64..1e6, ratio in 1.0001f64..10.0) {
            let p = BubbleParams::new(Alpha::new(1.5).unwrap(), 7.0, 0.0).unwrap();
            let a = eval_bubble(&p, r, Normalization::UnitCenter).unwrap();
            let b = eval_bubble(&p, r * ratio, Normalization::UnitCenter).unwrap();
            prop_assert!(b.value < a.value);
            prop_assert!(a.deriv < 0.0);
        }
    }
}
