//! Small least-squares fits: log-log slopes and two-function bases.

use crate::error::{Error, Result};

/// Result of an ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Condition number of the column-normalized Gram matrix.
    pub condition: f64,
    pub residual_rms: f64,
}

/// Least squares `y ~ sum_j c_j * columns[j]`.
///
/// Solved through the normal equations after scaling each column to unit
/// norm; fine for the two- and three-column problems used here.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let p = columns.len();
    let n = y.len();
    if p == 0 || columns.iter().any(|c| c.len() != n) {
        return Err(Error::Fit("column lengths do not match observations".into()));
    }
    if n < p {
        return Err(Error::Fit(format!("{n} observations for {p} parameters")));
    }
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if norms.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::Fit("degenerate column".into()));
    }
    let scaled: Vec<Vec<f64>> = columns
        .iter()
        .zip(&norms)
        .map(|(c, s)| c.iter().map(|v| v / s).collect())
        .collect();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            gram[i][j] = dot(&scaled[i], &scaled[j]);
        }
        rhs[i] = dot(&scaled[i], y);
    }
    let inv = invert(&gram).ok_or_else(|| Error::Fit("singular normal equations".into()))?;
    let condition = matrix_inf_norm(&gram) * matrix_inf_norm(&inv);
    let coef_scaled: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| inv[i][j] * rhs[j]).sum())
        .collect();
    let residuals: Vec<f64> = (0..n)
        .map(|k| y[k] - (0..p).map(|j| coef_scaled[j] * scaled[j][k]).sum::<f64>())
        .collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let dof = (n - p).max(1) as f64;
    let sigma2 = if n > p { ssr / dof } else { 0.0 };
    let coefficients = coef_scaled.iter().zip(&norms).map(|(c, s)| c / s).collect();
    let stderr = (0..p).map(|i| (sigma2 * inv[i][i]).sqrt() / norms[i]).collect();
    Ok(LinearFit {
        coefficients,
        stderr,
        condition,
        residual_rms: (ssr / n as f64).sqrt(),
    })
}

/// Slope of `log(magnitude)` against `log(scale)` with its standard error.
pub fn fit_scaling_exponent(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pairs.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 pairs, got {}", pairs.len())));
    }
    if let Some(&(s, m)) = pairs.iter().find(|(s, m)| !(*s > 0.0) || !(*m > 0.0)) {
        return Err(Error::Fit(format!("non-positive pair ({s}, {m})")));
    }
    log_log_slope(pairs)
}

/// Same regression without the minimum-count requirement.
pub(crate) fn log_log_slope(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pairs.len() < 2 {
        return Err(Error::Fit("need at least 2 points".into()));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("all scales identical".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let stderr = if pairs.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matrix_inf_norm(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let factor = a[i][col];
                for j in 0..n {
                    a[i][j] -= factor * a[col][j];
                    inv[i][j] -= factor * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pairs: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4, 1e-5].iter().map(|&d| (d, d * d)).collect();
        let (slope, err) = fit_scaling_exponent(&pairs).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(err < 1e-12);
    }

    #[test]
    fn synthetic_half_exponent() {
        let pairs: Vec<(f64, f64)> = (0..6).map(|i| 10f64.powf(-(i as f64) / 2.0 - 1.0)).map(|d| (d, d.powf(0.5))).collect();
        let (slope, _) = fit_scaling_exponent(&pairs).unwrap();
        assert!((slope - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_and_short_input() {
        assert!(fit_scaling_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 2.0)]).is_err());
        assert!(fit_scaling_exponent(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    }

    #[test]
    fn two_column_recovery() {
        let xs = [0.1, 0.2, 0.5, 1.0, 2.0];
        let c1: Vec<f64> = xs.iter().map(|x: &f64| x.ln()).collect();
        let c2 = vec![1.0; xs.len()];
        let y: Vec<f64> = c1.iter().map(|l| 3.0 * l - 0.5).collect();
        let fit = least_squares(&[c1, c2], &y).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-12);
    }
}
