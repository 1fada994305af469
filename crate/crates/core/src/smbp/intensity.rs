//! Closed-form intensities for Gaussian, exponential-power and Wiener laws.

use crate::error::{invalid, Error, Result};
use crate::fda::Curve;

fn check_lengths(x_scores: &[f64], lambdas: &[f64], d: usize) -> Result<()> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    for len in [x_scores.len(), lambdas.len()] {
        if len < d {
            return Err(Error::LengthMismatch { expected: d, got: len });
        }
    }
    Ok(())
}

/// `Σ_{j≤d} (|x_j|/√λ_j)^q`, or `None` when some `λ_j = 0` meets `x_j ≠ 0`.
fn standardized_power_sum(x_scores: &[f64], lambdas: &[f64], q: f64, d: usize) -> Result<Option<f64>> {
    let mut acc = 0.0;
    for (j, (&x, &l)) in x_scores.iter().zip(lambdas).take(d).enumerate() {
        if !(l >= 0.0) {
            return Err(invalid(format!("eigenvalue {} is negative: {l}", j + 1)));
        }
        if l == 0.0 {
            if x != 0.0 {
                log::warn!("score {} is nonzero on a null eigenvalue; x lies outside the RKHS", j + 1);
                return Ok(None);
            }
            continue;
        }
        acc += (x.abs() / l.sqrt()).powf(q);
    }
    Ok(Some(acc))
}

/// `exp{−½ Σ_{j≤d} x_j²/λ_j}`.
pub fn gaussian_intensity(x_scores: &[f64], lambdas: &[f64], d: usize) -> Result<f64> {
    check_lengths(x_scores, lambdas, d)?;
    Ok(match standardized_power_sum(x_scores, lambdas, 2.0, d)? {
        Some(s) => (-0.5 * s).exp(),
        None => 0.0,
    })
}

/// `exp{−½ Σ_{j≤d} (|x_j|/√λ_j)^q}` for `q ≥ 2`.
pub fn exp_power_intensity(x_scores: &[f64], lambdas: &[f64], q: f64, d: usize) -> Result<f64> {
    if !(q >= 2.0) || !q.is_finite() {
        return Err(invalid(format!("exponent q must be at least 2, got {q}")));
    }
    check_lengths(x_scores, lambdas, d)?;
    Ok(match standardized_power_sum(x_scores, lambdas, q, d)? {
        Some(s) => (-0.5 * s).exp(),
        None => 0.0,
    })
}

/// Derivative by three-point Lagrange stencils: centered in the interior,
/// one-sided (second order) at both ends. Works on nonuniform grids.
pub fn differentiate(points: &[f64], values: &[f64]) -> Vec<f64> {
    let p = points.len();
    debug_assert!(p >= 3 && values.len() == p);
    // derivative at points[at] of the quadratic through indices (a, b, c)
    let stencil = |at: usize, a: usize, b: usize, c: usize| {
        let (xa, xb, xc) = (points[a], points[b], points[c]);
        let x = points[at];
        let la = ((x - xb) + (x - xc)) / ((xa - xb) * (xa - xc));
        let lb = ((x - xa) + (x - xc)) / ((xb - xa) * (xb - xc));
        let lc = ((x - xa) + (x - xb)) / ((xc - xa) * (xc - xb));
        la * values[a] + lb * values[b] + lc * values[c]
    };
    let mut out = Vec::with_capacity(p);
    out.push(stencil(0, 0, 1, 2));
    for k in 1..p - 1 {
        out.push(stencil(k, k - 1, k, k + 1));
    }
    out.push(stencil(p - 1, p - 3, p - 2, p - 1));
    out
}

const UNIT_INTERVAL_TOL: f64 = 1e-12;

/// `exp{−½ ∫₀¹ x′(t)² dt}` for a smooth curve sampled on `[0, 1]`.
pub fn wiener_intensity(x: &Curve) -> Result<f64> {
    let grid = x.grid();
    if grid.len() < 3 {
        return Err(invalid("need at least 3 grid points to differentiate"));
    }
    if grid.start().abs() > UNIT_INTERVAL_TOL || (grid.end() - 1.0).abs() > UNIT_INTERVAL_TOL {
        return Err(Error::InvalidGrid(format!(
            "Wiener intensity needs a grid on [0, 1], got [{}, {}]",
            grid.start(),
            grid.end()
        )));
    }
    let dx = differentiate(grid.points(), x.values());
    let sq: Vec<f64> = dx.iter().map(|v| v * v).collect();
    Ok((-0.5 * grid.integrate(&sq)).exp())
}
