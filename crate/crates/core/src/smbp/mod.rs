//! Small-ball probability factorization `φ(x, ε) ≈ f_d(x) V_d(ε) ψ(x, ε, d)`.

mod correction;
mod decay;
mod intensity;
mod volume;

pub use correction::{correction_factor, tail_statistic};
pub use decay::{
    classify_decay, classify_decay_log, classify_decay_with, select_dimension_hyper, select_dimension_prop1,
    DecayClass, DecayDiagnostics, DecayKind, DecayThresholds, HyperSelection,
};
pub use intensity::{differentiate, exp_power_intensity, gaussian_intensity, wiener_intensity};
pub use volume::{ball_volume, log_ball_volume, volume_factor, VolumeFactor};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fda::{distance, Curve, FunctionalSample};
use crate::fpca::EigenSystem;

/// Number of sample curves within distance `eps` of `x`.
pub fn small_ball_hits(sample: &FunctionalSample, x: &Curve, eps: f64) -> Result<usize> {
    sample.check_curve(x)?;
    if !(eps >= 0.0) {
        return Err(invalid(format!("eps must be nonnegative, got {eps}")));
    }
    let mut hits = 0;
    for c in sample.curves() {
        if distance(c, x)? <= eps {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Fraction of sample curves with `‖X_i − x‖ ≤ eps`.
pub fn empirical_smbp(sample: &FunctionalSample, x: &Curve, eps: f64) -> Result<f64> {
    Ok(small_ball_hits(sample, x, eps)? as f64 / sample.len() as f64)
}

/// Every ingredient of one factorization, with `phi_d = f_d · volume · correction`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationReport {
    #[serde(skip)]
    pub x_scores: Vec<f64>,
    pub d: usize,
    pub eps: f64,
    #[serde(rename = "f_d")]
    pub f_d_at_x: f64,
    pub volume: f64,
    pub correction: f64,
    pub phi_d: f64,
    /// `Σ_{j>J} λ̂_j`: spectrum mass beyond the truncation used for `ψ`.
    pub tail_mass_omitted: f64,
}

/// Assembles the factorization at `x` for truncation `d`, estimating `ψ`
/// from the sample scores on components `d+1..=tail_end`.
pub fn factorize(
    sample: &FunctionalSample,
    x: &Curve,
    eps: f64,
    d: usize,
    sys: &EigenSystem,
    f_d_at_x: f64,
    tail_end: usize,
) -> Result<FactorizationReport> {
    if d == 0 || d >= tail_end {
        return Err(invalid(format!("need 1 <= d < J, got d = {d}, J = {tail_end}")));
    }
    if tail_end > sys.len() {
        return Err(Error::DimensionOutOfRange {
            d: tail_end,
            max: sys.len(),
        });
    }
    if !(f_d_at_x >= 0.0) || !f_d_at_x.is_finite() {
        return Err(invalid(format!("density value must be finite and nonnegative, got {f_d_at_x}")));
    }
    let scores = sys.scores(sample, tail_end)?;
    let x_scores = sys.project(x, tail_end)?;
    let correction = correction_factor(scores.rows().map(|r| &r[d..]), &x_scores[d..], eps, d)?;
    let volume = ball_volume(d, eps)?;
    let phi_d = f_d_at_x * volume * correction;
    if correction == 0.0 {
        log::warn!("phi_d vanishes at eps = {eps}, d = {d}: no sample tail falls inside the ball");
    }
    let tail_mass_omitted = sys.eigenvalues()[tail_end..].iter().sum();
    Ok(FactorizationReport {
        x_scores: x_scores[..d].to_vec(),
        d,
        eps,
        f_d_at_x,
        volume,
        correction,
        phi_d,
        tail_mass_omitted,
    })
}
