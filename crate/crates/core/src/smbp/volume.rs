//! Ball volumes and the leading-order volume factors for slower spectra.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::decay::DecayKind;
use crate::error::{invalid, Error, Result};
use crate::fda::check_positive;

/// `log V_d(ε) = d log ε + (d/2) log π − log Γ(d/2 + 1)`.
pub fn log_ball_volume(d: usize, eps: f64) -> Result<f64> {
    if d == 0 {
        return Err(invalid("ball dimension must be at least 1"));
    }
    check_positive("eps", eps)?;
    let df = d as f64;
    Ok(df * eps.ln() + 0.5 * df * PI.ln() - ln_gamma(0.5 * df + 1.0))
}

/// Volume of the Euclidean `d`-ball of radius `eps`.
pub fn ball_volume(d: usize, eps: f64) -> Result<f64> {
    log_ball_volume(d, eps).map(f64::exp)
}

/// Leading-order volume factor for super-exponential or exponential decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeFactor {
    /// `½ d [log(2πeε²) − log d]`.
    pub log_value: f64,
    /// The `o(1)` (super-exponential) or `δ(d, α)` (exponential) term is
    /// only known asymptotically and is left out; always `true`.
    pub remainder_omitted: bool,
    /// `√(ε²/λ_d)` in the exponential case, when `λ_d` was supplied.
    pub alpha: Option<f64>,
}

pub fn volume_factor(eps: f64, d: usize, kind: DecayKind, lambda_d: Option<f64>) -> Result<VolumeFactor> {
    match kind {
        DecayKind::Super | DecayKind::Exponential => {}
        DecayKind::Hyper => return Err(Error::WrongDecayClass("hyper-exponential decay")),
        DecayKind::Slower => return Err(Error::WrongDecayClass("slower than exponential decay")),
    }
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    check_positive("eps", eps)?;
    let df = d as f64;
    let log_value = 0.5 * df * ((2.0 * PI * std::f64::consts::E * eps * eps).ln() - df.ln());
    let alpha = match (kind, lambda_d) {
        (DecayKind::Exponential, Some(l)) => {
            check_positive("lambda_d", l)?;
            Some((eps * eps / l).sqrt())
        }
        _ => None,
    };
    Ok(VolumeFactor {
        log_value,
        remainder_omitted: true,
        alpha,
    })
}
