//! Finite-sequence diagnostics for eigenvalue decay regimes and the
//! truncation rules `d(ε)` tied to them.
//!
//! The regimes are asymptotic statements about `T(d) = Σ_{j>d} λ_j`:
//!
//! * hyper-exponential: `d T(d) / λ_d → 0`
//! * super-exponential: `λ_{d+1} / λ_d → 0`
//! * exponential: `T(d) / λ_d` bounded
//!
//! On a finite sequence they can only be checked on a window of indices,
//! with thresholds collected in [`DecayThresholds`]. Tail sums are taken over
//! the supplied terms only, so the sequence should extend well beyond the
//! horizon (a few hundred terms for arithmetic decay).

use serde::Serialize;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayKind {
    Hyper,
    Super,
    Exponential,
    Slower,
}

impl DecayKind {
    pub fn name(self) -> &'static str {
        match self {
            DecayKind::Hyper => "hyper-exponential",
            DecayKind::Super => "super-exponential",
            DecayKind::Exponential => "exponential",
            DecayKind::Slower => "slower than exponential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayThresholds {
    /// A decreasing ratio whose last value is below this counts as vanishing.
    pub final_ratio: f64,
    /// A decreasing ratio whose log-log slope across the window is at or
    /// below this also counts as vanishing (catches slow `1/log d` decay).
    pub vanishing_slope: f64,
    /// Upper bound for `T(d)/λ_d` on the window.
    pub exp_bound: f64,
    /// Largest admissible growth factor of `T(d)/λ_d` across the window.
    pub exp_growth: f64,
}

impl Default for DecayThresholds {
    fn default() -> Self {
        Self {
            final_ratio: 0.1,
            vanishing_slope: -0.1,
            exp_bound: 100.0,
            exp_growth: 1.25,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayDiagnostics {
    /// `d T(d)/λ_d` for `d = 1..=horizon`.
    pub r_hyper: Vec<f64>,
    /// `λ_{d+1}/λ_d`.
    pub r_super: Vec<f64>,
    /// `T(d)/λ_d`.
    pub r_exp: Vec<f64>,
    /// First `d` (1-based) of the inspection window; the window ends at the horizon.
    pub window_start: usize,
    pub hyper_passed: bool,
    pub super_passed: bool,
    pub exponential_passed: bool,
    pub thresholds: DecayThresholds,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayClass {
    pub kind: DecayKind,
    pub diagnostics: DecayDiagnostics,
}

pub fn classify_decay(lambdas: &[f64], horizon: usize) -> Result<DecayClass> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(invalid(format!("eigenvalues must be positive, found {l}")));
    }
    let logs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    classify_decay_log(&logs, horizon)
}

/// Same as [`classify_decay`] but on `log λ_j`, for sequences such as
/// `exp(−j²)` that underflow in linear scale.
pub fn classify_decay_log(log_lambdas: &[f64], horizon: usize) -> Result<DecayClass> {
    classify_decay_with(log_lambdas, horizon, DecayThresholds::default())
}

pub fn classify_decay_with(log_lambdas: &[f64], horizon: usize, thresholds: DecayThresholds) -> Result<DecayClass> {
    if horizon < 4 {
        return Err(invalid(format!("horizon must be at least 4, got {horizon}")));
    }
    if log_lambdas.len() < horizon + 10 {
        return Err(invalid(format!(
            "need at least horizon + 10 = {} terms, got {}",
            horizon + 10,
            log_lambdas.len()
        )));
    }
    if log_lambdas.iter().any(|l| !l.is_finite()) {
        return Err(invalid("log-eigenvalues must be finite"));
    }
    let log_tail = suffix_log_sums(log_lambdas);

    let mut log_hyper = Vec::with_capacity(horizon);
    let mut log_super = Vec::with_capacity(horizon);
    let mut log_exp = Vec::with_capacity(horizon);
    for d in 1..=horizon {
        let ll = log_lambdas[d - 1];
        // log_tail[d] sums λ_{d+1}, λ_{d+2}, …
        let le = log_tail[d] - ll;
        log_exp.push(le);
        log_hyper.push((d as f64).ln() + le);
        log_super.push(log_lambdas[d] - ll);
    }

    let width = horizon.div_ceil(2);
    let start = horizon - width;
    let hyper_passed = vanishing(&log_hyper[start..], start + 1, &thresholds);
    let super_passed = vanishing(&log_super[start..], start + 1, &thresholds);
    let exponential_passed = bounded(&log_exp[start..], &thresholds);

    let kind = if exponential_passed && super_passed && hyper_passed {
        DecayKind::Hyper
    } else if exponential_passed && super_passed {
        DecayKind::Super
    } else if exponential_passed {
        DecayKind::Exponential
    } else {
        DecayKind::Slower
    };
    let exp = |v: Vec<f64>| v.into_iter().map(f64::exp).collect();
    Ok(DecayClass {
        kind,
        diagnostics: DecayDiagnostics {
            r_hyper: exp(log_hyper),
            r_super: exp(log_super),
            r_exp: exp(log_exp),
            window_start: start + 1,
            hyper_passed,
            super_passed,
            exponential_passed,
            thresholds,
        },
    })
}

/// `out[k] = log Σ_{j≥k} exp(logs[j])`, with `out[len] = −∞`.
fn suffix_log_sums(logs: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; logs.len() + 1];
    for k in (0..logs.len()).rev() {
        out[k] = log_add_exp(out[k + 1], logs[k]);
    }
    out
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn vanishing(log_r: &[f64], first_d: usize, t: &DecayThresholds) -> bool {
    let strictly_decreasing = log_r.windows(2).all(|w| w[1] < w[0]);
    if !strictly_decreasing {
        return false;
    }
    let last = log_r[log_r.len() - 1];
    if last < t.final_ratio.ln() {
        return true;
    }
    let last_d = first_d + log_r.len() - 1;
    let slope = (last - log_r[0]) / ((last_d as f64).ln() - (first_d as f64).ln());
    slope <= t.vanishing_slope
}

fn bounded(log_r: &[f64], t: &DecayThresholds) -> bool {
    let max = log_r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let growth = log_r[log_r.len() - 1] - log_r[0];
    max < t.exp_bound.ln() && growth <= t.exp_growth.ln()
}

fn check_nonnegative(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 2 {
        return Err(invalid("need at least two eigenvalues to form a tail"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(invalid(format!("eigenvalues must be finite and nonnegative, found {l}")));
    }
    Ok(())
}

/// `tails[k] = Σ_{j>k} λ_j` (1-based `k`), summed from the far end.
fn tail_sums(lambdas: &[f64]) -> Vec<f64> {
    let mut tails = vec![0.0; lambdas.len() + 1];
    for k in (0..lambdas.len()).rev() {
        tails[k] = tails[k + 1] + lambdas[k];
    }
    tails
}

/// `d = min{k : k Σ_{j>k} λ_j ≤ ε^{2+δ}}`, scanning every `k` that still
/// has at least one supplied tail term.
pub fn select_dimension_prop1(lambdas: &[f64], eps: f64, delta: f64) -> Result<usize> {
    check_nonnegative(lambdas)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    let target = eps.powf(2.0 + delta);
    let tails = tail_sums(lambdas);
    let scanned = lambdas.len() - 1;
    let d = (1..=scanned)
        .find(|&k| k as f64 * tails[k] <= target)
        .ok_or(Error::NoDimensionProp1 { scanned, target })?;
    debug_assert!(d as f64 * tails[d] <= target);
    Ok(d)
}

/// Truncation level chosen inside the `[b(d), B(d)]` bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperSelection {
    pub d: usize,
    pub delta2: f64,
    /// `b(d) = (d T(d))^{1−δ₁}`.
    pub lower: f64,
    /// `B(d) = λ_d^{1−δ₂}`.
    pub upper: f64,
}

/// Bracket bounds `(b(k), B(k), δ₂(k))` for one `k`, or `None` when no
/// `δ₂ ∈ (0,1)` separates them.
fn hyper_bracket(k: usize, lambda_k: f64, tail_k: f64, delta1: f64) -> Option<(f64, f64, f64)> {
    let kt = k as f64 * tail_k;
    let lower = kt.powf(1.0 - delta1);
    let ln_l = lambda_k.ln();
    // b < B  ⟺  δ₂ > β(δ₁) = 1 − (1 − δ₁) ln(kT) / ln λ_k, for λ_k < 1
    let beta = if kt == 0.0 {
        f64::NEG_INFINITY
    } else if ln_l < 0.0 {
        1.0 - (1.0 - delta1) * kt.ln() / ln_l
    } else {
        f64::NEG_INFINITY
    };
    let from = beta.max(0.0);
    if from >= 1.0 {
        return None;
    }
    let delta2 = 0.5 * (from + 1.0);
    let upper = lambda_k.powf(1.0 - delta2);
    Some((lower, upper, delta2))
}

/// `d(ε) = min{k : b(k) ≤ ε² ≤ B(k)}` with `δ₂` at the midpoint of its
/// admissible interval for each `k`.
pub fn select_dimension_hyper(lambdas: &[f64], eps: f64, delta1: f64) -> Result<HyperSelection> {
    check_nonnegative(lambdas)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    if !(delta1 > 0.0 && delta1 < 1.0) {
        return Err(invalid(format!("delta1 must lie in (0,1), got {delta1}")));
    }
    let eps2 = eps * eps;
    let tails = tail_sums(lambdas);
    let mut bounds = Vec::new();
    for k in 1..lambdas.len() {
        let lambda_k = lambdas[k - 1];
        if lambda_k == 0.0 {
            break;
        }
        let Some((lower, upper, delta2)) = hyper_bracket(k, lambda_k, tails[k], delta1) else {
            bounds.push((f64::NAN, f64::NAN));
            continue;
        };
        if lower <= eps2 && eps2 <= upper {
            return Ok(HyperSelection {
                d: k,
                delta2,
                lower,
                upper,
            });
        }
        bounds.push((lower, upper));
    }
    Err(Error::NoAdmissibleDimension { eps2, bounds })
}
