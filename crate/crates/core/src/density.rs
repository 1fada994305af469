//! Radial kernel density estimation of the surrogate density `f_d` on
//! principal component scores, with bandwidth `H = h² I`.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::fda::{Curve, FunctionalSample};
use crate::fpca::{self, EigenSystem, ScoreMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelFamily {
    /// `(1 − r²)` on the unit ball.
    #[default]
    Epanechnikov,
    /// `exp(−r²/2)` restricted to the unit ball.
    TruncatedGaussian,
    /// Untruncated standard normal profile; not compactly supported.
    Gaussian,
}

impl KernelFamily {
    pub fn is_compact(self) -> bool {
        !matches!(self, KernelFamily::Gaussian)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::TruncatedGaussian => "truncated-gaussian",
            KernelFamily::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" | "epanechnikov-radial" => Ok(Self::Epanechnikov),
            "truncated-gaussian" | "truncated-gaussian-radial" => Ok(Self::TruncatedGaussian),
            "gaussian" | "gaussian-radial" => Ok(Self::Gaussian),
            other => Err(invalid(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// Surface area `ω_{d−1} = 2π^{d/2}/Γ(d/2)` of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

/// A radial kernel family in a fixed dimension, with its normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    norm: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel dimension must be at least 1"));
        }
        let h = 0.5 * dim as f64;
        let norm = match family {
            KernelFamily::Epanechnikov => {
                unit_sphere_area(dim) * 2.0 / (dim as f64 * (dim as f64 + 2.0))
            }
            // standard normal mass of the unit ball: P(χ²_d ≤ 1)
            KernelFamily::TruncatedGaussian => (2.0 * PI).powf(h) * gamma_lr(h, 0.5),
            KernelFamily::Gaussian => (2.0 * PI).powf(h),
        };
        Ok(Self { family, dim, norm })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalizing constant `c_d`, the integral of the unnormalized profile over `R^d`.
    pub fn normalizer(&self) -> f64 {
        self.norm
    }

    /// Kernel height at radius `r`, normalized to integrate to one over `R^d`.
    pub fn profile(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(invalid(format!("radius must be nonnegative, got {r}")));
        }
        Ok(self.profile_sq(r * r))
    }

    fn profile_sq(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::Epanechnikov if r2 <= 1.0 => (1.0 - r2) / self.norm,
            KernelFamily::TruncatedGaussian if r2 <= 1.0 => (-0.5 * r2).exp() / self.norm,
            KernelFamily::Gaussian => (-0.5 * r2).exp() / self.norm,
            _ => 0.0,
        }
    }
}

/// `c · n^{−1/(2p + d)}`, for smoothness `p ≥ 2`.
pub fn bandwidth_rate(n: usize, d: usize, smoothness: f64, c: f64) -> Result<f64> {
    if n == 0 || d == 0 {
        return Err(invalid("n and d must be at least 1"));
    }
    if !(smoothness >= 2.0) {
        return Err(invalid(format!("smoothness p must be at least 2, got {smoothness}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(invalid(format!("bandwidth constant must be positive, got {c}")));
    }
    Ok(c * (n as f64).powf(-1.0 / (2.0 * smoothness + d as f64)))
}

/// Root of the mean per-coordinate sample variance.
pub fn pooled_scale(scores: &ScoreMatrix) -> Result<f64> {
    let n = scores.nrows();
    if n < 2 {
        return Err(invalid("need at least 2 scores to estimate a scale"));
    }
    let d = scores.dim();
    let mut total = 0.0;
    for j in 0..d {
        let mean = scores.column(j).sum::<f64>() / n as f64;
        let ss: f64 = scores.column(j).map(|v| (v - mean) * (v - mean)).sum();
        total += ss / (n - 1) as f64;
    }
    let sigma = (total / d as f64).sqrt();
    if !(sigma > 0.0) {
        return Err(invalid("scores have zero variance"));
    }
    Ok(sigma)
}

/// Normal-scale rule for `H = h² I`: `h = σ̂ (4/((d+2) n))^{1/(d+4)}`.
pub fn bandwidth_normal_scale(scores: &ScoreMatrix) -> Result<f64> {
    let sigma = pooled_scale(scores)?;
    let n = scores.nrows() as f64;
    let d = scores.dim() as f64;
    Ok(sigma * (4.0 / ((d + 2.0) * n)).powf(1.0 / (d + 4.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BandwidthRule {
    #[default]
    NormalScale,
    /// `c n^{−1/(2p+d)}`; `c` defaults to the pooled score scale.
    Rate { smoothness: f64, constant: Option<f64> },
    Fixed(f64),
}

impl BandwidthRule {
    pub fn select(&self, scores: &ScoreMatrix) -> Result<f64> {
        match *self {
            BandwidthRule::NormalScale => bandwidth_normal_scale(scores),
            BandwidthRule::Rate { smoothness, constant } => {
                let c = match constant {
                    Some(c) => c,
                    None => pooled_scale(scores)?,
                };
                bandwidth_rate(scores.nrows(), scores.dim(), smoothness, c)
            }
            BandwidthRule::Fixed(h) => {
                if h > 0.0 && h.is_finite() {
                    Ok(h)
                } else {
                    Err(invalid(format!("bandwidth must be positive, got {h}")))
                }
            }
        }
    }
}

impl fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthRule::NormalScale => f.write_str("normal-scale"),
            BandwidthRule::Rate { smoothness, constant: None } => write!(f, "rate:{smoothness}"),
            BandwidthRule::Rate { smoothness, constant: Some(c) } => write!(f, "rate:{smoothness}:{c}"),
            BandwidthRule::Fixed(h) => write!(f, "fixed:{h}"),
        }
    }
}

impl FromStr for BandwidthRule {
    type Err = Error;

    /// `normal-scale`, `rate:<p>[:<c>]` or `fixed:<h>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| invalid(format!("bad number '{v}' in bandwidth rule '{s}'")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["normal-scale"] | ["normal"] => Ok(Self::NormalScale),
            ["rate", p] => Ok(Self::Rate {
                smoothness: num(p)?,
                constant: None,
            }),
            ["rate", p, c] => Ok(Self::Rate {
                smoothness: num(p)?,
                constant: Some(num(c)?),
            }),
            ["fixed", h] => Ok(Self::Fixed(num(h)?)),
            _ => Err(invalid(format!("unknown bandwidth rule '{s}'"))),
        }
    }
}

/// `f̂(u) = (1/(n hᵈ)) Σ_i K(‖θ_i − u‖/h)`.
#[derive(Debug, Clone)]
pub struct DensityEstimator {
    scores: ScoreMatrix,
    bandwidth: f64,
    kernel: KernelSpec,
}

impl DensityEstimator {
    pub fn new(scores: ScoreMatrix, bandwidth: f64, kernel: KernelSpec) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if kernel.dim() != scores.dim() {
            return Err(Error::LengthMismatch {
                expected: scores.dim(),
                got: kernel.dim(),
            });
        }
        Ok(Self {
            scores,
            bandwidth,
            kernel,
        })
    }

    pub fn with_rule(scores: ScoreMatrix, family: KernelFamily, rule: BandwidthRule) -> Result<Self> {
        let h = rule.select(&scores)?;
        let kernel = KernelSpec::new(family, scores.dim())?;
        Self::new(scores, h, kernel)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn scores(&self) -> &ScoreMatrix {
        &self.scores
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.scores.dim() {
            return Err(Error::LengthMismatch {
                expected: self.scores.dim(),
                got: point.len(),
            });
        }
        let inv_h2 = 1.0 / (self.bandwidth * self.bandwidth);
        let sum: f64 = self
            .scores
            .rows()
            .map(|row| {
                let r2: f64 = row.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
                self.kernel.profile_sq(r2 * inv_h2)
            })
            .sum();
        let n = self.scores.nrows() as f64;
        Ok(sum / (n * self.bandwidth.powi(self.scores.dim() as i32)))
    }
}

/// Projected evaluation points and density values for a set of target curves.
#[derive(Debug, Clone)]
pub struct SurrogateEstimate {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl SurrogateEstimate {
    /// CSV with header `x_id,score_1,…,score_d,f_hat`.
    pub fn write_csv<W: Write>(&self, ids: &[String], mut out: W) -> Result<()> {
        if ids.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: ids.len(),
            });
        }
        let d = self.points.first().map_or(0, Vec::len);
        write!(out, "x_id")?;
        for j in 1..=d {
            write!(out, ",score_{j}")?;
        }
        writeln!(out, ",f_hat")?;
        for ((id, p), v) in ids.iter().zip(&self.points).zip(&self.values) {
            write!(out, "{id}")?;
            for s in p {
                write!(out, ",{s}")?;
            }
            writeln!(out, ",{v}")?;
        }
        Ok(())
    }
}

/// KDE of the first `d` scores under a given eigensystem, evaluated at the
/// projections of `targets`. With the true eigenfunctions this is the
/// pseudo-estimator; with estimated ones it is the plug-in estimator.
pub fn estimate_with_system(
    sample: &FunctionalSample,
    sys: &EigenSystem,
    targets: &[Curve],
    d: usize,
    family: KernelFamily,
    rule: BandwidthRule,
) -> Result<SurrogateEstimate> {
    if sample.len() < 2 {
        return Err(invalid("density estimation needs at least 2 curves"));
    }
    let scores = sys.scores(sample, d)?;
    let est = DensityEstimator::with_rule(scores, family, rule)?;
    let points = targets
        .iter()
        .map(|x| sys.project(x, d))
        .collect::<Result<Vec<_>>>()?;
    let values = points
        .iter()
        .map(|p| est.evaluate(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurrogateEstimate {
        points,
        values,
        bandwidth: est.bandwidth(),
    })
}

/// Full pipeline: FPCA on `sample`, then [`estimate_with_system`].
pub fn estimate_surrogate_density(
    sample: &FunctionalSample,
    targets: &[Curve],
    d: usize,
    family: KernelFamily,
    rule: BandwidthRule,
) -> Result<SurrogateEstimate> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    let sys = fpca::fit(sample)?;
    estimate_with_system(sample, &sys, targets, d, family, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scores_1d(v: &[f64]) -> ScoreMatrix {
        ScoreMatrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn epanechnikov_height_in_one_dimension() {
        let k = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
        assert_relative_eq!(k.normalizer(), 4.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(k.profile(0.0).unwrap(), 0.75, epsilon = 1e-14);
    }

    #[test]
    fn compact_families_vanish_outside_unit_ball() {
        for fam in [KernelFamily::Epanechnikov, KernelFamily::TruncatedGaussian] {
            for d in 1..5 {
                let k = KernelSpec::new(fam, d).unwrap();
                assert_eq!(k.profile(1.0001).unwrap(), 0.0);
                assert!(k.profile(0.999).unwrap() > 0.0);
            }
        }
        let g = KernelSpec::new(KernelFamily::Gaussian, 1).unwrap();
        assert!(g.profile(3.0).unwrap() > 0.0);
    }

    #[test]
    fn gaussian_height() {
        let k = KernelSpec::new(KernelFamily::Gaussian, 1).unwrap();
        assert_relative_eq!(k.profile(0.0).unwrap(), 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn negative_radius_rejected() {
        let k = KernelSpec::new(KernelFamily::Epanechnikov, 2).unwrap();
        assert!(k.profile(-0.1).is_err());
    }

    /// Composite Simpson on `[0, upper]` with many panels.
    fn simpson(f: impl Fn(f64) -> f64, upper: f64, panels: usize) -> f64 {
        let h = upper / panels as f64;
        let mut s = f(0.0) + f(upper);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn radial_profiles_integrate_to_one() {
        for d in 1..=10 {
            for fam in [KernelFamily::Epanechnikov, KernelFamily::TruncatedGaussian] {
                let k = KernelSpec::new(fam, d).unwrap();
                let radial = simpson(|r| k.profile(r).unwrap() * r.powi(d as i32 - 1), 1.0, 20_000);
                assert!((unit_sphere_area(d) * radial - 1.0).abs() < 1e-10, "{fam} d={d}");
            }
            let k = KernelSpec::new(KernelFamily::Gaussian, d).unwrap();
            let radial = simpson(|r| k.profile(r).unwrap() * r.powi(d as i32 - 1), 40.0, 200_000);
            assert!((unit_sphere_area(d) * radial - 1.0).abs() < 1e-10, "gaussian d={d}");
        }
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, epsilon = 1e-13);
    }

    #[test]
    fn rate_bandwidth() {
        assert_eq!(bandwidth_rate(1, 3, 2.5, 1.0).unwrap(), 1.0);
        assert_relative_eq!(bandwidth_rate(100_000, 1, 2.0, 1.0).unwrap(), 0.1, epsilon = 1e-14);
        assert!(bandwidth_rate(10, 1, 1.5, 1.0).is_err());
        let hs: Vec<f64> = (1..50).map(|n| bandwidth_rate(n, 2, 3.0, 0.7).unwrap()).collect();
        assert!(hs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn normal_scale_unit_variance() {
        // exactly unit sample variance: ±1 alternating around zero, rescaled
        let n = 100;
        let raw: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let scale = ((n - 1) as f64 / n as f64).sqrt();
        let s = scores_1d(&raw.iter().map(|v| v * scale).collect::<Vec<_>>());
        let h = bandwidth_normal_scale(&s).unwrap();
        assert_relative_eq!(h, (4.0f64 / 300.0).powf(0.2), epsilon = 1e-12);
        assert!((h - 0.4217).abs() < 1e-4);
    }

    #[test]
    fn normal_scale_rejects_degenerate() {
        assert!(bandwidth_normal_scale(&scores_1d(&[1.0, 1.0, 1.0])).is_err());
        assert!(bandwidth_normal_scale(&scores_1d(&[1.0])).is_err());
    }

    #[test]
    fn single_point_kde() {
        let k = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
        let est = DensityEstimator::new(scores_1d(&[0.0]), 1.0, k).unwrap();
        assert_relative_eq!(est.evaluate(&[0.0]).unwrap(), 0.75, epsilon = 1e-15);
        assert_eq!(est.evaluate(&[1.5]).unwrap(), 0.0);
        assert!(est.evaluate(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn symmetric_pair_kde() {
        let k = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
        let est = DensityEstimator::new(scores_1d(&[-0.5, 0.5]), 1.0, k).unwrap();
        assert_relative_eq!(est.evaluate(&[0.0]).unwrap(), 0.5625, epsilon = 1e-15);
    }

    #[test]
    fn estimator_construction_checks() {
        let k = KernelSpec::new(KernelFamily::Epanechnikov, 2).unwrap();
        assert!(DensityEstimator::new(scores_1d(&[0.0, 1.0]), 1.0, k).is_err());
        let k = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
        assert!(DensityEstimator::new(scores_1d(&[0.0, 1.0]), 0.0, k).is_err());
    }

    #[test]
    fn rules_parse() {
        assert_eq!("normal-scale".parse::<BandwidthRule>().unwrap(), BandwidthRule::NormalScale);
        assert_eq!(
            "rate:2.5".parse::<BandwidthRule>().unwrap(),
            BandwidthRule::Rate { smoothness: 2.5, constant: None }
        );
        assert_eq!("fixed:0.3".parse::<BandwidthRule>().unwrap(), BandwidthRule::Fixed(0.3));
        assert!("silverman".parse::<BandwidthRule>().is_err());
        assert_eq!("Gaussian".parse::<KernelFamily>().unwrap(), KernelFamily::Gaussian);
    }

    fn kde_mass_1d(est: &DensityEstimator, lo: f64, hi: f64, m: usize) -> f64 {
        let step = (hi - lo) / m as f64;
        let v: Vec<f64> = (0..=m).map(|i| est.evaluate(&[lo + i as f64 * step]).unwrap()).collect();
        step * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[m]))
    }

    #[test]
    fn kde_integrates_to_one_in_two_dimensions() {
        let pts = [0.1, -0.3, 0.7, 0.2, -0.9, 0.4, 0.0, 0.5];
        let s = ScoreMatrix::new(4, 2, pts.to_vec()).unwrap();
        for fam in [KernelFamily::Epanechnikov, KernelFamily::TruncatedGaussian] {
            let est = DensityEstimator::new(s.clone(), 0.4, KernelSpec::new(fam, 2).unwrap()).unwrap();
            let (lo, hi, m) = (-1.5, 1.5, 2000);
            let step = (hi - lo) / m as f64;
            let mut total = 0.0;
            for i in 0..=m {
                for j in 0..=m {
                    let wi = if i == 0 || i == m { 0.5 } else { 1.0 };
                    let wj = if j == 0 || j == m { 0.5 } else { 1.0 };
                    let u = [lo + i as f64 * step, lo + j as f64 * step];
                    total += wi * wj * est.evaluate(&u).unwrap();
                }
            }
            total *= step * step;
            assert!((total - 1.0).abs() < 1e-3, "{fam}: {total}");
        }
    }

    proptest! {
        #[test]
        fn kde_integrates_to_one_in_one_dimension(v in prop::collection::vec(-2.0..2.0f64, 2..12), h in 0.2..1.0f64) {
            let est = DensityEstimator::new(scores_1d(&v), h, KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap()).unwrap();
            let mass = kde_mass_1d(&est, -2.0 - h, 2.0 + h, 20_000);
            prop_assert!((mass - 1.0).abs() < 1e-3);
        }

        #[test]
        fn normal_scale_is_equivariant(v in prop::collection::vec(-2.0..2.0f64, 6), s in 0.1..10.0f64) {
            let a = ScoreMatrix::new(3, 2, v.clone()).unwrap();
            prop_assume!(pooled_scale(&a).is_ok());
            let h = bandwidth_normal_scale(&a).unwrap();
            prop_assert!(h > 0.0);
            let hs = bandwidth_normal_scale(&a.map(|x| s * x)).unwrap();
            prop_assert!((hs - s * h).abs() < 1e-10 * hs.max(1.0));
        }

        #[test]
        fn kde_is_nonnegative(v in prop::collection::vec(-2.0..2.0f64, 4), u in prop::collection::vec(-3.0..3.0f64, 2)) {
            let s = ScoreMatrix::new(2, 2, v).unwrap();
            for fam in [KernelFamily::Epanechnikov, KernelFamily::TruncatedGaussian, KernelFamily::Gaussian] {
                let est = DensityEstimator::new(s.clone(), 0.5, KernelSpec::new(fam, 2).unwrap()).unwrap();
                prop_assert!(est.evaluate(&u).unwrap() >= 0.0);
            }
        }
    }
}
