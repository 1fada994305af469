//! Seeded generators for simulated processes, their target curves and the
//! exact intensities used as ground truth.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution as _, Gamma};
use statrs::distribution::{ChiSquared, Continuous, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::fda::{Curve, FunctionalSample, Grid};
use crate::fpca::EigenSystem;

/// Name of the generator behind [`SeededRng`], recorded in run manifests.
pub const RNG_ALGORITHM: &str = "chacha20";

/// Default Karhunen–Loève truncation for Wiener paths.
pub const DEFAULT_WIENER_TERMS: usize = 50;

/// Points on the default simulation grids.
pub const DEFAULT_GRID_POINTS: usize = 100;

/// Points on the target `b`-grids.
pub const B_GRID_POINTS: usize = 160;

/// ChaCha20 stream keyed by a 64-bit seed, with an independent stream per
/// replication index. Normals come from Box–Muller so the sequence depends
/// only on the uniform stream.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    fn gamma(&mut self, dist: &Gamma<f64>) -> f64 {
        dist.sample(&mut self.inner)
    }

    fn sign(&mut self) -> f64 {
        if self.inner.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

/// Zero-mean, unit-variance laws for the random amplitude of the sine process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distribution {
    #[default]
    StdNormal,
    StdStudentT5,
    StdChiSq8,
}

impl Distribution {
    pub const ALL: [Distribution; 3] = [Self::StdNormal, Self::StdStudentT5, Self::StdChiSq8];

    pub fn name(self) -> &'static str {
        match self {
            Self::StdNormal => "normal",
            Self::StdStudentT5 => "t5",
            Self::StdChiSq8 => "chisq8",
        }
    }

    /// Exact density of the standardized law.
    pub fn density(self, b: f64) -> f64 {
        match self {
            Self::StdNormal => (-0.5 * b * b).exp() / (2.0 * PI).sqrt(),
            Self::StdStudentT5 => {
                let s = (5.0f64 / 3.0).sqrt();
                let t = StudentsT::new(0.0, 1.0, 5.0).expect("valid t parameters");
                s * t.pdf(b * s)
            }
            Self::StdChiSq8 => {
                let u = 4.0 * b + 8.0;
                if u <= 0.0 {
                    0.0
                } else {
                    4.0 * ChiSquared::new(8.0).expect("valid chi-square parameters").pdf(u)
                }
            }
        }
    }

    /// Target `b` range: `[−4, 4]`, shifted to `[−2, 6]` for the skewed law.
    pub fn b_range(self) -> (f64, f64) {
        match self {
            Self::StdChiSq8 => (-2.0, 6.0),
            _ => (-4.0, 4.0),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" | "std-normal" => Ok(Self::StdNormal),
            "t5" | "student-t5" | "std-t5" => Ok(Self::StdStudentT5),
            "chisq8" | "chi2" | "chisq" | "std-chisq8" => Ok(Self::StdChiSq8),
            other => Err(invalid(format!("unknown distribution '{other}'"))),
        }
    }
}

fn sum_sq_normals(k: usize, rng: &mut SeededRng) -> f64 {
    (0..k).map(|_| rng.standard_normal().powi(2)).sum()
}

pub fn draw_scalar(dist: Distribution, rng: &mut SeededRng) -> f64 {
    match dist {
        Distribution::StdNormal => rng.standard_normal(),
        Distribution::StdStudentT5 => {
            let z = rng.standard_normal();
            let v = sum_sq_normals(5, rng);
            z / (v / 5.0).sqrt() / (5.0f64 / 3.0).sqrt()
        }
        Distribution::StdChiSq8 => (sum_sq_normals(8, rng) - 8.0) / 4.0,
    }
}

/// Unit-variance draws with density `∝ exp(−|y/s|^q)`, via `G^{1/q}` for
/// `G ~ Gamma(1/q, 1)` and a random sign.
#[derive(Debug, Clone)]
pub struct ExpPowerSampler {
    q: f64,
    scale: f64,
    gamma: Gamma<f64>,
}

impl ExpPowerSampler {
    pub fn new(q: f64) -> Result<Self> {
        if !(q >= 2.0) || !q.is_finite() {
            return Err(invalid(format!("exponential-power index q must be at least 2, got {q}")));
        }
        let scale = (0.5 * (ln_gamma(1.0 / q) - ln_gamma(3.0 / q))).exp();
        let gamma = Gamma::new(1.0 / q, 1.0).map_err(|e| invalid(e.to_string()))?;
        Ok(Self { q, scale, gamma })
    }

    pub fn draw(&self, rng: &mut SeededRng) -> f64 {
        let g = rng.gamma(&self.gamma);
        rng.sign() * self.scale * g.powf(1.0 / self.q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec {
    /// `a √(2/π) sin t` on `[0, π]`.
    Sine(Distribution),
    /// Wiener process on `[0, 1]` via its Karhunen–Loève expansion.
    WienerKl { terms: usize },
    /// `Σ √λ_j Z_j e_j` with the sine basis `e_j`.
    GaussianKl { lambdas: Vec<f64>, terms: usize },
    /// As `GaussianKl` with unit-variance exponential-power scores.
    ExpPowerKl { lambdas: Vec<f64>, q: f64, terms: usize },
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        let check_lambdas = |lambdas: &[f64], terms: usize| -> Result<()> {
            if terms == 0 {
                return Err(invalid("number of expansion terms must be at least 1"));
            }
            if lambdas.len() < terms {
                return Err(Error::LengthMismatch {
                    expected: terms,
                    got: lambdas.len(),
                });
            }
            if lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
                return Err(invalid("eigenvalues must be positive and finite"));
            }
            if lambdas.windows(2).any(|w| w[1] > w[0]) {
                return Err(invalid("eigenvalues must be descending"));
            }
            Ok(())
        };
        match self {
            ProcessSpec::Sine(_) => Ok(()),
            ProcessSpec::WienerKl { terms } => {
                if *terms == 0 {
                    Err(invalid("number of expansion terms must be at least 1"))
                } else {
                    Ok(())
                }
            }
            ProcessSpec::GaussianKl { lambdas, terms } => check_lambdas(lambdas, *terms),
            ProcessSpec::ExpPowerKl { lambdas, q, terms } => {
                ExpPowerSampler::new(*q)?;
                check_lambdas(lambdas, *terms)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            ProcessSpec::Sine(dist) => format!("sine-{dist}"),
            ProcessSpec::WienerKl { .. } => "wiener".into(),
            ProcessSpec::GaussianKl { .. } => "gaussian-kl".into(),
            ProcessSpec::ExpPowerKl { .. } => "exp-power-kl".into(),
        }
    }

    /// 100 equispaced points on `[0, π]` for the sine process, `[0, 1]` otherwise.
    pub fn default_grid(&self) -> Arc<Grid> {
        let end = match self {
            ProcessSpec::Sine(_) => PI,
            _ => 1.0,
        };
        Arc::new(Grid::uniform(0.0, end, DEFAULT_GRID_POINTS).expect("valid default grid"))
    }

    pub fn sample(&self, n: usize, grid: &Arc<Grid>, rng: &mut SeededRng) -> Result<FunctionalSample> {
        self.validate()?;
        match self {
            ProcessSpec::Sine(dist) => sample_sine(n, grid, *dist, rng),
            ProcessSpec::WienerKl { terms } => sample_wiener(n, grid, *terms, rng),
            ProcessSpec::GaussianKl { lambdas, terms } => sample_gaussian_kl(n, grid, lambdas, *terms, rng),
            ProcessSpec::ExpPowerKl { lambdas, q, terms } => {
                sample_exp_power_kl(n, grid, lambdas, *q, *terms, rng)
            }
        }
    }

    /// The exact mean, eigenvalues and eigenfunctions on `grid`.
    pub fn true_system(&self, grid: &Arc<Grid>) -> Result<EigenSystem> {
        self.validate()?;
        let mean = Curve::zeros(Arc::clone(grid));
        match self {
            ProcessSpec::Sine(_) => {
                let e1 = Curve::from_fn(Arc::clone(grid), |t| (2.0 / PI).sqrt() * t.sin())?;
                EigenSystem::from_parts(mean, vec![1.0], vec![e1])
            }
            ProcessSpec::WienerKl { terms } => {
                let funcs = (1..=*terms)
                    .map(|j| wiener_eigenfunction(grid, j))
                    .collect::<Result<Vec<_>>>()?;
                EigenSystem::from_parts(mean, wiener_eigenvalues(*terms), funcs)
            }
            ProcessSpec::GaussianKl { lambdas, terms } | ProcessSpec::ExpPowerKl { lambdas, terms, .. } => {
                EigenSystem::from_parts(mean, lambdas[..*terms].to_vec(), sine_basis(grid, *terms)?)
            }
        }
    }

    /// Target curves `x^b` on `grid`.
    pub fn target_curves(&self, grid: &Arc<Grid>, b_values: &[f64]) -> Result<Vec<Curve>> {
        let shape: Box<dyn Fn(f64) -> f64> = match self {
            ProcessSpec::Sine(_) => Box::new(|t: f64| (2.0 / PI).sqrt() * t.sin()),
            ProcessSpec::WienerKl { .. } => Box::new(|t: f64| 2.0 * SQRT_2 / PI * (0.5 * PI * t).sin()),
            _ => return Err(invalid(format!("no target family defined for {}", self.name()))),
        };
        b_values
            .iter()
            .map(|&b| {
                if !b.is_finite() {
                    return Err(invalid("b values must be finite"));
                }
                Curve::from_fn(Arc::clone(grid), |t| b * shape(t))
            })
            .collect()
    }

    /// Exact intensity at `x^b`: the amplitude density for the sine process,
    /// `exp(−b²/2)` for Wiener.
    pub fn true_intensity(&self, b: f64) -> Result<f64> {
        match self {
            ProcessSpec::Sine(dist) => Ok(dist.density(b)),
            ProcessSpec::WienerKl { .. } => Ok((-0.5 * b * b).exp()),
            _ => Err(invalid(format!("no target family defined for {}", self.name()))),
        }
    }

    /// Exact density of the first `d` scores at the projection of `x^b`.
    pub fn true_score_density(&self, b: f64, d: usize) -> Result<f64> {
        match self {
            ProcessSpec::Sine(dist) => {
                if d != 1 {
                    return Err(Error::DimensionOutOfRange { d, max: 1 });
                }
                Ok(dist.density(b))
            }
            ProcessSpec::WienerKl { terms } => {
                if d == 0 || d > *terms {
                    return Err(Error::DimensionOutOfRange { d, max: *terms });
                }
                let norm: f64 = wiener_eigenvalues(d).iter().map(|l| (2.0 * PI * l).ln()).sum();
                Ok((-0.5 * b * b - 0.5 * norm).exp())
            }
            _ => Err(invalid(format!("no target family defined for {}", self.name()))),
        }
    }

    /// The `b`-grid: 160 equispaced points, endpoints included.
    pub fn b_grid(&self) -> Vec<f64> {
        let (lo, hi) = match self {
            ProcessSpec::Sine(dist) => dist.b_range(),
            _ => (-4.0, 4.0),
        };
        b_grid(lo, hi, B_GRID_POINTS)
    }
}

pub fn b_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (m - 1) as f64;
    (0..m).map(|i| if i + 1 == m { hi } else { lo + i as f64 * step }).collect()
}

/// `λ_j = ((j − ½)π)^{-2}` for `j = 1..=terms`.
pub fn wiener_eigenvalues(terms: usize) -> Vec<f64> {
    (1..=terms).map(|j| ((j as f64 - 0.5) * PI).powi(-2)).collect()
}

/// Variance left out by truncating the Wiener expansion after `terms`; the full sum is 1/2.
pub fn wiener_tail_mass(terms: usize) -> f64 {
    0.5 - wiener_eigenvalues(terms).iter().sum::<f64>()
}

/// `√2 sin((j − ½)πt)`.
pub fn wiener_eigenfunction(grid: &Arc<Grid>, j: usize) -> Result<Curve> {
    if j == 0 {
        return Err(invalid("eigenfunction index starts at 1"));
    }
    let freq = (j as f64 - 0.5) * PI;
    Curve::from_fn(Arc::clone(grid), |t| SQRT_2 * (freq * t).sin())
}

/// `e_j(t) = √(2/L) sin(jπ(t − a)/L)` on `[a, a + L]`, `j = 1..=terms`.
pub fn sine_basis(grid: &Arc<Grid>, terms: usize) -> Result<Vec<Curve>> {
    let a = grid.start();
    let len = grid.end() - a;
    let amp = (2.0 / len).sqrt();
    (1..=terms)
        .map(|j| {
            let freq = j as f64 * PI / len;
            Curve::from_fn(Arc::clone(grid), |t| amp * (freq * (t - a)).sin())
        })
        .collect()
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptySample)
    } else {
        Ok(())
    }
}

pub fn sample_sine(n: usize, grid: &Arc<Grid>, dist: Distribution, rng: &mut SeededRng) -> Result<FunctionalSample> {
    check_n(n)?;
    let shape: Vec<f64> = grid.points().iter().map(|t| (2.0 / PI).sqrt() * t.sin()).collect();
    let rows = (0..n)
        .map(|_| {
            let a = draw_scalar(dist, rng);
            shape.iter().map(|s| a * s).collect()
        })
        .collect();
    FunctionalSample::from_rows(Arc::clone(grid), rows)
}

/// `Σ_j √λ_j ζ_ij basis_j` with scores drawn by `draw`.
fn sample_expansion(
    n: usize,
    grid: &Arc<Grid>,
    lambdas: &[f64],
    basis: &[Curve],
    rng: &mut SeededRng,
    mut draw: impl FnMut(&mut SeededRng) -> f64,
) -> Result<FunctionalSample> {
    check_n(n)?;
    let p = grid.len();
    let sd: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
    let rows = (0..n)
        .map(|_| {
            let mut row = vec![0.0; p];
            for (s, e) in sd.iter().zip(basis) {
                let c = s * draw(rng);
                for (r, v) in row.iter_mut().zip(e.values()) {
                    *r += c * v;
                }
            }
            row
        })
        .collect();
    FunctionalSample::from_rows(Arc::clone(grid), rows)
}

/// Wiener paths truncated after `terms` expansion terms; the omitted variance
/// is [`wiener_tail_mass`].
pub fn sample_wiener(n: usize, grid: &Arc<Grid>, terms: usize, rng: &mut SeededRng) -> Result<FunctionalSample> {
    if terms == 0 {
        return Err(invalid("number of expansion terms must be at least 1"));
    }
    let basis = (1..=terms)
        .map(|j| wiener_eigenfunction(grid, j))
        .collect::<Result<Vec<_>>>()?;
    log::debug!("wiener expansion truncated at {terms} terms, omitted variance {:e}", wiener_tail_mass(terms));
    sample_expansion(n, grid, &wiener_eigenvalues(terms), &basis, rng, SeededRng::standard_normal)
}

pub fn sample_gaussian_kl(
    n: usize,
    grid: &Arc<Grid>,
    lambdas: &[f64],
    terms: usize,
    rng: &mut SeededRng,
) -> Result<FunctionalSample> {
    let spec = ProcessSpec::GaussianKl {
        lambdas: lambdas.to_vec(),
        terms,
    };
    spec.validate()?;
    let basis = sine_basis(grid, terms)?;
    sample_expansion(n, grid, &lambdas[..terms], &basis, rng, SeededRng::standard_normal)
}

pub fn sample_exp_power_kl(
    n: usize,
    grid: &Arc<Grid>,
    lambdas: &[f64],
    q: f64,
    terms: usize,
    rng: &mut SeededRng,
) -> Result<FunctionalSample> {
    let spec = ProcessSpec::ExpPowerKl {
        lambdas: lambdas.to_vec(),
        q,
        terms,
    };
    spec.validate()?;
    let sampler = ExpPowerSampler::new(q)?;
    let basis = sine_basis(grid, terms)?;
    sample_expansion(n, grid, &lambdas[..terms], &basis, rng, |r| sampler.draw(r))
}
