//! Functional principal component analysis on a shared grid.
//!
//! The covariance operator is discretized as `C_kl = (1/n) Σ_i (X_i − X̄)(t_k)(X_i − X̄)(t_l)`.
//! Its eigenfunctions in the quadrature inner product are obtained from the
//! symmetric matrix `W^{1/2} C W^{1/2}` (with `W` the diagonal of trapezoid
//! weights) and mapped back through `W^{-1/2}`, which makes them orthonormal
//! under [`inner_product`](crate::fda::inner_product).

use std::io::Write;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::fda::{same_grid, weighted_dot, Curve, FunctionalSample, Grid};
use crate::linalg::{jacobi_eigen, SquareMatrix};

/// Off-diagonal tolerance for the Jacobi sweeps, relative to `‖A‖_F`.
pub const JACOBI_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const NEGATIVE_CLAMP: f64 = 1e-10;

pub fn empirical_mean(sample: &FunctionalSample) -> Curve {
    let p = sample.grid().len();
    let n = sample.len() as f64;
    let mut acc = vec![0.0; p];
    for c in sample.curves() {
        for (a, v) in acc.iter_mut().zip(c.values()) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    Curve::new(Arc::clone(sample.grid()), acc).expect("mean of finite curves is finite")
}

/// Pointwise covariance matrix with the `1/n` normalization.
pub fn empirical_covariance(sample: &FunctionalSample) -> SquareMatrix {
    let mean = empirical_mean(sample);
    covariance_about(sample, &mean)
}

fn covariance_about(sample: &FunctionalSample, mean: &Curve) -> SquareMatrix {
    let p = sample.grid().len();
    let n = sample.len() as f64;
    let mut c = SquareMatrix::zeros(p);
    let mut centered = vec![0.0; p];
    for curve in sample.curves() {
        for ((z, v), m) in centered.iter_mut().zip(curve.values()).zip(mean.values()) {
            *z = v - m;
        }
        for k in 0..p {
            let zk = centered[k];
            if zk == 0.0 {
                continue;
            }
            for l in k..p {
                c[(k, l)] += zk * centered[l];
            }
        }
    }
    for k in 0..p {
        for l in k..p {
            let v = c[(k, l)] / n;
            c[(k, l)] = v;
            c[(l, k)] = v;
        }
    }
    c
}

/// Estimated Karhunen–Loève system: mean, descending eigenvalues and
/// quadrature-orthonormal eigenfunctions.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    grid: Arc<Grid>,
    mean: Curve,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Curve>,
}

impl EigenSystem {
    /// Assembles a system from known parts, e.g. the true eigenfunctions of a
    /// simulated process.
    pub fn from_parts(mean: Curve, eigenvalues: Vec<f64>, eigenfunctions: Vec<Curve>) -> Result<Self> {
        if eigenvalues.len() != eigenfunctions.len() {
            return Err(Error::LengthMismatch {
                expected: eigenvalues.len(),
                got: eigenfunctions.len(),
            });
        }
        if eigenvalues.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(invalid("eigenvalues must be finite and nonnegative"));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("eigenvalues must be sorted in descending order"));
        }
        for f in &eigenfunctions {
            mean.check_same_grid(f)?;
        }
        Ok(Self {
            grid: Arc::clone(mean.grid()),
            mean,
            eigenvalues,
            eigenfunctions,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mean(&self) -> &Curve {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Curve] {
        &self.eigenfunctions
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn check_d(&self, d: usize) -> Result<()> {
        if d == 0 || d > self.len() {
            Err(Error::DimensionOutOfRange { d, max: self.len() })
        } else {
            Ok(())
        }
    }

    /// First `d` scores `⟨x − X̄, ξ̂_j⟩` of a single curve.
    pub fn project(&self, x: &Curve, d: usize) -> Result<Vec<f64>> {
        self.check_d(d)?;
        x.check_same_grid(&self.mean)?;
        Ok(self.project_values(x.values(), d))
    }

    fn project_values(&self, values: &[f64], d: usize) -> Vec<f64> {
        let w = self.grid.weights();
        let centered: Vec<f64> = values
            .iter()
            .zip(self.mean.values())
            .map(|(v, m)| v - m)
            .collect();
        self.eigenfunctions[..d]
            .iter()
            .map(|xi| weighted_dot(w, &centered, xi.values()))
            .collect()
    }

    /// Score matrix of a whole sample on the first `d` eigenfunctions.
    pub fn scores(&self, sample: &FunctionalSample, d: usize) -> Result<ScoreMatrix> {
        self.check_d(d)?;
        if !same_grid(sample.grid(), &self.grid) {
            return Err(Error::GridMismatch);
        }
        let mut data = Vec::with_capacity(sample.len() * d);
        for c in sample.curves() {
            data.extend(self.project_values(c.values(), d));
        }
        ScoreMatrix::new(sample.len(), d, data)
    }

    /// Writes one row per eigenfunction: `λ̂_j, ξ̂_j(t_1), …, ξ̂_j(t_p)`,
    /// preceded by a header row carrying the grid.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "eigenvalue")?;
        for t in self.grid.points() {
            write!(out, ",{t}")?;
        }
        writeln!(out)?;
        for (l, xi) in self.eigenvalues.iter().zip(&self.eigenfunctions) {
            write!(out, "{l}")?;
            for v in xi.values() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Solves the weighted eigenproblem of the discretized covariance operator.
pub fn eigendecompose(cov: &SquareMatrix, grid: &Arc<Grid>, mean: Curve) -> Result<EigenSystem> {
    let p = grid.len();
    if cov.dim() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            got: cov.dim(),
        });
    }
    if !same_grid(grid, mean.grid()) {
        return Err(Error::GridMismatch);
    }
    let asym = cov.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NonSymmetric(asym));
    }
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let mut a = cov.clone();
    for k in 0..p {
        for l in 0..p {
            a[(k, l)] *= sqrt_w[k] * sqrt_w[l];
        }
    }
    let eig = jacobi_eigen(&a, JACOBI_TOL)?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.values[j].total_cmp(&eig.values[i]));

    let mut eigenvalues = Vec::with_capacity(p);
    let mut eigenfunctions = Vec::with_capacity(p);
    for &col in &order {
        let mut lambda = eig.values[col];
        if lambda < 0.0 {
            if lambda <= -NEGATIVE_CLAMP {
                return Err(Error::NegativeEigenvalue(lambda));
            }
            lambda = 0.0;
        }
        let mut xi: Vec<f64> = (0..p).map(|k| eig.vectors[(k, col)] / sqrt_w[k]).collect();
        orient(&mut xi);
        eigenvalues.push(lambda);
        eigenfunctions.push(Curve::new(Arc::clone(grid), xi)?);
    }
    Ok(EigenSystem {
        grid: Arc::clone(grid),
        mean,
        eigenvalues,
        eigenfunctions,
    })
}

/// Flips the sign so the entry of largest magnitude is positive.
fn orient(xi: &mut [f64]) {
    let mut best = 0usize;
    for k in 1..xi.len() {
        if xi[k].abs() > xi[best].abs() {
            best = k;
        }
    }
    if xi[best] < 0.0 {
        xi.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Mean, covariance and eigendecomposition in one step.
pub fn fit(sample: &FunctionalSample) -> Result<EigenSystem> {
    let mean = empirical_mean(sample);
    let cov = covariance_about(sample, &mean);
    eigendecompose(&cov, sample.grid(), mean)
}

/// `n × d` matrix of principal component scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if d == 0 {
            return Err(invalid("score dimension must be at least 1"));
        }
        if data.len() != n * d {
            return Err(Error::LengthMismatch {
                expected: n * d,
                got: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::LengthMismatch {
                expected: d,
                got: r.len(),
            });
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Columns `from..to` as a new matrix.
    pub fn columns(&self, from: usize, to: usize) -> Result<ScoreMatrix> {
        if from >= to || to > self.d {
            return Err(invalid(format!(
                "column range {from}..{to} invalid for {} columns",
                self.d
            )));
        }
        let data = self.rows().flat_map(|r| r[from..to].iter().copied()).collect();
        ScoreMatrix::new(self.n, to - from, data)
    }

    pub fn leading(&self, d: usize) -> Result<ScoreMatrix> {
        self.columns(0, d)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScoreMatrix {
        ScoreMatrix {
            n: self.n,
            d: self.d,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Fraction of explained variance `Σ_{j≤d} λ_j / Σ_j λ_j`.
pub fn fev(eigenvalues: &[f64], d: usize) -> Result<f64> {
    if d == 0 || d > eigenvalues.len() {
        return Err(Error::DimensionOutOfRange {
            d,
            max: eigenvalues.len(),
        });
    }
    let total = spectrum_total(eigenvalues)?;
    Ok((eigenvalues[..d].iter().sum::<f64>() / total).min(1.0))
}

fn spectrum_total(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.iter().any(|l| !(*l >= 0.0)) {
        return Err(invalid("eigenvalues must be nonnegative"));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    Ok(total)
}

/// Smallest `d` whose FEV reaches `threshold`.
pub fn select_dimension_fev(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    select_dimension_fev_capped(eigenvalues, threshold, eigenvalues.len())
}

/// As [`select_dimension_fev`], considering only `d ≤ max_d`.
pub fn select_dimension_fev_capped(eigenvalues: &[f64], threshold: f64, max_d: usize) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!("FEV threshold must lie in (0,1), got {threshold}")));
    }
    let total = spectrum_total(eigenvalues)?;
    let mut partial = 0.0;
    for (k, l) in eigenvalues.iter().take(max_d).enumerate() {
        partial += l;
        if partial / total >= threshold {
            return Ok(k + 1);
        }
    }
    Err(Error::FevUnreachable {
        threshold,
        max_fev: partial / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fda::inner_product;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sine_grid() -> Arc<Grid> {
        Arc::new(Grid::uniform(0.0, PI, 100).unwrap())
    }

    fn e1(g: &Arc<Grid>) -> Curve {
        Curve::from_fn(g.clone(), |t| (2.0 / PI).sqrt() * t.sin()).unwrap()
    }

    fn sample_of(g: &Arc<Grid>, coeffs: &[f64], basis: &Curve) -> FunctionalSample {
        let curves = coeffs.iter().map(|&a| basis.scale(a)).collect();
        FunctionalSample::new(g.clone(), curves).unwrap()
    }

    #[test]
    fn mean_of_opposite_curves_is_zero() {
        let g = sine_grid();
        let s = sample_of(&g, &[1.5, -1.5], &e1(&g));
        assert!(empirical_mean(&s).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mean_of_identical_curves() {
        let g = sine_grid();
        let f = Curve::from_fn(g.clone(), |t| t.cos() + 2.0).unwrap();
        let s = FunctionalSample::new(g, vec![f.clone(); 4]).unwrap();
        let m = empirical_mean(&s);
        for (a, b) in m.values().iter().zip(f.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn mean_of_sine_sample() {
        let g = sine_grid();
        let s = sample_of(&g, &[1.0, -1.0, 2.0], &e1(&g));
        let m = empirical_mean(&s);
        for (k, &t) in g.points().iter().enumerate() {
            let want = (2.0 / 3.0) * (2.0 / PI).sqrt() * t.sin();
            assert_relative_eq!(m.values()[k], want, epsilon = 1e-14);
        }
    }

    #[test]
    fn covariance_of_identical_curves_is_zero() {
        let g = sine_grid();
        let s = FunctionalSample::new(g.clone(), vec![e1(&g); 3]).unwrap();
        assert!(empirical_covariance(&s).as_slice().iter().all(|&v| v.abs() < 1e-30));
    }

    #[test]
    fn covariance_of_plus_minus_g_is_outer_product() {
        let g = Arc::new(Grid::uniform(0.0, 1.0, 7).unwrap());
        let f = Curve::from_fn(g.clone(), |t| 1.0 + t * t).unwrap();
        let s = FunctionalSample::new(g.clone(), vec![f.clone(), f.scale(-1.0)]).unwrap();
        let c = empirical_covariance(&s);
        for k in 0..7 {
            for l in 0..7 {
                assert_relative_eq!(c[(k, l)], f.values()[k] * f.values()[l], epsilon = 1e-14);
                assert_eq!(c[(k, l)], c[(l, k)]);
            }
        }
    }

    #[test]
    fn rank_one_decomposition() {
        let g = sine_grid();
        let c = 1.7;
        let e = e1(&g);
        let s = sample_of(&g, &[c, -c], &e);
        let sys = fit(&s).unwrap();
        let ev = sys.eigenvalues();
        // ‖e‖² on this grid equals 1 up to rounding
        let nrm2 = inner_product(&e, &e).unwrap();
        assert_relative_eq!(ev[0], c * c * nrm2, epsilon = 1e-12);
        assert!(ev[1].abs() < 1e-12);
        let xi = &sys.eigenfunctions()[0];
        let diff = xi.sub(&e.scale(1.0 / nrm2.sqrt())).unwrap();
        assert!(crate::fda::norm(&diff) < 1e-10);
    }

    #[test]
    fn zero_covariance_gives_zero_spectrum() {
        let g = Arc::new(Grid::uniform(0.0, 1.0, 5).unwrap());
        let sys = eigendecompose(&SquareMatrix::zeros(5), &g, Curve::zeros(g.clone())).unwrap();
        assert!(sys.eigenvalues().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn asymmetric_input_rejected() {
        let g = Arc::new(Grid::uniform(0.0, 1.0, 3).unwrap());
        let mut c = SquareMatrix::identity(3);
        c[(0, 1)] = 1e-6;
        assert!(matches!(
            eigendecompose(&c, &g, Curve::zeros(g.clone())),
            Err(Error::NonSymmetric(_))
        ));
    }

    #[test]
    fn strongly_negative_eigenvalue_rejected() {
        let g = Arc::new(Grid::uniform(0.0, 1.0, 3).unwrap());
        let mut c = SquareMatrix::identity(3);
        c[(2, 2)] = -1.0;
        assert!(matches!(
            eigendecompose(&c, &g, Curve::zeros(g.clone())),
            Err(Error::NegativeEigenvalue(_))
        ));
    }

    #[test]
    fn mean_curve_scores_zero() {
        let g = sine_grid();
        let s = sample_of(&g, &[0.3, -1.0, 2.0, 0.1], &e1(&g));
        let sys = fit(&s).unwrap();
        let z = sys.project(sys.mean(), 3).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn projection_on_exact_basis() {
        let g = sine_grid();
        let e = e1(&g);
        let sys = EigenSystem::from_parts(Curve::zeros(g.clone()), vec![1.0], vec![e.clone()]).unwrap();
        for b in [-2.0, 0.5, 3.0] {
            let s = sys.project(&e.scale(b), 1).unwrap();
            assert!((s[0] - b).abs() < 1e-3);
        }
    }

    #[test]
    fn d_out_of_range() {
        let g = sine_grid();
        let sys = EigenSystem::from_parts(Curve::zeros(g.clone()), vec![1.0], vec![e1(&g)]).unwrap();
        assert!(matches!(sys.project(&e1(&g), 2), Err(Error::DimensionOutOfRange { .. })));
        assert!(matches!(sys.project(&e1(&g), 0), Err(Error::DimensionOutOfRange { .. })));
    }

    fn wiener_spectrum(len: usize) -> Vec<f64> {
        (1..=len)
            .map(|j| ((j as f64 - 0.5) * PI).powi(-2))
            .collect()
    }

    #[test]
    fn wiener_fev_values() {
        let l = wiener_spectrum(1_000_000);
        assert!((fev(&l, 1).unwrap() - 8.0 / (PI * PI)).abs() < 1e-6);
        assert!((fev(&l, 1).unwrap() - 0.811).abs() < 1e-3);
        assert!((fev(&l, 6).unwrap() - 0.966).abs() < 1e-3);
        assert_eq!(fev(&l[..10], 10).unwrap(), 1.0);
    }

    #[test]
    fn fev_errors() {
        assert!(matches!(fev(&[0.0, 0.0], 1), Err(Error::ZeroSpectrum)));
        assert!(fev(&[1.0], 2).is_err());
    }

    #[test]
    fn fev_dimension_selection() {
        let l = wiener_spectrum(1_000_000);
        assert_eq!(select_dimension_fev(&l, 0.90).unwrap(), 2);
        // FEV(4) = 0.94960 analytically, which the published table rounds to 0.950
        assert_eq!(select_dimension_fev(&l, 0.949).unwrap(), 4);
        assert_eq!(select_dimension_fev(&l, 0.95).unwrap(), 5);
        assert_eq!(select_dimension_fev(&[1.0, 0.0, 0.0], 0.5).unwrap(), 1);
    }

    #[test]
    fn unreachable_fev_names_maximum() {
        let l = wiener_spectrum(1000);
        match select_dimension_fev_capped(&l, 0.99, 6) {
            Err(Error::FevUnreachable { max_fev, .. }) => {
                assert!((max_fev - fev(&l, 6).unwrap()).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            select_dimension_fev(&[f64::NAN], 0.5),
            Err(Error::InvalidArgument(_))
        ));
        assert!(select_dimension_fev(&[1.0], 1.0).is_err());
        assert!(select_dimension_fev(&[1.0], 0.0).is_err());
    }
}
