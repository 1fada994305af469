//! Discretized curves on a shared grid and the trapezoidal realization of
//! the L² inner product.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// Strictly increasing abscissae with trapezoidal quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let p = points.len();
        if p < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {p}")));
        }
        if let Some(k) = points.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        if let Some(k) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points not strictly increasing at index {}",
                k + 1
            )));
        }
        let mut weights = vec![0.0; p];
        weights[0] = 0.5 * (points[1] - points[0]);
        weights[p - 1] = 0.5 * (points[p - 1] - points[p - 2]);
        for k in 1..p - 1 {
            weights[k] = 0.5 * (points[k + 1] - points[k - 1]);
        }
        Ok(Self { points, weights })
    }

    /// `p` equispaced points on `[a, b]`, endpoints included.
    pub fn uniform(a: f64, b: f64, p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {p}")));
        }
        if !(b > a) {
            return Err(Error::InvalidGrid(format!("empty interval [{a}, {b}]")));
        }
        let step = (b - a) / (p - 1) as f64;
        let mut points: Vec<f64> = (0..p).map(|k| a + k as f64 * step).collect();
        points[p - 1] = b;
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Quadrature of sampled values against the grid weights.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

/// A function sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_same_grid(&self, other: &Curve) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Curve {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Curve {
        Curve {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// `Σ_k w_k f(t_k) g(t_k)`.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(weighted_dot(f.grid.weights(), &f.values, &g.values))
}

pub fn norm(f: &Curve) -> f64 {
    weighted_dot(f.grid.weights(), &f.values, &f.values).sqrt()
}

/// `‖f − g‖` without allocating the difference.
pub fn distance(f: &Curve, g: &Curve) -> Result<f64> {
    f.check_same_grid(g)?;
    let w = f.grid.weights();
    let s: f64 = (0..w.len())
        .map(|k| {
            let d = f.values[k] - g.values[k];
            w[k] * d * d
        })
        .sum();
    Ok(s.sqrt())
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// `n ≥ 1` curves sharing one grid.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    grid: Arc<Grid>,
    curves: Vec<Curve>,
}

impl FunctionalSample {
    pub fn new(grid: Arc<Grid>, curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::EmptySample);
        }
        if curves.iter().any(|c| !same_grid(&grid, &c.grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, curves })
    }

    /// Builds a sample from raw rows, each of grid length.
    pub fn from_rows(grid: Arc<Grid>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let curves = rows
            .into_iter()
            .map(|r| Curve::new(Arc::clone(&grid), r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, curves)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn check_curve(&self, x: &Curve) -> Result<()> {
        if same_grid(&self.grid, x.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(a: f64, b: f64, p: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(a, b, p).unwrap())
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let g = Grid::new(vec![0.0, 0.1, 0.35, 0.9, 2.0]).unwrap();
        assert_relative_eq!(g.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(g.weights()[0], 0.05);
        assert_relative_eq!(g.weights()[2], 0.4);
        assert_relative_eq!(g.weights()[4], 0.55);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(vec![1.0]).is_err());
        assert!(Grid::new(vec![0.0, 0.0, 1.0]).is_err());
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
        assert!(Grid::uniform(1.0, 0.0, 10).is_err());
    }

    #[test]
    fn curve_rejects_wrong_length_and_nan() {
        let g = grid(0.0, 1.0, 5);
        assert!(Curve::new(g.clone(), vec![0.0; 4]).is_err());
        assert!(Curve::new(g, vec![0.0, 1.0, f64::INFINITY, 0.0, 0.0]).is_err());
    }

    #[test]
    fn scaled_sine_has_unit_norm() {
        let g = grid(0.0, PI, 100);
        let f = Curve::from_fn(g, |t| (2.0 / PI).sqrt() * t.sin()).unwrap();
        assert!((inner_product(&f, &f).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_curve_is_orthogonal_to_everything() {
        let g = grid(0.0, 1.0, 17);
        let z = Curve::zeros(g.clone());
        let f = Curve::from_fn(g, |t| t.exp()).unwrap();
        assert_eq!(inner_product(&z, &f).unwrap(), 0.0);
    }

    #[test]
    fn constant_one_on_unit_interval() {
        let g = grid(0.0, 1.0, 13);
        let one = Curve::from_fn(g, |_| 1.0).unwrap();
        assert_eq!(inner_product(&one, &one).unwrap(), 1.0);
        assert_eq!(norm(&one), 1.0);
    }

    #[test]
    fn constant_norm_scales_with_interval() {
        let g = grid(-1.0, 3.0, 9);
        let c = Curve::from_fn(g, |_| -2.5).unwrap();
        assert_relative_eq!(norm(&c), 2.5 * 4f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn identity_norm() {
        let g = grid(0.0, 1.0, 101);
        let f = Curve::from_fn(g, |t| t).unwrap();
        assert!((norm(&f) - (1.0f64 / 3.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let f = Curve::zeros(grid(0.0, 1.0, 10));
        let g = Curve::zeros(grid(0.0, 1.0, 11));
        assert!(matches!(inner_product(&f, &g), Err(Error::GridMismatch)));
        // equal points on distinct allocations are the same grid
        let h = Curve::zeros(grid(0.0, 1.0, 10));
        assert!(inner_product(&f, &h).is_ok());
    }

    #[test]
    fn quadrature_error_is_second_order() {
        // ∫_0^1 e^t dt = e - 1, ∫_0^1 t^3 dt = 1/4
        let cases: [(fn(f64) -> f64, f64); 2] =
            [(|t: f64| t.exp(), 1f64.exp() - 1.0), (|t: f64| t * t * t, 0.25)];
        for (f, exact) in cases {
            let err = |p: usize| {
                let g = Grid::uniform(0.0, 1.0, p).unwrap();
                let v: Vec<f64> = g.points().iter().map(|&t| f(t)).collect();
                (g.integrate(&v) - exact).abs()
            };
            let ratio = err(21) / err(41);
            assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn empty_sample_rejected() {
        let g = grid(0.0, 1.0, 4);
        assert!(matches!(
            FunctionalSample::new(g, vec![]),
            Err(Error::EmptySample)
        ));
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(a in prop::collection::vec(-10.0..10.0f64, 12),
                          b in prop::collection::vec(-10.0..10.0f64, 12)) {
            let g = Arc::new(Grid::new((0..12).map(|k| (k as f64).powf(1.3)).collect()).unwrap());
            let f = Curve::new(g.clone(), a).unwrap();
            let h = Curve::new(g, b).unwrap();
            let ip = inner_product(&f, &h).unwrap();
            prop_assert!(ip.abs() <= norm(&f) * norm(&h) * (1.0 + 1e-12) + 1e-12);
            prop_assert!((ip - inner_product(&h, &f).unwrap()).abs() < 1e-9);
        }
    }
}
