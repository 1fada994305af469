//! Tail statistic `S` and the Monte Carlo correction factor `ψ`.

use crate::error::{invalid, Error, Result};
use crate::fda::check_positive;

/// `S = ε⁻² Σ_j (θ_j − x_j)²` over the truncated tail.
pub fn tail_statistic(x_tail: &[f64], theta_tail: &[f64], eps: f64) -> Result<f64> {
    if x_tail.len() != theta_tail.len() {
        return Err(Error::LengthMismatch {
            expected: x_tail.len(),
            got: theta_tail.len(),
        });
    }
    check_positive("eps", eps)?;
    Ok(squared_gap(x_tail, theta_tail) / (eps * eps))
}

fn squared_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum()
}

/// Plug-in estimate of `ψ(x, ε, d) = E[(1 − S)^{d/2} 1{S < 1}]`, averaging
/// over the tail scores of each sample row.
///
/// Rows may be empty (no tail), in which case every `S` is zero and the
/// result is exactly 1.
pub fn correction_factor<'a, I>(sample_tails: I, x_tail: &[f64], eps: f64, d: usize) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    check_positive("eps", eps)?;
    let eps2 = eps * eps;
    let half_d = 0.5 * d as f64;
    let mut acc = 0.0;
    let mut n = 0usize;
    for row in sample_tails {
        if row.len() != x_tail.len() {
            return Err(Error::LengthMismatch {
                expected: x_tail.len(),
                got: row.len(),
            });
        }
        n += 1;
        let s = squared_gap(x_tail, row) / eps2;
        if s < 1.0 {
            acc += (1.0 - s).powf(half_d);
        }
    }
    if n == 0 {
        return Err(invalid("correction factor needs at least one sample row"));
    }
    let psi = acc / n as f64;
    if psi == 0.0 {
        log::warn!("correction factor is 0: eps = {eps} is too small for truncation level d = {d}");
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn identical_tails_give_zero() {
        assert_eq!(tail_statistic(&[0.1, -2.0], &[0.1, -2.0], 0.3).unwrap(), 0.0);
    }

    #[test]
    fn unit_ratio() {
        assert_relative_eq!(tail_statistic(&[0.0], &[0.3], 0.3).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_term_tail() {
        assert_relative_eq!(tail_statistic(&[0.0, 0.0], &[0.1, 0.2], 0.5).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn tail_length_mismatch() {
        assert!(matches!(
            tail_statistic(&[0.0], &[0.1, 0.2], 0.5),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn finite_dimensional_tails_give_one() {
        let x = [0.4, -0.1];
        let rows = vec![x.to_vec(); 5];
        let psi = correction_factor(rows.iter().map(Vec::as_slice), &x, 0.01, 3).unwrap();
        assert_eq!(psi, 1.0);
        let empty: Vec<Vec<f64>> = vec![vec![]; 3];
        assert_eq!(correction_factor(empty.iter().map(Vec::as_slice), &[], 0.01, 3).unwrap(), 1.0);
    }

    #[test]
    fn all_outside_gives_zero() {
        let rows = [vec![2.0], vec![-1.5]];
        let psi = correction_factor(rows.iter().map(Vec::as_slice), &[0.0], 1.0, 2).unwrap();
        assert_eq!(psi, 0.0);
    }

    #[test]
    fn hand_evaluated_average() {
        // S = (0, 0.5, 2) with eps = 1 and d = 2
        let rows = [vec![0.0], vec![0.5f64.sqrt()], vec![2f64.sqrt()]];
        let psi = correction_factor(rows.iter().map(Vec::as_slice), &[0.0], 1.0, 2).unwrap();
        assert_relative_eq!(psi, 0.5, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn psi_bounded_and_monotone_in_eps(
            rows in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 1..40),
            x in prop::collection::vec(-0.5..0.5f64, 3),
            eps in 0.01..2.0f64,
            d in 1usize..8,
        ) {
            let a = correction_factor(rows.iter().map(Vec::as_slice), &x, eps, d).unwrap();
            let b = correction_factor(rows.iter().map(Vec::as_slice), &x, eps * 1.3, d).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a);
        }
    }
}
