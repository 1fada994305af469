use std::sync::Arc;

use proptest::prelude::*;
use smbp::density::{self, BandwidthRule, KernelFamily};
use smbp::experiments;
use smbp::fpca;
use smbp::io;
use smbp::processes::{Distribution, ProcessSpec, SeededRng};
use smbp::smbp::{classify_decay, factorize, DecayKind};
use smbp::{inner_product, Curve, Grid};

#[test]
fn csv_round_trip_preserves_fpca() {
    let spec = ProcessSpec::WienerKl { terms: 30 };
    let grid = spec.default_grid();
    let sample = spec.sample(80, &grid, &mut SeededRng::new(1, 0)).unwrap();
    let mut buf = Vec::new();
    io::write_sample(&sample, &mut buf).unwrap();
    let back = io::read_sample(buf.as_slice()).unwrap();
    let a = fpca::fit(&sample).unwrap();
    let b = fpca::fit(&back).unwrap();
    assert_eq!(a.eigenvalues(), b.eigenvalues());
}

#[test]
fn estimated_eigenfunctions_track_the_truth() {
    let spec = ProcessSpec::WienerKl { terms: 50 };
    let grid = spec.default_grid();
    let sample = spec.sample(3000, &grid, &mut SeededRng::new(2, 0)).unwrap();
    let est = fpca::fit(&sample).unwrap();
    let truth = spec.true_system(&grid).unwrap();
    for j in 0..3 {
        let c = inner_product(&est.eigenfunctions()[j], &truth.eigenfunctions()[j]).unwrap();
        assert!(c.abs() > 0.98, "component {j}: {c}");
        let rel = est.eigenvalues()[j] / truth.eigenvalues()[j];
        assert!((rel - 1.0).abs() < 0.1, "eigenvalue {j}: ratio {rel}");
    }
}

#[test]
fn plug_in_density_matches_the_truth_at_the_center() {
    let spec = ProcessSpec::Sine(Distribution::StdNormal);
    let grid = spec.default_grid();
    let sample = spec.sample(2000, &grid, &mut SeededRng::new(3, 0)).unwrap();
    let x = spec.target_curves(&grid, &[0.0]).unwrap();
    let est = density::estimate_surrogate_density(&sample, &x, 1, KernelFamily::Epanechnikov, BandwidthRule::NormalScale)
        .unwrap();
    let truth = spec.true_intensity(0.0).unwrap();
    assert!((est.values[0] / truth - 1.0).abs() < 0.1, "{} vs {truth}", est.values[0]);
}

#[test]
fn wiener_spectrum_decays_slowly() {
    let lambdas = smbp::processes::wiener_eigenvalues(2000);
    assert_eq!(classify_decay(&lambdas, 40).unwrap().kind, DecayKind::Slower);
}

#[test]
fn factorization_with_full_tail_mass_matches_empirical() {
    // two-term process: d = 1 leaves a single tail component
    let lambdas = vec![0.5, 0.02];
    let spec = ProcessSpec::GaussianKl {
        lambdas: lambdas.clone(),
        terms: 2,
    };
    let grid = Arc::new(Grid::uniform(0.0, 1.0, 30).unwrap());
    let sys = spec.true_system(&grid).unwrap();
    let sample = spec.sample(100_000, &grid, &mut SeededRng::new(4, 0)).unwrap();
    let x = Curve::zeros(Arc::clone(&grid));
    let f1 = (2.0 * std::f64::consts::PI * lambdas[0]).powf(-0.5);
    let eps = 0.15;
    let rep = factorize(&sample, &x, eps, 1, &sys, f1, 2).unwrap();
    let emp = smbp::smbp::empirical_smbp(&sample, &x, eps).unwrap();
    assert!((rep.phi_d / emp - 1.0).abs() < 0.1, "{} vs {emp}", rep.phi_d);
}

proptest! {
    #[test]
    fn rmsep_is_scale_free(v in prop::collection::vec(0.01..5.0f64, 2..20), e in prop::collection::vec(0.0..5.0f64, 20), c in 0.1..10.0f64) {
        let est = &e[..v.len()];
        let r = experiments::rmsep(est, &v).unwrap();
        let sv: Vec<f64> = v.iter().map(|x| c * x).collect();
        let se: Vec<f64> = est.iter().map(|x| c * x).collect();
        let rs = experiments::rmsep(&se, &sv).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!((r - rs).abs() <= 1e-10 * r.max(1.0));
    }

    #[test]
    fn samples_depend_only_on_seed_and_stream(seed in any::<u64>(), stream in 0u64..1000) {
        let spec = ProcessSpec::Sine(Distribution::StdChiSq8);
        let grid = Arc::new(Grid::uniform(0.0, 1.0, 5).unwrap());
        let a = spec.sample(3, &grid, &mut SeededRng::new(seed, stream)).unwrap();
        let b = spec.sample(3, &grid, &mut SeededRng::new(seed, stream)).unwrap();
        for (x, y) in a.curves().iter().zip(b.curves()) {
            prop_assert_eq!(x.values(), y.values());
        }
    }
}
