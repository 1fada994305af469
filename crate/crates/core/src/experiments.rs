//! Monte Carlo harness: replicated simulation, FPCA, kernel estimation of
//! the surrogate density at target curves, and RMSEP/APE summaries.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::density::{BandwidthRule, DensityEstimator, KernelFamily};
use crate::error::{invalid, Error, Result};
use crate::fda::Grid;
use crate::fpca;
use crate::processes::{ProcessSpec, SeededRng};

pub const DEFAULT_REPLICATIONS: usize = 200;

/// Truth values below this are left out of APE summaries.
pub const APE_TRUTH_FLOOR: f64 = 1e-6;

/// `Σ(f̂ − f)² / Σ f²`.
pub fn rmsep(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            expected: truths.len(),
            got: estimates.len(),
        });
    }
    let denom: f64 = truths.iter().map(|t| t * t).sum();
    if !(denom > 0.0) {
        return Err(invalid("RMSEP undefined: all truth values are zero"));
    }
    let num: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t) * (e - t)).sum();
    Ok(num / denom)
}

/// `|f̂ − f| / |f|`.
pub fn ape(estimate: f64, truth: f64) -> Result<f64> {
    if truth == 0.0 || !truth.is_finite() {
        return Err(invalid(format!("APE undefined for truth value {truth}")));
    }
    Ok((estimate - truth).abs() / truth.abs())
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub n: usize,
    pub d_values: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub b_values: Vec<f64>,
    pub kernel: KernelFamily,
    pub bandwidth: BandwidthRule,
    pub grid: Arc<Grid>,
}

impl ExperimentConfig {
    /// Default table settings: the process's own grid and `b`-grid, Gaussian
    /// kernel with the normal-scale bandwidth, 200 replications.
    pub fn new(process: ProcessSpec, n: usize, d_values: Vec<usize>, base_seed: u64) -> Self {
        let grid = process.default_grid();
        let b_values = process.b_grid();
        Self {
            process,
            n,
            d_values,
            replications: DEFAULT_REPLICATIONS,
            base_seed,
            b_values,
            kernel: KernelFamily::Gaussian,
            bandwidth: BandwidthRule::NormalScale,
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        if self.n < 2 {
            return Err(invalid("n must be at least 2"));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.d_values.is_empty() || self.d_values.contains(&0) {
            return Err(invalid("d values must be nonempty and at least 1"));
        }
        if self.b_values.is_empty() || self.b_values.iter().any(|b| !b.is_finite()) {
            return Err(invalid("b grid must be nonempty and finite"));
        }
        Ok(())
    }

    /// Label used in the `dist` column of output tables.
    pub fn label(&self) -> String {
        match &self.process {
            ProcessSpec::Sine(dist) => dist.name().to_string(),
            other => other.name(),
        }
    }

    /// SHA-256 over a canonical rendering of every field that affects output.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("process={:?}\n", self.process));
        h.update(format!("n={}\nd={:?}\nreps={}\nseed={}\n", self.n, self.d_values, self.replications, self.base_seed));
        h.update(format!("kernel={}\nbandwidth={}\n", self.kernel, self.bandwidth));
        for v in self.grid.points().iter().chain(&self.b_values) {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn truths(&self) -> Result<Vec<Vec<f64>>> {
        self.d_values
            .iter()
            .map(|&d| {
                self.b_values
                    .iter()
                    .map(|&b| self.process.true_score_density(b, d))
                    .collect()
            })
            .collect()
    }
}

/// Metrics of one replication: RMSEP per `d`, and APE per `b` at the first `d`
/// (`None` where the truth is below [`APE_TRUTH_FLOOR`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub rmsep: Vec<f64>,
    pub ape: Vec<Option<f64>>,
    pub estimates: Vec<Vec<f64>>,
}

fn replication_with_truths(config: &ExperimentConfig, truths: &[Vec<f64>], rep: u64) -> Result<ReplicationOutcome> {
    let mut rng = SeededRng::new(config.base_seed, rep);
    let sample = config.process.sample(config.n, &config.grid, &mut rng)?;
    let sys = fpca::fit(&sample)?;
    let targets = config.process.target_curves(&config.grid, &config.b_values)?;

    let mut rmseps = Vec::with_capacity(config.d_values.len());
    let mut estimates = Vec::with_capacity(config.d_values.len());
    for (&d, truth) in config.d_values.iter().zip(truths) {
        let scores = sys.scores(&sample, d)?;
        let est = DensityEstimator::with_rule(scores, config.kernel, config.bandwidth)?;
        let values = targets
            .iter()
            .map(|x| est.evaluate(&sys.project(x, d)?))
            .collect::<Result<Vec<f64>>>()?;
        rmseps.push(rmsep(&values, truth)?);
        estimates.push(values);
    }
    let ape = estimates[0]
        .iter()
        .zip(&truths[0])
        .map(|(&e, &t)| if t < APE_TRUTH_FLOOR { Ok(None) } else { ape(e, t).map(Some) })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicationOutcome {
        rmsep: rmseps,
        ape,
        estimates,
    })
}

/// One replication as a pure function of `(config, rep)`: simulate on
/// stream `rep`, run FPCA, project the targets and estimate by KDE.
pub fn run_replication(config: &ExperimentConfig, rep: u64) -> Result<ReplicationOutcome> {
    config.validate()?;
    replication_with_truths(config, &config.truths()?, rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionSummary {
    pub d: usize,
    pub mean: f64,
    pub std: f64,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApeSummary {
    pub b: f64,
    /// `None` when the truth at `b` is excluded.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub label: String,
    pub n: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub config_hash: String,
    pub dims: Vec<DimensionSummary>,
    pub ape: Vec<ApeSummary>,
}

impl ExperimentResult {
    pub fn summary(&self, d: usize) -> Option<&DimensionSummary> {
        self.dims.iter().find(|s| s.d == d)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate(config: &ExperimentConfig, outcomes: Vec<ReplicationOutcome>) -> ExperimentResult {
    let dims = config
        .d_values
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let values: Vec<f64> = outcomes.iter().map(|o| o.rmsep[k]).collect();
            let (mean, std) = mean_std(&values);
            DimensionSummary { d, mean, std, values }
        })
        .collect();
    let ape = config
        .b_values
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let vals: Option<Vec<f64>> = outcomes.iter().map(|o| o.ape[i]).collect();
            ApeSummary {
                b,
                mean: vals.map(|v| mean_std(&v).0),
            }
        })
        .collect();
    ExperimentResult {
        label: config.label(),
        n: config.n,
        replications: config.replications,
        base_seed: config.base_seed,
        config_hash: config.hash(),
        dims,
        ape,
    }
}

/// Runs all replications on the global rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let truths = config.truths()?;
    let outcomes: Vec<Result<ReplicationOutcome>> = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| replication_with_truths(config, &truths, rep))
        .collect();
    let mut ok = Vec::with_capacity(outcomes.len());
    for (index, o) in outcomes.into_iter().enumerate() {
        ok.push(o.map_err(|e| Error::Replication {
            index: index as u64,
            source: Box::new(e),
        })?);
    }
    let excluded = truths[0].iter().filter(|t| **t < APE_TRUTH_FLOOR).count();
    if excluded > 0 {
        log::info!("{}: {excluded} b-grid points excluded from APE (truth below {APE_TRUTH_FLOOR:e})", config.label());
    }
    Ok(aggregate(config, ok))
}

/// As [`run_experiment`] on a dedicated pool of `threads` workers. Output does
/// not depend on `threads`: replications are merged in index order.
pub fn run_experiment_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

fn is_sine(r: &ExperimentResult) -> bool {
    ["normal", "t5", "chisq8"].contains(&r.label.as_str())
}

/// `dist,n,mean,std` for the sine-process results, at their first `d`.
pub fn write_table1<W: Write>(results: &[ExperimentResult], mut out: W) -> Result<()> {
    writeln!(out, "dist,n,mean,std")?;
    for r in results.iter().filter(|r| is_sine(r)) {
        let s = &r.dims[0];
        writeln!(out, "{},{},{},{}", r.label, r.n, s.mean, s.std)?;
    }
    Ok(())
}

/// `n,d,mean,std` for every other process.
pub fn write_table2<W: Write>(results: &[ExperimentResult], mut out: W) -> Result<()> {
    writeln!(out, "n,d,mean,std")?;
    for r in results.iter().filter(|r| !is_sine(r)) {
        for s in &r.dims {
            writeln!(out, "{},{},{},{}", r.n, s.d, s.mean, s.std)?;
        }
    }
    Ok(())
}

/// `dist,n,b,mean_ape`, skipping excluded `b` points.
pub fn write_ape<W: Write>(results: &[ExperimentResult], mut out: W) -> Result<()> {
    writeln!(out, "dist,n,b,mean_ape")?;
    for r in results {
        for a in &r.ape {
            if let Some(m) = a.mean {
                writeln!(out, "{},{},{},{}", r.label, r.n, a.b, m)?;
            }
        }
    }
    Ok(())
}
