mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use smbp::density::{self, BandwidthRule, KernelFamily};
use smbp::experiments::{self, ExperimentConfig};
use smbp::fpca;
use smbp::io;
use smbp::processes::{Distribution, ProcessSpec, SeededRng, DEFAULT_WIENER_TERMS};
use smbp::smbp::{empirical_smbp, factorize, small_ball_hits, FactorizationReport};
use smbp::Grid;

use config::{parse_list, Config};
use output::OutputDir;

/// Small-ball probability factorization for functional data.
#[derive(Parser)]
#[command(name = "smbp", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel sections.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a sample of curves and write it as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// sine, wiener, gaussian-kl or exp-power-kl.
        #[arg(long)]
        process: Option<String>,
        /// Amplitude law for the sine process: normal, t5 or chisq8.
        #[arg(long)]
        dist: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Functional PCA of a sample: eigensystem and scores.
    Fpca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Number of scores to keep; chosen by --fev when absent.
        #[arg(long)]
        d: Option<usize>,
        /// Explained-variance threshold used when --d is absent.
        #[arg(long)]
        fev: Option<f64>,
    },
    /// Kernel estimate of the surrogate density at target curves.
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Target curves on the sample grid, in the sample CSV format.
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        kernel: Option<String>,
        /// normal-scale, rate:<p>[:<c>] or fixed:<h>.
        #[arg(long)]
        bandwidth: Option<String>,
    },
    /// Small-ball probability factorization at one target curve.
    Smbp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Row of the target file to use (0-based).
        #[arg(long, default_value_t = 0)]
        target_index: usize,
        /// Comma-separated radii.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        /// Number of components used for the correction factor.
        #[arg(long)]
        terms: Option<usize>,
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        bandwidth: Option<String>,
    },
    /// Replicated simulation study writing table1.csv, table2.csv and ape.csv.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        bandwidth: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common, process, dist, n } => simulate(&common, process, dist, n),
        Command::Fpca { common, input, d, fev } => cmd_fpca(&common, &input, d, fev),
        Command::Density {
            common,
            input,
            targets,
            d,
            kernel,
            bandwidth,
        } => cmd_density(&common, &input, &targets, d, kernel, bandwidth),
        Command::Smbp {
            common,
            input,
            target,
            target_index,
            eps,
            d,
            terms,
            kernel,
            bandwidth,
        } => cmd_smbp(&common, &input, &target, target_index, eps, d, terms, kernel, bandwidth),
        Command::Experiment {
            common,
            replications,
            kernel,
            bandwidth,
        } => cmd_experiment(&common, replications, kernel, bandwidth),
    }
}

fn load_config(common: &Common) -> Result<Config> {
    match &common.config {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

/// A flag wins over its config key.
fn pick<T>(flag: Option<T>, cfg: &Config, key: &str) -> Result<Option<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.value(key),
    }
}

fn resolve_seed(common: &Common, cfg: &Config, required: bool) -> Result<Option<u64>> {
    let from_cfg: Option<u64> = cfg.value("seed")?;
    match (common.seed, from_cfg) {
        (Some(a), Some(b)) if a != b => bail!("--seed {a} conflicts with config seed {b}"),
        (Some(a), _) => Ok(Some(a)),
        (None, Some(_)) if required => bail!("--seed is required here; the config seed is only checked against it"),
        (None, b) => Ok(b),
    }
}

fn kernel_and_rule(cfg: &Config, kernel: Option<String>, bandwidth: Option<String>) -> Result<(KernelFamily, BandwidthRule)> {
    let kernel = match pick(kernel, cfg, "kernel")? {
        Some(k) => k.parse::<KernelFamily>()?,
        None => KernelFamily::default(),
    };
    let rule = match pick(bandwidth, cfg, "bandwidth")? {
        Some(b) => b.parse::<BandwidthRule>()?,
        None => BandwidthRule::default(),
    };
    Ok((kernel, rule))
}

fn build_process(cfg: &Config, name: &str, dist: Distribution) -> Result<ProcessSpec> {
    let spec = match name {
        "sine" => ProcessSpec::Sine(dist),
        "wiener" => ProcessSpec::WienerKl {
            terms: cfg.value("terms")?.unwrap_or(DEFAULT_WIENER_TERMS),
        },
        "gaussian-kl" | "exp-power-kl" => {
            let lambdas: Vec<f64> = cfg
                .list("lambdas")?
                .ok_or_else(|| anyhow!("process {name} needs a 'lambdas' list"))?;
            let terms = cfg.value("terms")?.unwrap_or(lambdas.len());
            if name == "gaussian-kl" {
                ProcessSpec::GaussianKl { lambdas, terms }
            } else {
                let q = cfg.value("q")?.ok_or_else(|| anyhow!("process exp-power-kl needs 'q'"))?;
                ProcessSpec::ExpPowerKl { lambdas, q, terms }
            }
        }
        other => bail!("unknown process '{other}' (expected sine, wiener, gaussian-kl or exp-power-kl)"),
    };
    spec.validate()?;
    Ok(spec)
}

fn process_grid(cfg: &Config, spec: &ProcessSpec) -> Result<std::sync::Arc<Grid>> {
    match cfg.value::<usize>("grid_points")? {
        None => Ok(spec.default_grid()),
        Some(p) => {
            let default = spec.default_grid();
            Ok(std::sync::Arc::new(Grid::uniform(default.start(), default.end(), p)?))
        }
    }
}

fn simulate(common: &Common, process: Option<String>, dist: Option<String>, n: Option<usize>) -> Result<()> {
    let cfg = load_config(common)?;
    let seed = resolve_seed(common, &cfg, false)?.ok_or_else(|| anyhow!("simulate needs --seed (or a config seed)"))?;
    let name = pick(process, &cfg, "process")?.unwrap_or_else(|| "sine".into());
    let dist = pick(dist, &cfg, "dist")?.map_or(Ok(Distribution::default()), |d| d.parse())?;
    let n = pick(n, &cfg, "n")?.ok_or_else(|| anyhow!("simulate needs --n or a config 'n'"))?;
    let spec = build_process(&cfg, &name, dist)?;
    let grid = process_grid(&cfg, &spec)?;
    let sample = spec.sample(n, &grid, &mut SeededRng::new(seed, 0))?;

    let mut out = OutputDir::create(&common.out)?;
    out.write_with("sample.csv", |buf| io::write_sample(&sample, buf))?;
    let settings = json!({ "process": format!("{spec:?}"), "n": n, "grid_points": grid.len() });
    out.finish("simulate", common.config.as_deref(), Some(seed), settings)
}

fn read_sample(path: &Path) -> Result<smbp::FunctionalSample> {
    io::read_sample_file(path).with_context(|| format!("reading {}", path.display()))
}

fn choose_d(sys: &smbp::EigenSystem, d: Option<usize>, fev: Option<f64>) -> Result<usize> {
    match d {
        Some(d) => Ok(d),
        None => Ok(fpca::select_dimension_fev(sys.eigenvalues(), fev.unwrap_or(0.95))?),
    }
}

fn cmd_fpca(common: &Common, input: &Path, d: Option<usize>, fev: Option<f64>) -> Result<()> {
    let cfg = load_config(common)?;
    let sample = read_sample(input)?;
    let sys = fpca::fit(&sample)?;
    let d = choose_d(&sys, pick(d, &cfg, "d")?, pick(fev, &cfg, "fev")?)?;
    let scores = sys.scores(&sample, d)?;

    let mut out = OutputDir::create(&common.out)?;
    out.write_with("eigensystem.csv", |buf| sys.write_csv(buf))?;
    out.write_with("scores.csv", |buf| {
        use std::io::Write;
        let header: Vec<String> = (1..=d).map(|j| format!("score_{j}")).collect();
        writeln!(buf, "{}", header.join(","))?;
        for row in scores.rows() {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(buf, "{}", cells.join(","))?;
        }
        Ok(())
    })?;
    let settings = json!({
        "input": input.display().to_string(),
        "d": d,
        "fev": fpca::fev(sys.eigenvalues(), d)?,
    });
    out.finish("fpca", common.config.as_deref(), None, settings)
}

fn cmd_density(
    common: &Common,
    input: &Path,
    targets: &Path,
    d: Option<usize>,
    kernel: Option<String>,
    bandwidth: Option<String>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let sample = read_sample(input)?;
    let file = std::fs::File::open(targets).with_context(|| format!("opening {}", targets.display()))?;
    let curves = io::read_curves_on(sample.grid(), file).with_context(|| format!("reading {}", targets.display()))?;
    let d = pick(d, &cfg, "d")?.ok_or_else(|| anyhow!("density needs --d or a config 'd'"))?;
    let (kernel, rule) = kernel_and_rule(&cfg, kernel, bandwidth)?;
    let est = density::estimate_surrogate_density(&sample, &curves, d, kernel, rule)?;
    let ids: Vec<String> = (1..=curves.len()).map(|i| format!("x{i}")).collect();

    let mut out = OutputDir::create(&common.out)?;
    out.write_with("density.csv", |buf| est.write_csv(&ids, buf))?;
    let settings = json!({
        "input": input.display().to_string(),
        "targets": targets.display().to_string(),
        "d": d,
        "kernel": kernel.name(),
        "bandwidth_rule": rule.to_string(),
        "bandwidth": est.bandwidth,
    });
    out.finish("density", common.config.as_deref(), None, settings)
}

#[derive(Serialize)]
struct SmbpEntry {
    #[serde(flatten)]
    factorization: FactorizationReport,
    empirical: f64,
    hits: usize,
}

#[allow(clippy::too_many_arguments)]
fn cmd_smbp(
    common: &Common,
    input: &Path,
    target: &Path,
    target_index: usize,
    eps: Option<String>,
    d: Option<usize>,
    terms: Option<usize>,
    kernel: Option<String>,
    bandwidth: Option<String>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let sample = read_sample(input)?;
    let file = std::fs::File::open(target).with_context(|| format!("opening {}", target.display()))?;
    let curves = io::read_curves_on(sample.grid(), file).with_context(|| format!("reading {}", target.display()))?;
    let x = curves
        .get(target_index)
        .ok_or_else(|| anyhow!("target file has {} curves, index {target_index} requested", curves.len()))?;
    let eps_text = pick(eps, &cfg, "eps")?.ok_or_else(|| anyhow!("smbp needs --eps or a config 'eps'"))?;
    let radii: Vec<f64> = parse_list("eps", &eps_text)?;
    let (kernel, rule) = kernel_and_rule(&cfg, kernel, bandwidth)?;

    let sys = fpca::fit(&sample)?;
    let d = choose_d(&sys, pick(d, &cfg, "d")?, cfg.value("fev")?)?;
    let terms = pick(terms, &cfg, "terms")?.unwrap_or(sys.len().min(sample.len()));
    let f_d = density::estimate_with_system(&sample, &sys, std::slice::from_ref(x), d, kernel, rule)?.values[0];

    let mut entries = Vec::with_capacity(radii.len());
    for &e in &radii {
        entries.push(SmbpEntry {
            factorization: factorize(&sample, x, e, d, &sys, f_d, terms)?,
            empirical: empirical_smbp(&sample, x, e)?,
            hits: small_ball_hits(&sample, x, e)?,
        });
    }
    let report = json!({ "d": d, "terms": terms, "kernel": kernel.name(), "bandwidth_rule": rule.to_string(), "entries": entries });
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');

    let mut out = OutputDir::create(&common.out)?;
    out.write("smbp.json", &bytes)?;
    let settings = json!({
        "input": input.display().to_string(),
        "target": target.display().to_string(),
        "target_index": target_index,
    });
    out.finish("smbp", common.config.as_deref(), None, settings)
}

fn cmd_experiment(
    common: &Common,
    replications: Option<usize>,
    kernel: Option<String>,
    bandwidth: Option<String>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let seed = resolve_seed(common, &cfg, true)?.ok_or_else(|| anyhow!("experiment mode requires --seed"))?;
    let name = cfg.get("process").unwrap_or("sine").to_string();
    let dists: Vec<Distribution> = cfg.list("dist")?.unwrap_or_else(|| vec![Distribution::StdNormal]);
    let sizes: Vec<usize> = cfg.list("n")?.ok_or_else(|| anyhow!("experiment config needs 'n'"))?;
    let d_values: Vec<usize> = cfg.list("d")?.unwrap_or_else(|| vec![1]);
    let reps = pick(replications, &cfg, "reps")?.unwrap_or(experiments::DEFAULT_REPLICATIONS);
    let kernel = match pick(kernel, &cfg, "kernel")? {
        Some(k) => k.parse::<KernelFamily>()?,
        None => KernelFamily::Gaussian,
    };
    let rule = match pick(bandwidth, &cfg, "bandwidth")? {
        Some(b) => b.parse::<BandwidthRule>()?,
        None => BandwidthRule::NormalScale,
    };

    let specs: Vec<ProcessSpec> = if name == "sine" {
        dists.iter().map(|&dist| ProcessSpec::Sine(dist)).collect::<Vec<_>>()
    } else {
        vec![build_process(&cfg, &name, Distribution::default())?]
    };
    let mut results = Vec::new();
    let mut hashes = Vec::new();
    for spec in &specs {
        let grid = process_grid(&cfg, spec)?;
        for &n in &sizes {
            let mut c = ExperimentConfig::new(spec.clone(), n, d_values.clone(), seed);
            c.replications = reps;
            c.kernel = kernel;
            c.bandwidth = rule;
            c.grid = grid.clone();
            log::info!("running {} n={n} with {reps} replications", c.label());
            let r = match common.threads {
                Some(t) => experiments::run_experiment_threads(&c, t)?,
                None => experiments::run_experiment(&c)?,
            };
            hashes.push(json!({ "label": r.label, "n": n, "config_hash": r.config_hash }));
            results.push(r);
        }
    }

    let mut out = OutputDir::create(&common.out)?;
    if name == "sine" {
        out.write_with("table1.csv", |buf| experiments::write_table1(&results, buf))?;
    } else {
        out.write_with("table2.csv", |buf| experiments::write_table2(&results, buf))?;
    }
    out.write_with("ape.csv", |buf| experiments::write_ape(&results, buf))?;
    let settings = json!({
        "process": name,
        "replications": reps,
        "d": d_values,
        "kernel": kernel.name(),
        "bandwidth_rule": rule.to_string(),
        "experiments": hashes,
    });
    out.finish("experiment", common.config.as_deref(), Some(seed), settings)
}
