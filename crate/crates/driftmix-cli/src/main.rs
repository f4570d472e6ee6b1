//! `driftmix` — simulate, fit, summarize, diagnose, and validate
//! longitudinal inverse-probit drift-diffusion mixed models.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftmix::diagnostics::{ess_proxy, geweke_default, tracked_chains};
use driftmix::error::{DriftError, Result};
use driftmix::io;
use driftmix::rng::{substream, StreamTag};
use driftmix::sampler::{run_chain, McmcConfig};
use driftmix::simulate::{default_design, generate};

#[derive(Parser)]
#[command(name = "driftmix", version, about = "Longitudinal inverse-probit drift-diffusion mixed models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset plus ground-truth files.
    Simulate(SimulateArgs),
    /// Fit the model to a dataset by MCMC and persist the posterior samples.
    Fit(FitArgs),
    /// Posterior means, credible intervals, co-clustering, point partition.
    Summarize(SummarizeArgs),
    /// Geweke and autocorrelation tables for tracked parameters.
    Diagnose(DiagnoseArgs),
    /// Compare a fit against simulation ground truth (MSE, RI, ARI, coverage).
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Use the built-in four-cluster design (sizes 2, 2, 6, 6).
    #[arg(long, default_value_t = true)]
    default_design: bool,
    #[arg(long, required = true)]
    seed: u64,
    /// Output directory for dataset.csv and the truth files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    /// Trials per stimulus per block per subject.
    #[arg(long)]
    trials_per_stimulus: Option<usize>,
    #[arg(long)]
    boundary: Option<f64>,
    #[arg(long)]
    subject_effect_sd: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV (header subject,block,trial,stimulus,response).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, required = true)]
    seed: u64,
    /// Optional key=value config file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    m_prob: Option<usize>,
    #[arg(long)]
    mh_step: Option<f64>,
    #[arg(long)]
    boundary: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Target sum of each projected drift fiber (defaults to d0).
    #[arg(long)]
    sum_k: Option<f64>,
    #[arg(long)]
    z_max: Option<usize>,
    #[arg(long)]
    basis_size: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the inferred number of categories.
    #[arg(long)]
    d0: Option<usize>,
    /// Number of chains; chain c uses seed + c and writes to chain_<c>/.
    #[arg(long, default_value_t = 1)]
    chains: usize,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    max_lag: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Directory holding design.json and the truth CSVs.
    #[arg(long)]
    truth: PathBuf,
    /// Optional report CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut design = default_design();
    design.seed = args.seed;
    if let Some(n) = args.subjects {
        design.n = n;
    }
    if let Some(t) = args.blocks {
        design.t_blocks = t;
    }
    if let Some(l) = args.trials_per_stimulus {
        design.l_trials = l;
    }
    if let Some(b) = args.boundary {
        design.b = b;
    }
    if let Some(sd) = args.subject_effect_sd {
        design.subject_effect_sd = sd;
    }
    let mut rng = substream(design.seed, StreamTag::Simulate, &[]);
    let (dataset, truth) = generate(&design, &mut rng)?;
    std::fs::create_dir_all(&args.out)?;
    io::write_dataset(args.out.join("dataset.csv"), &dataset)?;
    io::write_truth(&args.out, &design, &truth)?;
    println!(
        "simulated {} trials (n={}, T={}, L={}, d0={}) into {}",
        dataset.records().len(),
        design.n,
        design.t_blocks,
        design.l_trials,
        design.d0,
        args.out.display()
    );
    Ok(())
}

fn read_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| DriftError::Data {
            line: lineno as u64 + 1,
            message: format!("expected key=value, found {line:?}"),
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_from<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            DriftError::Config(format!("config key {key} has unparseable value {raw:?}"))
        }),
    }
}

fn build_config(args: &FitArgs, d0: usize, t_blocks: usize) -> Result<McmcConfig> {
    let mut cfg = McmcConfig::default_for(d0, t_blocks, args.seed)?;
    if let Some(path) = &args.config {
        let map = read_config_file(path)?;
        if let Some(v) = parse_from(&map, "n_iter")? {
            cfg.n_iter = v;
        }
        if let Some(v) = parse_from(&map, "burn_in")? {
            cfg.burn_in = v;
        }
        if let Some(v) = parse_from(&map, "thin")? {
            cfg.thin = v;
        }
        if let Some(v) = parse_from(&map, "m_prob")? {
            cfg.m_prob = v;
        }
        if let Some(v) = parse_from(&map, "mh_step")? {
            cfg.mh_step = v;
        }
        if let Some(v) = parse_from(&map, "boundary")? {
            cfg.b = v;
        }
        if let Some(v) = parse_from(&map, "eps")? {
            cfg.spec.eps = v;
        }
        if let Some(v) = parse_from(&map, "sum_k")? {
            cfg.spec.k = v;
        }
        if let Some(v) = parse_from(&map, "z_max")? {
            cfg.z_max = v;
        }
        if let Some(v) = parse_from(&map, "basis_size")? {
            cfg.k_basis = v;
        }
        if let Some(v) = parse_from(&map, "degree")? {
            cfg.degree = v;
        }
        if let Some(v) = parse_from(&map, "alpha")? {
            cfg.alpha = v;
        }
    }
    if let Some(v) = args.n_iter {
        cfg.n_iter = v;
    }
    if let Some(v) = args.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = args.thin {
        cfg.thin = v;
    }
    if let Some(v) = args.m_prob {
        cfg.m_prob = v;
    }
    if let Some(v) = args.mh_step {
        cfg.mh_step = v;
    }
    if let Some(v) = args.boundary {
        cfg.b = v;
    }
    if let Some(v) = args.eps {
        cfg.spec.eps = v;
    }
    if let Some(v) = args.sum_k {
        cfg.spec.k = v;
    }
    if let Some(v) = args.z_max {
        cfg.z_max = v;
    }
    if let Some(v) = args.basis_size {
        cfg.k_basis = v;
    }
    if let Some(v) = args.degree {
        cfg.degree = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    Ok(cfg)
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    if args.chains == 0 {
        return Err(DriftError::Config("need at least one chain".into()));
    }
    let dataset = io::read_dataset(&args.data, args.d0)?;
    let base = build_config(&args, dataset.d0, dataset.t_blocks)?;
    base.validate(&dataset)?;
    std::fs::create_dir_all(&args.out)?;

    let chain_dirs: Vec<PathBuf> = if args.chains == 1 {
        vec![args.out.clone()]
    } else {
        (0..args.chains).map(|c| args.out.join(format!("chain_{c}"))).collect()
    };

    use rayon::prelude::*;
    let results: Vec<Result<()>> = chain_dirs
        .par_iter()
        .enumerate()
        .map(|(c, dir)| {
            let mut cfg = base.clone();
            cfg.seed = base.seed + c as u64;
            let samples = run_chain(&dataset, &cfg)?;
            io::write_samples(&samples, dir)?;
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    println!(
        "fitted {} chain(s) of {} iterations ({} stored draws each) into {}",
        args.chains,
        base.n_iter,
        base.stored_draws(),
        args.out.display()
    );
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<()> {
    let samples = io::read_samples(&args.samples)?;
    let summary = io::summarize(&samples, args.level)?;
    io::write_summary(&summary, samples.meta.d0, &args.out)?;
    println!(
        "summaries at level {} for {} draws written to {}",
        args.level,
        samples.draws.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let samples = io::read_samples(&args.samples)?;
    std::fs::create_dir_all(&args.out)?;
    let chains = tracked_chains(&samples);

    let mut geweke_csv = csv::Writer::from_path(args.out.join("geweke.csv"))?;
    geweke_csv.write_record(["parameter", "z", "p", "ess"])?;
    let mut acf_csv = csv::Writer::from_path(args.out.join("autocorrelation.csv"))?;
    acf_csv.write_record(["parameter", "lag", "acf"])?;
    let mut computed = 0usize;
    for (name, series) in &chains {
        let max_lag = args.max_lag.min(series.len().saturating_sub(1));
        match geweke_default(series) {
            Ok(g) => {
                let ess = ess_proxy(series, max_lag).unwrap_or(f64::NAN);
                geweke_csv.write_record(&[
                    name.clone(),
                    g.z.to_string(),
                    g.p.to_string(),
                    ess.to_string(),
                ])?;
                computed += 1;
            }
            // constant chains (e.g. a drift pinned at the floor) have no statistic
            Err(_) => geweke_csv.write_record(&[
                name.clone(),
                String::new(),
                String::new(),
                String::new(),
            ])?,
        }
        if let Ok(acf) = driftmix::diagnostics::autocorrelation(series, max_lag) {
            for (lag, rho) in acf.iter().enumerate() {
                acf_csv.write_record(&[name.clone(), lag.to_string(), rho.to_string()])?;
            }
        }
    }
    geweke_csv.flush()?;
    acf_csv.flush()?;
    println!(
        "diagnostics for {} of {} tracked parameters written to {}",
        computed,
        chains.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let samples = io::read_samples(&args.samples)?;
    let (_, truth) = io::read_truth(&args.truth)?;
    let report = io::validate_samples(&samples, &truth.prob, &truth.cluster_labels, args.level)?;
    println!("probability MSE: {:.6}", report.mse);
    println!("rand index: {:.4}", report.rand_index);
    println!("adjusted rand index: {:.4}", report.adjusted_rand_index);
    println!(
        "coverage at level {}: {:.4} over {} cells",
        report.level, report.coverage, report.coverage_cells
    );
    if let Some(path) = args.out {
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(["metric", "value"])?;
        writer.write_record(["mse", &report.mse.to_string()])?;
        writer.write_record(["rand_index", &report.rand_index.to_string()])?;
        writer.write_record(["adjusted_rand_index", &report.adjusted_rand_index.to_string()])?;
        writer.write_record(["coverage", &report.coverage.to_string()])?;
        writer.write_record(["coverage_cells", &report.coverage_cells.to_string()])?;
        writer.write_record(["level", &report.level.to_string()])?;
        writer.flush()?;
    }
    Ok(())
}
