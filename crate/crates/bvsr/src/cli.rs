//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use bvsr_core::evaluate::{
    calibration_bins, mspe, pooled_power_curve, power_curve, region_summaries, rpv, true_positives_at, Covariance,
    REGION_STEP, REGION_WINDOW,
};
use bvsr_core::probit::LatentConfig;
use bvsr_core::proposal::ProposalConfig;
use bvsr_core::rao_blackwell::{predict, sparsify_by_pip};
use bvsr_core::sampler::ChainConfig;
use bvsr_core::simulate::{sim_genotypes, sim_phenotypes, EffectDist, SimulationSpec};
use bvsr_core::SnpInfo;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::io::{self, SnpRow, TruthFile};
use crate::output::{self, GammaRow, Manifest};
use crate::runner::{run_chains, Dataset, RunSettings};

const DEFAULT_ITERATIONS: usize = 100_000;
/// Thinning aims at about this many recorded draws per chain.
const TARGET_DRAWS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "bvsr", version, about = "Bayesian variable selection regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a continuous phenotype.
    Run(RunArgs),
    /// Fit a 0/1 phenotype through the latent-variable model.
    RunBinary(RunArgs),
    /// Simulate genotypes and a phenotype with known effects.
    Simulate(SimulateArgs),
    /// Score a fitted run against simulated truth.
    Evaluate(EvaluateArgs),
    /// Predict phenotypes of new individuals from a fitted run.
    Predict(PredictArgs),
    /// Recompute region summaries of a fitted run.
    Regions(RegionArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RunArgs {
    /// Mean-genotype file.
    #[arg(long)]
    pub geno: Option<PathBuf>,
    /// Phenotype file, one value per line.
    #[arg(long)]
    pub pheno: Option<PathBuf>,
    /// SNP positions, "id chromosome position" per line.
    #[arg(long)]
    pub pos: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Re-run with the settings stored in a previous run's manifest.json.
    /// Other settings on the command line are ignored.
    #[arg(long)]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
    /// Total iterations including burn-in [default: 100000].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Iterations after burn-in.
    #[arg(long)]
    pub sampling: Option<usize>,
    /// Burn-in iterations [default: 10% of the total].
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Record every n-th sampling iteration [default: about 10^4 draws].
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long, default_value_t = crate::runner::DEFAULT_CHAINS)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Upper bound M on the prior expected model size [default: min(400, p - 1)].
    #[arg(long)]
    pub smax: Option<usize>,
    /// Treat the phenotype as 0/1 labels.
    #[arg(long)]
    pub binary: bool,
    /// Normal-quantile transform the phenotype before fitting.
    #[arg(long)]
    pub quantile_normalize: bool,
    /// Restrict swaps to SNPs at most this many columns apart.
    #[arg(long)]
    pub swap_window: Option<usize>,
    #[arg(long, default_value_t = 0.45)]
    pub add_prob: f64,
    #[arg(long, default_value_t = 0.45)]
    pub remove_prob: f64,
    #[arg(long, default_value_t = 0.10)]
    pub swap_prob: f64,
    #[arg(long, default_value_t = 0.3)]
    pub small_world_prob: f64,
    #[arg(long, default_value_t = 2)]
    pub compound_min: usize,
    #[arg(long, default_value_t = 20)]
    pub compound_max: usize,
    #[arg(long, default_value_t = 0.3)]
    pub rank_mix_uniform: f64,
    #[arg(long, default_value_t = 2000.0)]
    pub rank_geometric_mean: f64,
    #[arg(long, default_value_t = 0.1)]
    pub h_step: f64,
    /// Latent-swap proposals per iteration (binary traits).
    #[arg(long, default_value_t = 1)]
    pub latent_updates: usize,
    #[arg(long, default_value_t = 0.3)]
    pub latent_compound_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EffectArg {
    Normal,
    Laplace,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub p: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Target proportion of variance explained.
    #[arg(long, default_value_t = 0.3)]
    pub pve: f64,
    #[arg(long, default_value_t = 30)]
    pub causal: usize,
    #[arg(long, value_enum, default_value_t = EffectArg::Normal)]
    pub effect: EffectArg,
    #[arg(long, default_value_t = 0.05)]
    pub maf_min: f64,
    #[arg(long, default_value_t = 0.5)]
    pub maf_max: f64,
    /// Convert the phenotype to 0/1 (top half are cases).
    #[arg(long)]
    pub binary: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for geno.txt, pheno.txt, pos.txt and truth.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Output directory of a run.
    #[arg(long)]
    pub run: PathBuf,
    /// truth.json from `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Use the empirical genotype covariance of this file for prediction
    /// error instead of assuming independent SNPs.
    #[arg(long)]
    pub geno: Option<PathBuf>,
    /// SNPs kept by the sparse predictor.
    #[arg(long, default_value_t = 30)]
    pub top: usize,
    /// False-positive count at which true positives are reported.
    #[arg(long, default_value_t = 20)]
    pub max_fp: usize,
    /// Output directory [default: the run directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Mean-genotype file of the new individuals, same SNPs as the run.
    #[arg(long)]
    pub geno: PathBuf,
    /// Keep only the SNPs with the highest PIPs.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, default_value_t = REGION_WINDOW)]
    pub window: u64,
    #[arg(long, default_value_t = REGION_STEP)]
    pub step: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Error classes mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Runtime(err) => eprintln!("error: {err:#}"),
            }
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(a) => run(a, false),
        Command::RunBinary(a) => run(a, true),
        Command::Simulate(a) => simulate(&a).map_err(Into::into),
        Command::Evaluate(a) => evaluate(&a).map_err(Into::into),
        Command::Predict(a) => predict_cmd(&a),
        Command::Regions(a) => regions(&a).map_err(Into::into),
    }
}

/// Burn-in, sampling and thinning after defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub burn_in: usize,
    pub sampling: usize,
    pub thin: usize,
}

pub fn resolve_schedule(a: &RunArgs) -> Result<Schedule, CliError> {
    let (burn_in, sampling) = match (a.iterations, a.sampling) {
        (Some(total), Some(s)) => {
            let b = a.burnin.unwrap_or(total.saturating_sub(s));
            if b + s != total {
                return Err(usage(format!("burn-in {b} plus sampling {s} does not equal iterations {total}")));
            }
            (b, s)
        }
        (None, Some(s)) => (a.burnin.unwrap_or(s / 9), s),
        (total, None) => {
            let total = total.unwrap_or(DEFAULT_ITERATIONS);
            let b = a.burnin.unwrap_or(total / 10);
            if b >= total {
                return Err(usage(format!("burn-in {b} must be less than the total of {total} iterations")));
            }
            (b, total - b)
        }
    };
    if sampling == 0 {
        return Err(usage("no sampling iterations"));
    }
    let thin = a.thin.unwrap_or((sampling / TARGET_DRAWS).max(1));
    if thin == 0 || thin > sampling {
        return Err(usage(format!("thinning interval {thin} must lie in 1..={sampling}")));
    }
    Ok(Schedule { burn_in, sampling, thin })
}

pub fn settings_from(a: &RunArgs, schedule: Schedule) -> RunSettings {
    let mut chain = ChainConfig::new(schedule.burn_in, schedule.sampling, schedule.thin, a.seed);
    chain.keep_draws = true;
    RunSettings {
        chain,
        chains: a.chains,
        proposal: ProposalConfig {
            add_prob: a.add_prob,
            remove_prob: a.remove_prob,
            swap_prob: a.swap_prob,
            small_world_prob: a.small_world_prob,
            compound_min: a.compound_min,
            compound_max: a.compound_max,
            rank_mix_uniform: a.rank_mix_uniform,
            rank_geometric_mean: a.rank_geometric_mean,
            h_step_halfwidth: a.h_step,
            swap_locality_window: a.swap_window,
        },
        max_model_size: a.smax,
        latent: LatentConfig {
            latent_updates: a.latent_updates,
            compound_prob: a.latent_compound_prob,
            compound_min: a.compound_min,
            compound_max: a.compound_max,
        },
    }
}

fn run(cli_args: RunArgs, binary_cmd: bool) -> Result<(), CliError> {
    let out = cli_args.out.clone().ok_or_else(|| usage("--out is required"))?;
    let (mut a, command) = match &cli_args.manifest {
        Some(path) => {
            let m: Manifest = io::read_json(path).map_err(anyhow::Error::from)?;
            (m.config, m.command)
        }
        None => (cli_args.clone(), if binary_cmd { "run-binary" } else { "run" }.to_string()),
    };
    a.out = Some(out.clone());
    let binary = a.binary || command == "run-binary";
    a.binary = binary;
    let geno = a.geno.clone().ok_or_else(|| usage("--geno is required"))?;
    let pheno = a.pheno.clone().ok_or_else(|| usage("--pheno is required"))?;
    if a.chains == 0 {
        return Err(usage("--chains must be positive"));
    }
    let schedule = resolve_schedule(&a)?;
    let settings = settings_from(&a, schedule);
    settings.proposal.validate().map_err(|e| usage(e.to_string()))?;
    settings.latent.validate().map_err(|e| usage(e.to_string()))?;

    let mut g = io::read_genotypes(&geno).map_err(anyhow::Error::from)?;
    if let Some(pos) = &a.pos {
        io::attach_positions(&mut g, pos).map_err(anyhow::Error::from)?;
    }
    let ph = io::read_phenotype(&pheno).map_err(anyhow::Error::from)?;
    let data = Dataset::prepare(g, &ph, binary, a.quantile_normalize)?;
    log::info!(
        "{} individuals, {} SNPs ({} usable), {} chains",
        data.genotypes.n(),
        data.genotypes.p(),
        data.genotypes.eligible_count(),
        settings.chains
    );
    let result = run_chains(&data, &settings)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    output::write_run(&out, &data, &result)?;
    let manifest = Manifest {
        program: "bvsr".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        seed: a.seed,
        y_mean: data.response.mean(),
        schedule,
        max_model_size: result.hyper.max_model_size,
        usable_snps: result.hyper.p,
        config: a,
    };
    io::write_json(&out.join(output::MANIFEST), &manifest).map_err(anyhow::Error::from)?;
    Ok(())
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let spec = SimulationSpec {
        p: a.p,
        n: a.n,
        maf_range: (a.maf_min, a.maf_max),
        n_causal: a.causal,
        effect_dist: match a.effect {
            EffectArg::Normal => EffectDist::Normal,
            EffectArg::Laplace => EffectDist::DoubleExponential,
        },
        target_pve: a.pve,
        binary: a.binary,
        seed: a.seed,
    };
    let (g, _) = sim_genotypes(&spec)?;
    let (y, truth) = sim_phenotypes(&g, &spec)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    io::write_genotypes(&a.out.join("geno.txt"), &g)?;
    io::write_phenotype(&a.out.join("pheno.txt"), &y)?;
    io::write_positions(&a.out.join("pos.txt"), g.snp_meta())?;
    let ids = truth.causal.iter().map(|&j| g.snp_meta()[j].id.clone()).collect();
    let file = TruthFile { causal: truth.causal, ids, beta: truth.beta, tau: truth.tau, pve: truth.pve };
    io::write_json(&a.out.join("truth.json"), &file)?;
    Ok(())
}

fn read_snps(run: &Path) -> anyhow::Result<Vec<SnpRow>> {
    Ok(io::read_csv(&run.join(output::SNPS))?)
}

#[derive(Debug, Serialize)]
struct Evaluation {
    mspe: f64,
    rpv: f64,
    sparse_top: usize,
    mspe_sparse: f64,
    rpv_sparse: f64,
    max_fp: usize,
    true_pos_pip: usize,
    true_pos_single_snp: usize,
    calibration_bins_within_2se: usize,
    calibration_bins_occupied: usize,
}

#[derive(Debug, Serialize)]
struct PowerRow<'a> {
    method: &'a str,
    threshold: f64,
    true_pos: usize,
    false_pos: usize,
}

#[derive(Debug, Serialize)]
struct CalibrationRow {
    lower: f64,
    upper: f64,
    count: usize,
    mean_pip: Option<f64>,
    causal_fraction: Option<f64>,
    two_se: Option<f64>,
}

fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let snps = read_snps(&a.run)?;
    let truth: TruthFile = io::read_json(&a.truth)?;
    let p = snps.len();
    if let Some(&bad) = truth.causal.iter().find(|&&j| j >= p) {
        bail!("truth lists SNP index {bad} but the run has {p} SNPs");
    }
    let mut beta = vec![0.0; p];
    let mut causal = vec![false; p];
    for (&j, &b) in truth.causal.iter().zip(&truth.beta) {
        beta[j] = b;
        causal[j] = true;
    }
    let pip: Vec<f64> = snps.iter().map(|r| r.pip).collect();
    let beta_bar: Vec<f64> = snps.iter().map(|r| r.beta_bar).collect();
    let sparse = sparsify_by_pip(&beta_bar, &pip, a.top);
    let covariance_source;
    let variances: Vec<f64>;
    let cov = match &a.geno {
        Some(path) => {
            covariance_source = io::read_genotypes(path)?.impute_and_center()?;
            if covariance_source.p() != p {
                bail!("genotype file has {} SNPs but the run has {p}", covariance_source.p());
            }
            Covariance::Empirical(&covariance_source)
        }
        None => {
            variances = snps.iter().map(|r| r.col_variance).collect::<Vec<f64>>();
            Covariance::Independent(&variances)
        }
    };
    let bf: Vec<f64> = snps.iter().map(|r| r.single_snp_log10bf).collect();
    let pip_curve = power_curve(&pip, &causal)?;
    let bf_curve = pooled_power_curve(&[(&bf, &causal)])?;
    let bins = calibration_bins(&pip, &causal)?;
    let judged: Vec<bool> = bins.iter().filter_map(|b| b.within_two_se()).collect();
    let (rpv_dense, rpv_sparse) = if truth.causal.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (rpv(&beta_bar, &beta, truth.tau, cov)?, rpv(&sparse, &beta, truth.tau, cov)?)
    };
    let eval = Evaluation {
        mspe: mspe(&beta_bar, &beta, truth.tau, cov)?,
        rpv: rpv_dense,
        sparse_top: a.top,
        mspe_sparse: mspe(&sparse, &beta, truth.tau, cov)?,
        rpv_sparse,
        max_fp: a.max_fp,
        true_pos_pip: true_positives_at(&pip_curve, a.max_fp),
        true_pos_single_snp: true_positives_at(&bf_curve, a.max_fp),
        calibration_bins_within_2se: judged.iter().filter(|&&ok| ok).count(),
        calibration_bins_occupied: judged.len(),
    };
    let out = a.out.clone().unwrap_or_else(|| a.run.clone());
    fs::create_dir_all(&out)?;
    io::write_json(&out.join("evaluation.json"), &eval)?;
    let finite = |v: f64| v.is_finite().then_some(v);
    io::write_csv(
        &out.join("calibration.csv"),
        bins.iter().map(|b| CalibrationRow {
            lower: b.lower,
            upper: b.upper,
            count: b.count,
            mean_pip: finite(b.mean_pip),
            causal_fraction: finite(b.causal_fraction),
            two_se: finite(b.two_se),
        }),
    )?;
    let rows = pip_curve
        .iter()
        .map(|pt| ("pip", pt))
        .chain(bf_curve.iter().map(|pt| ("single_snp", pt)))
        .map(|(method, pt)| PowerRow { method, threshold: pt.threshold, true_pos: pt.true_pos, false_pos: pt.false_pos });
    io::write_csv(&out.join("power.csv"), rows)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PredictionRow {
    individual: usize,
    prediction: f64,
}

fn predict_cmd(a: &PredictArgs) -> Result<(), CliError> {
    let snps = read_snps(&a.run)?;
    let manifest: Manifest = io::read_json(&a.run.join(output::MANIFEST)).map_err(anyhow::Error::from)?;
    let g = io::read_genotypes(&a.geno).map_err(anyhow::Error::from)?;
    if g.p() != snps.len() {
        return Err(anyhow!("dimension mismatch: genotype file has {} SNPs but the fitted model has {}", g.p(), snps.len())
            .into());
    }
    if let Some((j, m)) = g.snp_meta().iter().enumerate().find(|(j, m)| m.id != snps[*j].id) {
        return Err(anyhow!("SNP {} is {:?} in the genotype file but {:?} in the fitted model", j + 1, m.id, snps[j].id).into());
    }
    let pip: Vec<f64> = snps.iter().map(|r| r.pip).collect();
    let mut beta: Vec<f64> = snps.iter().map(|r| r.beta_bar).collect();
    if let Some(top) = a.top {
        beta = sparsify_by_pip(&beta, &pip, top);
    }
    let means: Vec<f64> = snps.iter().map(|r| r.col_mean).collect();
    let mut rows = Vec::with_capacity(g.n());
    for i in 0..g.n() {
        // missing dosages fall back to the training mean
        let x: Vec<f64> =
            (0..g.p()).map(|j| if g.is_missing(i, j) { means[j] } else { g.column(j)[i] }).collect();
        let prediction = predict(&x, &beta, &means, manifest.y_mean).map_err(anyhow::Error::from)?;
        rows.push(PredictionRow { individual: i + 1, prediction });
    }
    io::write_csv(&a.out, rows).map_err(anyhow::Error::from)?;
    Ok(())
}

fn regions(a: &RegionArgs) -> anyhow::Result<()> {
    let snps = read_snps(&a.run)?;
    let gammas: Vec<GammaRow> = io::read_csv(&a.run.join(output::GAMMAS))?;
    let index: std::collections::HashMap<&str, usize> =
        snps.iter().enumerate().map(|(j, r)| (r.id.as_str(), j)).collect();
    let draws = gammas
        .iter()
        .map(|row| {
            row.snps
                .split_whitespace()
                .map(|id| index.get(id).copied().ok_or_else(|| anyhow!("unknown SNP {id:?} in {}", output::GAMMAS)))
                .collect::<anyhow::Result<Vec<usize>>>()
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let meta: Vec<SnpInfo> =
        snps.iter().map(|r| SnpInfo { id: r.id.clone(), chromosome: r.chr.clone(), position: r.pos }).collect();
    let pip: Vec<f64> = snps.iter().map(|r| r.pip).collect();
    let bf: Vec<f64> = snps.iter().map(|r| r.single_snp_log10bf).collect();
    let slices: Vec<&[usize]> = draws.iter().map(|d| d.as_slice()).collect();
    let summaries = region_summaries(&pip, &slices, &meta, Some(&bf), a.window, a.step)?;
    io::write_csv(&a.out, summaries.iter().map(output::RegionRow::from))?;
    Ok(())
}
