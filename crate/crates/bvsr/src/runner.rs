//! Data preparation and parallel multi-chain runs.

use anyhow::{bail, Context};
use bvsr_core::evaluate::single_snp_bfs;
use bvsr_core::probit::{init_latent, run_chain_binary, LatentConfig};
use bvsr_core::proposal::{rank_snps, MoveKernel, ProposalConfig};
use bvsr_core::sampler::{run_chain, ChainConfig, PosteriorSamples};
use bvsr_core::{GenotypeMatrix, Hyperparameters, Phenotype, Response};
use rayon::prelude::*;

pub const THREADS_ENV: &str = "BVSR_THREADS";
pub const DEFAULT_CHAINS: usize = 4;

/// Centered genotypes and the response the sampler runs on.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub genotypes: GenotypeMatrix,
    /// Continuous response, or the initial latent vector for 0/1 labels.
    pub response: Response,
    /// The 0/1 labels of a binary trait.
    pub labels: Option<Vec<f64>>,
    /// Response used by the single-SNP baseline (the labels themselves for
    /// a binary trait).
    pub baseline: Response,
}

impl Dataset {
    /// Drops individuals with missing phenotype, imputes and centers the
    /// genotypes and builds the response.
    pub fn prepare(g: GenotypeMatrix, pheno: &Phenotype, binary: bool, quantile_normalize: bool) -> anyhow::Result<Self> {
        if g.n() != pheno.len() {
            bail!("genotype file has {} individuals but phenotype file has {}", g.n(), pheno.len());
        }
        let (g, ph) = pheno.drop_missing(&g)?;
        let genotypes = g.impute_and_center()?;
        if binary {
            let labels = ph.values().to_vec();
            let response = Response::new(&init_latent(&labels)?)?;
            let baseline = Response::new(&labels)?;
            return Ok(Dataset { genotypes, response, labels: Some(labels), baseline });
        }
        let ph = if quantile_normalize { ph.quantile_normalize()? } else { ph };
        let response = Response::new(ph.values())?;
        Ok(Dataset { genotypes, baseline: response.clone(), response, labels: None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub chain: ChainConfig,
    pub chains: usize,
    pub proposal: ProposalConfig,
    /// `M`; `None` uses `min(400, p − 1)`.
    pub max_model_size: Option<usize>,
    pub latent: LatentConfig,
}

impl RunSettings {
    pub fn new(chain: ChainConfig) -> Self {
        RunSettings {
            chain,
            chains: DEFAULT_CHAINS,
            proposal: ProposalConfig::default(),
            max_model_size: None,
            latent: LatentConfig::default(),
        }
    }
}

pub struct RunOutput {
    pub hyper: Hyperparameters,
    pub pooled: PosteriorSamples,
    /// Rao–Blackwellized PIPs of each chain.
    pub chain_pips: Vec<Vec<f64>>,
    /// Recorded draws per chain; pooled draws are stored chain by chain.
    pub chain_draws: Vec<usize>,
    /// Natural-log single-SNP Bayes factors.
    pub single_snp_bf: Vec<f64>,
}

impl RunOutput {
    /// Largest absolute PIP difference between any two chains.
    pub fn max_pip_disagreement(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.chain_pips.len() {
            for b in a + 1..self.chain_pips.len() {
                for (x, y) in self.chain_pips[a].iter().zip(&self.chain_pips[b]) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }
}

/// Threads from `BVSR_THREADS`, or rayon's default.
pub fn thread_count() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be positive");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

pub fn hyperparameters(g: &GenotypeMatrix, max_model_size: Option<usize>) -> anyhow::Result<Hyperparameters> {
    let p = g.eligible_count();
    if p < 3 {
        bail!("need at least 3 non-constant SNPs, found {p}");
    }
    let m = match max_model_size {
        Some(m) => m,
        None => {
            let m = bvsr_core::model::DEFAULT_MAX_MODEL_SIZE.min(p - 1);
            if m < bvsr_core::model::DEFAULT_MAX_MODEL_SIZE {
                log::warn!("only {p} usable SNPs; capping the model size bound at {m}");
            }
            m
        }
    };
    Ok(Hyperparameters::new(p, m)?)
}

/// Runs `settings.chains` chains in parallel; chain `c` uses random
/// stream `c` of the seed, so results do not depend on the thread count.
pub fn run_chains(data: &Dataset, settings: &RunSettings) -> anyhow::Result<RunOutput> {
    settings.chain.validate()?;
    settings.proposal.validate()?;
    settings.latent.validate()?;
    if settings.chains == 0 {
        bail!("need at least one chain");
    }
    let g = &data.genotypes;
    let hyper = hyperparameters(g, settings.max_model_size)?;
    let kernel = MoveKernel::new(rank_snps(g, &data.response), settings.proposal.clone())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let chains: Vec<PosteriorSamples> = pool.install(|| {
        (0..settings.chains)
            .into_par_iter()
            .map(|c| match &data.labels {
                Some(labels) => {
                    run_chain_binary(g, labels, &kernel, hyper, &settings.chain, &settings.latent, c as u64)
                }
                None => run_chain(g, &data.response, &kernel, hyper, &settings.chain, c as u64),
            })
            .collect::<Result<_, _>>()
    })?;
    let chain_pips = chains.iter().map(|c| c.pip()).collect::<Result<Vec<_>, _>>()?;
    let chain_draws = chains.iter().map(|c| c.draws().len()).collect();
    let pooled = PosteriorSamples::merge(chains)?;
    let single_snp_bf = single_snp_bfs(g, &data.baseline);
    Ok(RunOutput { hyper, pooled, chain_pips, chain_draws, single_snp_bf })
}
