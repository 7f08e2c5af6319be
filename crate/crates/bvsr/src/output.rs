//! Files written by a run.

use std::path::Path;

use anyhow::Context;
use bvsr_core::evaluate::{region_summaries, RegionSummary, REGION_STEP, REGION_WINDOW};
use serde::{Deserialize, Serialize};

use crate::cli::{RunArgs, Schedule};
use crate::io::{self, SnpRow};
use crate::runner::{Dataset, RunOutput};

pub const SNPS: &str = "snps.csv";
pub const TRACE: &str = "trace.csv";
pub const REGIONS: &str = "regions.csv";
pub const GAMMAS: &str = "gammas.csv";
pub const CHAIN_PIPS: &str = "chain_pips.csv";
pub const SUMMARY: &str = "summary.json";
pub const MANIFEST: &str = "manifest.json";

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Mean of the fitted response, added back by `predict`.
    pub y_mean: f64,
    pub schedule: Schedule,
    pub max_model_size: usize,
    pub usable_snps: usize,
    pub config: RunArgs,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub chain: usize,
    pub draw: usize,
    pub h: f64,
    pub pi: f64,
    pub k: usize,
    pub pve: f64,
    pub log_bf: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GammaRow {
    pub chain: usize,
    pub draw: usize,
    /// Space-separated SNP ids.
    pub snps: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegionRow {
    pub chr: String,
    pub start: u64,
    pub end: u64,
    pub n_snps: usize,
    pub e_count: f64,
    pub e_count_truncated: f64,
    pub prob_1: Option<f64>,
    pub prob_2: Option<f64>,
    pub prob_gt2: Option<f64>,
    pub max_single_snp_log10bf: Option<f64>,
}

impl From<&RegionSummary> for RegionRow {
    fn from(r: &RegionSummary) -> Self {
        RegionRow {
            chr: r.chromosome.clone(),
            start: r.window_start,
            end: r.window_end,
            n_snps: r.n_snps,
            e_count: r.e_count,
            e_count_truncated: r.e_count_truncated,
            prob_1: r.prob_1,
            prob_2: r.prob_2,
            prob_gt2: r.prob_gt2,
            max_single_snp_log10bf: r.max_single_log10_bf,
        }
    }
}

#[derive(Debug, Serialize)]
struct Interval {
    mean: f64,
    median: f64,
    lower_90: f64,
    upper_90: f64,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    chains: usize,
    recorded_draws: usize,
    acceptance_rate: f64,
    small_world_acceptance_rate: f64,
    latent_acceptance_rate: Option<f64>,
    factorization_rebuilds: u64,
    pve: Interval,
    mean_model_size: f64,
    max_chain_pip_disagreement: f64,
}

pub fn write_run(out: &Path, data: &Dataset, result: &RunOutput) -> anyhow::Result<()> {
    let g = &data.genotypes;
    let meta = g.snp_meta();
    let pooled = &result.pooled;
    let pip = pooled.pip()?;
    let beta = pooled.beta_bar()?;
    let log10 = std::f64::consts::LN_10;
    let log10_bf: Vec<f64> = result.single_snp_bf.iter().map(|v| v / log10).collect();

    io::write_csv(
        &out.join(SNPS),
        (0..g.p()).map(|j| SnpRow {
            id: meta[j].id.clone(),
            chr: meta[j].chromosome.clone(),
            pos: meta[j].position,
            pip: pip[j],
            beta_bar: beta[j],
            single_snp_log10bf: log10_bf[j],
            col_mean: g.col_mean()[j],
            col_variance: g.col_variance()[j],
        }),
    )?;

    let chain_of = |mut i: usize| {
        for (c, &len) in result.chain_draws.iter().enumerate() {
            if i < len {
                return (c + 1, i + 1);
            }
            i -= len;
        }
        unreachable!("draw index beyond recorded draws")
    };
    let draws = pooled.draws();
    io::write_csv(
        &out.join(TRACE),
        draws.iter().enumerate().map(|(i, d)| {
            let (chain, draw) = chain_of(i);
            TraceRow { chain, draw, h: d.h, pi: d.pi, k: d.k(), pve: d.effect.pve, log_bf: d.log_bf }
        }),
    )?;
    io::write_csv(
        &out.join(GAMMAS),
        draws.iter().enumerate().map(|(i, d)| {
            let (chain, draw) = chain_of(i);
            let ids: Vec<&str> = d.gamma().iter().map(|&j| meta[j].id.as_str()).collect();
            GammaRow { chain, draw, snps: ids.join(" ") }
        }),
    )?;

    let gammas: Vec<&[usize]> = draws.iter().map(|d| d.gamma()).collect();
    let regions = region_summaries(&pip, &gammas, meta, Some(&log10_bf), REGION_WINDOW, REGION_STEP)?;
    io::write_csv(&out.join(REGIONS), regions.iter().map(RegionRow::from))?;

    let path = out.join(CHAIN_PIPS);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=result.chain_pips.len()).map(|c| format!("chain_{c}")));
    w.write_record(&header)?;
    for j in 0..g.p() {
        let mut rec = vec![meta[j].id.clone()];
        rec.extend(result.chain_pips.iter().map(|c| c[j].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let stats = pooled.stats();
    let pve = pooled.pve_summary(0.9)?;
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let summary = RunSummary {
        chains: result.chain_pips.len(),
        recorded_draws: pooled.n_recorded(),
        acceptance_rate: stats.acceptance_rate(),
        small_world_acceptance_rate: ratio(stats.small_world_accepted, stats.small_world_proposed),
        latent_acceptance_rate: data.labels.as_ref().map(|_| ratio(stats.latent_accepted, stats.latent_proposed)),
        factorization_rebuilds: stats.fallback_rebuilds,
        pve: Interval { mean: pve.mean, median: pve.median, lower_90: pve.lower, upper_90: pve.upper },
        mean_model_size: draws.iter().map(|d| d.k() as f64).sum::<f64>() / draws.len().max(1) as f64,
        max_chain_pip_disagreement: result.max_pip_disagreement(),
    };
    io::write_json(&out.join(SUMMARY), &summary)?;
    Ok(())
}
