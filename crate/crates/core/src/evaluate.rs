//! Single-SNP baseline and evaluation metrics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::genotype::{GenotypeMatrix, Response, SnpInfo};
use crate::likelihood::single_covariate_log_bf;
use crate::math::{dot, log_mean_exp};
use crate::{Error, Result};

/// Prior effect standard deviations averaged over by the single-SNP BF.
pub const SINGLE_SNP_SIGMAS: [f64; 3] = [0.4, 0.2, 0.1];

/// Natural-log single-SNP Bayes factor, averaged (on the BF scale) over
/// `σ_a ∈ {0.4, 0.2, 0.1}`. `−∞` for a degenerate column.
pub fn single_snp_bf(g: &GenotypeMatrix, y: &Response, j: usize) -> f64 {
    if g.is_degenerate(j) {
        return f64::NEG_INFINITY;
    }
    let xtx = g.col_sum_sq(j);
    let xty = dot(g.column(j), y.values());
    let logs = SINGLE_SNP_SIGMAS.map(|s| single_covariate_log_bf(xtx, xty, y.centered_ss(), g.n(), s * s));
    log_mean_exp(&logs)
}

pub fn single_snp_bfs(g: &GenotypeMatrix, y: &Response) -> Vec<f64> {
    (0..g.p()).map(|j| single_snp_bf(g, y, j)).collect()
}

/// How covariate (co)variances enter the prediction error.
#[derive(Debug, Clone, Copy)]
pub enum Covariance<'a> {
    /// Independent covariates with variances `s_j`: `Σ s_j (b̂_j − b_j)²`.
    Independent(&'a [f64]),
    /// Empirical covariance of the centered columns: `(1/n)‖X(b̂ − b)‖²`.
    Empirical(&'a GenotypeMatrix),
}

/// Mean squared prediction error of `beta_hat` for a new observation drawn
/// from the model with effects `beta` and residual precision `tau`.
pub fn mspe(beta_hat: &[f64], beta: &[f64], tau: f64, cov: Covariance<'_>) -> Result<f64> {
    if beta_hat.len() != beta.len() {
        return Err(Error::DimensionMismatch { expected: beta.len(), found: beta_hat.len() });
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    let excess = match cov {
        Covariance::Independent(s) => {
            if s.len() != beta.len() {
                return Err(Error::DimensionMismatch { expected: beta.len(), found: s.len() });
            }
            beta_hat.iter().zip(beta).zip(s).map(|((a, b), s)| s * (a - b) * (a - b)).sum::<f64>()
        }
        Covariance::Empirical(g) => {
            if g.p() != beta.len() {
                return Err(Error::DimensionMismatch { expected: beta.len(), found: g.p() });
            }
            let (idx, diff): (Vec<usize>, Vec<f64>) = beta_hat
                .iter()
                .zip(beta)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(j, (a, b))| (j, a - b))
                .unzip();
            let xd = g.mul_sparse(&idx, &diff);
            xd.iter().map(|v| v * v).sum::<f64>() / g.n() as f64
        }
    };
    Ok(excess + 1.0 / tau)
}

/// Relative prediction gain `(MSPE₀ − MSPE(b̂)) / (MSPE₀ − 1/τ)`, where
/// `MSPE₀` is the error of predicting with `b̂ = 0`.
pub fn rpv(beta_hat: &[f64], beta: &[f64], tau: f64, cov: Covariance<'_>) -> Result<f64> {
    let zero = vec![0.0; beta.len()];
    let m0 = mspe(&zero, beta, tau, cov)?;
    let m = mspe(beta_hat, beta, tau, cov)?;
    let denom = m0 - 1.0 / tau;
    if !(denom > 0.0) {
        return Err(Error::invalid("relative prediction gain is undefined when the true effects explain nothing"));
    }
    Ok((m0 - m) / denom)
}

pub const CALIBRATION_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `NaN` for an empty bin.
    pub mean_pip: f64,
    /// Fraction of the bin's SNPs that are causal; `NaN` for an empty bin.
    pub causal_fraction: f64,
    /// Two binomial standard errors, `2·sqrt(q(1 − q)/m)`.
    pub two_se: f64,
}

impl CalibrationBin {
    /// Whether the causal fraction lies within two standard errors of the
    /// mean PIP. Empty bins are not judged.
    pub fn within_two_se(&self) -> Option<bool> {
        (self.count > 0).then(|| (self.causal_fraction - self.mean_pip).abs() <= self.two_se)
    }
}

/// Bins PIPs into 20 bins of width 0.05 (the last one closed at 1).
pub fn calibration_bins(pips: &[f64], causal: &[bool]) -> Result<Vec<CalibrationBin>> {
    if pips.len() != causal.len() {
        return Err(Error::DimensionMismatch { expected: pips.len(), found: causal.len() });
    }
    let mut count = [0usize; CALIBRATION_BINS];
    let mut pip_sum = [0.0; CALIBRATION_BINS];
    let mut hits = [0usize; CALIBRATION_BINS];
    for (&q, &c) in pips.iter().zip(causal) {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid("PIP outside [0, 1]"));
        }
        let b = ((q * CALIBRATION_BINS as f64).floor() as usize).min(CALIBRATION_BINS - 1);
        count[b] += 1;
        pip_sum[b] += q;
        hits[b] += c as usize;
    }
    let width = 1.0 / CALIBRATION_BINS as f64;
    Ok((0..CALIBRATION_BINS)
        .map(|b| {
            let m = count[b];
            let (mean_pip, frac, two_se) = if m == 0 {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let q = hits[b] as f64 / m as f64;
                (pip_sum[b] / m as f64, q, 2.0 * (q * (1.0 - q) / m as f64).sqrt())
            };
            CalibrationBin {
                lower: b as f64 * width,
                upper: (b + 1) as f64 * width,
                count: m,
                mean_pip,
                causal_fraction: frac,
                two_se,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub threshold: f64,
    /// Causal SNPs with score `>= threshold`.
    pub true_pos: usize,
    /// Non-causal SNPs with score `>= threshold`.
    pub false_pos: usize,
}

/// True and false positives at every distinct score, highest first.
pub fn power_curve(scores: &[f64], causal: &[bool]) -> Result<Vec<PowerPoint>> {
    if scores.len() != causal.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: causal.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out: Vec<PowerPoint> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (pos, &i) in order.iter().enumerate() {
        if causal[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(pos + 1).is_none_or(|&next| scores[next] != scores[i]);
        if last_of_tie {
            out.push(PowerPoint { threshold: scores[i], true_pos: tp, false_pos: fp });
        }
    }
    Ok(out)
}

/// Power curve over several data sets with one common threshold, i.e. on
/// the concatenated scores.
pub fn pooled_power_curve(datasets: &[(&[f64], &[bool])]) -> Result<Vec<PowerPoint>> {
    let mut scores = Vec::new();
    let mut causal = Vec::new();
    for (s, c) in datasets {
        if s.len() != c.len() {
            return Err(Error::DimensionMismatch { expected: s.len(), found: c.len() });
        }
        scores.extend_from_slice(s);
        causal.extend_from_slice(c);
    }
    power_curve(&scores, &causal)
}

/// Largest true-positive count reached with at most `max_fp` false positives.
pub fn true_positives_at(curve: &[PowerPoint], max_fp: usize) -> usize {
    curve.iter().filter(|pt| pt.false_pos <= max_fp).map(|pt| pt.true_pos).max().unwrap_or(0)
}

pub const REGION_WINDOW: u64 = 1_000_000;
pub const REGION_STEP: u64 = 500_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSummary {
    pub chromosome: String,
    /// Half-open window `[start, end)` in base pairs.
    pub window_start: u64,
    pub window_end: u64,
    pub n_snps: usize,
    /// Posterior expected number of included SNPs (sum of PIPs).
    pub e_count: f64,
    pub e_count_truncated: f64,
    /// Frequencies over recorded `γ` draws; `None` without draws.
    pub prob_1: Option<f64>,
    pub prob_2: Option<f64>,
    pub prob_gt2: Option<f64>,
    /// Largest single-SNP log10 BF among the window's SNPs, when supplied.
    pub max_single_log10_bf: Option<f64>,
}

/// Sliding windows of `window` bp every `step` bp, starting at 0 on each
/// chromosome (in order of first appearance). Windows without SNPs are
/// skipped.
pub fn region_summaries(
    pips: &[f64],
    gammas: &[&[usize]],
    meta: &[SnpInfo],
    single_log10_bf: Option<&[f64]>,
    window: u64,
    step: u64,
) -> Result<Vec<RegionSummary>> {
    if pips.len() != meta.len() {
        return Err(Error::DimensionMismatch { expected: meta.len(), found: pips.len() });
    }
    if let Some(bf) = single_log10_bf {
        if bf.len() != meta.len() {
            return Err(Error::DimensionMismatch { expected: meta.len(), found: bf.len() });
        }
    }
    if window == 0 || step == 0 {
        return Err(Error::invalid("window and step must be positive"));
    }
    let mut chroms: Vec<&str> = Vec::new();
    for m in meta {
        if !chroms.contains(&m.chromosome.as_str()) {
            chroms.push(&m.chromosome);
        }
    }
    let mut out = Vec::new();
    for chrom in chroms {
        let mut members: Vec<usize> = (0..meta.len()).filter(|&j| meta[j].chromosome == chrom).collect();
        members.sort_by_key(|&j| (meta[j].position, j));
        let max_pos = meta[*members.last().expect("non-empty")].position;
        let mut start = 0u64;
        while start <= max_pos {
            let end = start + window;
            let lo = members.partition_point(|&j| meta[j].position < start);
            let hi = members.partition_point(|&j| meta[j].position < end);
            let inside = &members[lo..hi];
            if !inside.is_empty() {
                let e_count: f64 = inside.iter().map(|&j| pips[j]).sum();
                let (prob_1, prob_2, prob_gt2) = if gammas.is_empty() {
                    (None, None, None)
                } else {
                    let mut counts = [0usize; 3];
                    for g in gammas {
                        let c = g.iter().filter(|&&j| meta[j].chromosome == chrom && meta[j].position >= start && meta[j].position < end).count();
                        match c {
                            0 => {}
                            1 => counts[0] += 1,
                            2 => counts[1] += 1,
                            _ => counts[2] += 1,
                        }
                    }
                    let m = gammas.len() as f64;
                    (Some(counts[0] as f64 / m), Some(counts[1] as f64 / m), Some(counts[2] as f64 / m))
                };
                let max_single_log10_bf =
                    single_log10_bf.map(|bf| inside.iter().map(|&j| bf[j]).fold(f64::NEG_INFINITY, f64::max));
                out.push(RegionSummary {
                    chromosome: String::from(chrom),
                    window_start: start,
                    window_end: end,
                    n_snps: inside.len(),
                    e_count,
                    e_count_truncated: e_count.min(1.0),
                    prob_1,
                    prob_2,
                    prob_gt2,
                    max_single_log10_bf,
                });
            }
            start += step;
        }
    }
    Ok(out)
}
