//! Binary responses through a latent continuous trait.
//!
//! The latent values are fixed to a symmetric grid of normal quantiles,
//! rescaled to unit variance: controls hold the lowest slots and cases the
//! highest. Only the assignment of grid values to individuals within a class
//! is sampled, by swapping the values of two individuals of the same class.
//! The continuous-response likelihood then applies unchanged to the latent
//! vector.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::genotype::{GenotypeMatrix, Response};
use crate::math::inv_normal_cdf;
use crate::model::Hyperparameters;
use crate::proposal::MoveKernel;
use crate::sampler::{Chain, ChainConfig, PosteriorSamples};
use crate::{chain_rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatentConfig {
    /// Latent proposals after each model update.
    pub latent_updates: usize,
    /// Probability that a latent proposal compounds several swaps.
    pub compound_prob: f64,
    pub compound_min: usize,
    pub compound_max: usize,
}

impl Default for LatentConfig {
    fn default() -> Self {
        LatentConfig { latent_updates: 1, compound_prob: 0.3, compound_min: 2, compound_max: 20 }
    }
}

impl LatentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.compound_prob) {
            return Err(Error::invalid("latent compound probability must lie in [0, 1]"));
        }
        if self.compound_min < 1 || self.compound_min > self.compound_max {
            return Err(Error::invalid("latent compound range must satisfy 1 <= min <= max"));
        }
        Ok(())
    }
}

/// Class membership of each individual.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    is_case: Vec<bool>,
    cases: Vec<usize>,
    controls: Vec<usize>,
    cfg: LatentConfig,
}

impl LatentState {
    pub fn new(labels: &[f64], cfg: LatentConfig) -> Result<Self> {
        cfg.validate()?;
        let is_case = parse_labels(labels)?;
        let cases = (0..labels.len()).filter(|&i| is_case[i]).collect();
        let controls = (0..labels.len()).filter(|&i| !is_case[i]).collect();
        Ok(LatentState { is_case, cases, controls, cfg })
    }

    pub fn config(&self) -> &LatentConfig {
        &self.cfg
    }

    fn class_of(&self, i: usize) -> &[usize] {
        if self.is_case[i] {
            &self.cases
        } else {
            &self.controls
        }
    }

    /// Draws an ordered pair of distinct individuals of the same class: the
    /// first uniformly over members of non-singleton classes, the second
    /// uniformly over the rest of its class. `None` when both classes are
    /// singletons. The draw depends only on the partition, not on which
    /// class is labelled "case".
    pub fn propose_swap<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(usize, usize)> {
        if self.cases.len() < 2 && self.controls.len() < 2 {
            return None;
        }
        let n = self.is_case.len();
        // a singleton class is never selected
        let (i, class) = loop {
            let i = rng.random_range(0..n);
            let class = self.class_of(i);
            if class.len() >= 2 {
                break (i, class);
            }
        };
        let pos = class.binary_search(&i).expect("member of own class");
        let mut r = rng.random_range(0..class.len() - 1);
        if r >= pos {
            r += 1;
        }
        Some((i, class[r]))
    }
}

fn parse_labels(labels: &[f64]) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(labels.len());
    for (i, &v) in labels.iter().enumerate() {
        if v == 0.0 {
            out.push(false);
        } else if v == 1.0 {
            out.push(true);
        } else {
            return Err(Error::invalid(alloc::format!("label {v} at row {} is not 0 or 1", i + 1)));
        }
    }
    let n1 = out.iter().filter(|&&c| c).count();
    if n1 == 0 || n1 == out.len() {
        return Err(Error::SingleClass);
    }
    Ok(out)
}

/// `Φ⁻¹(i/(n+1))`, `i = 1..n`, mirrored so that slot `n−1−i` is exactly the
/// negation of slot `i`, then scaled to unit empirical variance.
pub fn quantile_grid(n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n];
    for i in 0..n / 2 {
        let v = inv_normal_cdf((i + 1) as f64 / (n + 1) as f64);
        g[i] = v;
        g[n - 1 - i] = -v;
    }
    let var = g.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var > 0.0 {
        let sd = var.sqrt();
        g.iter_mut().for_each(|v| *v /= sd);
    }
    g
}

/// Initial latent vector: the `j`-th control (in input order) takes grid slot
/// `j`, the `j`-th case takes slot `n−1−j`. Relabelling `y → 1 − y` therefore
/// negates the latent vector exactly.
pub fn init_latent(labels: &[f64]) -> Result<Vec<f64>> {
    let is_case = parse_labels(labels)?;
    let n = labels.len();
    let grid = quantile_grid(n);
    let mut z = vec![0.0; n];
    let (mut lo, mut hi) = (0, n);
    for i in 0..n {
        if is_case[i] {
            hi -= 1;
            z[i] = grid[hi];
        } else {
            z[i] = grid[lo];
            lo += 1;
        }
    }
    Ok(z)
}

impl Chain<'_> {
    /// Performs the configured number of latent proposals.
    pub(crate) fn latent_sweep(&mut self) -> Result<()> {
        let Some(latent) = self.latent.take() else {
            return Ok(());
        };
        let res = (0..latent.cfg.latent_updates).try_for_each(|_| self.latent_step(&latent).map(|_| ()));
        self.latent = Some(latent);
        res
    }

    /// One latent proposal: one swap, or a compound of several. Accepted
    /// with the likelihood ratio since swaps are symmetric.
    pub(crate) fn latent_step(&mut self, latent: &LatentState) -> Result<bool> {
        let cfg = &latent.cfg;
        let m = if self.rng.random::<f64>() < cfg.compound_prob {
            self.rng.random_range(cfg.compound_min..=cfg.compound_max)
        } else {
            1
        };
        let mut pairs = Vec::with_capacity(m);
        for _ in 0..m {
            if let Some(pair) = latent.propose_swap(&mut self.rng) {
                pairs.push(pair);
            }
        }
        let u: f64 = self.rng.random();
        if pairs.is_empty() {
            return Ok(false);
        }
        self.stats.latent_proposed += 1;
        // apply swaps to a scratch copy to get the net per-row change
        let mut z = self.y.values().to_vec();
        for &(i, j) in &pairs {
            z.swap(i, j);
        }
        let cur = self.y.values();
        let mut deltas: Vec<(usize, f64)> = Vec::with_capacity(2 * pairs.len());
        for &(i, j) in &pairs {
            for r in [i, j] {
                if !deltas.iter().any(|&(q, _)| q == r) && z[r] != cur[r] {
                    deltas.push((r, z[r] - cur[r]));
                }
            }
        }
        if deltas.is_empty() {
            return Ok(false);
        }
        let mut fact = self.fact.clone();
        fact.shift_response(self.x, &deltas);
        let log_bf = fact.log_bf()?;
        let log_alpha = log_bf - self.log_bf;
        if log_alpha >= 0.0 || u.ln() < log_alpha {
            for &(i, j) in &pairs {
                self.y.swap(i, j);
            }
            self.fact = fact;
            self.log_bf = log_bf;
            self.stats.latent_accepted += 1;
            return Ok(true);
        }
        Ok(false)
    }

    /// Switches on latent updates for a binary response. `self.y` must be
    /// the latent vector built by [`init_latent`] from `labels`.
    pub fn with_latent(mut self, latent: LatentState) -> Self {
        self.latent = Some(latent);
        self
    }
}

/// Runs one chain on 0/1 labels. The kernel should rank covariates against
/// the initial latent vector from [`init_latent`].
pub fn run_chain_binary(
    x: &GenotypeMatrix,
    labels: &[f64],
    kernel: &MoveKernel,
    hyper: Hyperparameters,
    cfg: &ChainConfig,
    latent_cfg: &LatentConfig,
    stream: u64,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    if labels.len() != x.n() {
        return Err(Error::DimensionMismatch { expected: x.n(), found: labels.len() });
    }
    let latent = LatentState::new(labels, latent_cfg.clone())?;
    let y = Response::new(&init_latent(labels)?)?;
    let chain = Chain::new(x, y, kernel, hyper, chain_rng(cfg.seed, stream))?.with_latent(latent);
    chain.run(cfg)
}
