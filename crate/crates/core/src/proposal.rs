//! Proposal kernels over `(γ, π, h)`.
//!
//! A local proposal changes `γ` by one add, remove or swap, then draws
//! `π' ~ Beta(|γ'|, p − |γ'| + 1)` and a reflected uniform step for `h`.
//! Adds are rank based: excluded covariates are ordered by their
//! single-covariate Bayes factor and a rank is drawn from
//! `Q_t = 0.3·U_t + 0.7·G_t`, with `G_t` a geometric distribution truncated to
//! `{0, …, t−1}`. Every density used in a Hastings ratio is computed exactly
//! by [`MoveKernel::log_density`], the same function for both directions.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::genotype::{GenotypeMatrix, Response};
use crate::likelihood::single_covariate_log_bf;
use crate::math::{beta_ln_pdf, dot};
use crate::model::Hyperparameters;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalConfig {
    pub add_prob: f64,
    pub remove_prob: f64,
    pub swap_prob: f64,
    /// Probability that an iteration compounds several local moves.
    pub small_world_prob: f64,
    pub compound_min: usize,
    pub compound_max: usize,
    /// Weight of the uniform component of the rank proposal.
    pub rank_mix_uniform: f64,
    /// Mean of the untruncated geometric rank component.
    pub rank_geometric_mean: f64,
    pub h_step_halfwidth: f64,
    /// Swaps only pair covariates at most this many indices apart.
    pub swap_locality_window: Option<usize>,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            add_prob: 0.45,
            remove_prob: 0.45,
            swap_prob: 0.10,
            small_world_prob: 0.3,
            compound_min: 2,
            compound_max: 20,
            rank_mix_uniform: 0.3,
            rank_geometric_mean: 2000.0,
            h_step_halfwidth: 0.1,
            swap_locality_window: None,
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.add_prob, self.remove_prob, self.swap_prob, self.small_world_prob, self.rank_mix_uniform];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("proposal probabilities must lie in [0, 1]"));
        }
        if (self.add_prob + self.remove_prob + self.swap_prob - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("add/remove/swap probabilities must sum to 1"));
        }
        if self.compound_min < 1 || self.compound_min > self.compound_max {
            return Err(Error::invalid("compound range must satisfy 1 <= min <= max"));
        }
        if !(self.rank_geometric_mean > 0.0) {
            return Err(Error::invalid("geometric mean must be positive"));
        }
        if !(self.h_step_halfwidth > 0.0 && self.h_step_halfwidth < 1.0) {
            return Err(Error::invalid("h step half-width must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Success probability of the geometric component (mean `(1 − q)/q`).
    pub fn geometric_success(&self) -> f64 {
        1.0 / (self.rank_geometric_mean + 1.0)
    }
}

/// Eligible covariates ordered by descending single-covariate log BF at
/// `σ_a = 1`, ties broken by ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpRanking {
    order: Vec<usize>,
    rank: Vec<Option<usize>>,
}

impl SnpRanking {
    pub fn from_scores(scores: &[Option<f64>]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).filter(|&j| scores[j].is_some()).collect();
        order.sort_by(|&a, &b| scores[b].unwrap().total_cmp(&scores[a].unwrap()).then(a.cmp(&b)));
        let mut rank = vec![None; scores.len()];
        for (r, &j) in order.iter().enumerate() {
            rank[j] = Some(r);
        }
        SnpRanking { order, rank }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank_of(&self, j: usize) -> Option<usize> {
        self.rank[j]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn p(&self) -> usize {
        self.rank.len()
    }
}

pub fn rank_snps(g: &GenotypeMatrix, y: &Response) -> SnpRanking {
    let scores: Vec<Option<f64>> = (0..g.p())
        .map(|j| {
            (!g.is_degenerate(j)).then(|| {
                let xty = dot(g.column(j), y.values());
                single_covariate_log_bf(g.col_sum_sq(j), xty, y.centered_ss(), g.n(), 1.0)
            })
        })
        .collect();
    SnpRanking::from_scores(&scores)
}

/// `Q_t(r)`: probability the rank proposal picks rank `r` from a pool of `t`.
pub fn rank_proposal_prob(r: usize, t: usize, cfg: &ProposalConfig) -> f64 {
    if r >= t {
        return 0.0;
    }
    let q = cfg.geometric_success();
    let log_keep = (-q).ln_1p();
    let trunc = -(t as f64 * log_keep).exp_m1();
    let geo = q * (r as f64 * log_keep).exp() / trunc;
    cfg.rank_mix_uniform / t as f64 + (1.0 - cfg.rank_mix_uniform) * geo
}

pub fn sample_rank<R: Rng + ?Sized>(t: usize, cfg: &ProposalConfig, rng: &mut R) -> usize {
    debug_assert!(t > 0);
    if rng.random::<f64>() < cfg.rank_mix_uniform {
        return rng.random_range(0..t);
    }
    let q = cfg.geometric_success();
    let log_keep = (-q).ln_1p();
    let trunc = -(t as f64 * log_keep).exp_m1();
    let v: f64 = rng.random();
    let r = ((-v * trunc).ln_1p() / log_keep).floor();
    (r.max(0.0) as usize).min(t - 1)
}

/// One change to the inclusion set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaMove {
    Add(usize),
    Remove(usize),
    Swap { out: usize, into: usize },
}

impl GammaMove {
    pub fn inverse(self) -> GammaMove {
        match self {
            GammaMove::Add(j) => GammaMove::Remove(j),
            GammaMove::Remove(j) => GammaMove::Add(j),
            GammaMove::Swap { out, into } => GammaMove::Swap { out: into, into: out },
        }
    }

    /// Applies the move to a sorted index set.
    pub fn apply(self, gamma: &mut Vec<usize>) {
        match self {
            GammaMove::Add(j) => insert_sorted(gamma, j),
            GammaMove::Remove(j) => remove_sorted(gamma, j),
            GammaMove::Swap { out, into } => {
                remove_sorted(gamma, out);
                insert_sorted(gamma, into);
            }
        }
    }
}

fn insert_sorted(gamma: &mut Vec<usize>, j: usize) {
    if let Err(pos) = gamma.binary_search(&j) {
        gamma.insert(pos, j);
    }
}

fn remove_sorted(gamma: &mut Vec<usize>, j: usize) {
    if let Ok(pos) = gamma.binary_search(&j) {
        gamma.remove(pos);
    }
}

const ADD: usize = 0;
const REMOVE: usize = 1;
const SWAP: usize = 2;

/// Samples single `γ` moves and evaluates their exact proposal densities.
#[derive(Debug, Clone)]
pub struct MoveKernel {
    ranking: SnpRanking,
    cfg: ProposalConfig,
    /// `prefix[j]` = number of eligible covariates with index `< j`.
    prefix: Vec<usize>,
    eligible: Vec<usize>,
}

impl MoveKernel {
    pub fn new(ranking: SnpRanking, cfg: ProposalConfig) -> Result<Self> {
        cfg.validate()?;
        if ranking.is_empty() {
            return Err(Error::NoEligibleCovariates);
        }
        let p = ranking.p();
        let mut prefix = Vec::with_capacity(p + 1);
        let mut eligible = Vec::with_capacity(ranking.len());
        prefix.push(0);
        for j in 0..p {
            if ranking.rank_of(j).is_some() {
                eligible.push(j);
            }
            prefix.push(eligible.len());
        }
        Ok(MoveKernel { ranking, cfg, prefix, eligible })
    }

    pub fn ranking(&self) -> &SnpRanking {
        &self.ranking
    }

    pub fn config(&self) -> &ProposalConfig {
        &self.cfg
    }

    pub fn n_eligible(&self) -> usize {
        self.eligible.len()
    }

    pub fn is_eligible(&self, j: usize) -> bool {
        j < self.ranking.p() && self.ranking.rank_of(j).is_some()
    }

    /// Rank of excluded covariate `j` among all excluded covariates.
    pub fn excluded_rank(&self, gamma: &[usize], j: usize) -> Option<usize> {
        let rj = self.ranking.rank_of(j)?;
        let ahead = gamma.iter().filter(|&&i| self.ranking.rank_of(i).is_some_and(|ri| ri < rj)).count();
        Some(rj - ahead)
    }

    fn nth_excluded_by_rank(&self, gamma: &[usize], r: usize) -> usize {
        let mut included: Vec<usize> = gamma.iter().filter_map(|&i| self.ranking.rank_of(i)).collect();
        included.sort_unstable();
        let mut pos = r;
        for g in included {
            if g <= pos {
                pos += 1;
            } else {
                break;
            }
        }
        self.ranking.order()[pos]
    }

    fn window(&self, i: usize) -> (usize, usize) {
        let p = self.ranking.p();
        match self.cfg.swap_locality_window {
            Some(w) => (i.saturating_sub(w), (i + w).min(p - 1)),
            None => (0, p - 1),
        }
    }

    fn included_in(gamma: &[usize], lo: usize, hi: usize) -> &[usize] {
        let a = gamma.partition_point(|&g| g < lo);
        let b = gamma.partition_point(|&g| g <= hi);
        &gamma[a..b]
    }

    /// Excluded eligible covariates a swap could bring in for `out`.
    fn swap_partners(&self, gamma: &[usize], out: usize) -> usize {
        let (lo, hi) = self.window(out);
        let eligible = self.prefix[hi + 1] - self.prefix[lo];
        eligible - Self::included_in(gamma, lo, hi).len()
    }

    /// Number of valid `(out, into)` swap pairs.
    pub fn swap_pairs(&self, gamma: &[usize]) -> usize {
        match self.cfg.swap_locality_window {
            None => gamma.len() * (self.n_eligible() - gamma.len()),
            Some(_) => gamma.iter().map(|&i| self.swap_partners(gamma, i)).sum(),
        }
    }

    /// Move-type probabilities after dropping moves impossible from `gamma`.
    pub fn move_type_probs(&self, gamma: &[usize]) -> [f64; 3] {
        let k = gamma.len();
        let mut w = [self.cfg.add_prob, self.cfg.remove_prob, self.cfg.swap_prob];
        if k >= self.n_eligible() {
            w[ADD] = 0.0;
        }
        if k == 0 {
            w[REMOVE] = 0.0;
        }
        if w[SWAP] > 0.0 && self.swap_pairs(gamma) == 0 {
            w[SWAP] = 0.0;
        }
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter_mut().for_each(|v| *v /= total);
        }
        w
    }

    /// Log probability that the kernel proposes `mv` from `gamma`.
    pub fn log_density(&self, gamma: &[usize], mv: GammaMove) -> f64 {
        let probs = self.move_type_probs(gamma);
        let inside = |j: usize| gamma.binary_search(&j).is_ok();
        let p = match mv {
            GammaMove::Add(j) => {
                if inside(j) || !self.is_eligible(j) {
                    return f64::NEG_INFINITY;
                }
                let t = self.n_eligible() - gamma.len();
                let r = self.excluded_rank(gamma, j).expect("eligible");
                probs[ADD] * rank_proposal_prob(r, t, &self.cfg)
            }
            GammaMove::Remove(j) => {
                if !inside(j) {
                    return f64::NEG_INFINITY;
                }
                probs[REMOVE] / gamma.len() as f64
            }
            GammaMove::Swap { out, into } => {
                if !inside(out) || inside(into) || !self.is_eligible(into) {
                    return f64::NEG_INFINITY;
                }
                let (lo, hi) = self.window(out);
                if into < lo || into > hi {
                    return f64::NEG_INFINITY;
                }
                probs[SWAP] / self.swap_pairs(gamma) as f64
            }
        };
        p.ln()
    }

    /// Draws one move from `gamma` and returns it with its log density.
    pub fn sample<R: Rng + ?Sized>(&self, gamma: &[usize], rng: &mut R) -> (GammaMove, f64) {
        let probs = self.move_type_probs(gamma);
        let u: f64 = rng.random();
        let kind = if u < probs[ADD] {
            ADD
        } else if u < probs[ADD] + probs[REMOVE] {
            REMOVE
        } else if probs[SWAP] > 0.0 {
            SWAP
        } else if probs[REMOVE] > 0.0 {
            REMOVE
        } else {
            ADD
        };
        let mv = match kind {
            ADD => {
                let t = self.n_eligible() - gamma.len();
                let r = sample_rank(t, &self.cfg, rng);
                GammaMove::Add(self.nth_excluded_by_rank(gamma, r))
            }
            REMOVE => GammaMove::Remove(gamma[rng.random_range(0..gamma.len())]),
            _ => self.sample_swap(gamma, rng),
        };
        (mv, self.log_density(gamma, mv))
    }

    fn sample_swap<R: Rng + ?Sized>(&self, gamma: &[usize], rng: &mut R) -> GammaMove {
        let out = match self.cfg.swap_locality_window {
            None => gamma[rng.random_range(0..gamma.len())],
            Some(_) => {
                let total = self.swap_pairs(gamma);
                let mut u = rng.random_range(0..total);
                let mut chosen = gamma[0];
                for &i in gamma {
                    let c = self.swap_partners(gamma, i);
                    if u < c {
                        chosen = i;
                        break;
                    }
                    u -= c;
                }
                chosen
            }
        };
        let (lo, hi) = self.window(out);
        let r = rng.random_range(0..self.swap_partners(gamma, out));
        // r-th excluded eligible covariate in [lo, hi], by index
        let mut target = self.prefix[lo] + r;
        for &g in Self::included_in(gamma, lo, hi) {
            if self.prefix[g] <= target {
                target += 1;
            } else {
                break;
            }
        }
        GammaMove::Swap { out, into: self.eligible[target] }
    }

    /// Enumerates every move with positive density from `gamma`.
    pub fn enumerate(&self, gamma: &[usize]) -> Vec<GammaMove> {
        let mut out = Vec::new();
        let inside = |j: usize| gamma.binary_search(&j).is_ok();
        for &j in &self.eligible {
            if !inside(j) {
                out.push(GammaMove::Add(j));
            }
        }
        for &i in gamma {
            out.push(GammaMove::Remove(i));
            let (lo, hi) = self.window(i);
            for &j in &self.eligible {
                if !inside(j) && j >= lo && j <= hi {
                    out.push(GammaMove::Swap { out: i, into: j });
                }
            }
        }
        out.retain(|&mv| self.log_density(gamma, mv).is_finite());
        out
    }
}

/// Reflects a proposed `h` back into `[0, 1)` about whichever boundary it
/// crossed.
pub fn reflect_h(h: f64) -> f64 {
    if h < 0.0 {
        -h
    } else if h >= 1.0 {
        2.0 - h
    } else {
        h
    }
}

pub fn propose_h<R: Rng + ?Sized>(h: f64, cfg: &ProposalConfig, rng: &mut R) -> f64 {
    let step = rng.random_range(-cfg.h_step_halfwidth..cfg.h_step_halfwidth);
    reflect_h(h + step)
}

/// Draws `π'` given `|γ'| = k`: `Beta(k, p − k + 1)` for `k ≥ 1`, and the
/// log-uniform prior for `k = 0`, where that Beta is degenerate.
pub fn propose_pi<R: Rng + ?Sized>(k: usize, hp: &Hyperparameters, rng: &mut R) -> f64 {
    if k == 0 {
        let (a, b) = hp.log_pi_bounds();
        return rng.random_range(a..b).exp();
    }
    let p = hp.p as f64;
    Beta::new(k as f64, p - k as f64 + 1.0).expect("valid beta parameters").sample(rng)
}

/// Log density of [`propose_pi`].
pub fn log_pi_proposal_density(pi: f64, k: usize, hp: &Hyperparameters) -> f64 {
    if k == 0 {
        return crate::model::log_prior_pi(pi, hp);
    }
    let p = hp.p as f64;
    beta_ln_pdf(pi, k as f64, p - k as f64 + 1.0)
}

/// Checks `k <= p` and that every index is an eligible covariate.
pub fn validate_gamma(kernel: &MoveKernel, gamma: &[usize]) -> Result<()> {
    if let Some(&j) = gamma.iter().find(|&&j| !kernel.is_eligible(j)) {
        return Err(Error::invalid(format!("covariate {j} is degenerate or out of range")));
    }
    Ok(())
}
