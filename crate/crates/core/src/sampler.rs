//! Metropolis–Hastings over `(h, π, γ)` with `β, τ` drawn given each
//! recorded state.
//!
//! Each iteration proposes a new `γ` (one local move, or with probability
//! `small_world_prob` a path of several), then `π'` from a Beta centred on
//! the new model size and a reflected random-walk step for `h`, and accepts
//! the triple jointly.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::genotype::{GenotypeMatrix, Response};
use crate::likelihood::ModelFactorization;
use crate::math::quantile_sorted;
use crate::model::{log_prior_gamma_given_pi, log_prior_pi, sigma_a_sq, EffectDraw, Hyperparameters, ModelState};
use crate::probit::LatentState;
use crate::proposal::{log_pi_proposal_density, propose_h, propose_pi, validate_gamma, GammaMove, MoveKernel};
use crate::rao_blackwell::RbAccumulator;
use crate::{chain_rng, ChainRng, Error, Result};

/// Largest model the chain may start from.
pub const INIT_MAX_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub sampling: usize,
    /// Record every `thin`-th sampling iteration.
    pub thin: usize,
    pub seed: u64,
    /// Keep every recorded `(γ, β, τ)`; summaries are accumulated either way.
    pub keep_draws: bool,
}

impl ChainConfig {
    pub fn new(burn_in: usize, sampling: usize, thin: usize, seed: u64) -> Self {
        ChainConfig { burn_in, sampling, thin, seed, keep_draws: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sampling == 0 {
            return Err(Error::invalid("sampling iterations must be positive"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning interval must be positive"));
        }
        if self.thin > self.sampling {
            return Err(Error::invalid("thinning interval exceeds sampling iterations"));
        }
        Ok(())
    }

    pub fn recorded(&self) -> usize {
        self.sampling / self.thin
    }
}

/// One recorded state.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub h: f64,
    pub pi: f64,
    pub log_bf: f64,
    /// `γ` (sorted) with the `β_γ`, `τ` and PVE drawn at this state.
    pub effect: EffectDraw,
}

impl Draw {
    pub fn gamma(&self) -> &[usize] {
        &self.effect.gamma
    }

    pub fn k(&self) -> usize {
        self.effect.gamma.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChainStats {
    pub proposed: u64,
    pub accepted: u64,
    pub small_world_proposed: u64,
    pub small_world_accepted: u64,
    pub latent_proposed: u64,
    pub latent_accepted: u64,
    pub fallback_rebuilds: u64,
}

impl ChainStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposed as f64
    }

    fn add(&mut self, o: &ChainStats) {
        self.proposed += o.proposed;
        self.accepted += o.accepted;
        self.small_world_proposed += o.small_world_proposed;
        self.small_world_accepted += o.small_world_accepted;
        self.latent_proposed += o.latent_proposed;
        self.latent_accepted += o.latent_accepted;
        self.fallback_rebuilds += o.fallback_rebuilds;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Output of one or more pooled chains.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    p: usize,
    draws: Vec<Draw>,
    pve_values: Vec<f64>,
    rb: RbAccumulator,
    inclusion_counts: Vec<u64>,
    beta_draw_sum: Vec<f64>,
    stats: ChainStats,
    y_mean: f64,
}

impl PosteriorSamples {
    fn new(p: usize, y_mean: f64) -> Self {
        PosteriorSamples {
            p,
            draws: Vec::new(),
            pve_values: Vec::new(),
            rb: RbAccumulator::new(p),
            inclusion_counts: vec![0; p],
            beta_draw_sum: vec![0.0; p],
            stats: ChainStats::default(),
            y_mean,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Recorded draws; empty when the chain ran with `keep_draws = false`.
    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn n_recorded(&self) -> usize {
        self.rb.draw_count()
    }

    pub fn stats(&self) -> &ChainStats {
        &self.stats
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn rao_blackwell(&self) -> &RbAccumulator {
        &self.rb
    }

    /// Rao–Blackwellized posterior inclusion probabilities.
    pub fn pip(&self) -> Result<Vec<f64>> {
        self.rb.pip_estimate()
    }

    /// Rao–Blackwellized posterior mean of `β`.
    pub fn beta_bar(&self) -> Result<Vec<f64>> {
        self.rb.posterior_mean_beta()
    }

    /// Fraction of recorded draws including each covariate.
    pub fn raw_pip(&self) -> Result<Vec<f64>> {
        let m = self.n_recorded();
        if m == 0 {
            return Err(Error::NoDraws);
        }
        Ok(self.inclusion_counts.iter().map(|&c| c as f64 / m as f64).collect())
    }

    /// Average of the sampled `β` (zero off `γ`).
    pub fn raw_beta_mean(&self) -> Result<Vec<f64>> {
        let m = self.n_recorded();
        if m == 0 {
            return Err(Error::NoDraws);
        }
        Ok(self.beta_draw_sum.iter().map(|&b| b / m as f64).collect())
    }

    pub fn pve_values(&self) -> &[f64] {
        &self.pve_values
    }

    /// Mean, median and central `level` interval of the PVE draws.
    pub fn pve_summary(&self, level: f64) -> Result<Summary> {
        summarize(&self.pve_values, level)
    }

    /// Posterior draws of `h`.
    pub fn h_values(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.h).collect()
    }

    /// Pools chains run on the same data.
    pub fn merge(chains: Vec<PosteriorSamples>) -> Result<PosteriorSamples> {
        let mut iter = chains.into_iter();
        let mut out = iter.next().ok_or(Error::NoDraws)?;
        for c in iter {
            if c.p != out.p {
                return Err(Error::DimensionMismatch { expected: out.p, found: c.p });
            }
            out.rb.merge(&c.rb)?;
            out.draws.extend(c.draws);
            out.pve_values.extend(c.pve_values);
            for (a, b) in out.inclusion_counts.iter_mut().zip(&c.inclusion_counts) {
                *a += b;
            }
            for (a, b) in out.beta_draw_sum.iter_mut().zip(&c.beta_draw_sum) {
                *a += b;
            }
            out.stats.add(&c.stats);
        }
        Ok(out)
    }

    fn record(&mut self, x: &GenotypeMatrix, y: &Response, draw: Draw, keep: bool) {
        self.rb.update(x, y, &draw.effect, draw.h, draw.pi);
        for (&j, &b) in draw.effect.gamma.iter().zip(&draw.effect.beta) {
            self.inclusion_counts[j] += 1;
            self.beta_draw_sum[j] += b;
        }
        self.pve_values.push(draw.effect.pve);
        if keep {
            self.draws.push(draw);
        }
    }
}

pub fn summarize(values: &[f64], level: f64) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::NoDraws);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("interval level must lie in (0, 1)"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    Ok(Summary {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: quantile_sorted(&v, 0.5),
        lower: quantile_sorted(&v, a),
        upper: quantile_sorted(&v, 1.0 - a),
    })
}

/// A proposed `(γ', π', h')` with its factorization and Hastings terms.
struct Proposal {
    state: ModelState,
    fact: ModelFactorization,
    log_bf: f64,
    /// `log q(γ|γ') − log q(γ'|γ) + log q(π|k) − log q(π'|k')`.
    log_hastings: f64,
    compound: bool,
}

/// One MCMC chain over a fixed data set.
pub struct Chain<'a> {
    pub(crate) x: &'a GenotypeMatrix,
    pub(crate) y: Response,
    pub(crate) kernel: &'a MoveKernel,
    pub(crate) hyper: Hyperparameters,
    pub(crate) state: ModelState,
    pub(crate) fact: ModelFactorization,
    pub(crate) log_bf: f64,
    pub(crate) rng: ChainRng,
    pub(crate) stats: ChainStats,
    pub(crate) latent: Option<LatentState>,
}

impl<'a> Chain<'a> {
    /// Starts from the top `q` ranked covariates, `q ~ U{1, …, min(20, M)}`,
    /// with `h ~ U(0, 1)` and `π = q/p` clamped to the prior support.
    pub fn new(
        x: &'a GenotypeMatrix,
        y: Response,
        kernel: &'a MoveKernel,
        hyper: Hyperparameters,
        mut rng: ChainRng,
    ) -> Result<Self> {
        if x.n() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.n(), found: y.len() });
        }
        if kernel.ranking().p() != x.p() {
            return Err(Error::DimensionMismatch { expected: x.p(), found: kernel.ranking().p() });
        }
        if kernel.n_eligible() == 0 {
            return Err(Error::NoEligibleCovariates);
        }
        let cap = INIT_MAX_SIZE.min(hyper.max_model_size).min(kernel.n_eligible());
        let q = rng.random_range(1..=cap);
        let mut gamma: Vec<usize> = kernel.ranking().order()[..q].to_vec();
        gamma.sort_unstable();
        let h: f64 = loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break v;
            }
        };
        let (lo, hi) = hyper.pi_bounds();
        let pi = (q as f64 / hyper.p as f64).clamp(lo, hi);
        Self::from_state(x, y, kernel, hyper, ModelState::new(gamma, h, pi, x.col_variance())?, rng)
    }

    /// Starts from a given state.
    pub fn from_state(
        x: &'a GenotypeMatrix,
        y: Response,
        kernel: &'a MoveKernel,
        hyper: Hyperparameters,
        state: ModelState,
        rng: ChainRng,
    ) -> Result<Self> {
        validate_gamma(kernel, &state.gamma)?;
        if !hyper.pi_in_support(state.pi) {
            return Err(Error::invalid("initial pi outside the prior support"));
        }
        if !(state.h > 0.0 && state.h < 1.0) {
            return Err(Error::invalid("initial h must lie in (0, 1)"));
        }
        let fact = ModelFactorization::new(x, &y, &state.gamma, state.sigma_a_sq)?;
        let log_bf = fact.log_bf()?;
        Ok(Chain { x, y, kernel, hyper, state, fact, log_bf, rng, stats: ChainStats::default(), latent: None })
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn log_bf(&self) -> f64 {
        self.log_bf
    }

    pub fn response(&self) -> &Response {
        &self.y
    }

    pub fn stats(&self) -> &ChainStats {
        &self.stats
    }

    /// Log posterior of `(h, π, γ)` up to a constant, given its log BF.
    pub fn log_target(&self, state: &ModelState, log_bf: f64) -> f64 {
        log_bf + log_prior_gamma_given_pi(state.k(), state.pi, self.hyper.p) + log_prior_pi(state.pi, &self.hyper)
    }

    /// Proposes `γ'` by `m` successive kernel moves; returns the moves with
    /// forward and reverse path log densities.
    fn propose_path(&mut self, m: usize) -> (Vec<usize>, Vec<GammaMove>, f64, f64) {
        let mut gamma = self.state.gamma.clone();
        let mut moves = Vec::with_capacity(m);
        let (mut fwd, mut rev) = (0.0, 0.0);
        for _ in 0..m {
            let (mv, lq) = self.kernel.sample(&gamma, &mut self.rng);
            fwd += lq;
            mv.apply(&mut gamma);
            rev += self.kernel.log_density(&gamma, mv.inverse());
            moves.push(mv);
        }
        (gamma, moves, fwd, rev)
    }

    fn propose(&mut self) -> Result<Option<Proposal>> {
        let cfg = self.kernel.config();
        let compound = self.rng.random::<f64>() < cfg.small_world_prob;
        let m = if compound { self.rng.random_range(cfg.compound_min..=cfg.compound_max) } else { 1 };
        let (gamma, moves, fwd, rev) = self.propose_path(m);
        let pi = propose_pi(gamma.len(), &self.hyper, &mut self.rng);
        let h = propose_h(self.state.h, cfg, &mut self.rng);
        if !self.hyper.pi_in_support(pi) || !(h > 0.0 && h < 1.0) {
            return Ok(None);
        }
        let s = self.x.col_variance();
        let sig = sigma_a_sq(h, &gamma, s)?;
        let mut fact = self.fact.clone();
        for mv in moves {
            match mv {
                GammaMove::Add(j) => fact.add(self.x, &self.y, j)?,
                GammaMove::Remove(j) => fact.remove(j)?,
                GammaMove::Swap { out, into } => fact.swap(self.x, &self.y, out, into)?,
            }
        }
        if let Some(v) = sig {
            fact.refresh_sigma(v)?;
        }
        let log_bf = fact.log_bf()?;
        let log_hastings = rev - fwd + log_pi_proposal_density(self.state.pi, self.state.k(), &self.hyper)
            - log_pi_proposal_density(pi, gamma.len(), &self.hyper);
        Ok(Some(Proposal { state: ModelState { gamma, h, pi, sigma_a_sq: sig }, fact, log_bf, log_hastings, compound }))
    }

    /// One joint update of `(γ, π, h)`. Returns whether it was accepted.
    pub fn mh_step(&mut self) -> Result<bool> {
        self.stats.proposed += 1;
        let prop = self.propose()?;
        let u: f64 = self.rng.random();
        let Some(prop) = prop else {
            return Ok(false);
        };
        if prop.compound {
            self.stats.small_world_proposed += 1;
        }
        let log_alpha =
            self.log_target(&prop.state, prop.log_bf) - self.log_target(&self.state, self.log_bf) + prop.log_hastings;
        let accept = log_alpha >= 0.0 || u.ln() < log_alpha;
        if accept {
            self.stats.accepted += 1;
            if prop.compound {
                self.stats.small_world_accepted += 1;
            }
            self.stats.fallback_rebuilds += (prop.fact.fallback_rebuilds() - self.fact.fallback_rebuilds()) as u64;
            self.state = prop.state;
            self.fact = prop.fact;
            self.log_bf = prop.log_bf;
        }
        Ok(accept)
    }

    /// One full iteration: the model update, then any latent updates.
    pub fn iterate(&mut self) -> Result<()> {
        self.mh_step()?;
        if self.latent.is_some() {
            self.latent_sweep()?;
        }
        Ok(())
    }

    /// Draws `(β, τ)` at the current state.
    pub fn draw(&mut self) -> Draw {
        let effect = self.fact.sample_beta_tau(self.x, &mut self.rng);
        Draw { h: self.state.h, pi: self.state.pi, log_bf: self.log_bf, effect }
    }

    /// Runs burn-in and sampling, recording every `thin`-th sampling state.
    pub fn run(mut self, cfg: &ChainConfig) -> Result<PosteriorSamples> {
        cfg.validate()?;
        let mut out = PosteriorSamples::new(self.x.p(), self.y.mean());
        for _ in 0..cfg.burn_in {
            self.iterate()?;
        }
        for t in 0..cfg.sampling {
            self.iterate()?;
            if (t + 1) % cfg.thin == 0 {
                let d = self.draw();
                out.record(self.x, &self.y, d, cfg.keep_draws);
            }
        }
        out.stats = self.stats;
        Ok(out)
    }
}

/// Runs one chain on a continuous response. `stream` selects the
/// independent random stream of this chain under `cfg.seed`.
pub fn run_chain(
    x: &GenotypeMatrix,
    y: &Response,
    kernel: &MoveKernel,
    hyper: Hyperparameters,
    cfg: &ChainConfig,
    stream: u64,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let chain = Chain::new(x, y.clone(), kernel, hyper, chain_rng(cfg.seed, stream))?;
    chain.run(cfg)
}
