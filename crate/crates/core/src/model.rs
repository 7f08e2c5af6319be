//! Model parameters, hyperpriors and the PVE functional.
//!
//! The limits `σ_μ → ∞` and `λ, κ → 0` of the intercept and residual
//! precision priors are taken analytically inside the likelihood; they
//! never appear here as numbers.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::genotype::GenotypeMatrix;
use crate::{Error, Result};

pub const DEFAULT_MAX_MODEL_SIZE: usize = 400;

/// Prior bounds for `π`: `log π ~ U(log(1/p), log(M/p))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    /// Number of candidate covariates the prior is stated over.
    pub p: usize,
    /// Upper bound `M` on the prior expected model size.
    pub max_model_size: usize,
}

impl Hyperparameters {
    pub fn new(p: usize, max_model_size: usize) -> Result<Self> {
        if max_model_size < 2 || max_model_size >= p {
            return Err(Error::invalid(format!(
                "model size cap M = {max_model_size} must satisfy 1 < M < p = {p}"
            )));
        }
        Ok(Hyperparameters { p, max_model_size })
    }

    /// `(a, b) = (log(1/p), log(M/p))`.
    pub fn log_pi_bounds(&self) -> (f64, f64) {
        let p = self.p as f64;
        (-(p.ln()), (self.max_model_size as f64 / p).ln())
    }

    pub fn pi_bounds(&self) -> (f64, f64) {
        let p = self.p as f64;
        (1.0 / p, self.max_model_size as f64 / p)
    }

    pub fn pi_in_support(&self, pi: f64) -> bool {
        let (lo, hi) = self.pi_bounds();
        pi >= lo && pi <= hi
    }
}

/// `σ_a²(h, γ) = h / (1 − h) / Σ_{j∈γ} s_j`; `None` for the empty model,
/// where it is never needed.
pub fn sigma_a_sq(h: f64, gamma: &[usize], s: &[f64]) -> Result<Option<f64>> {
    if !(0.0..1.0).contains(&h) {
        return Err(Error::invalid(format!("h = {h} outside [0, 1)")));
    }
    if gamma.is_empty() {
        return Ok(None);
    }
    let total: f64 = gamma.iter().map(|&j| s[j]).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("included covariates have zero total variance"));
    }
    Ok(Some(h / (1.0 - h) / total))
}

/// Inverse of [`sigma_a_sq`]: `h = v / (1 + v)` with `v = σ_a² Σ s_j`.
pub fn h_from_sigma_a(gamma: &[usize], sigma_a: f64, s: &[f64]) -> f64 {
    let v = sigma_a * sigma_a * gamma.iter().map(|&j| s[j]).sum::<f64>();
    v / (1.0 + v)
}

/// Current point of the model-space chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Sorted indices of included covariates.
    pub gamma: Vec<usize>,
    pub h: f64,
    pub pi: f64,
    pub sigma_a_sq: Option<f64>,
}

impl ModelState {
    pub fn new(mut gamma: Vec<usize>, h: f64, pi: f64, s: &[f64]) -> Result<Self> {
        gamma.sort_unstable();
        gamma.dedup();
        let sigma_a_sq = sigma_a_sq(h, &gamma, s)?;
        Ok(ModelState { gamma, h, pi, sigma_a_sq })
    }

    pub fn k(&self) -> usize {
        self.gamma.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.gamma.binary_search(&j).is_ok()
    }
}

/// Draw of `(β, τ)` given `(γ, h)` with its PVE.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectDraw {
    /// Indices where `β` may be nonzero, aligned with `beta`.
    pub gamma: Vec<usize>,
    pub beta: Vec<f64>,
    /// Residual precision.
    pub tau: f64,
    pub pve: f64,
}

impl EffectDraw {
    /// Dense `β` of length `p`, exactly zero off `γ`.
    pub fn dense_beta(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for (&j, &b) in self.gamma.iter().zip(&self.beta) {
            out[j] = b;
        }
        out
    }
}

/// `PVE = V / (1 + V)` with `V = τ (1/n) Σ_i (Xβ)_i²` on centered columns.
pub fn pve(gamma: &[usize], beta: &[f64], tau: f64, g: &GenotypeMatrix) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau = {tau} must be positive")));
    }
    if gamma.len() != beta.len() {
        return Err(Error::DimensionMismatch { expected: gamma.len(), found: beta.len() });
    }
    let xb = g.mul_sparse(gamma, beta);
    Ok(pve_from_fitted(&xb, tau))
}

pub fn pve_from_fitted(xb: &[f64], tau: f64) -> f64 {
    let v = xb.iter().map(|x| x * x).sum::<f64>() / xb.len() as f64 * tau;
    v / (1.0 + v)
}

/// Log-density of the log-uniform prior on `π`, `−∞` outside its support.
pub fn log_prior_pi(pi: f64, hp: &Hyperparameters) -> f64 {
    if !hp.pi_in_support(pi) {
        return f64::NEG_INFINITY;
    }
    let (a, b) = hp.log_pi_bounds();
    -(b - a).ln() - pi.ln()
}

/// `k log π + (p − k) log(1 − π)`.
pub fn log_prior_gamma_given_pi(k: usize, pi: f64, p: usize) -> f64 {
    let kf = k as f64;
    let rest = (p - k) as f64;
    let a = if k == 0 { 0.0 } else { kf * pi.ln() };
    let b = if rest == 0.0 { 0.0 } else { rest * (-pi).ln_1p() };
    a + b
}
