//! Rao–Blackwellized inclusion probabilities and effect means.
//!
//! For each covariate `j` and each recorded draw, the conditional odds of
//! inclusion given everything else are
//!
//! ```text
//! λ_j = LR_j · D_j · π / (1 − π)
//! ```
//!
//! where `LR_j` is the marginal likelihood ratio of a univariate regression
//! of the residual `R = y − X_{γ−j} β_{γ−j}` on `(1, x_j)` (intercept
//! integrated out under a flat prior, `β_j ~ N(0, σ_a²(h, γ−j ∪ {j})/τ)`),
//! and `D_j` is the density ratio of the remaining effects under the two
//! values of `σ_a` implied by including or excluding `j`. All covariates
//! outside `γ` share the same residual vector.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::genotype::{GenotypeMatrix, Response};
use crate::math::dot;
use crate::model::EffectDraw;
use crate::{Error, Result};

/// Conditional inclusion probability and conditional posterior mean of
/// `β_j` given inclusion, for one covariate at one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionTerm {
    pub log_odds: f64,
    pub prob: f64,
    pub cond_mean: f64,
}

/// Everything the per-covariate calculation needs about one covariate.
#[derive(Debug, Clone, Copy)]
pub struct CovariateStats {
    pub sum_x: f64,
    pub xtx: f64,
    pub s: f64,
}

/// Draw-level quantities shared by all covariates.
#[derive(Debug, Clone, Copy)]
pub struct DrawContext {
    pub n: usize,
    pub tau: f64,
    pub h: f64,
    pub pi: f64,
    /// `|γ|`, `Σ_{γ} s_i` and `Σ_{γ} β_i²` of the full draw.
    pub k: usize,
    pub s_total: f64,
    pub beta_sq: f64,
}

/// Conditional inclusion for covariate `j` given the residual summaries
/// `sum_r = Σ R_i` and `xtr = x_jᵀR` (with `R` already excluding `j`).
/// `j_beta` is `Some(β_j)` when `j` is in the current draw.
pub fn inclusion_term(ctx: &DrawContext, cov: CovariateStats, sum_r: f64, xtr: f64, j_beta: Option<f64>) -> InclusionTerm {
    let odds_h = ctx.h / (1.0 - ctx.h);
    let (k_minus, s_minus, b_minus) = match j_beta {
        Some(b) => (ctx.k - 1, ctx.s_total - cov.s, ctx.beta_sq - b * b),
        None => (ctx.k, ctx.s_total, ctx.beta_sq),
    };
    let sig_plus = odds_h / (s_minus + cov.s);
    let n = ctx.n as f64;

    // 2x2 regression of R on (1, x_j), flat prior on the intercept
    let a = n;
    let b = cov.sum_x;
    let d = cov.xtx + 1.0 / sig_plus;
    let det = a * d - b * b;
    let quad = (d * sum_r * sum_r - 2.0 * b * sum_r * xtr + a * xtr * xtr) / det;
    let cond_mean = (-b * sum_r + a * xtr) / det;
    let r_bar = sum_r / n;
    let log_lr = -0.5 * det.ln() + 0.5 * n.ln() - 0.5 * sig_plus.ln() + 0.5 * ctx.tau * (quad - n * r_bar * r_bar);

    let log_density_ratio = if k_minus > 0 {
        let sig_minus = odds_h / s_minus;
        0.5 * k_minus as f64 * (sig_minus / sig_plus).ln() - 0.5 * ctx.tau * b_minus * (1.0 / sig_plus - 1.0 / sig_minus)
    } else {
        0.0
    };
    let log_odds = log_lr + log_density_ratio + ctx.pi.ln() - (-ctx.pi).ln_1p();
    let prob = if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    };
    InclusionTerm { log_odds, prob, cond_mean }
}

/// Running sums behind the Rao–Blackwellized estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct RbAccumulator {
    pip_sum: Vec<f64>,
    beta_sum: Vec<f64>,
    draw_count: usize,
}

impl RbAccumulator {
    pub fn new(p: usize) -> Self {
        RbAccumulator { pip_sum: vec![0.0; p], beta_sum: vec![0.0; p], draw_count: 0 }
    }

    pub fn draw_count(&self) -> usize {
        self.draw_count
    }

    pub fn pip_sum(&self) -> &[f64] {
        &self.pip_sum
    }

    pub fn beta_sum(&self) -> &[f64] {
        &self.beta_sum
    }

    /// Adds one draw's conditional probabilities and means.
    pub fn update(&mut self, x: &GenotypeMatrix, y: &Response, draw: &EffectDraw, h: f64, pi: f64) {
        for (j, term) in draw_terms(x, y, draw, h, pi) {
            self.pip_sum[j] += term.prob;
            self.beta_sum[j] += term.prob * term.cond_mean;
        }
        self.draw_count += 1;
    }

    /// Sums another chain's accumulator into this one.
    pub fn merge(&mut self, other: &RbAccumulator) -> Result<()> {
        if other.pip_sum.len() != self.pip_sum.len() {
            return Err(Error::DimensionMismatch { expected: self.pip_sum.len(), found: other.pip_sum.len() });
        }
        for (a, b) in self.pip_sum.iter_mut().zip(&other.pip_sum) {
            *a += b;
        }
        for (a, b) in self.beta_sum.iter_mut().zip(&other.beta_sum) {
            *a += b;
        }
        self.draw_count += other.draw_count;
        Ok(())
    }

    pub fn pip_estimate(&self) -> Result<Vec<f64>> {
        if self.draw_count == 0 {
            return Err(Error::NoDraws);
        }
        let m = self.draw_count as f64;
        Ok(self.pip_sum.iter().map(|v| (v / m).clamp(0.0, 1.0)).collect())
    }

    pub fn posterior_mean_beta(&self) -> Result<Vec<f64>> {
        if self.draw_count == 0 {
            return Err(Error::NoDraws);
        }
        let m = self.draw_count as f64;
        Ok(self.beta_sum.iter().map(|v| v / m).collect())
    }
}

/// Conditional inclusion terms for every non-degenerate covariate at one
/// draw, sharing the full-model residual across covariates.
pub fn draw_terms(x: &GenotypeMatrix, y: &Response, draw: &EffectDraw, h: f64, pi: f64) -> Vec<(usize, InclusionTerm)> {
    let n = x.n();
    let s = x.col_variance();
    let fitted = x.mul_sparse(&draw.gamma, &draw.beta);
    let resid: Vec<f64> = y.values().iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let sum_resid: f64 = resid.iter().sum();
    let ctx = DrawContext {
        n,
        tau: draw.tau,
        h,
        pi,
        k: draw.gamma.len(),
        s_total: draw.gamma.iter().map(|&j| s[j]).sum(),
        beta_sq: draw.beta.iter().map(|b| b * b).sum(),
    };
    let mut out = Vec::with_capacity(x.p());
    let mut in_model = draw.gamma.iter().zip(&draw.beta).peekable();
    for j in 0..x.p() {
        let j_beta = match in_model.peek() {
            Some(&(&g, &b)) if g == j => {
                in_model.next();
                Some(b)
            }
            _ => None,
        };
        if x.is_degenerate(j) {
            continue;
        }
        let col = x.column(j);
        let sum_x: f64 = col.iter().sum();
        let xtx = x.col_sum_sq(j);
        let mut xtr = dot(col, &resid);
        let mut sum_r = sum_resid;
        if let Some(b) = j_beta {
            // put j's own contribution back into the residual
            xtr += xtx * b;
            sum_r += sum_x * b;
        }
        let cov = CovariateStats { sum_x, xtx, s: s[j] };
        out.push((j, inclusion_term(&ctx, cov, sum_r, xtr, j_beta)));
    }
    out
}

/// `E(y_new | y) = (x_new − x̄)ᵀ β̄ + ȳ`.
pub fn predict(x_new: &[f64], beta_bar: &[f64], col_mean: &[f64], y_mean: f64) -> Result<f64> {
    if x_new.len() != beta_bar.len() {
        return Err(Error::DimensionMismatch { expected: beta_bar.len(), found: x_new.len() });
    }
    if col_mean.len() != beta_bar.len() {
        return Err(Error::DimensionMismatch { expected: beta_bar.len(), found: col_mean.len() });
    }
    Ok(x_new.iter().zip(col_mean).zip(beta_bar).map(|((x, m), b)| (x - m) * b).sum::<f64>() + y_mean)
}

/// Keeps `β̄` only on the `top` covariates with highest PIP (ties by index).
pub fn sparsify_by_pip(beta_bar: &[f64], pip: &[f64], top: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pip.len()).collect();
    order.sort_by(|&a, &b| pip[b].total_cmp(&pip[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; beta_bar.len()];
    for &j in order.iter().take(top) {
        out[j] = beta_bar[j];
    }
    out
}
