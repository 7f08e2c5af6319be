//! Closed-form marginal likelihood of `(h, γ)` against the null model and
//! the conditional posterior of `(β, τ)`.
//!
//! With `Ω = (σ_a⁻² I + X_γᵀX_γ)⁻¹` and centered `X`, `y`,
//!
//! ```text
//! log BF = ½ log|Ω| − |γ| log σ_a − (n/2) log((yᵀy − yᵀX_γ Ω X_γᵀy) / (yᵀy − nȳ²))
//! ```
//!
//! The intercept is integrated out under a flat prior. Its `1/n` factor in
//! the determinant of the augmented `Ω` cancels the `√n` that appears when
//! the intercept is kept in the design, so the empty model has log BF 0.
//!
//! [`ModelFactorization`] keeps the Cholesky factor of `Ω⁻¹` up to date as
//! covariates are added or removed, in `O(k²)` plus one `O(nk)` Gram column.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::genotype::{GenotypeMatrix, Response};
use crate::linalg::Cholesky;
use crate::math::dot;
use crate::model::{pve_from_fitted, EffectDraw};
use crate::{Error, Result};

/// Sufficient statistics and factor for one model `γ` at one `σ_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFactorization {
    /// Covariates in factor order (insertion order, not sorted).
    indices: Vec<usize>,
    /// `X_γᵀX_γ`, row-major `k × k`.
    gram: Vec<f64>,
    /// `X_γᵀy`.
    xty: Vec<f64>,
    /// Lower factor of `σ_a⁻² I + X_γᵀX_γ`.
    chol: Cholesky,
    /// Current `σ_a²`. Kept across the empty model so a later add has a ridge.
    sigma_a_sq: f64,
    /// `yᵀy − nȳ²`.
    yty: f64,
    ybar: f64,
    n: usize,
    logdet_omega: f64,
    quad: f64,
    fallback_rebuilds: usize,
}

impl ModelFactorization {
    /// Builds from scratch. `sigma_a_sq` may be `None` only for empty `γ`.
    pub fn new(x: &GenotypeMatrix, y: &Response, gamma: &[usize], sigma_a_sq: Option<f64>) -> Result<Self> {
        if x.n() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.n(), found: y.len() });
        }
        let sigma_a_sq = match (sigma_a_sq, gamma.is_empty()) {
            (Some(s), _) if s > 0.0 && s.is_finite() => s,
            (None, true) => 1.0,
            (s, _) => return Err(Error::invalid(format!("sigma_a^2 = {s:?} invalid for model of size {}", gamma.len()))),
        };
        let k = gamma.len();
        let mut gram = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..=a {
                let v = dot(x.column(gamma[a]), x.column(gamma[b]));
                gram[a * k + b] = v;
                gram[b * k + a] = v;
            }
        }
        let xty = gamma.iter().map(|&j| dot(x.column(j), y.values())).collect();
        let mut fact = ModelFactorization {
            indices: gamma.to_vec(),
            gram,
            xty,
            chol: Cholesky::empty(),
            sigma_a_sq,
            yty: y.centered_ss(),
            ybar: 0.0,
            n: x.n(),
            logdet_omega: 0.0,
            quad: 0.0,
            fallback_rebuilds: 0,
        };
        fact.refactor()?;
        Ok(fact)
    }

    fn ridge(&self) -> f64 {
        1.0 / self.sigma_a_sq
    }

    fn refactor(&mut self) -> Result<()> {
        let k = self.indices.len();
        let mut a = self.gram.clone();
        let ridge = self.ridge();
        for i in 0..k {
            a[i * k + i] += ridge;
        }
        self.chol = Cholesky::factor(&a, k)
            .map_err(|e| Error::invalid(format!("factorization lost positivity at pivot {}", e.0)))?;
        self.update_derived();
        Ok(())
    }

    fn update_derived(&mut self) {
        self.logdet_omega = -self.chol.log_det();
        let w = self.chol.solve_lower(&self.xty);
        self.quad = w.iter().map(|v| v * v).sum();
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn chol(&self) -> &Cholesky {
        &self.chol
    }

    /// `σ_a²`, undefined for the empty model.
    pub fn sigma_a_sq(&self) -> Option<f64> {
        if self.indices.is_empty() {
            None
        } else {
            Some(self.sigma_a_sq)
        }
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    pub fn ybar(&self) -> f64 {
        self.ybar
    }

    /// `log |Ω|`.
    pub fn logdet_omega(&self) -> f64 {
        self.logdet_omega
    }

    /// `yᵀX_γ Ω X_γᵀy`.
    pub fn quad(&self) -> f64 {
        self.quad
    }

    /// Number of times an append lost its pivot and forced a rebuild.
    pub fn fallback_rebuilds(&self) -> usize {
        self.fallback_rebuilds
    }

    /// Indices, Gram matrix and `X_γᵀy` permuted to ascending index order.
    pub fn sorted_fields(&self) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
        let k = self.k();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.sort_by_key(|&a| self.indices[a]);
        let idx = perm.iter().map(|&a| self.indices[a]).collect();
        let mut gram = vec![0.0; k * k];
        for (i, &a) in perm.iter().enumerate() {
            for (j, &b) in perm.iter().enumerate() {
                gram[i * k + j] = self.gram[a * k + b];
            }
        }
        let xty = perm.iter().map(|&a| self.xty[a]).collect();
        (idx, gram, xty)
    }

    /// Adds covariate `j`.
    pub fn add(&mut self, x: &GenotypeMatrix, y: &Response, j: usize) -> Result<()> {
        if self.indices.contains(&j) {
            return Err(Error::invalid(format!("covariate {j} already in the model")));
        }
        let k = self.k();
        let col = x.column(j);
        let cross: Vec<f64> = self.indices.iter().map(|&i| dot(x.column(i), col)).collect();
        let diag = dot(col, col);
        let mut gram = vec![0.0; (k + 1) * (k + 1)];
        for a in 0..k {
            gram[a * (k + 1)..a * (k + 1) + k].copy_from_slice(&self.gram[a * k..a * k + k]);
            gram[a * (k + 1) + k] = cross[a];
            gram[k * (k + 1) + a] = cross[a];
        }
        gram[k * (k + 1) + k] = diag;
        self.gram = gram;
        self.indices.push(j);
        self.xty.push(dot(col, y.values()));
        if self.chol.append(&cross, diag + self.ridge()).is_err() {
            log::warn!("pivot lost adding covariate {j}; rebuilding factorization");
            self.fallback_rebuilds += 1;
            return self.refactor();
        }
        self.update_derived();
        Ok(())
    }

    /// Removes covariate `j`.
    pub fn remove(&mut self, j: usize) -> Result<()> {
        let m = self
            .indices
            .iter()
            .position(|&i| i == j)
            .ok_or_else(|| Error::invalid(format!("covariate {j} not in the model")))?;
        let k = self.k();
        let mut gram = Vec::with_capacity((k - 1) * (k - 1));
        for a in (0..k).filter(|&a| a != m) {
            for b in (0..k).filter(|&b| b != m) {
                gram.push(self.gram[a * k + b]);
            }
        }
        self.gram = gram;
        self.indices.remove(m);
        self.xty.remove(m);
        self.chol.remove(m);
        self.update_derived();
        Ok(())
    }

    /// Removes `out` and adds `into`.
    pub fn swap(&mut self, x: &GenotypeMatrix, y: &Response, out: usize, into: usize) -> Result<()> {
        if self.indices.contains(&into) {
            return Err(Error::invalid(format!("covariate {into} already in the model")));
        }
        self.remove(out)?;
        self.add(x, y, into)
    }

    /// Re-factors for a new `σ_a²`; Gram matrix and `X_γᵀy` are unchanged.
    pub fn refresh_sigma(&mut self, sigma_a_sq: f64) -> Result<()> {
        if !(sigma_a_sq > 0.0 && sigma_a_sq.is_finite()) {
            return Err(Error::invalid(format!("sigma_a^2 = {sigma_a_sq} must be positive and finite")));
        }
        if sigma_a_sq == self.sigma_a_sq {
            return Ok(());
        }
        self.sigma_a_sq = sigma_a_sq;
        if self.indices.is_empty() {
            return Ok(());
        }
        self.refactor()
    }

    /// Recomputes `X_γᵀy` after the response changed (latent updates).
    pub fn set_response(&mut self, x: &GenotypeMatrix, y: &Response) {
        self.xty = self.indices.iter().map(|&j| dot(x.column(j), y.values())).collect();
        self.yty = y.centered_ss();
        self.update_derived();
    }

    /// Updates `X_γᵀy` for a response that changed by `delta` at `rows`.
    pub fn shift_response(&mut self, x: &GenotypeMatrix, rows: &[(usize, f64)]) {
        for (a, &j) in self.indices.iter().enumerate() {
            let col = x.column(j);
            self.xty[a] += rows.iter().map(|&(i, d)| col[i] * d).sum::<f64>();
        }
        self.update_derived();
    }

    /// Log Bayes factor of `(h, γ)` against the null model.
    pub fn log_bf(&self) -> Result<f64> {
        if !(self.yty > 0.0) {
            return Err(Error::ConstantPhenotype);
        }
        let k = self.k();
        if k == 0 {
            return Ok(0.0);
        }
        let n = self.n as f64;
        let ratio = -self.quad / self.yty;
        Ok(0.5 * self.logdet_omega - 0.5 * k as f64 * self.sigma_a_sq.ln() - 0.5 * n * ratio.ln_1p())
    }

    /// Draws `τ ~ Γ(n/2, 2/(yᵀy − yᵀX_γΩX_γᵀy))` then
    /// `β_γ | τ ~ N(ΩX_γᵀy, Ω/τ)`.
    pub fn sample_beta_tau<R: Rng + ?Sized>(&self, x: &GenotypeMatrix, rng: &mut R) -> EffectDraw {
        let resid = (self.yty - self.quad).max(f64::MIN_POSITIVE);
        let tau = Gamma::new(self.n as f64 / 2.0, 2.0 / resid)
            .expect("gamma parameters are positive")
            .sample(rng);
        let k = self.k();
        let mut w = self.chol.solve_lower(&self.xty);
        let scale = 1.0 / tau.sqrt();
        for v in w.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += z * scale;
        }
        let beta_fact = self.chol.solve_upper(&w);
        let mut pairs: Vec<(usize, f64)> = (0..k).map(|a| (self.indices[a], beta_fact[a])).collect();
        pairs.sort_by_key(|&(j, _)| j);
        let gamma: Vec<usize> = pairs.iter().map(|&(j, _)| j).collect();
        let beta: Vec<f64> = pairs.iter().map(|&(_, b)| b).collect();
        let pve = pve_from_fitted(&x.mul_sparse(&gamma, &beta), tau);
        EffectDraw { gamma, beta, tau, pve }
    }

    /// Posterior mean `ΩX_γᵀy` in factor order.
    pub fn posterior_mean(&self) -> Vec<f64> {
        self.chol.solve(&self.xty)
    }
}

/// Log BF of a one-covariate model with fixed `σ_a²`, from sufficient
/// statistics `xᵀx`, `xᵀy` and `yᵀy − nȳ²`.
pub fn single_covariate_log_bf(xtx: f64, xty: f64, yty: f64, n: usize, sigma_a_sq: f64) -> f64 {
    let omega = 1.0 / (xtx + 1.0 / sigma_a_sq);
    let quad = xty * xty * omega;
    0.5 * omega.ln() - 0.5 * sigma_a_sq.ln() - 0.5 * n as f64 * (-quad / yty).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::SnpInfo;
    use rand::SeedableRng;

    fn data(n: usize, p: usize, seed: u64) -> (GenotypeMatrix, Response) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..n * p).map(|_| rng.random_range(0..3) as f64).collect();
        let meta = (0..p).map(|j| SnpInfo { id: format!("s{j}"), ..Default::default() }).collect();
        let g = GenotypeMatrix::from_dense(n, p, vals, meta).unwrap().impute_and_center().unwrap();
        let y: Vec<f64> = (0..n).map(|i| g.column(0)[i] * 0.8 + rng.random::<f64>() * 2.0).collect();
        (g, Response::new(&y).unwrap())
    }

    fn assert_matches_rebuild(f: &ModelFactorization, x: &GenotypeMatrix, y: &Response) {
        let mut gamma = f.indices().to_vec();
        gamma.sort_unstable();
        let r = ModelFactorization::new(x, y, &gamma, f.sigma_a_sq()).unwrap();
        let (i1, g1, x1) = f.sorted_fields();
        let (i2, g2, x2) = r.sorted_fields();
        assert_eq!(i1, i2);
        for (a, b) in g1.iter().chain(&x1).zip(g2.iter().chain(&x2)) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
        assert!((f.logdet_omega() - r.logdet_omega()).abs() <= 1e-8 * (1.0 + r.logdet_omega().abs()));
        assert!((f.quad() - r.quad()).abs() <= 1e-8 * (1.0 + r.quad().abs()));
    }

    #[test]
    fn empty_model_has_zero_log_bf() {
        let (g, y) = data(30, 5, 1);
        let f = ModelFactorization::new(&g, &y, &[], None).unwrap();
        assert_eq!(f.log_bf().unwrap(), 0.0);
        assert!(ModelFactorization::new(&g, &y, &[1], None).is_err());
    }

    #[test]
    fn add_then_remove_round_trips() {
        let (g, y) = data(40, 6, 2);
        let mut f = ModelFactorization::new(&g, &y, &[0, 3], Some(0.7)).unwrap();
        let orig = f.clone();
        f.add(&g, &y, 5).unwrap();
        f.remove(5).unwrap();
        assert_eq!(f.indices(), orig.indices());
        for (a, b) in f.chol().as_slice().iter().zip(orig.chol().as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((f.quad() - orig.quad()).abs() < 1e-8);
        assert!((f.logdet_omega() - orig.logdet_omega()).abs() < 1e-8);
    }

    #[test]
    fn swap_is_remove_then_add() {
        let (g, y) = data(40, 6, 3);
        let mut a = ModelFactorization::new(&g, &y, &[0, 2, 4], Some(1.3)).unwrap();
        let mut b = a.clone();
        a.swap(&g, &y, 2, 5).unwrap();
        b.remove(2).unwrap();
        b.add(&g, &y, 5).unwrap();
        assert_eq!(a, b);
        assert_matches_rebuild(&a, &g, &y);
    }

    #[test]
    fn refresh_sigma_same_value_is_noop_and_empty_is_noop() {
        let (g, y) = data(40, 6, 4);
        let mut f = ModelFactorization::new(&g, &y, &[1, 2], Some(0.5)).unwrap();
        let before = f.clone();
        f.refresh_sigma(0.5).unwrap();
        assert_eq!(f, before);
        let mut e = ModelFactorization::new(&g, &y, &[], None).unwrap();
        e.refresh_sigma(3.0).unwrap();
        assert_eq!(e.log_bf().unwrap(), 0.0);
    }

    #[test]
    fn large_sigma_approaches_least_squares() {
        let (g, y) = data(60, 4, 5);
        let gamma = [0, 1, 3];
        let f = ModelFactorization::new(&g, &y, &gamma, Some(1e12)).unwrap();
        // dense OLS via normal equations solved with Gaussian elimination
        let k = 3;
        let mut a = [[0.0; 4]; 3];
        for i in 0..k {
            for j in 0..k {
                a[i][j] = dot(g.column(gamma[i]), g.column(gamma[j]));
            }
            a[i][3] = dot(g.column(gamma[i]), y.values());
        }
        for c in 0..k {
            for r in c + 1..k {
                let m = a[r][c] / a[c][c];
                for t in c..4 {
                    a[r][t] -= m * a[c][t];
                }
            }
        }
        let mut b = [0.0; 3];
        for r in (0..k).rev() {
            let s: f64 = (r + 1..k).map(|t| a[r][t] * b[t]).sum();
            b[r] = (a[r][3] - s) / a[r][r];
        }
        let ols: f64 = (0..k).map(|i| b[i] * dot(g.column(gamma[i]), y.values())).sum();
        assert!((f.quad() - ols).abs() < 1e-6 * ols.abs().max(1.0));
    }

    #[test]
    fn log_bf_invariant_to_affine_response() {
        let (g, y) = data(50, 5, 6);
        let y2: Vec<f64> = (0..50).map(|i| 2.0 * (y.values()[i] + y.mean()) + 3.0).collect();
        let y2 = Response::new(&y2).unwrap();
        let a = ModelFactorization::new(&g, &y, &[0, 2], Some(0.4)).unwrap().log_bf().unwrap();
        let b = ModelFactorization::new(&g, &y2, &[0, 2], Some(0.4)).unwrap().log_bf().unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn single_covariate_matches_factorization() {
        let (g, y) = data(50, 5, 7);
        for j in 0..5 {
            let f = ModelFactorization::new(&g, &y, &[j], Some(0.04)).unwrap();
            let direct = single_covariate_log_bf(g.col_sum_sq(j), dot(g.column(j), y.values()), y.centered_ss(), 50, 0.04);
            assert!((f.log_bf().unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_is_zero_off_gamma() {
        let (g, y) = data(50, 5, 8);
        let f = ModelFactorization::new(&g, &y, &[1, 4], Some(0.4)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let d = f.sample_beta_tau(&g, &mut rng);
        let dense = d.dense_beta(5);
        assert_eq!(dense[0], 0.0);
        assert_eq!(dense[2], 0.0);
        assert_eq!(dense[3], 0.0);
        assert!(d.tau > 0.0 && (0.0..1.0).contains(&d.pve));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn incremental_matches_rebuild(moves in proptest::collection::vec((0usize..3, 0usize..12, 0usize..12, 0.05f64..5.0), 1..60)) {
                let (g, y) = data(30, 12, 11);
                let mut f = ModelFactorization::new(&g, &y, &[], None).unwrap();
                for (kind, a, b, s) in moves {
                    let inside: Vec<usize> = f.indices().to_vec();
                    match kind {
                        0 if !inside.contains(&a) => f.add(&g, &y, a).unwrap(),
                        1 if !inside.is_empty() => f.remove(inside[a % inside.len()]).unwrap(),
                        2 if !inside.is_empty() && !inside.contains(&b) => f.swap(&g, &y, inside[a % inside.len()], b).unwrap(),
                        _ => f.refresh_sigma(s).unwrap(),
                    }
                    if f.k() > 0 {
                        let mut gamma = f.indices().to_vec();
                        gamma.sort_unstable();
                        let r = ModelFactorization::new(&g, &y, &gamma, f.sigma_a_sq()).unwrap();
                        prop_assert!((f.log_bf().unwrap() - r.log_bf().unwrap()).abs() < 1e-8);
                    }
                }
            }
        }
    }
}
