//! Synthetic genotypes and phenotypes with a prescribed PVE.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::genotype::{GenotypeMatrix, SnpInfo};
use crate::model::pve_from_fitted;
use crate::{chain_rng, Error, Result};

/// Attempts at drawing effects with a non-zero genetic signal.
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectDist {
    /// `N(0, 1)`.
    Normal,
    /// Laplace with rate 1: `Exp(1)` magnitude, random sign.
    DoubleExponential,
}

impl EffectDist {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            EffectDist::Normal => StandardNormal.sample(rng),
            EffectDist::DoubleExponential => {
                let m: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub p: usize,
    pub n: usize,
    pub maf_range: (f64, f64),
    pub n_causal: usize,
    pub effect_dist: EffectDist,
    pub target_pve: f64,
    pub binary: bool,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(p: usize, n: usize, target_pve: f64, seed: u64) -> Self {
        SimulationSpec {
            p,
            n,
            maf_range: (0.05, 0.5),
            n_causal: 30.min(p),
            effect_dist: EffectDist::Normal,
            target_pve,
            binary: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n < 2 {
            return Err(Error::invalid("simulation needs p >= 1 and n >= 2"));
        }
        if self.n_causal > self.p {
            return Err(Error::invalid(format!("{} causal SNPs requested but p = {}", self.n_causal, self.p)));
        }
        if !(0.0..1.0).contains(&self.target_pve) {
            return Err(Error::invalid(format!("target PVE {} outside [0, 1)", self.target_pve)));
        }
        let (lo, hi) = self.maf_range;
        if !(0.0 < lo && lo <= hi && hi <= 0.5) {
            return Err(Error::invalid("allele frequency range must satisfy 0 < lo <= hi <= 0.5"));
        }
        Ok(())
    }
}

/// Generating values behind a simulated phenotype.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// Sorted causal indices.
    pub causal: Vec<usize>,
    /// Effects aligned with `causal`.
    pub beta: Vec<f64>,
    pub tau: f64,
    /// PVE of `(β, τ)` on the simulated genotypes.
    pub pve: f64,
}

impl Truth {
    pub fn dense_beta(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for (&j, &b) in self.causal.iter().zip(&self.beta) {
            out[j] = b;
        }
        out
    }

    pub fn causal_mask(&self, p: usize) -> Vec<bool> {
        let mut out = vec![false; p];
        for &j in &self.causal {
            out[j] = true;
        }
        out
    }
}

/// Independent SNPs with `f_j ~ U[lo, hi]` and `x_ij ~ Binomial(2, f_j)`,
/// placed every 1 kb on chromosome 1. Returns raw (uncentered) dosages and
/// the allele frequencies.
pub fn sim_genotypes(spec: &SimulationSpec) -> Result<(GenotypeMatrix, Vec<f64>)> {
    spec.validate()?;
    let mut rng = chain_rng(spec.seed, 0);
    let (lo, hi) = spec.maf_range;
    let mut freqs = Vec::with_capacity(spec.p);
    let mut values = Vec::with_capacity(spec.n * spec.p);
    for _ in 0..spec.p {
        let f = if lo < hi { rng.random_range(lo..=hi) } else { lo };
        freqs.push(f);
        for _ in 0..spec.n {
            let a = (rng.random::<f64>() < f) as u8 + (rng.random::<f64>() < f) as u8;
            values.push(a as f64);
        }
    }
    let meta = (0..spec.p)
        .map(|j| SnpInfo { id: format!("snp{}", j + 1), chromosome: "1".to_string(), position: (j as u64 + 1) * 1000 })
        .collect();
    Ok((GenotypeMatrix::from_dense(spec.n, spec.p, values, meta)?, freqs))
}

/// `X_c β` with each causal column centered at its sample mean.
fn centered_fitted(g: &GenotypeMatrix, causal: &[usize], beta: &[f64]) -> Vec<f64> {
    let n = g.n();
    let mut out = vec![0.0; n];
    for (&j, &b) in causal.iter().zip(beta) {
        let col = g.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        for (o, x) in out.iter_mut().zip(col) {
            *o += b * (x - mean);
        }
    }
    out
}

/// Draws the causal set, effects and residual precision giving exactly
/// `target_pve` on these genotypes, then `y = Xβ + N(0, 1/τ)` on the raw
/// dosages. In binary mode the largest `n/2` values become 1, the rest 0.
pub fn sim_phenotypes(g: &GenotypeMatrix, spec: &SimulationSpec) -> Result<(Vec<f64>, Truth)> {
    spec.validate()?;
    if g.n() != spec.n || g.p() != spec.p {
        return Err(Error::DimensionMismatch { expected: spec.n * spec.p, found: g.n() * g.p() });
    }
    let mut rng = chain_rng(spec.seed, 1);
    let n = spec.n;
    let (causal, beta, tau) = if spec.target_pve == 0.0 || spec.n_causal == 0 {
        (Vec::new(), Vec::new(), 1.0)
    } else {
        let mut causal = sample(&mut rng, spec.p, spec.n_causal).into_vec();
        causal.sort_unstable();
        let mut attempt = 0;
        loop {
            let beta: Vec<f64> = causal.iter().map(|_| spec.effect_dist.sample(&mut rng)).collect();
            let xb = centered_fitted(g, &causal, &beta);
            let v = xb.iter().map(|x| x * x).sum::<f64>() / n as f64;
            if v > 0.0 {
                let t = spec.target_pve;
                break (causal, beta, t / (1.0 - t) / v);
            }
            attempt += 1;
            if attempt >= MAX_REDRAWS {
                return Err(Error::DegenerateSignal);
            }
            log::warn!("simulated genetic signal is identically zero; redrawing effects");
        }
    };
    let xb = centered_fitted(g, &causal, &beta);
    let pve = pve_from_fitted(&xb, tau);
    let sd = 1.0 / tau.sqrt();
    let raw = g.mul_sparse(&causal, &beta);
    let mut y: Vec<f64> = raw
        .iter()
        .map(|m| {
            let e: f64 = StandardNormal.sample(&mut rng);
            m + sd * e
        })
        .collect();
    if spec.binary {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
        let mut labels = vec![0.0; n];
        for &i in order.iter().take(n / 2) {
            labels[i] = 1.0;
        }
        y = labels;
    }
    Ok((y, Truth { causal, beta, tau, pve }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genotypes_are_dosages_and_deterministic() {
        let spec = SimulationSpec::new(20, 50, 0.3, 9);
        let (g, f) = sim_genotypes(&spec).unwrap();
        for j in 0..20 {
            assert!(g.column(j).iter().all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
            assert!((0.05..=0.5).contains(&f[j]));
        }
        assert_eq!(g.snp_meta()[3].position, 4000);
        assert_eq!(sim_genotypes(&spec).unwrap().0, g);
    }

    #[test]
    fn pve_hits_target() {
        let mut spec = SimulationSpec::new(100, 200, 0.37, 4);
        spec.effect_dist = EffectDist::DoubleExponential;
        let (g, _) = sim_genotypes(&spec).unwrap();
        let (_, truth) = sim_phenotypes(&g, &spec).unwrap();
        assert!((truth.pve - 0.37).abs() < 1e-12);
        assert_eq!(truth.causal.len(), 30);
        assert!(truth.causal.windows(2).all(|w| w[0] < w[1]));
        let gc = g.clone().impute_and_center().unwrap();
        let pve = crate::model::pve(&truth.causal, &truth.beta, truth.tau, &gc).unwrap();
        assert!((pve - 0.37).abs() < 1e-12);
    }

    #[test]
    fn null_and_binary_modes() {
        let mut spec = SimulationSpec::new(10, 41, 0.0, 1);
        let (g, _) = sim_genotypes(&spec).unwrap();
        let (_, truth) = sim_phenotypes(&g, &spec).unwrap();
        assert!(truth.causal.is_empty());
        assert_eq!(truth.tau, 1.0);
        spec.target_pve = 0.5;
        spec.n_causal = 3;
        spec.binary = true;
        let (y, _) = sim_phenotypes(&g, &spec).unwrap();
        assert_eq!(y.iter().filter(|&&v| v == 1.0).count(), 20);
        assert!(y.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SimulationSpec::new(10, 20, 1.0, 1);
        assert!(spec.validate().is_err());
        spec.target_pve = 0.2;
        spec.n_causal = 11;
        assert!(spec.validate().is_err());
    }
}
