//! Independent dense oracles shared by the integration tests.
#![allow(dead_code)]

use bvsr_core::simulate::{sim_genotypes, sim_phenotypes, SimulationSpec};
use bvsr_core::{GenotypeMatrix, Response};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Inverse and log-determinant by Gauss–Jordan elimination with partial
/// pivoting.
pub fn inverse_logdet(a: &[f64], k: usize) -> (Vec<f64>, f64) {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    let mut logdet = 0.0;
    for c in 0..k {
        let piv = (c..k).max_by(|&r, &s| m[r * k + c].abs().total_cmp(&m[s * k + c].abs())).unwrap();
        if piv != c {
            for j in 0..k {
                m.swap(piv * k + j, c * k + j);
                inv.swap(piv * k + j, c * k + j);
            }
        }
        let d = m[c * k + c];
        logdet += d.abs().ln();
        for j in 0..k {
            m[c * k + j] /= d;
            inv[c * k + j] /= d;
        }
        for r in 0..k {
            if r != c {
                let f = m[r * k + c];
                if f != 0.0 {
                    for j in 0..k {
                        m[r * k + j] -= f * m[c * k + j];
                        inv[r * k + j] -= f * inv[c * k + j];
                    }
                }
            }
        }
    }
    (inv, logdet)
}

/// Centered columns and centered response as plain vectors.
#[derive(Clone)]
pub struct Dense {
    pub n: usize,
    pub cols: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub yty: f64,
}

impl Dense {
    pub fn from_raw(cols: &[Vec<f64>], y: &[f64]) -> Self {
        let center = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| x - m).collect::<Vec<f64>>()
        };
        let y = center(y);
        let yty = y.iter().map(|v| v * v).sum();
        Dense { n: y.len(), cols: cols.iter().map(|c| center(c)).collect(), y, yty }
    }

    pub fn p(&self) -> usize {
        self.cols.len()
    }

    pub fn s(&self, j: usize) -> f64 {
        self.cols[j].iter().map(|v| v * v).sum::<f64>() / self.n as f64
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// `(Ω, X_γᵀy, quad)` with `Ω = (XᵀX + I/σ²)⁻¹`.
    pub fn posterior(&self, gamma: &[usize], sigma2: f64) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let k = gamma.len();
        let mut a = vec![0.0; k * k];
        for r in 0..k {
            for c in 0..k {
                a[r * k + c] = Self::dot(&self.cols[gamma[r]], &self.cols[gamma[c]]);
            }
            a[r * k + r] += 1.0 / sigma2;
        }
        let (omega, logdet_a) = inverse_logdet(&a, k);
        let b: Vec<f64> = gamma.iter().map(|&j| Self::dot(&self.cols[j], &self.y)).collect();
        let mut quad = 0.0;
        for r in 0..k {
            for c in 0..k {
                quad += b[r] * omega[r * k + c] * b[c];
            }
        }
        (omega, b, quad, -logdet_a)
    }

    /// Log Bayes factor against the null model.
    pub fn log_bf(&self, gamma: &[usize], sigma2: f64) -> f64 {
        if gamma.is_empty() {
            return 0.0;
        }
        let (_, _, quad, logdet_omega) = self.posterior(gamma, sigma2);
        0.5 * logdet_omega - 0.5 * gamma.len() as f64 * sigma2.ln()
            - 0.5 * self.n as f64 * ((self.yty - quad) / self.yty).ln()
    }

    /// Monte Carlo `E[PVE | γ, σ², y]` from `draws` joint draws of `(β, τ)`.
    pub fn mean_pve<R: Rng>(&self, gamma: &[usize], sigma2: f64, draws: usize, rng: &mut R) -> f64 {
        if gamma.is_empty() {
            return 0.0;
        }
        let k = gamma.len();
        let (omega, b, quad, _) = self.posterior(gamma, sigma2);
        let mean: Vec<f64> = (0..k).map(|r| (0..k).map(|c| omega[r * k + c] * b[c]).sum()).collect();
        // lower Cholesky factor of Ω
        let mut l = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let s: f64 = omega[i * k + j] - (0..j).map(|m| l[i * k + m] * l[j * k + m]).sum::<f64>();
                l[i * k + j] = if i == j { s.sqrt() } else { s / l[j * k + j] };
            }
        }
        let gamma_dist = Gamma::new(self.n as f64 / 2.0, 2.0 / (self.yty - quad)).unwrap();
        let mut acc = 0.0;
        let mut xb = vec![0.0; self.n];
        for _ in 0..draws {
            let tau: f64 = gamma_dist.sample(rng);
            let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            xb.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..k {
                let beta = mean[r] + (0..=r).map(|c| l[r * k + c] * z[c]).sum::<f64>() / tau.sqrt();
                for (o, x) in xb.iter_mut().zip(&self.cols[gamma[r]]) {
                    *o += beta * x;
                }
            }
            let v = tau * xb.iter().map(|v| v * v).sum::<f64>() / self.n as f64;
            acc += v / (1.0 + v);
        }
        acc / draws as f64
    }
}

pub struct Enumeration {
    pub pip: Vec<f64>,
    pub pve_mean: f64,
    /// Posterior probability of each `γ`, indexed by bit mask.
    pub model_prob: Vec<f64>,
}

/// Exact posterior over all `2^p` models on a midpoint grid of `grid`
/// values of `h` on `(0, 1)` and `grid` values of `log π` on
/// `(log(1/p), log(M/p))`.
pub fn enumerate(d: &Dense, max_model_size: usize, grid: usize, pve_draws: usize, seed: u64) -> Enumeration {
    let p = d.p();
    let (a, b) = ((1.0 / p as f64).ln(), (max_model_size as f64 / p as f64).ln());
    let hs: Vec<f64> = (0..grid).map(|i| (i as f64 + 0.5) / grid as f64).collect();
    let pis: Vec<f64> = (0..grid).map(|i| (a + (i as f64 + 0.5) * (b - a) / grid as f64).exp()).collect();
    let models = 1usize << p;
    // log weight of (γ, h), summed over π
    let mut logw = vec![0.0; models * grid];
    for mask in 0..models {
        let gamma: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let k = gamma.len();
        let s_sum: f64 = gamma.iter().map(|&j| d.s(j)).sum();
        let prior_terms: Vec<f64> =
            pis.iter().map(|&pi| k as f64 * pi.ln() + (p - k) as f64 * (1.0 - pi).ln()).collect();
        let mx = prior_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_pi_sum = mx + prior_terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln();
        for (hi, &h) in hs.iter().enumerate() {
            let lbf = if k == 0 { 0.0 } else { d.log_bf(&gamma, h / (1.0 - h) / s_sum) };
            logw[mask * grid + hi] = lbf + log_pi_sum;
        }
    }
    let mx = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - mx).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut pip = vec![0.0; p];
    let mut model_prob = vec![0.0; models];
    let mut pve_mean = 0.0;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for mask in 0..models {
        let gamma: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let s_sum: f64 = gamma.iter().map(|&j| d.s(j)).sum();
        for (hi, &h) in hs.iter().enumerate() {
            let wt = w[mask * grid + hi] / total;
            model_prob[mask] += wt;
            if wt > 1e-9 && pve_draws > 0 && !gamma.is_empty() {
                pve_mean += wt * d.mean_pve(&gamma, h / (1.0 - h) / s_sum, pve_draws, &mut rng);
            }
        }
        for &j in &gamma {
            pip[j] += model_prob[mask];
        }
    }
    Enumeration { pip, pve_mean, model_prob }
}

/// Simulated data as raw columns and phenotype.
pub fn simulated(spec: &SimulationSpec) -> (Vec<Vec<f64>>, Vec<f64>, bvsr_core::simulate::Truth) {
    let (g, _) = sim_genotypes(spec).unwrap();
    let (y, truth) = sim_phenotypes(&g, spec).unwrap();
    let cols = (0..g.p()).map(|j| g.column(j).to_vec()).collect();
    (cols, y, truth)
}

/// Centered matrix and response for the library.
pub fn prepared(cols: &[Vec<f64>], y: &[f64]) -> (GenotypeMatrix, Response) {
    let n = y.len();
    let values: Vec<f64> = cols.iter().flatten().copied().collect();
    let meta = (0..cols.len())
        .map(|j| bvsr_core::SnpInfo { id: format!("snp{}", j + 1), chromosome: "1".into(), position: (j as u64 + 1) * 1000 })
        .collect();
    let g = GenotypeMatrix::from_dense(n, cols.len(), values, meta).unwrap().impute_and_center().unwrap();
    (g, Response::new(y).unwrap())
}
