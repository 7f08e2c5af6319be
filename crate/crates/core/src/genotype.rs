//! In-memory genotype and phenotype containers plus the pure parts of data
//! preparation: imputation, centering and quantile normalization.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use crate::math::inv_normal_cdf;
use crate::{Error, Result};

/// Column variances at or below this are treated as zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SnpInfo {
    pub id: String,
    pub chromosome: String,
    /// Base-pair coordinate.
    pub position: u64,
}

/// `n × p` dosage matrix stored column-major, one SNP per column.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    snp_meta: Vec<SnpInfo>,
    col_mean: Vec<f64>,
    col_variance: Vec<f64>,
    degenerate: Vec<bool>,
    centered: bool,
}

impl GenotypeMatrix {
    /// Builds an uncentered matrix from per-SNP columns. `None` marks a
    /// missing dosage. Observed dosages must lie in `[0, 2]`.
    pub fn from_columns(n: usize, columns: Vec<Vec<Option<f64>>>, snp_meta: Vec<SnpInfo>) -> Result<Self> {
        let p = columns.len();
        if snp_meta.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: snp_meta.len() });
        }
        let mut values = Vec::with_capacity(n * p);
        let mut missing = Vec::with_capacity(n * p);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: col.len() });
            }
            for v in col {
                match v {
                    Some(x) if (0.0..=2.0).contains(&x) => {
                        values.push(x);
                        missing.push(false);
                    }
                    Some(x) => {
                        return Err(Error::invalid(format!("dosage {x} outside [0, 2] at SNP column {j}")));
                    }
                    None => {
                        values.push(0.0);
                        missing.push(true);
                    }
                }
            }
        }
        Ok(GenotypeMatrix {
            n,
            p,
            values,
            missing,
            snp_meta,
            col_mean: vec![0.0; p],
            col_variance: vec![0.0; p],
            degenerate: vec![false; p],
            centered: false,
        })
    }

    /// Dense, fully observed dosages in column-major order.
    pub fn from_dense(n: usize, p: usize, values: Vec<f64>, snp_meta: Vec<SnpInfo>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, found: values.len() });
        }
        let columns = values.chunks(n.max(1)).take(p).map(|c| c.iter().map(|&v| Some(v)).collect()).collect();
        Self::from_columns(n, columns, snp_meta)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing.get(j * self.n + i).copied().unwrap_or(false)
    }

    pub fn snp_meta(&self) -> &[SnpInfo] {
        &self.snp_meta
    }

    pub fn set_snp_meta(&mut self, meta: Vec<SnpInfo>) -> Result<()> {
        if meta.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: meta.len() });
        }
        self.snp_meta = meta;
        Ok(())
    }

    /// `s_j = (1/n) Σ_i x_ij²` on centered columns.
    pub fn col_variance(&self) -> &[f64] {
        &self.col_variance
    }

    /// Means subtracted during centering (the training-scale dosage means).
    pub fn col_mean(&self) -> &[f64] {
        &self.col_mean
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.degenerate[j]
    }

    pub fn eligible_count(&self) -> usize {
        self.degenerate.iter().filter(|d| !**d).count()
    }

    /// `x_jᵀ x_j` on the stored values.
    pub fn col_sum_sq(&self, j: usize) -> f64 {
        self.col_variance[j] * self.n as f64
    }

    /// Keeps only the listed individuals (rows), in the given order.
    /// The result is uncentered bookkeeping-wise and must be re-centered.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n) {
            return Err(Error::invalid(format!("row {bad} out of range for n = {}", self.n)));
        }
        let n = rows.len();
        let mut values = Vec::with_capacity(n * self.p);
        let mut missing = Vec::with_capacity(n * self.p);
        for j in 0..self.p {
            let col = self.column(j);
            for &r in rows {
                values.push(col[r]);
                missing.push(self.is_missing(r, j));
            }
        }
        Ok(GenotypeMatrix {
            n,
            p: self.p,
            values,
            missing,
            snp_meta: self.snp_meta.clone(),
            col_mean: self.col_mean.clone(),
            col_variance: vec![0.0; self.p],
            degenerate: vec![false; self.p],
            centered: false,
        })
    }

    /// Replaces missing dosages by the column mean of observed entries,
    /// subtracts column means and records `s_j`. Columns are not scaled.
    /// Zero-variance columns are kept but flagged degenerate.
    pub fn impute_and_center(mut self) -> Result<Self> {
        let n = self.n;
        for j in 0..self.p {
            let col = &mut self.values[j * n..(j + 1) * n];
            let miss = if self.missing.is_empty() { &[][..] } else { &self.missing[j * n..(j + 1) * n] };
            let observed = (0..n).filter(|&i| !miss.get(i).copied().unwrap_or(false));
            let (sum, count) = observed.fold((0.0, 0usize), |(s, c), i| (s + col[i], c + 1));
            if count == 0 {
                return Err(Error::AllMissing { column: j });
            }
            let mean = sum / count as f64;
            for (i, v) in col.iter_mut().enumerate() {
                if miss.get(i).copied().unwrap_or(false) {
                    *v = 0.0;
                } else {
                    *v -= mean;
                }
            }
            let s = col.iter().map(|v| v * v).sum::<f64>() / n as f64;
            self.col_mean[j] += mean;
            self.col_variance[j] = s;
            self.degenerate[j] = s <= DEGENERATE_VARIANCE;
        }
        self.missing.iter_mut().for_each(|m| *m = false);
        self.centered = true;
        Ok(self)
    }

    /// Centers a new individual's dosages with the training column means.
    pub fn center_new(&self, x_new: &[f64]) -> Result<Vec<f64>> {
        if x_new.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: x_new.len() });
        }
        Ok(x_new.iter().zip(&self.col_mean).map(|(x, m)| x - m).collect())
    }

    /// `X b` for a sparse `b` given as parallel index/value slices.
    pub fn mul_sparse(&self, idx: &[usize], coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&j, &b) in idx.iter().zip(coef) {
            for (o, x) in out.iter_mut().zip(self.column(j)) {
                *o += b * x;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phenotype {
    values: Vec<f64>,
    missing: Vec<bool>,
    normalized: bool,
}

impl Phenotype {
    pub fn new(values: Vec<Option<f64>>) -> Self {
        let missing = values.iter().map(Option::is_none).collect();
        let values = values.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        Phenotype { values, missing, normalized: false }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        let missing = vec![false; values.len()];
        Phenotype { values, missing, normalized: false }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn observed_rows(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| !self.missing[i]).collect()
    }

    /// Drops individuals with missing phenotype from both the phenotype and
    /// the genotype rows so they stay aligned.
    pub fn drop_missing(&self, g: &GenotypeMatrix) -> Result<(GenotypeMatrix, Phenotype)> {
        if g.n() != self.len() {
            return Err(Error::DimensionMismatch { expected: g.n(), found: self.len() });
        }
        let rows = self.observed_rows();
        let g = g.select_rows(&rows)?;
        let values: Vec<f64> = rows.iter().map(|&i| self.values[i]).collect();
        Ok((g, Phenotype { missing: vec![false; values.len()], values, normalized: self.normalized }))
    }

    /// Maps each value to `Φ⁻¹(r/(n+1))` with `r` its (tie-averaged) rank.
    pub fn quantile_normalize(&self) -> Result<Phenotype> {
        if self.missing.iter().any(|&m| m) {
            return Err(Error::invalid("quantile normalization needs missing values removed"));
        }
        let n = self.values.len();
        if n < 2 {
            return Err(Error::invalid("quantile normalization needs at least two values"));
        }
        let ranks = average_ranks(&self.values);
        let values = ranks.iter().map(|&r| inv_normal_cdf(r / (n as f64 + 1.0))).collect();
        Ok(Phenotype { values, missing: vec![false; n], normalized: true })
    }
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = avg;
        }
        i = j;
    }
    ranks
}

/// Mean-centered response used by the likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    values: Vec<f64>,
    mean: f64,
    ss: f64,
}

impl Response {
    pub fn new(y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("empty response"));
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let values: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let ss = values.iter().map(|v| v * v).sum::<f64>();
        let raw = y.iter().map(|v| v * v).sum::<f64>();
        if !(ss > 1e-14 * raw) || ss == 0.0 {
            return Err(Error::ConstantPhenotype);
        }
        Ok(Response { values, mean, ss })
    }

    /// Centered values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mean removed at construction; added back when predicting.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `yᵀy − n ȳ²`.
    pub fn centered_ss(&self) -> f64 {
        self.ss
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exchanges the values of two observations; mean and sum of squares
    /// are unchanged.
    pub fn swap(&mut self, i: usize, j: usize) {
        self.values.swap(i, j);
    }
}
