//! Text file formats.
//!
//! * Mean genotypes: one SNP per line, `id, allele1, allele0, d_1, …, d_n`,
//!   comma or whitespace separated, `NA` for a missing dosage.
//! * Phenotypes: one value per line, `NA` for missing.
//! * Positions: `id chromosome position` per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bvsr_core::{GenotypeMatrix, Phenotype, SnpInfo};
use serde::{Deserialize, Serialize};

pub const MISSING: &str = "NA";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Model(#[from] bvsr_core::Error),
}

type Result<T> = std::result::Result<T, IoError>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::Open { path: path.into(), source })
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::Open { path: path.into(), source })
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty())
}

/// Non-empty lines with their 1-based line numbers.
fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|source| IoError::Open { path: path.into(), source })?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Reads a mean-genotype file into an uncentered matrix. SNPs get
/// chromosome `"NA"` and position 0 until positions are attached.
pub fn read_genotypes(path: &Path) -> Result<GenotypeMatrix> {
    let mut n = None;
    let mut columns = Vec::new();
    let mut meta = Vec::new();
    for (line_no, line) in lines(path)? {
        let parse_err = |msg: String| IoError::Parse { path: path.into(), line: line_no, msg };
        let mut it = tokens(&line);
        let id = it.next().expect("non-empty line").to_string();
        let (Some(_a1), Some(_a0)) = (it.next(), it.next()) else {
            return Err(parse_err(format!("SNP {id}: expected id, two alleles and dosages")));
        };
        let mut col = Vec::new();
        for tok in it {
            if tok == MISSING {
                col.push(None);
                continue;
            }
            let v: f64 = tok.parse().map_err(|_| parse_err(format!("SNP {id}: bad dosage {tok:?}")))?;
            if !(0.0..=2.0).contains(&v) {
                return Err(parse_err(format!("SNP {id}: dosage {v} outside [0, 2]")));
            }
            col.push(Some(v));
        }
        match n {
            None => n = Some(col.len()),
            Some(n) if n != col.len() => {
                return Err(parse_err(format!("SNP {id}: {} dosages, expected {n}", col.len())));
            }
            _ => {}
        }
        columns.push(col);
        meta.push(SnpInfo { id, chromosome: MISSING.to_string(), position: 0 });
    }
    let n = n.ok_or_else(|| IoError::Parse { path: path.into(), line: 0, msg: "no SNPs".into() })?;
    Ok(GenotypeMatrix::from_columns(n, columns, meta)?)
}

pub fn read_phenotype(path: &Path) -> Result<Phenotype> {
    let mut values = Vec::new();
    for (line_no, line) in lines(path)? {
        let tok = line.trim();
        if tok == MISSING {
            values.push(None);
        } else {
            let v: f64 = tok.parse().map_err(|_| IoError::Parse {
                path: path.into(),
                line: line_no,
                msg: format!("bad phenotype value {tok:?}"),
            })?;
            values.push(Some(v));
        }
    }
    Ok(Phenotype::new(values))
}

/// Reads `id chromosome position` lines and attaches them to the SNPs of
/// `g` by id. SNPs not listed keep their previous metadata.
pub fn attach_positions(g: &mut GenotypeMatrix, path: &Path) -> Result<()> {
    let mut table = HashMap::new();
    for (line_no, line) in lines(path)? {
        let t: Vec<&str> = tokens(&line).collect();
        let err = |msg: String| IoError::Parse { path: path.into(), line: line_no, msg };
        if t.len() != 3 {
            return Err(err(format!("expected 'id chromosome position', found {} fields", t.len())));
        }
        let pos: u64 = t[2].parse().map_err(|_| err(format!("bad position {:?}", t[2])))?;
        table.insert(t[0].to_string(), (t[1].to_string(), pos));
    }
    let meta = g
        .snp_meta()
        .iter()
        .map(|m| match table.get(&m.id) {
            Some((chr, pos)) => SnpInfo { id: m.id.clone(), chromosome: chr.clone(), position: *pos },
            None => m.clone(),
        })
        .collect();
    g.set_snp_meta(meta)?;
    Ok(())
}

/// Writes raw dosages in the mean-genotype format with placeholder alleles.
pub fn write_genotypes(path: &Path, g: &GenotypeMatrix) -> Result<()> {
    let mut w = create(path)?;
    let wrap = |source| IoError::Open { path: path.into(), source };
    for (j, m) in g.snp_meta().iter().enumerate() {
        write!(w, "{},A,G", m.id).map_err(wrap)?;
        for (i, v) in g.column(j).iter().enumerate() {
            if g.is_missing(i, j) {
                write!(w, ",{MISSING}").map_err(wrap)?;
            } else {
                write!(w, ",{v}").map_err(wrap)?;
            }
        }
        writeln!(w).map_err(wrap)?;
    }
    w.flush().map_err(wrap)
}

pub fn write_phenotype(path: &Path, y: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let wrap = |source| IoError::Open { path: path.into(), source };
    for v in y {
        writeln!(w, "{v}").map_err(wrap)?;
    }
    w.flush().map_err(wrap)
}

pub fn write_positions(path: &Path, meta: &[SnpInfo]) -> Result<()> {
    let mut w = create(path)?;
    let wrap = |source| IoError::Open { path: path.into(), source };
    for m in meta {
        writeln!(w, "{} {} {}", m.id, m.chromosome, m.position).map_err(wrap)?;
    }
    w.flush().map_err(wrap)
}

/// Writes serializable rows with a header.
pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let wrap = |source| IoError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|source| IoError::Open { path: path.into(), source })
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let wrap = |source| IoError::Csv { path: path.into(), source };
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(wrap)
}

/// One row of the per-SNP summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnpRow {
    pub id: String,
    pub chr: String,
    pub pos: u64,
    pub pip: f64,
    pub beta_bar: f64,
    pub single_snp_log10bf: f64,
    /// Training dosage mean, used to center new genotypes for prediction.
    pub col_mean: f64,
    /// `s_j` of the centered training column.
    pub col_variance: f64,
}

/// Generating values of a simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    /// 0-based causal SNP indices.
    pub causal: Vec<usize>,
    pub ids: Vec<String>,
    pub beta: Vec<f64>,
    pub tau: f64,
    pub pve: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    let wrap = |source| IoError::Open { path: path.into(), source };
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| wrap(e.into()))?;
    writeln!(w).map_err(wrap)?;
    w.flush().map_err(wrap)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| IoError::Parse { path: path.into(), line: e.line(), msg: e.to_string() })
}
