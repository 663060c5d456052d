//! Sample batches: row-major point clouds with provenance.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Which process produced a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessTag {
    /// Generative run with a (possibly perturbed) score oracle.
    Star,
    /// Euler–Maruyama run with the exact score, initialized at the exact law of X_T.
    EmTrueInit,
    /// Euler–Maruyama run with the exact score, initialized at N(0, I).
    EmStationaryInit,
    /// Fine-grid proxy of the continuous backward process.
    BackwardFine,
    /// Direct draws from a distribution (data, forward marginal, ...).
    Data,
}

impl ProcessTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProcessTag::Star => "star",
            ProcessTag::EmTrueInit => "em_true_init",
            ProcessTag::EmStationaryInit => "em_stationary_init",
            ProcessTag::BackwardFine => "backward_fine",
            ProcessTag::Data => "data",
        }
    }
}

/// An `n x dim` batch of points, stored row-major.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    data: Vec<f64>,
    n: usize,
    dim: usize,
    pub seed: u64,
    pub tag: ProcessTag,
}

impl SampleBatch {
    pub fn new(data: Vec<f64>, n: usize, dim: usize, seed: u64, tag: ProcessTag) -> Result<Self> {
        if data.len() != n * dim {
            return Err(Error::invalid(format!(
                "batch data length {} does not match {n} x {dim}",
                data.len()
            )));
        }
        Ok(SampleBatch {
            data,
            n,
            dim,
            seed,
            tag,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Per-coordinate sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (mj, xj) in m.iter_mut().zip(row) {
                *mj += xj;
            }
        }
        for mj in &mut m {
            *mj /= self.n as f64;
        }
        m
    }

    /// Mean of the squared Euclidean norm over rows.
    pub fn mean_sq_norm(&self) -> f64 {
        let sums: Vec<f64> = self
            .rows()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>())
            .collect();
        crate::stats::mean(&sums)
    }

    /// Projection of every row onto the direction `u`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Writes `# <comment>` (if given), a `x0,..,x{d-1}` header, then one row
    /// per sample. Floats use the shortest round-trip representation, so the
    /// bytes are reproducible.
    pub fn write_csv<W: Write>(&self, w: &mut W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        let header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`SampleBatch::write_csv`]. Comment lines
    /// starting with `#` are skipped.
    pub fn read_csv<R: BufRead>(r: R, tag: ProcessTag) -> Result<Self> {
        let mut dim = None;
        let mut data = Vec::new();
        let mut n = 0;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if dim.is_none() {
                // header row
                dim = Some(line.split(',').count());
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad CSV value {tok:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != dim.unwrap() {
                return Err(Error::invalid(format!(
                    "CSV row has {} fields, expected {}",
                    row.len(),
                    dim.unwrap()
                )));
            }
            data.extend_from_slice(&row);
            n += 1;
        }
        let dim = dim.ok_or_else(|| Error::invalid("empty CSV"))?;
        SampleBatch::new(data, n, dim, 0, tag)
    }
}
