//! Empirical W2 estimators between equal-size sample batches.
//!
//! Three routes with different cost/extent trade-offs:
//! - [`w2_1d_exact`]: sorting, exact in one dimension;
//! - [`w2_sliced`]: mean of squared 1-d costs over random projections
//!   (a lower bound on W2, scales to large batches);
//! - [`w2_exact_matching`]: optimal assignment over squared Euclidean costs,
//!   exact for empirical measures, capped at n = 2048.
//!
//! [`w2_gaussian_closed_form`] is the analytic oracle for isotropic Gaussians.

use rayon::prelude::*;

use crate::batch::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::{substream, unit_direction, Stream};
use crate::stats;

pub mod assignment;

/// Hard cap on the exact-matching batch size (cubic-cost solver).
pub const EXACT_MATCHING_CAP: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W2Method {
    Exact1d,
    Sliced,
    ExactMatching,
    GaussianClosedForm,
}

impl W2Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            W2Method::Exact1d => "exact_1d",
            W2Method::Sliced => "sliced",
            W2Method::ExactMatching => "exact_matching",
            W2Method::GaussianClosedForm => "gaussian_closed_form",
        }
    }
}

/// An estimate plus the knobs that produced it.
#[derive(Debug, Clone)]
pub struct W2Estimate {
    pub value: f64,
    pub method: W2Method,
    pub n: usize,
    /// Projection count (sliced only).
    pub nproj: usize,
    pub seed: u64,
    /// Bootstrap standard error when requested, otherwise 0.
    pub se: f64,
}

/// Exact 1-d W2 between equal-size samples: RMS difference of order statistics.
pub fn w2_1d_exact(a: &[f64], b: &[f64]) -> Result<W2Estimate> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(format!(
            "need equal nonempty sample sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(W2Estimate {
        value: w2_1d_sq(a, b).sqrt(),
        method: W2Method::Exact1d,
        n: a.len(),
        nproj: 0,
        seed: 0,
        se: 0.0,
    })
}

fn w2_1d_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let sq: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).collect();
    stats::mean(&sq)
}

/// Sliced W2: root of the mean squared 1-d cost over `nproj` uniform random
/// directions. Deterministic given the seed and independent of thread count.
pub fn w2_sliced(a: &SampleBatch, b: &SampleBatch, nproj: usize, seed: u64) -> Result<W2Estimate> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.n() != b.n() || a.n() == 0 {
        return Err(Error::invalid("need equal nonempty sample sizes"));
    }
    if nproj == 0 {
        return Err(Error::invalid("need at least one projection"));
    }
    let sq: Vec<f64> = (0..nproj)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(seed, Stream::Projection, p as u64, 0, 0);
            let u = unit_direction(&mut rng, a.dim());
            w2_1d_sq(&a.project(&u), &b.project(&u))
        })
        .collect();
    Ok(W2Estimate {
        value: stats::mean(&sq).sqrt(),
        method: W2Method::Sliced,
        n: a.n(),
        nproj,
        seed,
        se: 0.0,
    })
}

/// Exact empirical W2 via an optimal assignment over squared Euclidean costs.
pub fn w2_exact_matching(a: &SampleBatch, b: &SampleBatch) -> Result<W2Estimate> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.n() != b.n() || a.n() == 0 {
        return Err(Error::invalid("need equal nonempty sample sizes"));
    }
    if a.n() > EXACT_MATCHING_CAP {
        return Err(Error::invalid(format!(
            "exact matching is capped at n = {EXACT_MATCHING_CAP}, got {}",
            a.n()
        )));
    }
    let n = a.n();
    let cost = build_cost(a, b);
    let (_, total) = assignment::solve_dense(&cost, n);
    Ok(W2Estimate {
        value: (total / n as f64).max(0.0).sqrt(),
        method: W2Method::ExactMatching,
        n,
        nproj: 0,
        seed: 0,
        se: 0.0,
    })
}

fn build_cost(a: &SampleBatch, b: &SampleBatch) -> Vec<f64> {
    let n = a.n();
    let mut cost = vec![0.0; n * n];
    cost.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let ai = a.row(i);
        for (j, c) in row.iter_mut().enumerate() {
            let bj = b.row(j);
            *c = ai
                .iter()
                .zip(bj)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
        }
    });
    cost
}

/// W2 between isotropic Gaussians N(m1, s1^2 I) and N(m2, s2^2 I):
/// `sqrt(|m1 - m2|^2 + d (s1 - s2)^2)`.
pub fn w2_gaussian_closed_form(m1: &[f64], s1: f64, m2: &[f64], s2: f64) -> Result<f64> {
    if m1.len() != m2.len() {
        return Err(Error::invalid("mean dimension mismatch"));
    }
    if s1 < 0.0 || s2 < 0.0 {
        return Err(Error::invalid("scales must be nonnegative"));
    }
    let d = m1.len() as f64;
    let mean_sq: f64 = m1.iter().zip(m2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((mean_sq + d * (s1 - s2) * (s1 - s2)).sqrt())
}

/// Bootstrap standard error of an estimator over resampled batch pairs.
/// Resamples rows with replacement (`m` out of `n`, same indices budget for
/// both batches from independent substreams) and rescales the spread by
/// `sqrt(m/n)` when subsampling.
pub fn bootstrap_se(
    a: &SampleBatch,
    b: &SampleBatch,
    m: usize,
    resamples: usize,
    seed: u64,
    estimator: impl Fn(&SampleBatch, &SampleBatch) -> Result<f64> + Sync,
) -> Result<f64> {
    if m == 0 || resamples < 2 {
        return Err(Error::invalid("need m >= 1 and at least two resamples"));
    }
    let values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let ra = resample(a, m, seed, 2 * r as u64)?;
            let rb = resample(b, m, seed, 2 * r as u64 + 1)?;
            estimator(&ra, &rb)
        })
        .collect::<Result<_>>()?;
    let sd = stats::variance(&values).sqrt();
    Ok(sd * (m as f64 / a.n() as f64).sqrt())
}

fn resample(batch: &SampleBatch, m: usize, seed: u64, stream_id: u64) -> Result<SampleBatch> {
    let mut rng = substream(seed, Stream::Bootstrap, stream_id, 0, 0);
    let mut data = Vec::with_capacity(m * batch.dim());
    for _ in 0..m {
        let idx = rand::Rng::random_range(&mut rng, 0..batch.n());
        data.extend_from_slice(batch.row(idx));
    }
    SampleBatch::new(data, m, batch.dim(), seed, batch.tag)
}
