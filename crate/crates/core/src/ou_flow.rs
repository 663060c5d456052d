//! Closed-form Ornstein–Uhlenbeck flow of a Gaussian mixture.
//!
//! Under `dX = -X dt + sqrt(2) dB` started at the mixture, the marginal at
//! forward time `s` is again a Gaussian mixture:
//!
//! ```text
//! X_s  =law=  e^{-s} X_0 + sqrt(1 - e^{-2s}) G,      G ~ N(0, I)
//! ```
//!
//! so means shrink by `e^{-s}` and the common variance becomes
//! `e^{-2s} s0^2 + (1 - e^{-2s})`. This gives the exact score of every
//! marginal, the modified score relative to the stationary Gaussian, and the
//! backward drift, at any forward time.

use nalgebra::DMatrix;

use crate::batch::{ProcessTag, SampleBatch};
use crate::error::{Error, Result};
use crate::mixture::GaussianMixture;
use crate::rng::{standard_normal_vec, substream, Stream};

/// Exact law of `X_s`: weights unchanged, means `e^{-s} mu_i`,
/// variance `e^{-2s} scale^2 + (1 - e^{-2s})`.
pub fn forward_marginal(g: &GaussianMixture, s: f64) -> Result<GaussianMixture> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!(
            "forward time must be >= 0, got {s}"
        )));
    }
    let decay = (-s).exp();
    let var = decay * decay * g.scale() * g.scale() + (1.0 - decay * decay);
    let means = g
        .means()
        .iter()
        .map(|m| m.iter().map(|x| decay * x).collect())
        .collect();
    GaussianMixture::new(g.weights().to_vec(), means, var.sqrt(), g.dim())
}

/// `grad log p_s(x)`, the score of the forward marginal.
pub fn score_forward(g: &GaussianMixture, s: f64, x: &[f64]) -> Result<Vec<f64>> {
    forward_marginal(g, s)?.score(x)
}

/// `grad log (p_s / pi_inf)(x) = grad log p_s(x) + x`.
pub fn score_modified(g: &GaussianMixture, s: f64, x: &[f64]) -> Result<Vec<f64>> {
    let mut v = score_forward(g, s, x)?;
    for (vj, xj) in v.iter_mut().zip(x) {
        *vj += xj;
    }
    Ok(v)
}

/// Backward drift `b_s(x) = -x + 2 grad log (p_s/pi_inf)(x) = x + 2 grad log p_s(x)`.
pub fn backward_drift(g: &GaussianMixture, s: f64, x: &[f64]) -> Result<Vec<f64>> {
    let mut v = score_forward(g, s, x)?;
    for (vj, xj) in v.iter_mut().zip(x) {
        *vj = xj + 2.0 * *vj;
    }
    Ok(v)
}

/// One draw from the OU transition kernel started at `x0` run for time `s`:
/// `e^{-s} x0 + sqrt(1 - e^{-2s}) G`.
pub fn transition_sample(x0: &[f64], s: f64, seed: u64) -> Result<Vec<f64>> {
    let b = transition_sample_batch(x0, s, 1, seed)?;
    Ok(b.row(0).to_vec())
}

/// `n` independent draws from the OU transition kernel started at `x0`.
pub fn transition_sample_batch(x0: &[f64], s: f64, n: usize, seed: u64) -> Result<SampleBatch> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!(
            "transition time must be >= 0, got {s}"
        )));
    }
    let decay = (-s).exp();
    let noise = (1.0 - decay * decay).max(0.0).sqrt();
    let dim = x0.len();
    let mut data = vec![0.0; n * dim];
    for (i, row) in data.chunks_exact_mut(dim).enumerate() {
        let mut rng = substream(seed, Stream::Transition, i as u64, 0, 0);
        let g = standard_normal_vec(&mut rng, dim);
        for ((r, x), z) in row.iter_mut().zip(x0).zip(&g) {
            *r = decay * x + noise * z;
        }
    }
    SampleBatch::new(data, n, dim, seed, ProcessTag::Data)
}

/// Central-difference Jacobian of a score field at `x`, symmetrized.
fn fd_score_jacobian_sym(
    field: impl Fn(f64, &[f64]) -> Result<Vec<f64>>,
    s: f64,
    x: &[f64],
    eps: f64,
) -> Result<DMatrix<f64>> {
    let d = x.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..d {
        xp[j] = x[j] + eps;
        xm[j] = x[j] - eps;
        let fp = field(s, &xp)?;
        let fm = field(s, &xm)?;
        if fp.iter().chain(fm.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                step: j,
                msg: "non-finite score in finite-difference stencil".into(),
            });
        }
        for i in 0..d {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * eps);
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    // Symmetrize: the true Jacobian of a gradient field is symmetric, FD noise is not.
    let jac_t = jac.transpose();
    Ok((jac + jac_t) * 0.5)
}

/// Largest absolute eigenvalue of the symmetrized FD Jacobian of a score
/// field, i.e. the operator norm of the (numerical) Hessian of the log-density
/// behind the field.
pub fn fd_hessian_opnorm(
    field: impl Fn(f64, &[f64]) -> Result<Vec<f64>>,
    s: f64,
    x: &[f64],
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let h = fd_score_jacobian_sym(field, s, x, eps)?;
    let eig = h.symmetric_eigenvalues();
    Ok(eig.iter().fold(0.0f64, |acc, &l| acc.max(l.abs())))
}

/// Smallest eigenvalue of `-H` where `H` is the symmetrized FD Jacobian of the
/// score field. For the field `grad log p_s` this is the smallest eigenvalue
/// of the numerical Hessian of `-log p_s`, the log-concavity witness.
pub fn fd_neg_hessian_min_eig(
    field: impl Fn(f64, &[f64]) -> Result<Vec<f64>>,
    s: f64,
    x: &[f64],
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let h = fd_score_jacobian_sym(field, s, x, eps)?;
    let eig = (-h).symmetric_eigenvalues();
    Ok(eig.iter().fold(f64::INFINITY, |acc, &l| acc.min(l)))
}
