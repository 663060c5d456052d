//! Isotropic Gaussian mixtures: density, score, sampling and the explicit
//! weak-log-concavity / Lipschitz constants.
//!
//! The mixture has density
//!
//! ```text
//! p(x) = sum_i  w_i (2 pi s^2)^(-d/2) exp(-|x - mu_i|^2 / (2 s^2))
//! ```
//!
//! with a common per-mode standard deviation `s`. Mode posteriors are always
//! formed through a max-shifted log-sum-exp, so densities and scores stay
//! finite far from the modes (no tanh of huge arguments is ever formed).

use serde::{Deserialize, Serialize};

use crate::batch::{ProcessTag, SampleBatch};
use crate::error::{Error, Result};
use crate::rng::{standard_normal_vec, substream, Stream};
use crate::stats;

/// Weak-convexity and one-sided Lipschitz parameters of a log-density:
/// the profile lower bound is `alpha - f_M(r)/r` and the gradient of the
/// potential is `l_u`-one-sided Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityParams {
    pub alpha: f64,
    pub big_m: f64,
    pub l_u: f64,
}

impl ConvexityParams {
    pub fn new(alpha: f64, big_m: f64, l_u: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(big_m >= 0.0) {
            return Err(Error::invalid(format!(
                "big_m must be nonnegative, got {big_m}"
            )));
        }
        if !(l_u >= 0.0) {
            return Err(Error::invalid(format!(
                "l_u must be nonnegative, got {l_u}"
            )));
        }
        Ok(ConvexityParams { alpha, big_m, l_u })
    }
}

/// Raw on-disk form of a mixture config (`weights`, `means`, `scale`, `dim`).
#[derive(Debug, Serialize, Deserialize)]
struct MixtureConfig {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    scale: f64,
    dim: usize,
}

/// Isotropic Gaussian mixture on R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    scale: f64,
    dim: usize,
    /// log(w_i), with -inf for zero weights.
    log_weights: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, scale: f64, dim: usize) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() {
            return Err(Error::invalid(format!(
                "need matching nonempty weights/means, got {} weights and {} means",
                weights.len(),
                means.len()
            )));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::invalid("weights must lie in [0, 1]"));
        }
        let total = stats::sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        if means.iter().any(|m| m.len() != dim) {
            return Err(Error::invalid("every mean must have length dim"));
        }
        if !(scale > 0.0) {
            return Err(Error::invalid(format!(
                "scale must be positive, got {scale}"
            )));
        }
        let log_weights = weights
            .iter()
            .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(GaussianMixture {
            weights,
            means,
            scale,
            dim,
            log_weights,
        })
    }

    /// Single Gaussian N(mean, scale^2 I).
    pub fn single(mean: Vec<f64>, scale: f64) -> Result<Self> {
        let dim = mean.len();
        GaussianMixture::new(vec![1.0], vec![mean], scale, dim)
    }

    /// Standard Gaussian N(0, I) in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        GaussianMixture::single(vec![0.0; dim], 1.0).expect("standard gaussian is valid")
    }

    /// Equal-weight pair of modes at `+mu` and `-mu`.
    pub fn symmetric_pair(mu: Vec<f64>, scale: f64) -> Result<Self> {
        let dim = mu.len();
        let neg: Vec<f64> = mu.iter().map(|x| -x).collect();
        GaussianMixture::new(vec![0.5, 0.5], vec![mu, neg], scale, dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.weights.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has dimension {}, mixture has dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Per-mode exponent `log w_i - |x - mu_i|^2 / (2 s^2)`.
    fn mode_exponents(&self, x: &[f64]) -> Vec<f64> {
        let inv2s2 = 0.5 / (self.scale * self.scale);
        self.means
            .iter()
            .zip(&self.log_weights)
            .map(|(mu, lw)| {
                let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
                lw - sq * inv2s2
            })
            .collect()
    }

    /// log p(x), via a max-shifted sum of exponentials.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let exps = self.mode_exponents(x);
        let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + exps.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
        let norm =
            -(self.dim as f64) * 0.5 * (2.0 * std::f64::consts::PI * self.scale * self.scale).ln();
        Ok(norm + lse)
    }

    /// Posterior mode weights at `x` (softmax of the mode exponents).
    pub fn posterior_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let exps = self.mode_exponents(x);
        let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = exps.iter().map(|e| (e - m).exp()).collect();
        let total: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= total;
        }
        Ok(w)
    }

    /// Score `grad log p(x) = (m(x) - x) / s^2` with `m(x)` the posterior mean.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.posterior_weights(x)?;
        let inv_s2 = 1.0 / (self.scale * self.scale);
        let mut out = vec![0.0; self.dim];
        for (wi, mu) in w.iter().zip(&self.means) {
            for (oj, mj) in out.iter_mut().zip(mu) {
                *oj += wi * mj;
            }
        }
        for (oj, xj) in out.iter_mut().zip(x) {
            *oj = (*oj - xj) * inv_s2;
        }
        Ok(out)
    }

    /// `n` i.i.d. draws: categorical mode choice, then an isotropic Gaussian
    /// around the chosen mean. Each draw uses its own substream, so batches
    /// are identical for any parallelization of the loop.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleBatch> {
        if n == 0 {
            return Err(Error::invalid("sample count must be >= 1"));
        }
        let mut data = vec![0.0; n * self.dim];
        for (i, row) in data.chunks_exact_mut(self.dim).enumerate() {
            self.sample_into(seed, i as u64, row);
        }
        SampleBatch::new(data, n, self.dim, seed, ProcessTag::Data)
    }

    /// Draws sample `traj` of the stream `seed` into `out`.
    pub(crate) fn sample_into(&self, seed: u64, traj: u64, out: &mut [f64]) {
        let mode = self.sample_mode(seed, traj);
        let mut rng = substream(seed, Stream::MixtureGauss, traj, 0, 0);
        let g = standard_normal_vec(&mut rng, self.dim);
        for ((o, mu_j), g_j) in out.iter_mut().zip(&self.means[mode]).zip(&g) {
            *o = mu_j + self.scale * g_j;
        }
    }

    pub(crate) fn sample_mode(&self, seed: u64, traj: u64) -> usize {
        let mut rng = substream(seed, Stream::MixtureMode, traj, 0, 0);
        let u: f64 = rand::Rng::random(&mut rng);
        self.mode_from_uniform(u)
    }

    fn mode_from_uniform(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    /// One draw using the caller's stream (for ad-hoc seeded sampling loops).
    pub fn sample_with_rng(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
        let u: f64 = rand::Rng::random(rng);
        let mode = self.mode_from_uniform(u);
        let g = standard_normal_vec(rng, self.dim);
        self.means[mode]
            .iter()
            .zip(&g)
            .map(|(m, z)| m + self.scale * z)
            .collect()
    }

    /// Explicit weak-convexity coefficients of `-log p` and the Lipschitz
    /// constant of the score:
    /// `alpha = 1/s^2`, `sqrt(M) = 2 n sum_i |mu_i| / s^2`, `l_u = alpha + sqrt(M)`.
    ///
    /// An alternative reading gives `alpha + M` instead; see
    /// [`GaussianMixture::score_lipschitz_alt`].
    pub fn weak_convexity_params(&self) -> ConvexityParams {
        let s2 = self.scale * self.scale;
        let alpha = 1.0 / s2;
        let n = self.n_modes() as f64;
        let sum_norms: f64 = self.means.iter().map(|m| stats::norm(m)).sum();
        let sqrt_m = 2.0 * n * sum_norms / s2;
        ConvexityParams {
            alpha,
            big_m: sqrt_m * sqrt_m,
            l_u: alpha + sqrt_m,
        }
    }

    /// The `alpha + M` reading of the score Lipschitz constant. Both
    /// readings are carried in the constants report and checked against the
    /// empirical ratio.
    pub fn score_lipschitz_alt(&self) -> f64 {
        let p = self.weak_convexity_params();
        p.alpha + p.big_m
    }

    /// Sharper two-mode constants for an equal-weight symmetric pair `+-mu`:
    /// `sqrt(M) = 4 sqrt(2) |mu| / s^2`, tighter than the general formula's
    /// `8 |mu| / s^2`. Errors if the mixture is not a symmetric pair.
    pub fn symmetric_pair_params(&self) -> Result<ConvexityParams> {
        if self.n_modes() != 2 {
            return Err(Error::invalid("sharper constants need exactly two modes"));
        }
        if (self.weights[0] - 0.5).abs() > 1e-12 || (self.weights[1] - 0.5).abs() > 1e-12 {
            return Err(Error::invalid("sharper constants need equal weights"));
        }
        let symmetric = self.means[0]
            .iter()
            .zip(&self.means[1])
            .all(|(a, b)| (a + b).abs() <= 1e-12);
        if !symmetric {
            return Err(Error::invalid("sharper constants need means mu and -mu"));
        }
        let s2 = self.scale * self.scale;
        let alpha = 1.0 / s2;
        let sqrt_m = 4.0 * std::f64::consts::SQRT_2 * stats::norm(&self.means[0]) / s2;
        Ok(ConvexityParams {
            alpha,
            big_m: sqrt_m * sqrt_m,
            l_u: alpha + sqrt_m,
        })
    }

    /// Second moment `E|X|^2 = sum_i w_i (|mu_i|^2 + d s^2)`.
    pub fn second_moment(&self) -> f64 {
        let d_s2 = self.dim as f64 * self.scale * self.scale;
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, mu)| w * (stats::dot(mu, mu) + d_s2))
            .sum()
    }

    /// Parses the `weights` / `means` / `scale` / `dim` config format.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: MixtureConfig =
            toml::from_str(s).map_err(|e| Error::config(format!("bad mixture config: {e}")))?;
        GaussianMixture::new(cfg.weights, cfg.means, cfg.scale, cfg.dim)
            .map_err(|e| Error::config(format!("bad mixture config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        let cfg = MixtureConfig {
            weights: self.weights.clone(),
            means: self.means.clone(),
            scale: self.scale,
            dim: self.dim,
        };
        toml::to_string(&cfg).expect("mixture config serializes")
    }
}
