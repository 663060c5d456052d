//! The Euler–Maruyama sampler of the backward OU process and the
//! synchronously coupled process harness.
//!
//! One step of the scheme on the uniform grid `t_k = k h`:
//!
//! ```text
//! X_{k+1} = X_k + h ( -X_k + 2 s(T - t_k, X_k) ) + sqrt(2 h) Z_k
//! ```
//!
//! where `s` is a score oracle for the modified score `grad log(p_s/pi_inf)`.
//! The final score evaluation happens at forward time `s = h` (k = N-1),
//! never at `s = 0`. Brownian increments come from per-(trajectory, step,
//! substep) substreams, so a fine grid with `f` substeps per coarse step and
//! the coarse grid share the same underlying Brownian path: the coarse
//! increment is the sum of the `f` fine increments.

use rayon::prelude::*;

use crate::batch::{ProcessTag, SampleBatch};
use crate::constants;
use crate::error::{Error, Result};
use crate::mixture::{ConvexityParams, GaussianMixture};
use crate::ou_flow;
use crate::rng::{standard_normal_vec, substream, unit_direction, Stream};
use crate::stats;

/// Uniform discretization of `[0, T]` into `N` steps of size `h = T/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_horizon: f64,
    n_steps: usize,
    h: f64,
}

impl TimeGrid {
    pub fn new(t_horizon: f64, n_steps: usize) -> Result<Self> {
        if !(t_horizon > 0.0) {
            return Err(Error::invalid(format!(
                "horizon must be > 0, got {t_horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::invalid("need at least one step"));
        }
        Ok(TimeGrid {
            t_horizon,
            n_steps,
            h: t_horizon / n_steps as f64,
        })
    }

    /// Grid from a requested step size; `T/h` must be an integer within 1e-9.
    pub fn from_step(t_horizon: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid(format!("step must be > 0, got {h}")));
        }
        let ratio = t_horizon / h;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!(
                "step {h} does not evenly divide horizon {t_horizon}"
            )));
        }
        TimeGrid::new(t_horizon, n as usize)
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node `t_k = k h`.
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Forward time `s_k = T - t_k`, computed as `(N - k) h` so the last score
    /// evaluation lands exactly on `s = h`.
    pub fn forward_time(&self, k: usize) -> f64 {
        (self.n_steps - k) as f64 * self.h
    }
}

/// Direction scheme of the score perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbMode {
    /// `eps * e_1` at every evaluation.
    #[default]
    FixedDirection,
    /// A fresh uniform unit direction per (trajectory, step).
    RandomDirection,
}

/// Score oracle: the exact modified score, or the exact score plus an offset
/// of norm exactly `eps`, so the L2 score-error budget is met with equality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleKind {
    Exact,
    Perturbed { eps: f64, mode: PerturbMode },
}

impl OracleKind {
    pub fn eps(&self) -> f64 {
        match self {
            OracleKind::Exact => 0.0,
            OracleKind::Perturbed { eps, .. } => *eps,
        }
    }
}

/// Oracle bound to a mixture. Evaluation needs the (trajectory, step) counters
/// only in random-direction mode.
#[derive(Debug, Clone, Copy)]
pub struct ScoreOracle<'a> {
    pub mixture: &'a GaussianMixture,
    pub kind: OracleKind,
}

impl<'a> ScoreOracle<'a> {
    pub fn exact(mixture: &'a GaussianMixture) -> Self {
        ScoreOracle {
            mixture,
            kind: OracleKind::Exact,
        }
    }

    pub fn perturbed(mixture: &'a GaussianMixture, eps: f64, mode: PerturbMode) -> Self {
        ScoreOracle {
            mixture,
            kind: OracleKind::Perturbed { eps, mode },
        }
    }

    /// Modified-score oracle value at forward time `s`.
    pub fn eval(&self, s: f64, x: &[f64], seed: u64, traj: u64, step: u64) -> Result<Vec<f64>> {
        let mut v = ou_flow::score_modified(self.mixture, s, x)?;
        if let OracleKind::Perturbed { eps, mode } = self.kind {
            if eps != 0.0 {
                match mode {
                    PerturbMode::FixedDirection => v[0] += eps,
                    PerturbMode::RandomDirection => {
                        let mut rng = substream(seed, Stream::Perturbation, traj, step, 0);
                        let u = unit_direction(&mut rng, x.len());
                        for (vj, uj) in v.iter_mut().zip(&u) {
                            *vj += eps * uj;
                        }
                    }
                }
            }
        }
        Ok(v)
    }
}

/// Initial law of the backward run.
#[derive(Debug, Clone)]
pub enum InitKind {
    /// N(0, I), the stationary law.
    Stationary,
    /// The exact law of the forward process at time T (a Gaussian mixture).
    ExactForwardT,
    /// Caller-provided points.
    Custom(SampleBatch),
}

/// Configuration of one generative run.
#[derive(Debug, Clone)]
pub struct SgmConfig {
    pub grid: TimeGrid,
    pub init: InitKind,
    pub n: usize,
    pub seed: u64,
    /// Convexity parameters governing the admissible step size. Defaults to
    /// the mixture's derived constants; callers may pass sharper valid ones.
    pub params: ConvexityParams,
}

fn check_step_size(grid: &TimeGrid, params: &ConvexityParams) -> Result<()> {
    let l = constants::uniform_l(params);
    let hm = constants::h_max(l)?;
    if grid.h() >= hm {
        return Err(Error::Config(format!(
            "step size {} must be strictly below h_max = {hm} (uniform L = {l})",
            grid.h()
        )));
    }
    Ok(())
}

fn init_point(
    mixture: &GaussianMixture,
    init: &InitKind,
    grid: &TimeGrid,
    seed: u64,
    traj: u64,
) -> Result<Vec<f64>> {
    let dim = mixture.dim();
    match init {
        InitKind::Stationary => {
            let mut rng = substream(seed, Stream::MixtureGauss, traj, 0, 0);
            Ok(standard_normal_vec(&mut rng, dim))
        }
        InitKind::ExactForwardT => {
            let marg = ou_flow::forward_marginal(mixture, grid.t_horizon())?;
            let mut out = vec![0.0; dim];
            marg.sample_into(seed, traj, &mut out);
            Ok(out)
        }
        InitKind::Custom(batch) => {
            if batch.dim() != dim {
                return Err(Error::invalid(format!(
                    "custom init has dimension {}, mixture has {}",
                    batch.dim(),
                    dim
                )));
            }
            Ok(batch.row(traj as usize % batch.n()).to_vec())
        }
    }
}

/// Runs the generative scheme and returns the endpoint batch `X_{t_N}`.
/// Bitwise deterministic for a given seed, independent of thread count.
pub fn run_sgm(oracle: &ScoreOracle, cfg: &SgmConfig) -> Result<SampleBatch> {
    if cfg.n == 0 {
        return Err(Error::invalid("need at least one trajectory"));
    }
    check_step_size(&cfg.grid, &cfg.params)?;
    let grid = cfg.grid;
    let h = grid.h();
    let noise_scale = (2.0 * h).sqrt();
    let dim = oracle.mixture.dim();

    let rows: Vec<Vec<f64>> = (0..cfg.n)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let traj = i as u64;
            let mut x = init_point(oracle.mixture, &cfg.init, &grid, cfg.seed, traj)?;
            for k in 0..grid.n_steps() {
                let s = grid.forward_time(k);
                let score = oracle.eval(s, &x, cfg.seed, traj, k as u64)?;
                let mut rng = substream(cfg.seed, Stream::Increment, traj, k as u64, 0);
                let z = standard_normal_vec(&mut rng, dim);
                for j in 0..dim {
                    x[j] += h * (-x[j] + 2.0 * score[j]) + noise_scale * z[j];
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric {
                        step: k,
                        msg: format!("trajectory {i} left the finite range"),
                    });
                }
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;

    let mut data = Vec::with_capacity(cfg.n * dim);
    for row in rows {
        data.extend_from_slice(&row);
    }
    let tag = match (&cfg.init, &oracle.kind) {
        (_, OracleKind::Perturbed { .. }) => ProcessTag::Star,
        (InitKind::ExactForwardT, OracleKind::Exact) => ProcessTag::EmTrueInit,
        (InitKind::Stationary, OracleKind::Exact) => ProcessTag::EmStationaryInit,
        (InitKind::Custom(_), OracleKind::Exact) => ProcessTag::Star,
    };
    SampleBatch::new(data, cfg.n, dim, cfg.seed, tag)
}

/// Exact draws from the law of the forward process at time T (itself a
/// Gaussian mixture), the initialization the coupled analysis starts from.
pub fn sample_backward_init_exact(
    g: &GaussianMixture,
    t_horizon: f64,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let marg = ou_flow::forward_marginal(g, t_horizon)?;
    marg.sample(n, seed)
}

/// Output of the coupled four-process run: per-node L2 distances between
/// adjacent process pairs, the predicted per-step factors, and the achieved
/// initial coupling distance.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub grid: TimeGrid,
    pub n: usize,
    pub seed: u64,
    pub fine_factor: usize,
    /// `sqrt(mean |X_fine - X^N|^2)` at every node `t_k`, k = 0..=N.
    pub dist_fine_em: Vec<f64>,
    /// `sqrt(mean |X^N - X^inf|^2)` at every node.
    pub dist_em_init: Vec<f64>,
    /// `sqrt(mean |X^inf - X^star|^2)` at every node.
    pub dist_init_star: Vec<f64>,
    /// Per-trajectory squared distances of the (X^N, X^inf) pair at every
    /// node, row-major `n x (N+1)`; kept for ratio bootstraps.
    pub sq_em_init: Vec<f64>,
    /// Predicted per-step factors `delta_k`, k = 0..N-1.
    pub delta_pred: Vec<f64>,
    /// Number of contractive steps.
    pub n_h: usize,
    /// Achieved initial coupling distance of the (X^N, X^inf) pair.
    pub init_dist_achieved: f64,
    /// Analytic bound `e^{-T} (sqrt(m2) + sqrt(d))` on the optimal initial
    /// coupling distance.
    pub init_dist_bound: f64,
}

impl CoupledRun {
    /// Squared distances of the (X^N, X^inf) pair at node `k`, one entry per
    /// trajectory.
    pub fn sq_em_init_at(&self, k: usize) -> Vec<f64> {
        let m = self.grid.n_steps() + 1;
        (0..self.n).map(|i| self.sq_em_init[i * m + k]).collect()
    }
}

/// Synchronously coupled simulation of four processes sharing one Brownian
/// path and one initialization coupling:
///
/// - a fine-grid proxy of the continuous backward process (step `h / fine_factor`),
/// - the coarse scheme with exact score started from the exact law of X_T,
/// - the coarse scheme with exact score started from N(0, I),
/// - the coarse scheme with the `oracle` score, sharing the previous init.
///
/// The initial coupling maps a shared standard Gaussian draw comonotonically:
/// `X^N_0 = e^{-T} mu_mode + s_T G` and `X^inf_0 = G`, with shared mode
/// selection. This is a surrogate for the optimal coupling; the achieved
/// distance is reported next to the analytic bound.
pub fn run_coupled(
    g: &GaussianMixture,
    oracle: &ScoreOracle,
    grid: &TimeGrid,
    params: &ConvexityParams,
    n: usize,
    seed: u64,
    fine_factor: usize,
) -> Result<CoupledRun> {
    if fine_factor == 0 {
        return Err(Error::invalid("fine_factor must be >= 1"));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one trajectory"));
    }
    check_step_size(grid, params)?;
    let dim = g.dim();
    let big_n = grid.n_steps();
    let h = grid.h();
    let h_fine = h / fine_factor as f64;
    let t = grid.t_horizon();
    let marg_t = ou_flow::forward_marginal(g, t)?;
    let decay_t = (-t).exp();
    let scale_t = marg_t.scale();

    struct TrajOut {
        sq_fine_em: Vec<f64>,
        sq_em_init: Vec<f64>,
        sq_init_star: Vec<f64>,
    }

    let per_traj: Vec<TrajOut> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<TrajOut> {
            let traj = i as u64;
            // Shared initialization coupling.
            let mode = marg_t.sample_mode(seed, traj);
            let mut rng = substream(seed, Stream::MixtureGauss, traj, 0, 0);
            let gauss = standard_normal_vec(&mut rng, dim);
            let mut x_fine: Vec<f64> = (0..dim)
                .map(|j| decay_t * g.means()[mode][j] + scale_t * gauss[j])
                .collect();
            let mut x_em = x_fine.clone();
            let mut x_inf = gauss.clone();
            let mut x_star = gauss;

            let mut sq_fine_em = Vec::with_capacity(big_n + 1);
            let mut sq_em_init = Vec::with_capacity(big_n + 1);
            let mut sq_init_star = Vec::with_capacity(big_n + 1);
            let sq = |a: &[f64], b: &[f64]| -> f64 {
                a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
            };
            sq_fine_em.push(sq(&x_fine, &x_em));
            sq_em_init.push(sq(&x_em, &x_inf));
            sq_init_star.push(sq(&x_inf, &x_star));

            for k in 0..big_n {
                let s_coarse = grid.forward_time(k);
                // Fine proxy: substeps j with increments summing to the
                // coarse Brownian increment.
                let mut coarse_inc = vec![0.0; dim];
                for j in 0..fine_factor {
                    let tau = grid.node(k) + j as f64 * h_fine;
                    let s_fine = t - tau;
                    let drift = ou_flow::score_modified(g, s_fine, &x_fine)?;
                    let mut rng = substream(seed, Stream::Increment, traj, k as u64, j as u32);
                    let z = standard_normal_vec(&mut rng, dim);
                    for idx in 0..dim {
                        let db = h_fine.sqrt() * z[idx];
                        coarse_inc[idx] += db;
                        x_fine[idx] += h_fine * (-x_fine[idx] + 2.0 * drift[idx])
                            + std::f64::consts::SQRT_2 * db;
                    }
                }
                let sc_em = ou_flow::score_modified(g, s_coarse, &x_em)?;
                let sc_inf = ou_flow::score_modified(g, s_coarse, &x_inf)?;
                let sc_star = oracle.eval(s_coarse, &x_star, seed, traj, k as u64)?;
                for idx in 0..dim {
                    let shared = std::f64::consts::SQRT_2 * coarse_inc[idx];
                    x_em[idx] += h * (-x_em[idx] + 2.0 * sc_em[idx]) + shared;
                    x_inf[idx] += h * (-x_inf[idx] + 2.0 * sc_inf[idx]) + shared;
                    x_star[idx] += h * (-x_star[idx] + 2.0 * sc_star[idx]) + shared;
                }
                if x_fine
                    .iter()
                    .chain(&x_em)
                    .chain(&x_inf)
                    .chain(&x_star)
                    .any(|v| !v.is_finite())
                {
                    return Err(Error::Numeric {
                        step: k,
                        msg: format!("coupled trajectory {i} left the finite range"),
                    });
                }
                sq_fine_em.push(sq(&x_fine, &x_em));
                sq_em_init.push(sq(&x_em, &x_inf));
                sq_init_star.push(sq(&x_inf, &x_star));
            }
            Ok(TrajOut {
                sq_fine_em,
                sq_em_init,
                sq_init_star,
            })
        })
        .collect::<Result<_>>()?;

    let nodes = big_n + 1;
    let mut dist_fine_em = Vec::with_capacity(nodes);
    let mut dist_em_init = Vec::with_capacity(nodes);
    let mut dist_init_star = Vec::with_capacity(nodes);
    for k in 0..nodes {
        let col = |f: &dyn Fn(&TrajOut) -> f64| -> f64 {
            let vals: Vec<f64> = per_traj.iter().map(f).collect();
            stats::mean(&vals).max(0.0).sqrt()
        };
        dist_fine_em.push(col(&|t: &TrajOut| t.sq_fine_em[k]));
        dist_em_init.push(col(&|t: &TrajOut| t.sq_em_init[k]));
        dist_init_star.push(col(&|t: &TrajOut| t.sq_init_star[k]));
    }
    let mut sq_em_init = Vec::with_capacity(n * nodes);
    for t_out in &per_traj {
        sq_em_init.extend_from_slice(&t_out.sq_em_init);
    }

    let m2 = g.second_moment();
    Ok(CoupledRun {
        grid: *grid,
        n,
        seed,
        fine_factor,
        init_dist_achieved: dist_em_init[0],
        init_dist_bound: (-t).exp() * constants::w2_init_analytic(m2, dim),
        dist_fine_em,
        dist_em_init,
        dist_init_star,
        sq_em_init,
        delta_pred: constants::delta_sequence(grid, params)?,
        n_h: constants::n_h(grid, params)?,
    })
}
