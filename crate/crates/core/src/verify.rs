//! Seeded numerical verification of the regularity and regime claims:
//! Lipschitz bounds, weak-convexity profiles, drift contraction windows,
//! moment identities, the step-size lemma and the log-concavity switch.
//!
//! Every check returns a [`CheckReport`] whose `worst_margin` is the most
//! violating observed slack (positive = pass). Checks are reproducible given
//! their seed and deterministic across thread counts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constants::{self, LipschitzVariant};
use crate::error::{Error, Result};
use crate::mixture::{ConvexityParams, GaussianMixture};
use crate::ou_flow;
use crate::rng::{substream, unit_direction, Stream};
use crate::sampler::TimeGrid;
use crate::stats;

/// Outcome of one numerical check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    /// Most violating observed slack; positive means the claim held with room.
    pub worst_margin: f64,
    pub n_trials: usize,
    pub tolerance: f64,
    /// Where the worst case happened.
    pub details: String,
}

impl CheckReport {
    fn from_margin(name: &str, worst: f64, n_trials: usize, tol: f64, details: String) -> Self {
        CheckReport {
            name: name.to_string(),
            pass: worst >= -tol,
            worst_margin: worst,
            n_trials,
            tolerance: tol,
            details,
        }
    }

    /// `name,pass,worst_margin,n_trials,tolerance` CSV row.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.name, self.pass, self.worst_margin, self.n_trials, self.tolerance
        )
    }

    pub fn csv_header() -> &'static str {
        "name,pass,worst_margin,n_trials,tolerance"
    }
}

/// Folds two reports into the worse of the two (margins min, pass and).
pub fn worst_of(name: &str, reports: &[CheckReport]) -> CheckReport {
    let mut worst = f64::INFINITY;
    let mut pass = true;
    let mut details = String::new();
    let mut trials = 0;
    let mut tol = 0.0f64;
    for r in reports {
        trials += r.n_trials;
        tol = tol.max(r.tolerance);
        if r.worst_margin < worst {
            worst = r.worst_margin;
            details = r.details.clone();
        }
        pass &= r.pass;
    }
    CheckReport {
        name: name.to_string(),
        pass,
        worst_margin: worst,
        n_trials: trials,
        tolerance: tol,
        details,
    }
}

/// One point from the marginal at `s` with occasional heavy-tail inflation,
/// plus a partner at log-uniform radius in a uniform direction. Covers the
/// r-dependence of the profile claims.
fn sample_pair(
    marg: &GaussianMixture,
    rng: &mut ChaCha8Rng,
    heavy_tail: bool,
) -> (Vec<f64>, Vec<f64>, f64) {
    let mut x = marg.sample_with_rng(rng);
    if heavy_tail && rng.random::<f64>() < 0.25 {
        let f = rng.random_range(0.0..3.0f64).exp();
        for xi in &mut x {
            *xi *= f;
        }
    }
    let r = 10f64.powf(rng.random_range(-3.0..f64::log10(20.0)));
    let dir = unit_direction(rng, marg.dim());
    let y: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + r * u).collect();
    (x, y, r)
}

/// Lipschitz claim at forward time `s`: the modified score moves by at most
/// `L_s |x - y|` (standard variant). The uniform clause `ratio <= L` gates
/// only when `M - alpha <= L_U`: the uniform constant is derived under the
/// two-sided reading of `L_U`, and with a one-sided `L_U` the score Hessian
/// genuinely exceeds `L` at small forward times once `M - alpha > L_U`.
/// Outside that regime the uniform margin is reported informationally.
pub fn verify_score_lipschitz(
    g: &GaussianMixture,
    p: &ConvexityParams,
    s: f64,
    n_pairs: usize,
    tol: f64,
    seed: u64,
) -> Result<CheckReport> {
    let marg = ou_flow::forward_marginal(g, s)?;
    let l_s = constants::lipschitz_l(p, s, LipschitzVariant::Standard)?;
    let l_uni = constants::uniform_l(p);
    let uniform_gates = p.big_m - p.alpha <= p.l_u;
    let results: Vec<(f64, f64, f64)> = (0..n_pairs)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, f64)> {
            let mut rng = substream(seed, Stream::Pairs, i as u64, 0, 0);
            let (x, y, r) = sample_pair(&marg, &mut rng, true);
            let sx = ou_flow::score_modified(g, s, &x)?;
            let sy = ou_flow::score_modified(g, s, &y)?;
            let diff = stats::norm(&stats::sub(&sx, &sy));
            Ok((l_s * r - diff, l_uni * r - diff, r))
        })
        .collect::<Result<_>>()?;
    let mut worst = f64::INFINITY;
    let mut worst_uni = f64::INFINITY;
    let mut worst_r = 0.0;
    for (m, mu, r) in results {
        if m < worst {
            worst = m;
            worst_r = r;
        }
        worst_uni = worst_uni.min(mu);
    }
    let combined = if uniform_gates {
        worst.min(worst_uni)
    } else {
        worst
    };
    Ok(CheckReport::from_margin(
        "score_lipschitz",
        combined,
        n_pairs,
        tol,
        format!(
            "s={s} worst_r={worst_r} L_s={l_s} L={l_uni} uniform_margin={worst_uni}{}",
            if uniform_gates {
                ""
            } else {
                " (informational: M - alpha > L_U)"
            }
        ),
    ))
}

/// Weak-convexity claim at forward time `s`: the normalized monotonicity
/// quotient of the modified score stays above both the constant `C_s` and the
/// r-dependent profile bound.
pub fn verify_weak_convexity(
    g: &GaussianMixture,
    p: &ConvexityParams,
    s: f64,
    n_pairs: usize,
    tol: f64,
    seed: u64,
) -> Result<CheckReport> {
    let marg = ou_flow::forward_marginal(g, s)?;
    let c_s = constants::weak_convexity_c(p, s)?;
    let results: Vec<(f64, f64, f64)> = (0..n_pairs)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, f64)> {
            let mut rng = substream(seed, Stream::Pairs, i as u64, 0, 0);
            let (x, y, r) = sample_pair(&marg, &mut rng, false);
            let sx = ou_flow::score_modified(g, s, &x)?;
            let sy = ou_flow::score_modified(g, s, &y)?;
            let dot = stats::dot(&stats::sub(&sx, &sy), &stats::sub(&x, &y));
            let quotient = -dot / (r * r);
            let margin_c = quotient - c_s;
            let margin_profile = quotient - constants::profile_lower_bound(p, s, r)?;
            Ok((margin_c, margin_profile, r))
        })
        .collect::<Result<_>>()?;
    let mut worst_c = f64::INFINITY;
    let mut worst_p = f64::INFINITY;
    let mut worst_r = 0.0;
    for (mc, mp, r) in results {
        worst_c = worst_c.min(mc);
        if mp < worst_p {
            worst_p = mp;
            worst_r = r;
        }
    }
    Ok(CheckReport::from_margin(
        "weak_convexity",
        worst_c.min(worst_p),
        n_pairs,
        tol,
        format!("s={s} worst_r={worst_r} margin_const={worst_c} margin_profile={worst_p}"),
    ))
}

/// Drift inequality and contraction window. At every grid time the pairwise
/// inequality
///
/// ```text
/// (b_s(x) - b_s(y))' (x - y)  <=  -(2 C_s + 1) |x - y|^2
/// ```
///
/// is checked (it holds at all times). The contractivity clause
/// `2 C_s + 1 >= 0` is gated on the forward window `s >= eta(0)` where the
/// closed form places the regime switch; below it contraction can genuinely
/// fail and findings are informational.
pub fn verify_drift_contraction(
    g: &GaussianMixture,
    p: &ConvexityParams,
    t_horizon: f64,
    s_grid: &[f64],
    n_pairs: usize,
    tol: f64,
    seed: u64,
) -> Result<CheckReport> {
    let eta0 = constants::eta_unclamped(p, 0.0)?;
    let window_start = constants::t_contract(p, 0.0, t_horizon)?;
    let mut worst = f64::INFINITY;
    let mut worst_s = f64::NAN;
    let mut info_below_window = f64::INFINITY;
    let mut trials = 0;
    for (gi, &s) in s_grid.iter().enumerate() {
        let marg = ou_flow::forward_marginal(g, s)?;
        let c_s = constants::weak_convexity_c(p, s)?;
        let rate = 2.0 * c_s + 1.0;
        let margins: Vec<f64> = (0..n_pairs)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let mut rng = substream(seed, Stream::Pairs, (gi * n_pairs + i) as u64, 0, 0);
                let (x, y, r) = sample_pair(&marg, &mut rng, false);
                let bx = ou_flow::backward_drift(g, s, &x)?;
                let by = ou_flow::backward_drift(g, s, &y)?;
                let dot = stats::dot(&stats::sub(&bx, &by), &stats::sub(&x, &y));
                // margin of: dot <= -rate * r^2, normalized by r^2
                Ok(-dot / (r * r) - rate)
            })
            .collect::<Result<_>>()?;
        trials += n_pairs;
        let m = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        if s >= window_start {
            if m < worst {
                worst = m;
                worst_s = s;
            }
        } else {
            info_below_window = info_below_window.min(m);
        }
        // Contractivity of the rate itself inside the true forward window.
        if s >= eta0 && rate < -tol && rate < worst {
            worst = rate;
            worst_s = s;
        }
    }
    if !worst.is_finite() {
        // No grid point reached the window; the claim is vacuous there.
        worst = 0.0;
    }
    Ok(CheckReport::from_margin(
        "drift_contraction",
        worst,
        trials,
        tol,
        format!(
            "window s>={window_start:.4} (rate clause s>={eta0:.4}), worst at s={worst_s}, \
             informational min margin below window={info_below_window}"
        ),
    ))
}

/// Monte-Carlo second-moment identity `E|X_s|^2 = e^{-2s} m2 + (1-e^{-2s}) d`
/// at every grid time (3 s.e. tolerance), plus the uniform path bound
/// `sup_s sqrt(E|X_s|^2) <= B` (3 s.e.).
pub fn verify_forward_moment(
    g: &GaussianMixture,
    s_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<CheckReport> {
    let m2 = g.second_moment();
    let d = g.dim() as f64;
    let b = constants::b_const(m2, g.dim());
    let mut worst = f64::INFINITY;
    let mut worst_s = f64::NAN;
    let mut sup_rms = f64::NEG_INFINITY;
    let mut sup_se = 0.0;
    for (gi, &s) in s_grid.iter().enumerate() {
        let marg = ou_flow::forward_marginal(g, s)?;
        let batch = marg.sample(n, seed.wrapping_add(gi as u64))?;
        let sq: Vec<f64> = batch.rows().map(|r| stats::dot(r, r)).collect();
        let mc = stats::mean(&sq);
        let se = stats::standard_error(&sq);
        let want = (-2.0 * s).exp() * m2 + (1.0 - (-2.0 * s).exp()) * d;
        let margin = 3.0 * se - (mc - want).abs();
        if margin < worst {
            worst = margin;
            worst_s = s;
        }
        let rms = mc.max(0.0).sqrt();
        if rms > sup_rms {
            sup_rms = rms;
            // delta method: se of sqrt(mean)
            sup_se = se / (2.0 * rms.max(1e-12));
        }
    }
    let sup_margin = b + 3.0 * sup_se - sup_rms;
    Ok(CheckReport::from_margin(
        "forward_moment",
        worst.min(sup_margin),
        n * s_grid.len(),
        0.0,
        format!("worst at s={worst_s}; sup rms={sup_rms} vs B={b} (margin {sup_margin})"),
    ))
}

/// Step-size lemma: with `h < 2/(9 L^2)`, every contractive step (forward
/// time `s_k >= eta(9 L^2 h / 2)`) satisfies
/// `h <= 2 (2 C_s + 1) / (9 L^2) /\ 1` and
/// `eps_1 = 1 + h^2 (2 L_s + 1)^2 - 2 h (2 C_s + 1)` lies in (0, 1].
pub fn verify_step_size_lemma(p: &ConvexityParams, grid: &TimeGrid) -> Result<CheckReport> {
    let l = constants::uniform_l(p);
    let hm = constants::h_max(l)?;
    let h = grid.h();
    if h >= hm {
        return Err(Error::Config(format!(
            "step size {h} violates the precondition h < {hm}"
        )));
    }
    let nh = constants::n_h(grid, p)?;
    let mut worst = f64::INFINITY;
    let mut worst_k = 0usize;
    for k in 0..nh {
        let s = grid.forward_time(k);
        let c = constants::weak_convexity_c(p, s)?;
        let l_s = constants::lipschitz_l(p, s, LipschitzVariant::Standard)?;
        let cap = (2.0 * (2.0 * c + 1.0) / (9.0 * l * l)).min(1.0);
        let eps1 = 1.0 + h * h * (2.0 * l_s + 1.0).powi(2) - 2.0 * h * (2.0 * c + 1.0);
        let margin = (cap - h).min(1.0 - eps1).min(eps1);
        if margin < worst {
            worst = margin;
            worst_k = k;
        }
    }
    let details = if nh == 0 {
        worst = 0.0;
        "no contractive steps (eta exceeds the horizon); vacuously true".to_string()
    } else {
        format!(
            "n_h={nh}, worst at k={worst_k} (s={})",
            grid.forward_time(worst_k)
        )
    };
    Ok(CheckReport::from_margin(
        "step_size_lemma",
        worst,
        nh,
        1e-12,
        details,
    ))
}

/// Log-concavity regime switch: at every grid time the finite-difference
/// minimum eigenvalue of `-hess log p_s` at sampled points stays above
/// `C_s + 1`, and the first grid time at which it turns nonnegative lies at
/// or before `xi` within grid resolution.
pub fn verify_log_concavity_regime(
    g: &GaussianMixture,
    p: &ConvexityParams,
    t_horizon: f64,
    s_grid: &[f64],
    n_points: usize,
    tol: f64,
    seed: u64,
) -> Result<CheckReport> {
    let xi = constants::xi(p, t_horizon);
    let mut worst = f64::INFINITY;
    let mut worst_s = f64::NAN;
    let mut first_log_concave: Option<usize> = None;
    for (gi, &s) in s_grid.iter().enumerate() {
        let marg = ou_flow::forward_marginal(g, s)?;
        let c1 = constants::weak_convexity_c(p, s)? + 1.0;
        let eigs: Vec<f64> = (0..n_points)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let mut rng = substream(seed, Stream::Points, (gi * n_points + i) as u64, 0, 0);
                let x = if i % 2 == 0 || marg.n_modes() < 2 {
                    marg.sample_with_rng(&mut rng)
                } else {
                    // Point on a random inter-mode segment, the worst region
                    // for convexity.
                    let a = rng.random_range(0..marg.n_modes());
                    let mut bidx = rng.random_range(0..marg.n_modes());
                    if bidx == a {
                        bidx = (a + 1) % marg.n_modes();
                    }
                    let t: f64 = rng.random();
                    marg.means()[a]
                        .iter()
                        .zip(&marg.means()[bidx])
                        .map(|(u, v)| u + t * (v - u))
                        .collect()
                };
                let eps = 1e-4 * (1.0 + stats::norm(&x));
                ou_flow::fd_neg_hessian_min_eig(
                    |ss, y| ou_flow::score_forward(g, ss, y),
                    s,
                    &x,
                    eps,
                )
            })
            .collect::<Result<_>>()?;
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let margin = min_eig - c1;
        if margin < worst {
            worst = margin;
            worst_s = s;
        }
        if first_log_concave.is_none() && min_eig >= -tol {
            first_log_concave = Some(gi);
        }
    }
    // Must have turned log-concave no later than xi, up to one grid cell:
    // the last non-log-concave grid point must not exceed xi. The slack
    // xi - s_{j-1} enters the margin so that pass stays equivalent to
    // worst_margin >= -tolerance.
    let (transition_margin, transition_note) = match first_log_concave {
        Some(0) => (
            f64::INFINITY,
            format!("log-concave from the first grid point; xi={xi:.4}"),
        ),
        Some(j) => {
            let prev = s_grid[j - 1];
            (
                xi - prev,
                format!(
                    "empirical transition in ({prev:.4}, {:.4}], xi={xi:.4}",
                    s_grid[j]
                ),
            )
        }
        None => {
            if s_grid.last().copied().unwrap_or(0.0) < xi {
                (
                    f64::INFINITY,
                    format!("grid ends before xi={xi:.4}; transition not reached"),
                )
            } else {
                (
                    f64::NEG_INFINITY,
                    format!("never log-concave on the grid though xi={xi:.4}"),
                )
            }
        }
    };
    Ok(CheckReport::from_margin(
        "log_concavity_regime",
        worst.min(transition_margin),
        n_points * s_grid.len(),
        tol,
        format!("worst at s={worst_s}; {transition_note}"),
    ))
}

/// Twenty log-spaced forward times in `[lo, hi]`.
pub fn log_spaced_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Options of the full verification suite.
#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub s_grid: Vec<f64>,
    pub n_pairs: usize,
    pub n_points: usize,
    pub n_moment: usize,
    pub pair_tol: f64,
    pub fd_tol: f64,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            s_grid: log_spaced_grid(1e-2, 10.0, 20),
            n_pairs: 10_000,
            n_points: 100,
            n_moment: 100_000,
            pair_tol: 1e-9,
            fd_tol: 1e-5,
            seed: 0,
        }
    }
}

/// Runs every check for one mixture; the Lipschitz and weak-convexity checks
/// aggregate over the grid into a single worst-case row each.
pub fn full_suite(
    g: &GaussianMixture,
    p: &ConvexityParams,
    grid: &TimeGrid,
    opts: &SuiteOptions,
) -> Result<Vec<CheckReport>> {
    let t = grid.t_horizon();
    let per_s_pairs = (opts.n_pairs / opts.s_grid.len()).max(1);
    let lip: Vec<CheckReport> = opts
        .s_grid
        .iter()
        .map(|&s| verify_score_lipschitz(g, p, s, per_s_pairs, opts.pair_tol, opts.seed))
        .collect::<Result<_>>()?;
    let convex: Vec<CheckReport> = opts
        .s_grid
        .iter()
        .map(|&s| verify_weak_convexity(g, p, s, per_s_pairs, opts.pair_tol, opts.seed))
        .collect::<Result<_>>()?;
    Ok(vec![
        worst_of("score_lipschitz", &lip),
        worst_of("weak_convexity", &convex),
        verify_drift_contraction(g, p, t, &opts.s_grid, per_s_pairs, opts.pair_tol, opts.seed)?,
        verify_forward_moment(g, &opts.s_grid, opts.n_moment, opts.seed)?,
        verify_step_size_lemma(p, grid)?,
        verify_log_concavity_regime(g, p, t, &opts.s_grid, opts.n_points, opts.fd_tol, opts.seed)?,
    ])
}
