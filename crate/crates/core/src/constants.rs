//! Explicit constants of the OU score-sampler analysis and the final W2
//! error bound, as pure closed-form evaluations.
//!
//! Time convention: `weak_convexity_c` and `lipschitz_l` take the FORWARD
//! time `s` of the OU flow. A backward Euler–Maruyama step `k` on the grid
//! `t_k = k h` evaluates these at `s = T - t_k`. The threshold `eta(rho)` is
//! the forward time after which `2 C_s + 1 >= rho`, so the contractive steps
//! of the backward recursion are exactly those with `t_k <= T - eta(rho)`,
//! i.e. the first `n_h` of them.

use crate::error::{Error, Result};
use crate::mixture::ConvexityParams;
use crate::sampler::TimeGrid;

/// Which reading of the time-dependent Lipschitz constant to use. Two
/// appear in the analysis: the standard one places the `+1` outside the
/// outer max, the alternative carries an extra `+1` inside the min branch
/// (never smaller than the standard one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LipschitzVariant {
    #[default]
    Standard,
    Alt,
}

/// Which reading of the final bound to use: the standard display, or the
/// padded one carrying an extra `+1/(3L)` in both window-length factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundVariant {
    #[default]
    Standard,
    Padded,
}

/// `f_M(r) = 2 sqrt(M) tanh(r sqrt(M) / 2)`, the envelope of the weak
/// convexity deficit.
pub fn f_m(big_m: f64, r: f64) -> f64 {
    if big_m == 0.0 {
        return 0.0;
    }
    let root = big_m.sqrt();
    2.0 * root * (r * root / 2.0).tanh()
}

fn denom(p: &ConvexityParams, s: f64) -> Result<f64> {
    let d = p.alpha + (1.0 - p.alpha) * (-2.0 * s).exp();
    if d <= 0.0 {
        return Err(Error::Config(format!(
            "degenerate weak-convexity denominator {d} at s={s} (alpha={})",
            p.alpha
        )));
    }
    Ok(d)
}

/// Weak-convexity constant of `-log(p_s / pi_inf)` at forward time `s`:
/// `C_s = alpha/D - e^{-2s} M / D^2 - 1` with `D = alpha + (1-alpha) e^{-2s}`.
pub fn weak_convexity_c(p: &ConvexityParams, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!(
            "forward time must be >= 0, got {s}"
        )));
    }
    let u = (-2.0 * s).exp();
    let d = denom(p, s)?;
    Ok(p.alpha / d - u * p.big_m / (d * d) - 1.0)
}

/// r-dependent lower bound on the weak convexity profile of
/// `-log(p_s / pi_inf)`: `alpha/D - 1 - (c/r) f_M(c r)` with
/// `c = e^{-s} / D`. Dominates [`weak_convexity_c`] since `f_M(cr) <= c M r`.
pub fn profile_lower_bound(p: &ConvexityParams, s: f64, r: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!(
            "forward time must be >= 0, got {s}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!(
            "pair distance must be > 0, got {r}"
        )));
    }
    let d = denom(p, s)?;
    let c = (-s).exp() / d;
    Ok(p.alpha / d - 1.0 - c / r * f_m(p.big_m, c * r))
}

/// Time-dependent Lipschitz constant of the modified score at forward time `s`.
/// Standard reading: `max{ min{ 1/(1-e^{-2s}), e^{2s} L_U }, -(C_s+1) } + 1`.
pub fn lipschitz_l(p: &ConvexityParams, s: f64, variant: LipschitzVariant) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!(
            "forward time must be >= 0, got {s}"
        )));
    }
    let u = (-2.0 * s).exp();
    // At s = 0 the heat branch is +infinity and the min picks the e^{2s} L_U branch.
    let heat = if u < 1.0 {
        1.0 / (1.0 - u)
    } else {
        f64::INFINITY
    };
    let min_branch = heat.min((2.0 * s).exp() * p.l_u);
    let convexity_branch = -(weak_convexity_c(p, s)? + 1.0);
    Ok(match variant {
        LipschitzVariant::Standard => min_branch.max(convexity_branch) + 1.0,
        LipschitzVariant::Alt => (min_branch + 1.0).max(convexity_branch) + 1.0,
    })
}

/// Uniform-in-time Lipschitz constant `L = max{1/alpha, 1} (2 + L_U)`.
pub fn uniform_l(p: &ConvexityParams) -> f64 {
    (1.0 / p.alpha).max(1.0) * (2.0 + p.l_u)
}

/// Forward time after which the marginals are log-concave:
/// `log sqrt((alpha^2 + M - alpha)/alpha^2)` clamped to `[0, T]` when
/// `alpha < M`, and 0 otherwise.
pub fn xi(p: &ConvexityParams, t_horizon: f64) -> f64 {
    if p.alpha - p.big_m >= 0.0 {
        return 0.0;
    }
    let ratio = (p.alpha * p.alpha + p.big_m - p.alpha) / (p.alpha * p.alpha);
    (ratio.sqrt().ln()).min(t_horizon)
}

/// Forward time after which `2 C_s + 1 >= rho`, clamped to `[0, T]`:
/// `eta = (1/2) log(A + sqrt(Q + A^2))` with
/// `A = (M + rho alpha (1-alpha)) / ((1-rho) alpha^2)` and
/// `Q = (1+rho)(1-alpha)^2 / ((1-rho) alpha^2)`; 0 when `2 alpha - 2M - 1 >= rho`.
///
/// The branch condition compares against `rho`, not 0: `2 alpha - 2M - 1` is
/// the value of `2 C_0 + 1`, and when it sits in `[0, rho)` the crossing of
/// level `rho` happens at a strictly positive time given by the same closed
/// form. At `rho = 0` the two readings coincide.
pub fn eta(p: &ConvexityParams, rho: f64, t_horizon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    Ok(eta_unclamped(p, rho)?.min(t_horizon))
}

/// [`eta`] without the horizon clamp; may exceed T. This is the raw forward
/// transition time, useful for deciding whether a contraction window exists
/// inside `[0, T]` at all.
pub fn eta_unclamped(p: &ConvexityParams, rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    if 2.0 * p.alpha - 2.0 * p.big_m - 1.0 >= rho {
        return Ok(0.0);
    }
    let a2 = p.alpha * p.alpha;
    let a = (p.big_m + rho * p.alpha * (1.0 - p.alpha)) / ((1.0 - rho) * a2);
    let q = (1.0 + rho) * (1.0 - p.alpha) * (1.0 - p.alpha) / ((1.0 - rho) * a2);
    Ok(0.5 * (a + (q + a * a).sqrt()).ln())
}

/// Length of the contractive part of the backward run: `T - eta(rho)`.
pub fn t_contract(p: &ConvexityParams, rho: f64, t_horizon: f64) -> Result<f64> {
    Ok(t_horizon - eta(p, rho, t_horizon)?)
}

/// Largest admissible step size `2 / (9 L^2)`; callers must keep `h` strictly
/// below this.
pub fn h_max(uniform_l: f64) -> Result<f64> {
    if !(uniform_l > 0.0) {
        return Err(Error::Config(format!(
            "uniform Lipschitz constant must be positive, got {uniform_l}"
        )));
    }
    Ok(2.0 / (9.0 * uniform_l * uniform_l))
}

/// Uniform L2 bound on the backward path: `B = sqrt(m2 + d)`.
pub fn b_const(m2: f64, dim: usize) -> f64 {
    (m2 + dim as f64).sqrt()
}

/// Index of the last grid node inside the contractive window:
/// `n_h = sup{ k : t_k <= T - eta(9 L^2 h / 2) }`. Steps `k < n_h` contract.
pub fn n_h(grid: &TimeGrid, p: &ConvexityParams) -> Result<usize> {
    let l = uniform_l(p);
    let h = grid.h();
    if h >= h_max(l)? {
        return Err(Error::Config(format!(
            "step size {h} violates h < {}",
            h_max(l)?
        )));
    }
    let rho_h = 9.0 * l * l * h / 2.0;
    let window = t_contract(p, rho_h, grid.t_horizon())?;
    if window < 0.0 {
        return Ok(0);
    }
    let k = (window / h + 1e-9).floor() as usize;
    Ok(k.min(grid.n_steps()))
}

/// Per-step factor of the coupled Euler–Maruyama recursion, at backward index
/// `k` (score evaluated at forward time `s_k = T - t_k`):
///
/// - `k < n_h`:  `sqrt(1 + h^2 (2 L_s + 1)^2 - 2 h (2 C_s + 1))`, in (0, 1];
/// - `k >= n_h`: `sqrt(1 + h^2 (2 L_s + 1)^2 + 2 h (2 L_s + 1)) = 1 + h (2 L_s + 1)`.
pub fn delta_k(k: usize, grid: &TimeGrid, p: &ConvexityParams) -> Result<f64> {
    if k >= grid.n_steps() {
        return Err(Error::invalid(format!(
            "step index {k} out of range 0..{}",
            grid.n_steps()
        )));
    }
    let nh = n_h(grid, p)?;
    let h = grid.h();
    let s = grid.forward_time(k);
    let l_s = lipschitz_l(p, s, LipschitzVariant::Standard)?;
    let c_s = weak_convexity_c(p, s)?;
    let a = 2.0 * l_s + 1.0;
    if k < nh {
        let eps1 = 1.0 + h * h * a * a - 2.0 * h * (2.0 * c_s + 1.0);
        if eps1 <= 0.0 {
            return Err(Error::Config(format!(
                "contraction factor not positive at step {k}: eps1={eps1}"
            )));
        }
        Ok(eps1.sqrt())
    } else {
        Ok((1.0 + h * h * a * a + 2.0 * h * a).sqrt())
    }
}

/// All `delta_k`, k = 0..N-1.
pub fn delta_sequence(grid: &TimeGrid, p: &ConvexityParams) -> Result<Vec<f64>> {
    (0..grid.n_steps()).map(|k| delta_k(k, grid, p)).collect()
}

/// The W2 error bound of the sampler:
///
/// ```text
/// e^{3 L eta(9 L^2 h / 2)} [ e^{-T} w2_init + 4 eps Tc + sqrt(2h) (B + 6 L sqrt(d)) Tc ]
/// ```
///
/// with `Tc = T - eta(0)`. The padded variant replaces `Tc` by
/// `Tc + 1/(3L)` in the score and discretization terms.
#[allow(clippy::too_many_arguments)]
pub fn w2_bound(
    p: &ConvexityParams,
    t_horizon: f64,
    h: f64,
    eps: f64,
    dim: usize,
    m2: f64,
    w2_init: f64,
    variant: BoundVariant,
) -> Result<f64> {
    let l = uniform_l(p);
    let hm = h_max(l)?;
    if !(h > 0.0 && h < hm) {
        return Err(Error::Config(format!(
            "step size must satisfy 0 < h < {hm}, got {h}"
        )));
    }
    if !(eps >= 0.0) {
        return Err(Error::Config(format!(
            "score error must be >= 0, got {eps}"
        )));
    }
    if !(w2_init >= 0.0) {
        return Err(Error::Config(format!(
            "initialization distance must be >= 0, got {w2_init}"
        )));
    }
    if !(t_horizon > 0.0) {
        return Err(Error::Config(format!(
            "horizon must be > 0, got {t_horizon}"
        )));
    }
    let rho_h = 9.0 * l * l * h / 2.0;
    let eta_h = eta(p, rho_h, t_horizon)?;
    let tc = t_contract(p, 0.0, t_horizon)?;
    let tc_eff = match variant {
        BoundVariant::Standard => tc,
        BoundVariant::Padded => tc + 1.0 / (3.0 * l),
    };
    let b = b_const(m2, dim);
    let init_term = (-t_horizon).exp() * w2_init;
    let score_term = 4.0 * eps * tc_eff;
    let disc_term = (2.0 * h).sqrt() * (b + 6.0 * l * (dim as f64).sqrt()) * tc_eff;
    Ok((3.0 * l * eta_h).exp() * (init_term + score_term + disc_term))
}

/// Analytic fallback for `W2(pi_data, pi_inf)`: triangle inequality through
/// the point mass at the origin gives `sqrt(m2) + sqrt(d)`.
pub fn w2_init_analytic(m2: f64, dim: usize) -> f64 {
    m2.sqrt() + (dim as f64).sqrt()
}

/// Every derived constant for one configuration, plus the delta sequence and
/// the final bound. Built once, then queried.
#[derive(Debug, Clone)]
pub struct ConstantsReport {
    pub params: ConvexityParams,
    pub t_horizon: f64,
    pub n_steps: usize,
    pub h: f64,
    pub eps: f64,
    pub dim: usize,
    pub m2: f64,
    /// Two readings of the data-score Lipschitz constant:
    /// `alpha + sqrt(M)` and the alternative `alpha + M`.
    pub lip_score: f64,
    pub lip_score_alt: f64,
    pub l_uniform: f64,
    pub xi: f64,
    pub eta0: f64,
    pub eta_rho_h: f64,
    pub t_contract0: f64,
    pub n_h: usize,
    pub b: f64,
    pub h_max: f64,
    pub delta: Vec<f64>,
    pub w2_init: f64,
    pub bound: f64,
    pub bound_padded: f64,
}

impl ConstantsReport {
    /// Builds the report; fails if `h >= h_max` or any parameter is invalid.
    pub fn build(
        params: ConvexityParams,
        grid: &TimeGrid,
        eps: f64,
        dim: usize,
        m2: f64,
        w2_init: f64,
    ) -> Result<Self> {
        let l = uniform_l(&params);
        let hm = h_max(l)?;
        let h = grid.h();
        let t = grid.t_horizon();
        if h >= hm {
            return Err(Error::Config(format!(
                "step size {h} must be strictly below h_max = {hm}"
            )));
        }
        let rho_h = 9.0 * l * l * h / 2.0;
        let delta = delta_sequence(grid, &params)?;
        let bound = w2_bound(&params, t, h, eps, dim, m2, w2_init, BoundVariant::Standard)?;
        let bound_pf = w2_bound(&params, t, h, eps, dim, m2, w2_init, BoundVariant::Padded)?;
        Ok(ConstantsReport {
            params,
            t_horizon: t,
            n_steps: grid.n_steps(),
            h,
            eps,
            dim,
            m2,
            lip_score: params.alpha + params.big_m.sqrt(),
            lip_score_alt: params.alpha + params.big_m,
            l_uniform: l,
            xi: xi(&params, t),
            eta0: eta(&params, 0.0, t)?,
            eta_rho_h: eta(&params, rho_h, t)?,
            t_contract0: t_contract(&params, 0.0, t)?,
            n_h: n_h(grid, &params)?,
            b: b_const(m2, dim),
            h_max: hm,
            delta,
            w2_init,
            bound,
            bound_padded: bound_pf,
        })
    }

    pub fn c_of_s(&self, s: f64) -> Result<f64> {
        weak_convexity_c(&self.params, s)
    }

    pub fn l_of_s(&self, s: f64) -> Result<f64> {
        lipschitz_l(&self.params, s, LipschitzVariant::Standard)
    }

    pub fn eta_at(&self, rho: f64) -> Result<f64> {
        eta(&self.params, rho, self.t_horizon)
    }

    pub fn t_contract_at(&self, rho: f64) -> Result<f64> {
        t_contract(&self.params, rho, self.t_horizon)
    }

    pub fn delta_min(&self) -> f64 {
        self.delta.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn delta_max(&self) -> f64 {
        self.delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn delta_product(&self) -> f64 {
        self.delta.iter().product()
    }

    /// Flat `key=value` lines, one per constant.
    pub fn to_key_value_block(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.fields() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    /// Header and row of the single-line CSV form.
    pub fn to_csv(&self) -> (String, String) {
        let fields = self.fields();
        let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
        let row: Vec<String> = fields.into_iter().map(|(_, v)| v).collect();
        (header.join(","), row.join(","))
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("alpha", format!("{}", self.params.alpha)),
            ("big_m", format!("{}", self.params.big_m)),
            ("l_u", format!("{}", self.params.l_u)),
            ("t_horizon", format!("{}", self.t_horizon)),
            ("n_steps", format!("{}", self.n_steps)),
            ("h", format!("{}", self.h)),
            ("eps", format!("{}", self.eps)),
            ("dim", format!("{}", self.dim)),
            ("m2", format!("{}", self.m2)),
            ("lip_score", format!("{}", self.lip_score)),
            ("lip_score_alt", format!("{}", self.lip_score_alt)),
            ("l_uniform", format!("{}", self.l_uniform)),
            ("xi", format!("{}", self.xi)),
            ("eta0", format!("{}", self.eta0)),
            ("eta_rho_h", format!("{}", self.eta_rho_h)),
            ("t_contract0", format!("{}", self.t_contract0)),
            ("n_h", format!("{}", self.n_h)),
            ("b", format!("{}", self.b)),
            ("h_max", format!("{}", self.h_max)),
            ("delta_min", format!("{}", self.delta_min())),
            ("delta_max", format!("{}", self.delta_max())),
            ("delta_product", format!("{}", self.delta_product())),
            ("w2_init", format!("{}", self.w2_init)),
            ("bound", format!("{}", self.bound)),
            ("bound_padded", format!("{}", self.bound_padded)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha: f64, big_m: f64, l_u: f64) -> ConvexityParams {
        ConvexityParams { alpha, big_m, l_u }
    }

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn f_m_values() {
        assert_eq!(f_m(0.0, 5.0), 0.0);
        // M = 4: saturates at 2 * 2 * 1 = 4.
        assert!((f_m(4.0, 1e6) - 4.0).abs() < 1e-12);
        // M = 1, r = 2: 2 tanh(1).
        assert!((f_m(1.0, 2.0) - 2.0 * 1.0f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn weak_convexity_c_endpoints() {
        let pr = p(0.8, 3.0, 1.0);
        // s = 0: C_0 + 1 = alpha - M.
        let c0 = weak_convexity_c(&pr, 0.0).unwrap();
        assert!((c0 + 1.0 - (0.8 - 3.0)).abs() < 1e-14);
        // s large: C_s -> 0.
        let c_inf = weak_convexity_c(&pr, 50.0).unwrap();
        assert!(c_inf.abs() < 1e-12);
        // alpha = 1: C_s = -e^{-2s} M.
        let c = weak_convexity_c(&p(1.0, 1.0, 1.0), 0.5 * LN2).unwrap();
        assert!((c + 0.5).abs() < 1e-14, "c={c}");
    }

    #[test]
    fn profile_lower_bound_endpoints() {
        // M = 0: independent of r.
        let pr = p(0.7, 0.0, 1.0);
        let a = profile_lower_bound(&pr, 0.9, 0.01).unwrap();
        let b = profile_lower_bound(&pr, 0.9, 100.0).unwrap();
        assert!((a - b).abs() < 1e-14);
        let u = (-2.0f64 * 0.9).exp();
        let want = 0.7 / (0.7 + 0.3 * u) - 1.0;
        assert!((a - want).abs() < 1e-14);

        // s = 0, c = 1: alpha - 1 - f_M(r)/r.
        let pr2 = p(1.2, 2.0, 1.0);
        let r = 0.7;
        let got = profile_lower_bound(&pr2, 0.0, r).unwrap();
        let want2 = 1.2 - 1.0 - f_m(2.0, r) / r;
        assert!((got - want2).abs() < 1e-14);
    }

    #[test]
    fn profile_dominates_c_on_grid() {
        for &pr in &[p(1.0, 4.0, 1.0), p(0.5, 2.0, 3.0), p(2.0, 9.0, 12.0)] {
            for i in 0..100 {
                let s = 5.0 * i as f64 / 99.0;
                let c = weak_convexity_c(&pr, s).unwrap();
                for j in 0..100 {
                    let r = 10f64.powf(-3.0 + 5.0 * j as f64 / 99.0);
                    let prof = profile_lower_bound(&pr, s, r).unwrap();
                    assert!(
                        prof >= c - 1e-12,
                        "profile {prof} below C {c} at s={s} r={r}"
                    );
                }
            }
        }
    }

    #[test]
    fn lipschitz_values() {
        let pr = p(1.0, 0.0, 1.0);
        assert!((uniform_l(&pr) - 3.0).abs() < 1e-15);

        // s -> infinity: heat branch -> 1, so L_s -> 2 <= L.
        let l_inf = lipschitz_l(&pr, 60.0, LipschitzVariant::Standard).unwrap();
        assert!((l_inf - 2.0).abs() < 1e-12);

        // L_s <= L on a log grid when M - alpha <= L_U.
        for &pr in &[p(1.0, 0.0, 1.0), p(1.0, 1.5, 1.0), p(0.8, 2.0, 4.0)] {
            assert!(pr.big_m - pr.alpha <= pr.l_u);
            let l = uniform_l(&pr);
            for i in 0..200 {
                let s = 10f64.powf(-3.0 + 4.7 * i as f64 / 199.0);
                let ls = lipschitz_l(&pr, s, LipschitzVariant::Standard).unwrap();
                assert!(ls <= l + 1e-12, "L_s={ls} exceeds L={l} at s={s}");
            }
        }

        // s = 0 goes through the e^{2s} L_U branch without dividing by zero.
        let l0 = lipschitz_l(&pr, 0.0, LipschitzVariant::Standard).unwrap();
        assert!((l0 - 2.0).abs() < 1e-15); // max{min{inf, 1}, -1} + 1

        // The alternative reading is at least the standard one.
        for i in 0..50 {
            let s = 0.02 + i as f64 * 0.1;
            let a = lipschitz_l(&pr, s, LipschitzVariant::Standard).unwrap();
            let b = lipschitz_l(&pr, s, LipschitzVariant::Alt).unwrap();
            assert!(b >= a - 1e-15);
        }
    }

    #[test]
    fn min_branch_is_unimodal_on_grid() {
        // e^{2s} L_U increases, 1/(1-e^{-2s}) decreases; their min rises to a
        // single peak then falls.
        let l_u = 1.0;
        let branch = |s: f64| {
            let u = (-2.0 * s).exp();
            let heat = if u < 1.0 {
                1.0 / (1.0 - u)
            } else {
                f64::INFINITY
            };
            heat.min((2.0 * s).exp() * l_u)
        };
        let values: Vec<f64> = (1..400).map(|i| branch(i as f64 * 0.02)).collect();
        let peak = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        for i in 1..=peak {
            assert!(values[i] >= values[i - 1] - 1e-12);
        }
        for i in peak + 1..values.len() {
            assert!(values[i] <= values[i - 1] + 1e-12);
        }
    }

    #[test]
    fn xi_values() {
        assert_eq!(xi(&p(1.0, 0.5, 1.0), 10.0), 0.0);
        assert_eq!(xi(&p(2.0, 2.0, 1.0), 10.0), 0.0);
        let v = xi(&p(1.0, 2.0, 1.0), 10.0);
        assert!((v - 0.5 * LN2).abs() < 1e-15, "v={v}");
        // Clamp at T.
        let clamped = xi(&p(1.0, 2.0, 1.0), 0.1);
        assert!((clamped - 0.1).abs() < 1e-15);
    }

    #[test]
    fn xi_matches_first_sign_change_of_c_plus_one() {
        let pr = p(1.0, 2.0, 1.0);
        let t = 10.0;
        let x = xi(&pr, t);
        let grid: Vec<f64> = (0..20_000).map(|i| t * i as f64 / 19_999.0).collect();
        let first = grid
            .iter()
            .find(|&&s| weak_convexity_c(&pr, s).unwrap() + 1.0 >= 0.0)
            .copied()
            .unwrap();
        assert!(
            (first - x).abs() < 2.0 * t / 19_999.0,
            "first={first} xi={x}"
        );
    }

    #[test]
    fn eta_values() {
        // 2 alpha - 2M - 1 >= rho: no transition.
        assert_eq!(eta(&p(1.0, 0.0, 1.0), 0.0, 5.0).unwrap(), 0.0);
        assert_eq!(eta(&p(3.0, 2.0, 1.0), 0.7, 5.0).unwrap(), 0.0);
        // alpha = 1, M = 1, rho = 0: A = 1, Q = 0, eta = log(2)/2.
        let v = eta(&p(1.0, 1.0, 1.0), 0.0, 5.0).unwrap();
        assert!((v - 0.5 * LN2).abs() < 1e-15, "v={v}");
        // Clamped at T.
        let c = eta(&p(1.0, 1.0, 1.0), 0.0, 0.2).unwrap();
        assert!((c - 0.2).abs() < 1e-15);
        // Invalid rho.
        assert!(eta(&p(1.0, 1.0, 1.0), 1.0, 5.0).is_err());
        assert!(eta(&p(1.0, 1.0, 1.0), -0.1, 5.0).is_err());
        // 0 <= 2 alpha - 2M - 1 < rho: level-rho crossing is positive even
        // though the level-0 one is not. alpha = 1, M = 0.45, rho = 0.5:
        // 2 C_s + 1 = 1 - 0.9 e^{-2s} >= 0.5 iff s >= log(1.8)/2.
        let corner = eta(&p(1.0, 0.45, 1.0), 0.5, 5.0).unwrap();
        assert!(
            (corner - 0.5 * 1.8f64.ln()).abs() < 1e-15,
            "corner={corner}"
        );
        assert_eq!(eta(&p(1.0, 0.45, 1.0), 0.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn eta_is_the_exact_crossing_of_two_c_plus_one() {
        // 2 C_s + 1 >= rho exactly for s >= eta_unclamped(rho).
        for &pr in &[p(1.0, 4.0, 1.0), p(0.6, 2.0, 3.0), p(1.3, 5.0, 9.0)] {
            for &rho in &[0.0, 0.3, 0.81] {
                let e = eta_unclamped(&pr, rho).unwrap();
                let above = weak_convexity_c(&pr, e + 1e-9).unwrap();
                let below = weak_convexity_c(&pr, (e - 1e-9).max(0.0)).unwrap();
                assert!(2.0 * above + 1.0 >= rho - 1e-7, "pr={pr:?} rho={rho}");
                if e > 1e-8 {
                    assert!(2.0 * below + 1.0 <= rho + 1e-7, "pr={pr:?} rho={rho}");
                }
            }
        }
    }

    #[test]
    fn eta_monotone_in_rho() {
        let pr = p(1.0, 2.0, 1.0);
        let mut last = -1.0;
        for i in 0..100 {
            let rho = 0.99 * i as f64 / 99.0;
            let v = eta(&pr, rho, 50.0).unwrap();
            assert!(v >= last - 1e-13, "eta not monotone at rho={rho}");
            last = v;
        }
    }

    #[test]
    fn t_contract_monotone() {
        let pr = p(1.0, 2.0, 1.0);
        let mut last = f64::INFINITY;
        for i in 0..100 {
            let rho = 0.99 * i as f64 / 99.0;
            let v = t_contract(&pr, rho, 50.0).unwrap();
            assert!(v <= last + 1e-13);
            last = v;
        }
    }

    #[test]
    fn h_max_values() {
        assert!((h_max(3.0).unwrap() - 2.0 / 81.0).abs() < 1e-18);
        assert!((h_max(1.0).unwrap() - 2.0 / 9.0).abs() < 1e-18);
        assert!(h_max(0.0).is_err());
    }

    #[test]
    fn b_const_values() {
        assert!((b_const(2.0, 2) - 2.0).abs() < 1e-15);
        assert!((b_const(6.0, 2) - 8.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn delta_contractive_regime() {
        // alpha = 1, M = 0: eta = 0, all steps contract.
        let pr = p(1.0, 0.0, 1.0);
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let nh = n_h(&grid, &pr).unwrap();
        assert_eq!(nh, grid.n_steps());
        let deltas = delta_sequence(&grid, &pr).unwrap();
        for (k, d) in deltas.iter().enumerate() {
            assert!(*d > 0.0 && *d <= 1.0, "delta_{k}={d}");
        }
    }

    #[test]
    fn delta_expansion_regime_bound() {
        // Two regimes: for k >= n_h, delta_k <= 1 + 3 L h when M - alpha <= L_U.
        let pr = p(1.0, 1.5, 1.0);
        let grid = TimeGrid::new(2.0, 400).unwrap();
        let nh = n_h(&grid, &pr).unwrap();
        assert!(nh < grid.n_steps(), "expansion regime must be nonempty");
        let l = uniform_l(&pr);
        let h = grid.h();
        let deltas = delta_sequence(&grid, &pr).unwrap();
        for (k, d) in deltas.iter().enumerate() {
            if k < nh {
                assert!(*d <= 1.0 + 1e-12, "delta_{k}={d}");
            } else {
                assert!(*d <= 1.0 + 3.0 * l * h + 1e-12, "delta_{k}={d}");
            }
        }
        // Chained product stays under e^{3 L eta(rho_h)}.
        let rho_h = 9.0 * l * l * h / 2.0;
        let cap = (3.0 * l * eta(&pr, rho_h, grid.t_horizon()).unwrap()).exp();
        let prod: f64 = deltas.iter().product();
        assert!(prod <= cap * (1.0 + 1e-9), "prod={prod} cap={cap}");
    }

    #[test]
    fn delta_requires_admissible_h() {
        let pr = p(1.0, 0.0, 1.0);
        // h_max = 2/81 ~ 0.0247; T/N = 0.05 violates it.
        let grid = TimeGrid::new(2.0, 40).unwrap();
        assert!(n_h(&grid, &pr).is_err());
        assert!(delta_k(0, &grid, &pr).is_err());
    }

    #[test]
    fn w2_bound_hand_value() {
        // alpha=1, M=0, L_U=1, d=2, m2=2, T=2, h=0.01, eps=0, w2_init=0:
        // sqrt(0.02) * (2 + 18 sqrt(2)) * 2.
        let pr = p(1.0, 0.0, 1.0);
        let got = w2_bound(&pr, 2.0, 0.01, 0.0, 2, 2.0, 0.0, BoundVariant::Standard).unwrap();
        let want = (0.02f64).sqrt() * (2.0 + 18.0 * 2.0f64.sqrt()) * 2.0;
        assert!((got - want).abs() < 1e-12, "got={got} want={want}");
        assert!((want - 7.765685424949239).abs() < 1e-12);
    }

    #[test]
    fn w2_bound_linear_in_eps() {
        let pr = p(1.0, 1.0, 1.0);
        let t = 3.0;
        let h = 0.005;
        let base = w2_bound(&pr, t, h, 0.0, 2, 4.0, 1.0, BoundVariant::Standard).unwrap();
        let plus = w2_bound(&pr, t, h, 0.2, 2, 4.0, 1.0, BoundVariant::Standard).unwrap();
        let l = uniform_l(&pr);
        let rho_h = 9.0 * l * l * h / 2.0;
        let prefactor = (3.0 * l * eta(&pr, rho_h, t).unwrap()).exp();
        let tc = t_contract(&pr, 0.0, t).unwrap();
        let want_gap = prefactor * 4.0 * 0.2 * tc;
        assert!(((plus - base) - want_gap).abs() < 1e-10 * plus.max(1.0));
    }

    #[test]
    fn w2_bound_limits() {
        let pr = p(1.0, 0.0, 1.0);
        // eps = 0: bound -> 0 as h -> 0 and T -> infinity (h shrinking fast
        // enough that sqrt(h) T still vanishes).
        let v = w2_bound(&pr, 50.0, 1e-16, 0.0, 2, 2.0, 5.0, BoundVariant::Standard).unwrap();
        assert!(v < 1e-4, "v={v}");
        // Initialization term strictly decreasing in T, discretization term
        // nondecreasing in T.
        let b1 = w2_bound(&pr, 2.0, 0.01, 0.0, 2, 2.0, 0.0, BoundVariant::Standard).unwrap();
        let b2 = w2_bound(&pr, 4.0, 0.01, 0.0, 2, 2.0, 0.0, BoundVariant::Standard).unwrap();
        assert!(b2 > b1);
        let i1 = w2_bound(&pr, 2.0, 0.01, 0.0, 2, 2.0, 1.0, BoundVariant::Standard).unwrap() - b1;
        let i2 = w2_bound(&pr, 4.0, 0.01, 0.0, 2, 2.0, 1.0, BoundVariant::Standard).unwrap() - b2;
        assert!(i2 < i1);
    }

    #[test]
    fn w2_bound_rejects_bad_config() {
        let pr = p(1.0, 0.0, 1.0);
        assert!(w2_bound(&pr, 2.0, 0.05, 0.0, 2, 2.0, 0.0, BoundVariant::Standard).is_err());
        assert!(w2_bound(&pr, 2.0, 0.01, -0.1, 2, 2.0, 0.0, BoundVariant::Standard).is_err());
        assert!(w2_bound(&pr, 2.0, 0.01, 0.0, 2, 2.0, -1.0, BoundVariant::Standard).is_err());
    }

    #[test]
    fn padded_bound_dominates() {
        let pr = p(1.0, 1.0, 1.0);
        let a = w2_bound(&pr, 2.0, 0.01, 0.1, 2, 4.0, 1.0, BoundVariant::Standard).unwrap();
        let b = w2_bound(&pr, 2.0, 0.01, 0.1, 2, 4.0, 1.0, BoundVariant::Padded).unwrap();
        assert!(b > a);
    }

    #[test]
    fn report_builds_and_prints() {
        let pr = p(1.0, 0.0, 1.0);
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let rep = ConstantsReport::build(pr, &grid, 0.0, 2, 2.0, 0.0).unwrap();
        assert_eq!(rep.n_h, 200);
        assert_eq!(rep.delta.len(), 200);
        assert!(rep.bound >= 0.0);
        assert!(rep.delta_max() <= 1.0 + 1e-12);
        assert!(rep.to_key_value_block().contains("h_max="));
        let (header, row) = rep.to_csv();
        assert_eq!(header.split(',').count(), row.split(',').count());
        // C_s + 1 -> 1 for large s.
        assert!((rep.c_of_s(40.0).unwrap() + 1.0 - 1.0).abs() < 1e-12);
    }
}
