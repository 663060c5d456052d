//! Test-only oracles: finite differences and adaptive quadrature.
//!
//! These implement the independent check side of the dual-route tests and
//! deliberately share no code with the closed-form implementations they
//! validate.

/// Central finite-difference gradient with a single scalar step.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + step;
        xm[j] = x[j] - step;
        out[j] = (f(&xp) - f(&xm)) / (2.0 * step);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    out
}

/// Adaptive Simpson quadrature on [a, b].
pub fn integrate_adaptive(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: impl Fn(f64) -> f64 + Copy,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, flm, left, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, frm, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    // Split into 64 panels first so narrow peaks are not missed.
    let panels = 64;
    let hw = (b - a) / panels as f64;
    let mut total = 0.0;
    let _ = whole;
    for i in 0..panels {
        let ai = a + i as f64 * hw;
        let bi = ai + hw;
        let fai = f(ai);
        let fbi = f(bi);
        let fmi = f(0.5 * (ai + bi));
        let w = simpson(ai, fai, bi, fbi, fmi);
        total += rec(f, ai, fai, bi, fbi, fmi, w, tol / panels as f64, 40);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_of_polynomial_is_exact() {
        let v = integrate_adaptive(|x| x * x, 0.0, 3.0, 1e-12);
        assert!((v - 9.0).abs() < 1e-10, "v={v}");
    }

    #[test]
    fn quadrature_of_gaussian() {
        let v = integrate_adaptive(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -40.0,
            40.0,
            1e-12,
        );
        assert!((v - 1.0).abs() < 1e-10, "v={v}");
    }

    #[test]
    fn fd_gradient_of_quadratic() {
        let g = fd_gradient(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, 1.0], 1e-6);
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }
}
