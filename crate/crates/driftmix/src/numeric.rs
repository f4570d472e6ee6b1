//! Shared numerical routines: Gaussian CDF, adaptive quadrature, empirical
//! quantiles, and a Kolmogorov–Smirnov helper used by sampler checks.

use crate::error::{DriftError, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Log of the standard normal CDF, stable far into the lower tail.
///
/// `erfc` underflows near argument 27, so below x = -36 we switch to the
/// asymptotic expansion ln Φ(x) = -x²/2 - ln(-x√(2π)) + ln(1 - 1/x² + 3/x⁴ - ...).
pub fn norm_logcdf(x: f64) -> f64 {
    if x > -36.0 {
        let c = 0.5 * libm::erfc(-x / SQRT_2);
        if c > 0.0 {
            return c.ln();
        }
    }
    let x2 = x * x;
    let inv = 1.0 / x2;
    // five terms are ample below -36
    let series = 1.0 + inv * (-1.0 + inv * (3.0 + inv * (-15.0 + inv * 105.0)));
    -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + series.ln()
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Returns a numerical error if the recursion cannot reach the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(DriftError::Domain(format!(
            "invalid integration interval [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut evals: usize = 3;
    let v = adaptive(&f, a, b, fa, fm, fb, whole, tol, 60, &mut evals)?;
    Ok(v)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    if *evals > 2_000_000 {
        return Err(DriftError::Numerical(
            "quadrature exceeded evaluation budget".into(),
        ));
    }
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    // an interval at floating-point resolution cannot be split further; its
    // absolute contribution is negligible at this width
    if b - a < 1e-14 * (1.0 + a.abs() + b.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(DriftError::Numerical(format!(
            "quadrature failed to converge on [{a}, {b}] (residual {delta:.3e})"
        )));
    }
    let half = 0.5 * tol;
    Ok(
        adaptive(f, a, m, fa, flm, fm, left, half, depth - 1, evals)?
            + adaptive(f, m, b, fm, frm, fb, right, half, depth - 1, evals)?,
    )
}

/// Integrate a density-like function over `[0, hi]` by splitting the range
/// geometrically from `scale / 16` upward. Plain adaptive refinement can
/// converge to zero when a narrow bulk falls between its initial nodes; the
/// geometric cuts guarantee nodes at every scale.
pub fn integrate_density<F: Fn(f64) -> f64>(f: F, scale: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(scale > 0.0) || !(hi > 0.0) {
        return Err(DriftError::Domain(format!(
            "density integration needs positive scale and bound, got {scale} and {hi}"
        )));
    }
    let mut cuts = vec![0.0];
    let mut s = (scale / 16.0).min(hi);
    while s < hi {
        cuts.push(s);
        s *= 2.0;
    }
    cuts.push(hi);
    let per = tol / cuts.len() as f64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(&f, w[0], w[1], per)?;
    }
    Ok(total)
}

/// Empirical quantile with linear interpolation between order statistics
/// (the common "type 7" definition). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let p = p.clamp(0.0, 1.0);
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Kolmogorov–Smirnov distance between a sample and a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let c = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((c - lo).abs()).max((hi - c).abs());
    }
    d
}

/// Asymptotic two-sided KS p-value (Kolmogorov distribution). Small
/// arguments use the theta-transformed series, which converges where the
/// alternating series does not.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let mut cdf = 0.0;
        for j in 1..=20 {
            let m = (2 * j - 1) as f64;
            cdf += (-m * m * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = sign * (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        p += term;
        sign = -sign;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (2.0 * p).clamp(0.0, 1.0)
}
